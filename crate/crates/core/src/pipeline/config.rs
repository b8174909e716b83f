//! Run configuration: `[section]` headers and `key = value` lines.
//!
//! `#` starts a comment. Unknown sections or keys are errors. Relative
//! paths are resolved against the directory holding the config file.
//!
//! ```text
//! seed = 7
//! output = runs/smoke
//!
//! [data]
//! dir = data
//! train_tiles = 8
//! test_tiles = 2
//!
//! [model]
//! architecture = dcfc
//! hidden_units = 64
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::Error;
use crate::autodiff::AdamConfig;
use crate::emulator::{Architecture, ModelConfig, DEFAULT_SAMPLES};
use crate::synth::{SceneConfig, INPUT_CHANNELS, PATCH_SIZE, TEACHER_CHANNELS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InferMode {
    Static,
    Bayes,
}

impl FromStr for InferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "static" => Ok(InferMode::Static),
            "bayes" => Ok(InferMode::Bayes),
            other => Err(Error::Config(format!(
                "unknown inference mode `{other}` (expected static or bayes)"
            ))),
        }
    }
}

impl InferMode {
    pub fn tag(self) -> &'static str {
        match self {
            InferMode::Static => "static",
            InferMode::Bayes => "bayes",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSection {
    pub dir: PathBuf,
    pub train_seeds: Vec<u64>,
    pub test_seeds: Vec<u64>,
    pub scene: SceneConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub patch_size: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferSection {
    pub mode: InferMode,
    pub samples: usize,
    pub threshold: f64,
    pub parallel: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluateSection {
    /// Number of evenly spaced thresholds in `[0, 1]`, endpoints included.
    pub sweep_levels: usize,
    pub calibration_levels: Vec<f64>,
    pub class_floor: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSection {
    pub warmup: usize,
    pub trials: usize,
    /// 50×50 examples timed per trial.
    pub examples: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub data: DataSection,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub infer: InferSection,
    pub evaluate: EvaluateSection,
    pub bench: BenchSection,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub architecture: Option<Architecture>,
    pub mode: Option<InferMode>,
    pub samples: Option<usize>,
}

type Entries = BTreeMap<(String, String), (String, usize)>;

fn parse_entries(text: &str) -> Result<Entries, Error> {
    let mut section = String::new();
    let mut out = Entries::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let at = |m: String| Error::Config(format!("line {}: {m}", i + 1));
        if let Some(rest) = line.strip_prefix('[') {
            section = rest
                .strip_suffix(']')
                .ok_or_else(|| at("unterminated section header".into()))?
                .trim()
                .to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected `key = value`, found `{line}`")))?;
        let key = (section.clone(), k.trim().to_string());
        if out
            .insert(key.clone(), (v.trim().to_string(), i + 1))
            .is_some()
        {
            return Err(at(format!("duplicate key `{}`", qualified(&key))));
        }
    }
    Ok(out)
}

fn qualified((s, k): &(String, String)) -> String {
    if s.is_empty() {
        k.clone()
    } else {
        format!("{s}.{k}")
    }
}

struct Reader {
    entries: Entries,
}

impl Reader {
    fn take<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>, Error> {
        let k = (section.to_string(), key.to_string());
        match self.entries.remove(&k) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!(
                    "line {line}: cannot parse `{v}` for `{}`",
                    qualified(&k)
                ))
            }),
        }
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn finish(self) -> Result<(), Error> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some((k, (_, line))) => Err(Error::Config(format!(
                "line {line}: unknown setting `{}`",
                qualified(k)
            ))),
        }
    }
}

/// `1,2,5` or `1-8` or a mix: `1-4,9`.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Config(format!("bad seed list `{s}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

fn parse_levels(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad level list `{s}`")))
        })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides)
    }

    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, Error> {
        let mut r = Reader {
            entries: parse_entries(text)?,
        };
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let seed = overrides.seed.or(r.take("", "seed")?).unwrap_or(0);
        let output = resolve(r.take("", "output")?.unwrap_or_else(|| "run".to_string()));

        let dir = resolve(r.take("data", "dir")?.unwrap_or_else(|| "data".to_string()));
        let train_tiles: usize = r.take("data", "train_tiles")?.unwrap_or(8);
        let test_tiles: usize = r.take("data", "test_tiles")?.unwrap_or(2);
        let base_seed = seed * 10_000;
        let train_seeds = match r.raw("data", "train_seeds") {
            Some((v, _)) => parse_seed_list(&v)?,
            None => (base_seed..base_seed + train_tiles as u64).collect(),
        };
        let test_seeds = match r.raw("data", "test_seeds") {
            Some((v, _)) => parse_seed_list(&v)?,
            None => (base_seed + train_tiles as u64..base_seed + (train_tiles + test_tiles) as u64)
                .collect(),
        };
        let d = SceneConfig::default();
        let scene = SceneConfig {
            height: r.take("data", "height")?.unwrap_or(d.height),
            width: r.take("data", "width")?.unwrap_or(d.width),
            cloud_coverage: r
                .take("data", "cloud_coverage")?
                .unwrap_or(d.cloud_coverage),
            teacher_noise: r.take("data", "teacher_noise")?.unwrap_or(d.teacher_noise),
        };

        let mut model = ModelConfig {
            input_channels: INPUT_CHANNELS.len(),
            output_bands: TEACHER_CHANNELS.len(),
            seed,
            ..Default::default()
        };
        for key in [
            "architecture",
            "hidden_layers",
            "hidden_units",
            "variance",
            "tau",
            "length_scale",
            "temperature",
            "init_dropout",
            "dropout_on_head",
            "init_log_variance",
        ] {
            if let Some((v, line)) = r.raw("model", key) {
                model
                    .set(key, &v)
                    .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
            }
        }
        if let Some(a) = overrides.architecture {
            model.architecture = a;
        }

        let da = AdamConfig::default();
        let train = TrainSection {
            epochs: r.take("train", "epochs")?.unwrap_or(20),
            batch_size: r.take("train", "batch_size")?.unwrap_or(16),
            adam: AdamConfig {
                learning_rate: r
                    .take("train", "learning_rate")?
                    .unwrap_or(da.learning_rate),
                beta1: r.take("train", "beta1")?.unwrap_or(da.beta1),
                beta2: r.take("train", "beta2")?.unwrap_or(da.beta2),
                epsilon: r.take("train", "epsilon")?.unwrap_or(da.epsilon),
            },
            patch_size: r.take("train", "patch_size")?.unwrap_or(PATCH_SIZE),
            stride: r.take("train", "stride")?.unwrap_or(PATCH_SIZE),
        };

        let mut infer = InferSection {
            mode: r.take("infer", "mode")?.unwrap_or(InferMode::Bayes),
            samples: r.take("infer", "samples")?.unwrap_or(DEFAULT_SAMPLES),
            threshold: r.take("infer", "threshold")?.unwrap_or(0.5),
            parallel: r.take("infer", "parallel")?.unwrap_or(false),
        };
        if let Some(m) = overrides.mode {
            infer.mode = m;
        }
        if let Some(t) = overrides.samples {
            infer.samples = t;
        }

        let evaluate = EvaluateSection {
            sweep_levels: r.take("evaluate", "sweep_levels")?.unwrap_or(101),
            calibration_levels: match r.raw("evaluate", "calibration_levels") {
                Some((v, _)) => parse_levels(&v)?,
                None => (0..=20).map(|k| k as f64 / 20.0).collect(),
            },
            class_floor: r.take("evaluate", "class_floor")?.unwrap_or(100),
        };

        let bench = BenchSection {
            warmup: r.take("bench", "warmup")?.unwrap_or(3),
            trials: r.take("bench", "trials")?.unwrap_or(5),
            examples: r.take("bench", "examples")?.unwrap_or(4),
            samples: r.take("bench", "samples")?.unwrap_or(DEFAULT_SAMPLES),
        };
        r.finish()?;

        let cfg = RunConfig {
            seed,
            output,
            data: DataSection {
                dir,
                train_seeds,
                test_seeds,
                scene,
            },
            model,
            train,
            infer,
            evaluate,
            bench,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        self.data
            .scene
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.model
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.data.train_seeds.is_empty() || self.data.test_seeds.is_empty() {
            return fail("both splits need at least one tile");
        }
        if self.infer.samples < 1 || self.bench.samples < 1 {
            return fail("the number of Monte-Carlo samples must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.infer.threshold) {
            return fail("infer.threshold must lie in [0, 1]");
        }
        if self.evaluate.sweep_levels < 2 {
            return fail("evaluate.sweep_levels must be at least 2");
        }
        if self.bench.warmup < 3 || self.bench.trials < 5 || self.bench.examples < 1 {
            return fail("bench needs warmup ≥ 3, trials ≥ 5 and examples ≥ 1");
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return fail("train.epochs and train.batch_size must be positive");
        }
        if self.train.patch_size > self.data.scene.height.min(self.data.scene.width) {
            return fail("train.patch_size exceeds the tile size");
        }
        Ok(())
    }

    pub fn sweep_levels(&self) -> Vec<f64> {
        let n = self.evaluate.sweep_levels - 1;
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    /// Every resolved setting as sorted `key = value` lines; the input to
    /// the run hash. Directory locations are left out so that a relocated
    /// run hashes the same.
    pub fn to_canonical_text(&self) -> String {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        let seeds = |s: &[u64]| s.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        put("seed", self.seed.to_string());
        put("data.train_seeds", seeds(&self.data.train_seeds));
        put("data.test_seeds", seeds(&self.data.test_seeds));
        put("data.height", self.data.scene.height.to_string());
        put("data.width", self.data.scene.width.to_string());
        put(
            "data.cloud_coverage",
            format!("{:?}", self.data.scene.cloud_coverage),
        );
        put(
            "data.teacher_noise",
            format!("{:?}", self.data.scene.teacher_noise),
        );
        for line in self.model.to_canonical_text().lines() {
            if let Some((k, v)) = line.split_once('=') {
                put(&format!("model.{}", k.trim()), v.trim().to_string());
            }
        }
        put("train.epochs", self.train.epochs.to_string());
        put("train.batch_size", self.train.batch_size.to_string());
        put(
            "train.learning_rate",
            format!("{:?}", self.train.adam.learning_rate),
        );
        put("train.beta1", format!("{:?}", self.train.adam.beta1));
        put("train.beta2", format!("{:?}", self.train.adam.beta2));
        put("train.epsilon", format!("{:?}", self.train.adam.epsilon));
        put("train.patch_size", self.train.patch_size.to_string());
        put("train.stride", self.train.stride.to_string());
        put("infer.mode", self.infer.mode.tag().to_string());
        put("infer.samples", self.infer.samples.to_string());
        put("infer.threshold", format!("{:?}", self.infer.threshold));
        put("infer.parallel", self.infer.parallel.to_string());
        put(
            "evaluate.sweep_levels",
            self.evaluate.sweep_levels.to_string(),
        );
        put(
            "evaluate.calibration_levels",
            self.evaluate
                .calibration_levels
                .iter()
                .map(|q| format!("{q:?}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "evaluate.class_floor",
            self.evaluate.class_floor.to_string(),
        );
        put("bench.warmup", self.bench.warmup.to_string());
        put("bench.trials", self.bench.trials.to_string());
        put("bench.examples", self.bench.examples.to_string());
        put("bench.samples", self.bench.samples.to_string());
        let mut s = String::new();
        for (k, v) in m {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, Error> {
        RunConfig::parse(text, Path::new("/base"), &Overrides::default())
    }

    #[test]
    fn defaults_and_derived_seeds() {
        let c = parse("seed = 2\n").unwrap();
        assert_eq!(c.data.train_seeds, (20_000..20_008).collect::<Vec<_>>());
        assert_eq!(c.data.test_seeds, vec![20_008, 20_009]);
        assert_eq!(c.output, PathBuf::from("/base/run"));
        assert_eq!(c.infer.samples, 10);
        assert_eq!(c.model.seed, 2);
        assert_eq!(c.model.input_channels, 8);
    }

    #[test]
    fn sections_comments_and_overrides() {
        let text = "seed = 1 # trailing\n[model]\narchitecture = dccnn\nhidden_units = 16\n[data]\ntrain_seeds = 1-3, 7\n\
                    test_seeds = 9\n[infer]\nmode = static\n";
        let o = Overrides {
            seed: Some(5),
            architecture: Some(Architecture::Dcvdsr),
            samples: Some(3),
            ..Default::default()
        };
        let c = RunConfig::parse(text, Path::new("."), &o).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.model.architecture, Architecture::Dcvdsr);
        assert_eq!(c.model.hidden_units, 16);
        assert_eq!(c.data.train_seeds, vec![1, 2, 3, 7]);
        assert_eq!(c.infer.mode, InferMode::Static);
        assert_eq!(c.infer.samples, 3);
    }

    #[test]
    fn errors_name_the_line() {
        for (text, needle) in [
            ("[model]\nwidth = 3\n", "line 2"),
            ("seed = x\n", "line 1"),
            ("[infer]\nthreshold = 1.5\n", "threshold"),
            ("[model]\narchitecture = resnet\n", "line 2"),
            ("[bench]\ntrials = 2\n", "trials"),
            ("seed = 1\nseed = 2\n", "duplicate"),
            ("[infer]\nsamples = 0\n", "samples"),
        ] {
            let e = parse(text).unwrap_err().to_string();
            assert!(e.contains(needle), "{text:?} -> {e}");
        }
    }

    #[test]
    fn canonical_text_is_stable() {
        let a = parse("seed = 3\n").unwrap();
        let b = parse("# same thing\nseed=3\n").unwrap();
        assert_eq!(a.to_canonical_text(), b.to_canonical_text());
        assert_ne!(
            a.to_canonical_text(),
            parse("seed = 4\n").unwrap().to_canonical_text()
        );
    }
}
