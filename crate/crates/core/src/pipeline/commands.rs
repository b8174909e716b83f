use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use super::{Error, InferMode, RunConfig};
use crate::emulator::{
    self, classify_cloud, load_checkpoint, mc_predict, save_checkpoint, static_predict, McOptions,
    Model, Sample, TrainConfig,
};
use crate::io::{file_sha256, write_atomic};
use crate::metrics::{
    self, aggregate_report, edge_pixels, EvalOptions, EvalReport, Metric, RasterPair, Value,
};
use crate::synth::{
    self, build_dataset, extract_patches, fit_stats, load_dataset, tile_sample, Dataset, NormStats,
    Raster, TileDataset, INPUT_CHANNELS, MANIFEST_FILE, PATCH_SIZE,
};
use crate::tensor::Tensor;

pub const CHECKPOINT_FILE: &str = "model.dcem";
pub const NORMALIZATION_FILE: &str = "normalization.txt";
pub const TRAIN_LOG_FILE: &str = "train-log.csv";
pub const PREDICTION_DIR: &str = "predictions";
pub const REPORT_DIR: &str = "reports";

const BAND_NAMES: [&str; 6] = ["blue", "green", "red", "nir", "swir1", "swir2"];

/// What a command produced, for the caller to print.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
    pub manifest: PathBuf,
}

/// Deterministic record of a run: config hash, seed and the SHA-256 of
/// every artifact, paths relative to `root`.
pub fn run_manifest_text(
    command: &str,
    cfg: &RunConfig,
    root: &Path,
    artifacts: &[PathBuf],
) -> Result<String, Error> {
    let hash = Sha256::digest(cfg.to_canonical_text().as_bytes());
    let mut s = format!(
        "command = {command}\nconfig_sha256 = {}\nseed = {}\nversion = {}\n",
        hash.iter().map(|b| format!("{b:02x}")).collect::<String>(),
        cfg.seed,
        env!("CARGO_PKG_VERSION")
    );
    let mut rows = Vec::new();
    for a in artifacts {
        let rel = a.strip_prefix(root).unwrap_or(a).display().to_string();
        let bytes = fs::metadata(a)?.len();
        rows.push(format!(
            "artifact {rel} sha256={} bytes={bytes}",
            file_sha256(a)?
        ));
    }
    rows.sort();
    for r in rows {
        writeln!(s, "{r}").unwrap();
    }
    Ok(s)
}

fn finish(
    command: &str,
    cfg: &RunConfig,
    root: &Path,
    artifacts: &[PathBuf],
    outcome: &mut Outcome,
) -> Result<(), Error> {
    let path = root.join(format!("run-{command}.txt"));
    write_atomic(
        &path,
        run_manifest_text(command, cfg, root, artifacts)?.as_bytes(),
    )?;
    outcome.manifest = path;
    Ok(())
}

/// Builds the synthetic dataset under `data.dir`. An existing manifest is
/// only replaced with `force`.
pub fn generate(cfg: &RunConfig, force: bool) -> Result<Outcome, Error> {
    let dir = &cfg.data.dir;
    let occupied = dir.exists() && fs::read_dir(dir)?.next().is_some();
    if occupied && !force {
        return Err(Error::Config(format!(
            "{} already exists and is not empty; pass --force to overwrite",
            dir.display()
        )));
    }
    if occupied {
        let tiles = dir.join(synth::dataset::TILE_DIR);
        if tiles.is_dir() {
            fs::remove_dir_all(&tiles)?;
        }
    }
    let start = Instant::now();
    let ds = build_dataset(
        &cfg.data.train_seeds,
        &cfg.data.test_seeds,
        &cfg.data.scene,
        dir,
    )?;
    let mut artifacts = vec![dir.join(MANIFEST_FILE)];
    artifacts.extend(ds.manifest.entries.iter().map(|e| dir.join(&e.path)));
    let mut out = Outcome {
        summary: vec![format!(
            "generated {} train and {} test tiles of {}×{} in {:.2}s",
            ds.train.len(),
            ds.test.len(),
            cfg.data.scene.height,
            cfg.data.scene.width,
            start.elapsed().as_secs_f64()
        )],
        ..Default::default()
    };
    finish("generate", cfg, dir, &artifacts, &mut out)?;
    Ok(out)
}

fn open_dataset(cfg: &RunConfig) -> Result<Dataset, Error> {
    let path = cfg.data.dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::Data(format!(
            "no dataset manifest at {}; run `emu generate` first",
            path.display()
        )));
    }
    Ok(load_dataset(&path)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub outcome: Outcome,
    /// Validation conditional RMSE per epoch and band.
    pub validation_rmse: Vec<Vec<Metric>>,
}

/// Fits normalisation on the training split, trains on its patches and
/// checkpoints after every epoch. The first test tile serves as the
/// validation tile.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome, Error> {
    let ds = open_dataset(cfg)?;
    let out_dir = &cfg.output;
    fs::create_dir_all(out_dir)?;
    let stats = fit_stats(&ds.train)?;
    let mut warnings: Vec<String> = stats
        .floored
        .iter()
        .map(|c| format!("channel `{c}` has near-zero spread; its scale was floored"))
        .collect();
    stats.save(&out_dir.join(NORMALIZATION_FILE))?;

    let mut patches = Vec::new();
    for t in &ds.train {
        patches.extend(extract_patches(
            t,
            &stats,
            cfg.train.patch_size,
            cfg.train.stride,
        )?);
    }
    let pixels: usize = patches.iter().map(|p| p.label.len()).sum();
    let mut model = Model::build(cfg.model.clone())?;
    model.set_dataset_size(pixels as u64)?;
    let validation = ds
        .test
        .first()
        .ok_or_else(|| Error::Data("dataset has no test tile for validation".into()))?;
    let val_sample = tile_sample(validation, &stats)?;

    let checkpoint = out_dir.join(CHECKPOINT_FILE);
    let log_path = out_dir.join(TRAIN_LOG_FILE);
    let mut log = format!(
        "epoch,steps,classification,regression,regularizer,{},dropout_rates\n",
        BAND_NAMES.map(|b| format!("val_rmse_{b}")).join(",")
    );
    let mut history: Vec<Vec<Metric>> = Vec::new();
    let tc = TrainConfig {
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        adam: cfg.train.adam,
        seed: cfg.seed,
    };
    let threshold = cfg.infer.threshold;
    emulator::train(&mut model, &patches, &tc, |e, m| {
        let rmse = validation_rmse(m, &val_sample, threshold)?;
        writeln!(
            log,
            "{},{},{:?},{:?},{:?},{},{}",
            e.epoch + 1,
            e.steps,
            e.classification,
            e.regression,
            e.regularizer,
            rmse.iter()
                .map(|r| metrics::format_metric(*r))
                .collect::<Vec<_>>()
                .join(","),
            e.dropout_rates
                .iter()
                .map(|p| format!("{p:?}"))
                .collect::<Vec<_>>()
                .join(";")
        )
        .unwrap();
        save_checkpoint(m, &checkpoint)?;
        write_atomic(&log_path, log.as_bytes())?;
        history.push(rmse);
        Ok(())
    })?;

    let last = history.last().cloned().unwrap_or_default();
    let mean_rmse: Vec<f64> = last.iter().flatten().copied().collect();
    if mean_rmse.len() < last.len() {
        warnings.push("validation RMSE undefined for some bands (no clear pixels)".into());
    }
    let mut out = Outcome {
        summary: vec![
            format!(
                "trained {} for {} epochs on {} patches ({} parameters)",
                model.config().architecture.tag(),
                cfg.train.epochs,
                patches.len(),
                model.parameter_count()
            ),
            format!(
                "validation conditional RMSE: {}",
                BAND_NAMES
                    .iter()
                    .zip(&last)
                    .map(|(b, r)| format!("{b}={}", metrics::format_metric(*r)))
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        ],
        warnings,
        ..Default::default()
    };
    finish(
        "train",
        cfg,
        out_dir,
        &[checkpoint, out_dir.join(NORMALIZATION_FILE), log_path],
        &mut out,
    )?;
    Ok(TrainOutcome {
        outcome: out,
        validation_rmse: history,
    })
}

fn validation_rmse(
    model: &Model,
    sample: &Sample,
    threshold: f64,
) -> Result<Vec<Metric>, emulator::Error> {
    let (h, w) = (sample.input.shape()[0], sample.input.shape()[1]);
    let input = sample
        .input
        .clone()
        .reshape(&[1, h, w, sample.input.shape()[2]])?;
    let pred = static_predict(model, &input)?;
    let bands = pred.bands();
    let clear = classify_cloud(pred.clear_probability().data(), threshold);
    let pair = RasterPair {
        height: h,
        width: w,
        teacher: split_bands(sample.target.data(), bands),
        teacher_clear: sample.label.data().iter().map(|&l| l == 1.0).collect(),
        mean: split_bands(pred.reflectance.data(), bands),
        variance: split_bands(&pred.variance().into_data(), bands),
        clear_probability: pred.clear_probability().into_data(),
        class_map: None,
    };
    Ok((0..bands)
        .map(|b| metrics::conditional_rmse(&pair, b, &clear))
        .collect())
}

fn split_bands(interleaved: &[f64], bands: usize) -> Vec<Vec<f64>> {
    (0..bands)
        .map(|b| interleaved.iter().skip(b).step_by(bands).copied().collect())
        .collect()
}

fn open_model(cfg: &RunConfig) -> Result<(Model, NormStats), Error> {
    let ckpt = cfg.output.join(CHECKPOINT_FILE);
    let norm = cfg.output.join(NORMALIZATION_FILE);
    for p in [&ckpt, &norm] {
        if !p.is_file() {
            return Err(Error::Data(format!(
                "missing {}; run `emu train` first",
                p.display()
            )));
        }
    }
    let model = load_checkpoint(&ckpt)?;
    let stats = NormStats::load(&norm)?;
    if model.config().input_channels != stats.channels() || stats.channels() != INPUT_CHANNELS.len()
    {
        return Err(Error::Data(format!(
            "checkpoint expects {} input channels, normalisation has {}, tiles have {}",
            model.config().input_channels,
            stats.channels(),
            INPUT_CHANNELS.len()
        )));
    }
    Ok((model, stats))
}

/// Padding margin of the trained model, when a checkpoint is present.
/// Predictions written by other means carry no such note.
fn edge_margin(cfg: &RunConfig) -> Result<Option<usize>, Error> {
    let ckpt = cfg.output.join(CHECKPOINT_FILE);
    if !ckpt.is_file() {
        return Ok(None);
    }
    Ok(Some(load_checkpoint(&ckpt)?.config().edge_margin()))
}

/// Packs predictive mean, variance and clear probability (pixel-major
/// tensors) into a raster.
pub fn prediction_raster(
    h: usize,
    w: usize,
    mean: &Tensor,
    variance: &Tensor,
    clear: &Tensor,
) -> Result<Raster, Error> {
    let bands = mean.last_dim();
    let mut r = Raster::new(h, w);
    let means = split_bands(mean.data(), bands);
    let vars = split_bands(variance.data(), bands);
    for b in 0..bands {
        r.push_f64(&format!("mean_{}", BAND_NAMES[b]), &means[b])?;
    }
    for b in 0..bands {
        r.push_f64(&format!("variance_{}", BAND_NAMES[b]), &vars[b])?;
    }
    r.push_f64("clear_probability", clear.data())?;
    Ok(r)
}

fn predict_tile(
    model: &Model,
    tile: &TileDataset,
    stats: &NormStats,
    cfg: &RunConfig,
) -> Result<Raster, Error> {
    let sample = tile_sample(tile, stats)?;
    let (h, w) = (tile.height(), tile.width());
    let input = sample.input.reshape(&[1, h, w, INPUT_CHANNELS.len()])?;
    match cfg.infer.mode {
        InferMode::Static => {
            let p = static_predict(model, &input)?;
            prediction_raster(h, w, &p.reflectance, &p.variance(), &p.clear_probability())
        }
        InferMode::Bayes => {
            let opts = McOptions {
                samples: cfg.infer.samples,
                seed: cfg
                    .seed
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .wrapping_add(tile.acquisition),
                parallel: cfg.infer.parallel,
            };
            let d = mc_predict(model, &input, opts)?;
            prediction_raster(h, w, &d.mean, &d.variance, &d.clear_probability)
        }
    }
}

/// Predicts every test tile and writes one raster per tile.
pub fn infer(cfg: &RunConfig) -> Result<Outcome, Error> {
    let (model, stats) = open_model(cfg)?;
    let ds = open_dataset(cfg)?;
    let dir = cfg.output.join(PREDICTION_DIR);
    let mut artifacts = Vec::new();
    for tile in &ds.test {
        let raster = predict_tile(&model, tile, &stats, cfg)?;
        let path = dir.join(format!("{}.gtil", tile.id));
        raster.write(&path)?;
        artifacts.push(path);
    }
    let margin = model.config().edge_margin();
    let mut warnings = Vec::new();
    if margin > 0 {
        warnings.push(format!(
            "{} predictions within {margin} pixels of a tile edge depend on zero padding; \
             reports list them as edge.pixels",
            model.config().architecture
        ));
    }
    let mut out = Outcome {
        warnings,
        summary: vec![format!(
            "{} inference ({} pass{}) on {} test tiles",
            cfg.infer.mode.tag(),
            if cfg.infer.mode == InferMode::Static {
                1
            } else {
                cfg.infer.samples
            },
            if cfg.infer.mode == InferMode::Static || cfg.infer.samples == 1 {
                ""
            } else {
                "es"
            },
            ds.test.len()
        )],
        ..Default::default()
    };
    finish("infer", cfg, &cfg.output, &artifacts, &mut out)?;
    Ok(out)
}

/// Pairs each test tile with its prediction raster.
pub fn load_pairs(cfg: &RunConfig) -> Result<Vec<(String, RasterPair)>, Error> {
    let ds = open_dataset(cfg)?;
    let dir = cfg.output.join(PREDICTION_DIR);
    let mut pairs = Vec::new();
    for tile in &ds.test {
        let path = dir.join(format!("{}.gtil", tile.id));
        if !path.is_file() {
            return Err(Error::Data(format!(
                "missing prediction {}; run `emu infer` first",
                path.display()
            )));
        }
        let pred = Raster::read(&path)?;
        if pred.height() != tile.height() || pred.width() != tile.width() {
            return Err(Error::Data(format!(
                "prediction {} is {}×{}, tile is {}×{}",
                tile.id,
                pred.height(),
                pred.width(),
                tile.height(),
                tile.width()
            )));
        }
        let get = |prefix: &str| -> Result<Vec<Vec<f64>>, Error> {
            BAND_NAMES
                .iter()
                .map(|b| Ok(pred.channel_f64(&format!("{prefix}_{b}"))?))
                .collect()
        };
        pairs.push((
            tile.id.clone(),
            RasterPair {
                height: tile.height(),
                width: tile.width(),
                teacher: tile.teacher_sr()?,
                teacher_clear: tile.clear_mask()?,
                mean: get("mean")?,
                variance: get("variance")?,
                clear_probability: pred.channel_f64("clear_probability")?,
                class_map: Some(tile.class_map()?),
            },
        ));
    }
    Ok(pairs)
}

fn eval_options(cfg: &RunConfig) -> EvalOptions {
    EvalOptions {
        band_names: BAND_NAMES.map(String::from).to_vec(),
        threshold: cfg.infer.threshold,
        sweep_levels: cfg.sweep_levels(),
        calibration_levels: cfg.evaluate.calibration_levels.clone(),
        class_floor: cfg.evaluate.class_floor,
    }
}

/// Scores every prediction against its teacher tile and writes one report
/// per tile plus the aggregate over all of them.
pub fn evaluate(cfg: &RunConfig) -> Result<(Outcome, EvalReport), Error> {
    let pairs = load_pairs(cfg)?;
    let opts = eval_options(cfg);
    let dir = cfg.output.join(REPORT_DIR);
    let mut artifacts = Vec::new();
    let mut write = |name: &str, text: String| -> Result<(), Error> {
        let path = dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        artifacts.push(path);
        Ok(())
    };
    let margin = edge_margin(cfg)?;
    let note = |r: &mut EvalReport, pixels: usize| {
        if let Some(m) = margin {
            r.entries.insert("edge.margin".into(), Value::Count(m));
            r.entries.insert("edge.pixels".into(), Value::Count(pixels));
        }
    };
    let mut edge_total = 0;
    for (id, pair) in &pairs {
        let mut r = metrics::evaluate(pair, &opts)?;
        let n = edge_pixels(pair.height, pair.width, margin.unwrap_or(0));
        edge_total += n;
        note(&mut r, n);
        write(&format!("{id}.txt"), r.to_text())?;
    }
    let only: Vec<RasterPair> = pairs.into_iter().map(|(_, p)| p).collect();
    let mut agg = aggregate_report(&only, &opts)?;
    note(&mut agg, edge_total);
    write("aggregate.txt", agg.to_text())?;
    write("aggregate-sweep.csv", agg.sweep_csv())?;
    write("aggregate-calibration.csv", agg.calibration_csv())?;
    let fmt = |k: &str| metrics::format_metric(agg.metric(k));
    let mut out = Outcome {
        summary: vec![
            format!(
                "aggregate over {} tiles: accuracy {} auc {} best threshold {}",
                only.len(),
                fmt("cloud.accuracy"),
                fmt("cloud.auc"),
                fmt("cloud.best_threshold")
            ),
            format!(
                "conditional RMSE: {}",
                BAND_NAMES
                    .iter()
                    .map(|b| format!("{b}={}", fmt(&format!("band.{b}.rmse"))))
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        ],
        ..Default::default()
    };
    finish("evaluate", cfg, &cfg.output, &artifacts, &mut out)?;
    Ok((out, agg))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub mode: String,
    pub samples: usize,
    pub trial: usize,
    pub examples: usize,
    pub seconds: f64,
}

impl BenchRow {
    pub fn rate(&self) -> f64 {
        self.examples as f64 / self.seconds
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    /// Median examples per second of `static`, `bayes` and `reference`.
    pub static_rate: f64,
    pub bayes_rate: f64,
    pub reference_rate: f64,
}

impl BenchResult {
    pub fn ratio(&self) -> f64 {
        self.static_rate / self.bayes_rate
    }

    pub const CSV_HEADER: &'static str = "mode,samples,trial,examples,seconds,examples_per_second";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{:.6},{:.3}",
                r.mode,
                r.samples,
                r.trial,
                r.examples,
                r.seconds,
                r.rate()
            )
            .unwrap();
        }
        s
    }

    pub fn summary_text(&self) -> String {
        format!(
            "bayes_examples_per_second = {:.3}\nreference_examples_per_second = {:.3}\n\
             static_examples_per_second = {:.3}\nstatic_to_bayes_ratio = {:.3}\n",
            self.bayes_rate,
            self.reference_rate,
            self.static_rate,
            self.ratio()
        )
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times static, Monte-Carlo and teacher processing of 50×50 examples cut
/// from the test tiles. Each trial processes every example once, serially.
pub fn bench(cfg: &RunConfig) -> Result<(Outcome, BenchResult), Error> {
    let (model, stats) = open_model(cfg)?;
    let ds = open_dataset(cfg)?;
    let identity = NormStats::new(
        stats.names.clone(),
        vec![0.0; stats.channels()],
        vec![1.0; stats.channels()],
    );
    let mut normed = Vec::new();
    let mut raw = Vec::new();
    for t in &ds.test {
        normed.extend(extract_patches(t, &stats, PATCH_SIZE, PATCH_SIZE)?);
        raw.extend(extract_patches(t, &identity, PATCH_SIZE, PATCH_SIZE)?);
    }
    if normed.is_empty() {
        return Err(Error::Data("no test patches to benchmark".into()));
    }
    let pick = |v: &[Sample]| -> Vec<Tensor> {
        (0..cfg.bench.examples)
            .map(|k| {
                let s = &v[k % v.len()];
                s.input
                    .clone()
                    .reshape(&[1, PATCH_SIZE, PATCH_SIZE, INPUT_CHANNELS.len()])
                    .unwrap()
            })
            .collect()
    };
    let (normed, raw) = (pick(&normed), pick(&raw));
    let samples = cfg.bench.samples;

    let mut rows = Vec::new();
    let mut time =
        |mode: &str, t: usize, run: &mut dyn FnMut() -> Result<(), Error>| -> Result<f64, Error> {
            for _ in 0..cfg.bench.warmup {
                run()?;
            }
            let mut rates = Vec::new();
            for trial in 0..cfg.bench.trials {
                let start = Instant::now();
                run()?;
                let row = BenchRow {
                    mode: mode.to_string(),
                    samples: t,
                    trial,
                    examples: cfg.bench.examples,
                    seconds: start.elapsed().as_secs_f64().max(1e-9),
                };
                rates.push(row.rate());
                rows.push(row);
            }
            Ok(median(rates))
        };
    let static_rate = time("static", 1, &mut || {
        for x in &normed {
            std::hint::black_box(static_predict(&model, x)?);
        }
        Ok(())
    })?;
    let bayes_rate = time("bayes", samples, &mut || {
        for (k, x) in normed.iter().enumerate() {
            let opts = McOptions {
                samples,
                seed: k as u64,
                parallel: false,
            };
            std::hint::black_box(mc_predict(&model, x, opts)?);
        }
        Ok(())
    })?;
    let (mut sr, mut clear) = (Vec::new(), Vec::new());
    let reference_rate = time("reference", 1, &mut || {
        for x in &raw {
            synth::teacher::retrieve(x.data(), &mut sr, &mut clear);
            std::hint::black_box(&sr);
        }
        Ok(())
    })?;
    let result = BenchResult {
        rows,
        static_rate,
        bayes_rate,
        reference_rate,
    };
    let csv = cfg.output.join("bench.csv");
    let summary = cfg.output.join("bench-summary.txt");
    write_atomic(&csv, result.to_csv().as_bytes())?;
    write_atomic(&summary, result.summary_text().as_bytes())?;
    let mut out = Outcome {
        summary: result.summary_text().lines().map(String::from).collect(),
        ..Default::default()
    };
    finish("bench", cfg, &cfg.output, &[csv, summary], &mut out)?;
    Ok((out, result))
}
