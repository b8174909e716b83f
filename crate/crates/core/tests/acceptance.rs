//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.
//!
//! Run with `cargo test --release -p emu-core --test acceptance -- --nocapture`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use emu_core::autodiff::{
    grad_check, logistic, ConcreteDropoutLayer, GateNoise, GradCheckOptions, Graph, ParamRole,
    ParamStore, RegularizerTerm, Var,
};
use emu_core::emulator::{
    dc_loss, dc_loss_on_graph, decode_checkpoint, encode_checkpoint, predictive_moments,
    Architecture, DcPrediction, Model, ModelConfig,
};
use emu_core::metrics::{calibration_curve, morans_i, RasterPair};
use emu_core::pipeline::{self, InferMode, Overrides, RunConfig};
use emu_core::synth::{build_tile, Raster, SceneConfig, TileDataset};
use emu_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_BUDGET_SECS: f64 = 60.0;
const SEEDS: u64 = 100;
const MOMENT_TOLERANCE: f64 = 1e-12;
const RMSE_BOUND: f64 = 0.05;
const CORRELATION_BOUND: f64 = 0.9;
const AUC_BOUND: f64 = 0.95;
const ACCURACY_BOUND: f64 = 0.9;
const RECOVERY_BUDGET_SECS: f64 = 20.0 * 60.0;
const MAX_EPOCHS: usize = 20;
const CALIBRATION_TOLERANCE: f64 = 0.02;
const CALIBRATION_PIXELS: usize = 100_000;
const RATIO_RANGE: (f64, f64) = (5.0, 15.0);
const BANDS: [&str; 6] = ["blue", "green", "red", "nir", "swir1", "swir2"];

struct Outcome {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn smoke_config(root: &Path, epochs: Option<usize>) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.ini");
    let mut cfg =
        RunConfig::load(&path, &Overrides::default()).expect("shipped smoke config parses");
    cfg.data.dir = root.join("data");
    cfg.output = root.join("run");
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    cfg
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-scale..scale)).collect(),
    )
    .unwrap()
}

fn readout(g: &mut Graph<'_>, y: Var) -> Var {
    let s = g.sigmoid(y);
    g.sum(s)
}

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let opts = GradCheckOptions {
        step: 1e-5,
        tolerance: GRAD_TOLERANCE,
        // Central differences of an O(10) objective carry ~1e-9 of rounding,
        // so gradients below this floor are compared absolutely.
        abs_floor: 1e-5,
        max_coords_per_param: None,
    };
    let (mut worst, mut worst_at) = (0.0, String::new());
    let mut record = |label: String, r: emu_core::autodiff::GradCheckReport| {
        if r.max_rel_error > worst {
            worst = r.max_rel_error;
            worst_at = format!("{label} {:?}", r.worst);
        }
    };
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, f_in, f_out) = (
            rng.random_range(1..5),
            rng.random_range(1..6),
            rng.random_range(1..5),
        );
        let (h, w, c_out) = (
            rng.random_range(1..5),
            rng.random_range(1..5),
            rng.random_range(1..4),
        );

        let mut s = ParamStore::new();
        let wt = s.add(
            "w",
            ParamRole::Weight,
            random(&mut rng, &[f_in, f_out], 1.0),
        );
        let b = s.add("b", ParamRole::Bias, random(&mut rng, &[f_out], 0.5));
        let x = random(&mut rng, &[rows, f_in], 1.5);
        record(
            format!("dense seed {seed}"),
            grad_check(
                &mut s,
                |g| {
                    let (xv, wv, bv) = (g.constant(x.clone()), g.param(wt), g.param(b));
                    let y = g.dense(xv, wv, bv)?;
                    let y = g.relu(y);
                    Ok(readout(g, y))
                },
                &opts,
            )
            .unwrap(),
        );

        let mut s = ParamStore::new();
        let k = s.add(
            "k",
            ParamRole::Weight,
            random(&mut rng, &[3, 3, f_in, c_out], 0.5),
        );
        let kb = s.add("kb", ParamRole::Bias, random(&mut rng, &[c_out], 0.5));
        let x = random(&mut rng, &[2, h, w, f_in], 1.0);
        record(
            format!("conv seed {seed}"),
            grad_check(
                &mut s,
                |g| {
                    let (xv, kv, bv) = (g.constant(x.clone()), g.param(k), g.param(kb));
                    let y = g.conv3x3(xv, kv, bv)?;
                    Ok(readout(g, y))
                },
                &opts,
            )
            .unwrap(),
        );

        let mut s = ParamStore::new();
        let xg = s.add(
            "x",
            ParamRole::Weight,
            random(&mut rng, &[rows, h, f_in], 1.0),
        );
        let l = s.add(
            "l",
            ParamRole::DropoutLogit,
            Tensor::scalar(rng.random_range(-2.0..1.0)),
        );
        let noise = Tensor::new(
            vec![rows, f_in],
            (0..rows * f_in)
                .map(|_| rng.random_range(0.02..0.98))
                .collect(),
        )
        .unwrap();
        record(
            format!("gate seed {seed}"),
            grad_check(
                &mut s,
                |g| {
                    let (xv, lv) = (g.param(xg), g.param(l));
                    let y = g.concrete_gate(xv, lv, &noise, 0.2)?;
                    Ok(readout(g, y))
                },
                &opts,
            )
            .unwrap(),
        );

        let mut s = ParamStore::new();
        let layer =
            ConcreteDropoutLayer::new(&mut s, "p", rng.random_range(0.05..0.9), 0.1, 0.2, 0.05);
        let rw = s.add(
            "rw",
            ParamRole::Weight,
            random(&mut rng, &[f_in, f_out], 1.0),
        );
        let terms = [RegularizerTerm::for_layer(&layer, rw, f_in)];
        record(
            format!("regularizer seed {seed}"),
            grad_check(&mut s, |g| Ok(g.regularizer(&terms)), &opts).unwrap(),
        );
    }
    for arch in Architecture::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cfg = ModelConfig {
            architecture: arch,
            hidden_layers: 2,
            hidden_units: 4,
            input_channels: 3,
            output_bands: 2,
            tau: 1.0,
            length_scale: 1e-2,
            dataset_size: 40,
            init_log_variance: -1.0,
            seed: 3,
            ..Default::default()
        };
        let mut model = Model::build(cfg.clone()).unwrap();
        let frozen = model.clone();
        let input = random(&mut rng, &[2, 3, 3, 3], 1.0);
        let targets = random(&mut rng, &[2, 3, 3, 2], 0.5);
        let labels = Tensor::new(
            vec![2, 3, 3],
            (0..18).map(|i| (i % 4 != 0) as u8 as f64).collect(),
        )
        .unwrap();
        let noise = frozen.sample_gate_noise(2, &mut rng);
        let terms = frozen.regularizer_terms();
        record(
            format!("{arch} loss"),
            grad_check(
                model.params_mut(),
                |g| {
                    let head = frozen
                        .forward(g, input.clone(), GateNoise::Fixed(&noise))
                        .unwrap();
                    let (loss, _) = dc_loss_on_graph(g, head, &cfg, &targets, &labels).unwrap();
                    let reg = g.regularizer(&terms);
                    g.add(loss, reg)
                },
                &opts,
            )
            .unwrap(),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= GRAD_TOLERANCE && secs < GRAD_BUDGET_SECS,
        format!("max relative error {worst:.2e} at {worst_at} (≤ {GRAD_TOLERANCE:e}), {secs:.1}s (< {GRAD_BUDGET_SECS}s)"),
    )
}

fn prediction(y: &[f64], var: &[f64]) -> DcPrediction {
    let n = y.len();
    DcPrediction {
        reflectance: Tensor::new(vec![n, 1], y.to_vec()).unwrap(),
        log_variance: Tensor::new(vec![n, 1], var.iter().map(|v| v.ln()).collect()).unwrap(),
        clear_logit: Tensor::zeros(&[n, 1]),
    }
}

fn criterion_moments() -> Outcome {
    let worked =
        predictive_moments(&[prediction(&[0.0], &[1.0]), prediction(&[2.0], &[1.0])]).unwrap();
    let worked_ok = worked.mean.data() == [1.0] && worked.variance.data() == [2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for t in [1usize, 2, 5, 10, 30] {
        let n = 7;
        let ys: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..n).map(|_| rng.random_range(-0.5..1.0)).collect())
            .collect();
        let vs: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..n).map(|_| rng.random_range(1e-4..0.5)).collect())
            .collect();
        let samples: Vec<_> = ys.iter().zip(&vs).map(|(y, v)| prediction(y, v)).collect();
        let d = predictive_moments(&samples).unwrap();
        for i in 0..n {
            let m = ys.iter().map(|y| y[i]).sum::<f64>() / t as f64;
            let v = ys
                .iter()
                .zip(&vs)
                .map(|(y, s)| (y[i] - m).powi(2) + s[i])
                .sum::<f64>()
                / t as f64;
            worst = worst
                .max((d.mean.data()[i] - m).abs())
                .max((d.variance.data()[i] - v).abs());
        }
    }
    verdict(
        worked_ok && worst <= MOMENT_TOLERANCE,
        format!(
            "{{0,2}} with σ²=1 gives ({}, {}); max deviation from brute force {worst:.1e}",
            worked.mean.data()[0],
            worked.variance.data()[0]
        ),
    )
}

fn criterion_loss() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 16;
    let pred = |rng: &mut ChaCha8Rng, s: Option<f64>, phi: &[f64]| DcPrediction {
        reflectance: Tensor::new(
            vec![n, 2],
            (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap(),
        log_variance: Tensor::new(
            vec![n, 2],
            (0..2 * n)
                .map(|_| s.unwrap_or_else(|| rng.random_range(-5.0..5.0)))
                .collect(),
        )
        .unwrap(),
        clear_logit: Tensor::new(vec![n, 1], phi.to_vec()).unwrap(),
    };
    let phi: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let targets = Tensor::new(vec![n, 2], (0..2 * n).map(|_| rng.random()).collect()).unwrap();

    let cloudy = dc_loss(&pred(&mut rng, None, &phi), &targets, &Tensor::zeros(&[n])).unwrap();
    let mut fit = pred(&mut rng, Some(0.0), &phi);
    fit.reflectance = targets.clone();
    let perfect = dc_loss(&fit, &targets, &Tensor::full(&[n], 1.0)).unwrap();
    let labels = Tensor::new(vec![n], (0..n).map(|i| (i % 3 != 0) as u8 as f64).collect()).unwrap();
    let bce: Vec<f64> = (0..4)
        .map(|_| {
            dc_loss(&pred(&mut rng, None, &phi), &targets, &labels)
                .unwrap()
                .classification
        })
        .collect();
    let oracle = phi
        .iter()
        .zip(labels.data())
        .map(|(&f, &y)| -(y * logistic(f).ln() + (1.0 - y) * (1.0 - logistic(f)).ln()))
        .sum::<f64>()
        / n as f64;
    let bce_ok = bce.iter().all(|&b| b == bce[0]) && (bce[0] - oracle).abs() < 1e-12;
    verdict(
        cloudy.regression == 0.0 && perfect.regression == 0.0 && bce_ok,
        format!(
            "all-cloudy regression {}, perfect-fit regression {}, BCE invariant to regression head: {bce_ok}",
            cloudy.regression, perfect.regression
        ),
    )
}

struct Trained {
    cfg: RunConfig,
    report: emu_core::metrics::EvalReport,
    pairs: Vec<(String, RasterPair)>,
    secs: f64,
    _dir: tempfile::TempDir,
}

fn train_smoke() -> Result<Trained, pipeline::Error> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), None);
    let start = Instant::now();
    pipeline::generate(&cfg, false)?;
    pipeline::train(&cfg)?;
    pipeline::infer(&cfg)?;
    let (_, report) = pipeline::evaluate(&cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let pairs = pipeline::load_pairs(&cfg)?;
    Ok(Trained {
        cfg,
        report,
        pairs,
        secs,
        _dir: dir,
    })
}

fn criterion_recovery(t: &Trained) -> Outcome {
    let r = &t.report;
    let rmse: Vec<Option<f64>> = BANDS
        .iter()
        .map(|b| r.metric(&format!("band.{b}.rmse")))
        .collect();
    let corr: Vec<Option<f64>> = BANDS[3..]
        .iter()
        .map(|b| r.metric(&format!("band.{b}.correlation")))
        .collect();
    let auc = r.metric("cloud.auc");
    let acc = r.metric("cloud.best_accuracy");
    let shape_ok = t.cfg.model.architecture == Architecture::Dcfc
        && t.cfg.data.train_seeds.len() == 8
        && t.cfg.data.scene.height == 100
        && t.cfg.data.scene.width == 100
        && t.cfg.train.epochs <= MAX_EPOCHS;
    let passed = shape_ok
        && rmse.iter().all(|v| v.is_some_and(|v| v < RMSE_BOUND))
        && corr
            .iter()
            .all(|v| v.is_some_and(|v| v > CORRELATION_BOUND))
        && auc.is_some_and(|a| a > AUC_BOUND)
        && acc.is_some_and(|a| a > ACCURACY_BOUND)
        && t.secs < RECOVERY_BUDGET_SECS;
    let fmt = |v: &[Option<f64>]| {
        v.iter()
            .map(|x| x.map_or("undefined".into(), |x| format!("{x:.4}")))
            .collect::<Vec<_>>()
            .join(" ")
    };
    verdict(
        passed,
        format!(
            "{} epochs in {:.0}s; RMSE [{}] (< {RMSE_BOUND}); r nir/swir [{}] (> {CORRELATION_BOUND}); \
             AUC {} (> {AUC_BOUND}); best accuracy {} (> {ACCURACY_BOUND})",
            t.cfg.train.epochs,
            t.secs,
            fmt(&rmse),
            fmt(&corr),
            fmt(&[auc]),
            fmt(&[acc])
        ),
    )
}

fn criterion_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = CALIBRATION_PIXELS;
    let mean: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.6)).collect();
    let variance: Vec<f64> = (0..n).map(|_| rng.random_range(1e-5..5e-3)).collect();
    let teacher = mean
        .iter()
        .zip(&variance)
        .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut pair = RasterPair {
        height: 1,
        width: n,
        teacher: vec![teacher],
        teacher_clear: vec![true; n],
        mean: vec![mean],
        variance: vec![variance],
        clear_probability: vec![1.0; n],
        class_map: None,
    };
    let levels: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let honest = calibration_curve(&pair, 0, &levels).unwrap();
    let gap = levels
        .iter()
        .zip(&honest.coverage)
        .map(|(q, c)| (c.unwrap() - q).abs())
        .fold(0.0, f64::max);
    pair.variance[0].iter_mut().for_each(|v| *v *= 0.5);
    let tight = calibration_curve(&pair, 0, &levels).unwrap();
    let interior = 1..levels.len() - 1;
    let below = interior
        .clone()
        .all(|k| tight.coverage[k].unwrap() < levels[k]);
    verdict(
        gap <= CALIBRATION_TOLERANCE && below,
        format!(
            "max |coverage − q| {gap:.4} (≤ {CALIBRATION_TOLERANCE}); halved variances below identity at all {} interior levels: {below}",
            interior.len()
        ),
    )
}

fn morans_brute(f: &[f64], mask: &[bool], h: usize, w: usize) -> Option<f64> {
    let n = mask.iter().filter(|&&m| m).count();
    if n < 9 {
        return None;
    }
    let mut total = 0.0;
    for i in 0..h * w {
        if mask[i] {
            total += f[i];
        }
    }
    let mean = total / n as f64;
    let (mut cross, mut wsum, mut sq) = (0.0, 0.0, 0.0);
    for i in 0..h * w {
        for j in 0..h * w {
            if mask[i] && mask[j] && (i / w).abs_diff(j / w) + (i % w).abs_diff(j % w) == 1 {
                cross += (f[i] - mean) * (f[j] - mean);
                wsum += 1.0;
            }
        }
    }
    for i in 0..h * w {
        if mask[i] {
            sq += (f[i] - mean) * (f[i] - mean);
        }
    }
    (wsum > 0.0 && sq > 0.0).then(|| (n as f64 / wsum) * (cross / sq))
}

fn criterion_morans(t: &Trained) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut grids = 0;
    let mut exact = true;
    for h in 1..=6 {
        for w in 1..=6 {
            for _ in 0..100 {
                let f: Vec<f64> = (0..h * w).map(|_| rng.random()).collect();
                let keep = rng.random_range(0.2..1.0);
                let mask: Vec<bool> = (0..h * w).map(|_| rng.random_bool(keep)).collect();
                exact &= morans_i(&f, &mask, h, w) == morans_brute(&f, &mask, h, w);
                grids += 1;
            }
        }
    }
    let board: Vec<f64> = (0..36).map(|i| ((i / 6 + i % 6) % 2) as f64).collect();
    let checker = morans_i(&board, &[true; 36], 6, 6);

    let mut higher = Vec::new();
    for (id, pair) in &t.pairs {
        let clear: Vec<bool> = pair
            .teacher_clear
            .iter()
            .zip(&pair.clear_probability)
            .map(|(&c, &p)| c && p > t.cfg.infer.threshold)
            .collect();
        for (b, name) in BANDS.iter().enumerate() {
            let it = morans_i(&pair.teacher[b], &clear, pair.height, pair.width);
            let ie = morans_i(&pair.mean[b], &clear, pair.height, pair.width);
            if let (Some(it), Some(ie)) = (it, ie) {
                if ie > it {
                    higher.push(format!("{id}/{name} {ie:.4} > {it:.4}"));
                }
            }
        }
    }
    verdict(
        exact && checker == Some(-1.0) && !higher.is_empty(),
        format!(
            "{grids} masked grids up to 6×6 exact: {exact}; checkerboard {checker:?}; emulator above teacher on {} tile-bands (e.g. {})",
            higher.len(),
            higher.first().map_or("none", String::as_str)
        ),
    )
}

fn criterion_throughput(t: &Trained) -> Outcome {
    let mut cfg = t.cfg.clone();
    cfg.bench.samples = 10;
    cfg.bench.trials = 5;
    let (_, b) = match pipeline::bench(&cfg) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let summary = fs::read_to_string(cfg.output.join("bench-summary.txt")).unwrap_or_default();
    let keys: Vec<&str> = summary
        .lines()
        .filter_map(|l| l.split(" = ").next())
        .collect();
    let format_ok =
        keys == [
            "bayes_examples_per_second",
            "reference_examples_per_second",
            "static_examples_per_second",
            "static_to_bayes_ratio",
        ] && fs::read_to_string(cfg.output.join("bench.csv"))
            .unwrap_or_default()
            .starts_with("mode,samples,trial,examples,seconds,examples_per_second\n");
    let ratio = b.ratio();
    verdict(
        (RATIO_RANGE.0..=RATIO_RANGE.1).contains(&ratio) && format_ok,
        format!(
            "static {:.1}/s, bayes(T=10) {:.1}/s, reference {:.1}/s, ratio {ratio:.2} (in [{}, {}]); format stable: {format_ok}",
            b.static_rate, b.bayes_rate, b.reference_rate, RATIO_RANGE.0, RATIO_RANGE.1
        ),
    )
}

fn short_pipeline(root: &Path) -> Result<Vec<(String, Vec<u8>)>, pipeline::Error> {
    let mut cfg = smoke_config(root, Some(1));
    cfg.infer.mode = InferMode::Static;
    pipeline::generate(&cfg, false)?;
    pipeline::train(&cfg)?;
    pipeline::infer(&cfg)?;
    pipeline::evaluate(&cfg)?;
    let mut out = Vec::new();
    for e in fs::read_dir(cfg.output.join(pipeline::REPORT_DIR))? {
        let p = e?.path();
        out.push((
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p)?,
        ));
    }
    out.sort();
    Ok(out)
}

fn criterion_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = match (short_pipeline(a.path()), short_pipeline(b.path())) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return verdict(false, e.to_string()),
    };
    let identical = !ra.is_empty() && ra == rb;

    let model = Model::build(ModelConfig {
        architecture: Architecture::Dcvdsr,
        hidden_units: 6,
        seed: 8,
        ..Default::default()
    })
    .unwrap();
    let bytes = encode_checkpoint(&model);
    let ckpt_ok = decode_checkpoint(&bytes)
        .map(|m| encode_checkpoint(&m) == bytes)
        .unwrap_or(false);
    let mut flipped = bytes.clone();
    flipped[bytes.len() / 3] ^= 1;
    let ckpt_crc = decode_checkpoint(&flipped).is_err();

    let tile: TileDataset = build_tile(
        9,
        &SceneConfig {
            height: 50,
            width: 50,
            ..Default::default()
        },
    )
    .unwrap();
    let enc = tile.raster.encode();
    let tile_ok = Raster::decode(&enc)
        .map(|r| r.encode() == enc)
        .unwrap_or(false);
    let mut bad = enc.clone();
    bad[enc.len() / 2] ^= 1;
    let tile_crc = Raster::decode(&bad).is_err();
    verdict(
        identical && ckpt_ok && ckpt_crc && tile_ok && tile_crc,
        format!(
            "{} report files byte-identical across runs: {identical}; checkpoint round-trip {ckpt_ok}, CRC rejects flip {ckpt_crc}; \
             tile round-trip {tile_ok}, CRC rejects flip {tile_crc}",
            ra.len()
        ),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "gradient suite", criterion_gradients()),
        (2, "moment estimator", criterion_moments()),
        (3, "loss degeneracies", criterion_loss()),
    ];
    let trained = train_smoke();
    match &trained {
        Ok(t) => results.push((4, "oracle recovery", criterion_recovery(t))),
        Err(e) => results.push((4, "oracle recovery", verdict(false, e.to_string()))),
    }
    results.push((5, "calibration", criterion_calibration()));
    match &trained {
        Ok(t) => {
            results.push((6, "Moran's I", criterion_morans(t)));
            results.push((7, "throughput", criterion_throughput(t)));
        }
        Err(e) => {
            results.push((6, "Moran's I", verdict(false, e.to_string())));
            results.push((7, "throughput", verdict(false, e.to_string())));
        }
    }
    results.push((8, "determinism and round-trips", criterion_determinism()));

    for (k, name, o) in &results {
        println!(
            "criterion {k} {:<28} {}  {}",
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let failed: Vec<usize> = results
        .iter()
        .filter(|r| !r.2.passed)
        .map(|r| r.0)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
