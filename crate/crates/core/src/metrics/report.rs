use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{
    calibration_curve, confusion, correlation, format_metric, mean_and_cv, morans_i,
    threshold_sweep, Calibration, Error, Metric, RasterPair, SquaredError, ThresholdSweep,
};
use crate::emulator::classify_cloud;

/// Classes with fewer evaluated pixels than this are flagged.
pub const DEFAULT_CLASS_FLOOR: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub band_names: Vec<String>,
    /// Decision threshold on the clear-sky probability.
    pub threshold: f64,
    pub sweep_levels: Vec<f64>,
    pub calibration_levels: Vec<f64>,
    pub class_floor: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            band_names: ["blue", "green", "red", "nir", "swir1", "swir2"]
                .map(String::from)
                .to_vec(),
            threshold: 0.5,
            sweep_levels: (0..=100).map(|k| k as f64 / 100.0).collect(),
            calibration_levels: (0..=20).map(|k| k as f64 / 20.0).collect(),
            class_floor: DEFAULT_CLASS_FLOOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Metric(Metric),
    Count(usize),
    Flag(bool),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Metric(m) => format_metric(*m),
            Value::Count(n) => n.to_string(),
            Value::Flag(b) => b.to_string(),
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            Value::Metric(m) => *m,
            Value::Count(n) => Some(*n as f64),
            Value::Flag(_) => None,
        }
    }
}

/// Flat, key-sorted evaluation results plus the curves behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub entries: BTreeMap<String, Value>,
    pub sweep: ThresholdSweep,
    pub calibration: Vec<(String, Calibration)>,
}

impl EvalReport {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    /// Shorthand for a numeric entry; `None` if missing or undefined.
    pub fn metric(&self, key: &str) -> Metric {
        self.get(key).and_then(Value::metric)
    }

    /// One `key = value` line per entry, sorted by key.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k} = {}", v.render()).unwrap();
        }
        s
    }

    pub fn sweep_csv(&self) -> String {
        let mut s = String::from("threshold,accuracy,true_positive_rate,false_positive_rate\n");
        for p in &self.sweep.points {
            writeln!(
                s,
                "{:?},{},{},{}",
                p.threshold,
                format_metric(p.accuracy),
                format_metric(p.true_positive_rate),
                format_metric(p.false_positive_rate)
            )
            .unwrap();
        }
        s
    }

    pub fn calibration_csv(&self) -> String {
        let mut s = String::from("band,level,coverage\n");
        for (band, c) in &self.calibration {
            for (q, f) in c.levels.iter().zip(&c.coverage) {
                writeln!(s, "{band},{q:?},{}", format_metric(*f)).unwrap();
            }
        }
        s
    }
}

/// Per-class slice of the regression and cloud scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassRow {
    pub class: u8,
    pub pixels: usize,
    /// Pixels clear in both masks, the base of the RMSEs.
    pub evaluated: usize,
    pub squared_error: Vec<SquaredError>,
    pub accuracy: Metric,
    pub flagged: bool,
}

impl ClassRow {
    pub fn rmse(&self, band: usize) -> Metric {
        self.squared_error[band].rmse()
    }
}

/// Splits conditional RMSE and cloud accuracy by class. Rows are sorted by
/// class; a row is flagged when its evaluated pixel count is below
/// `floor`.
pub fn stratified_report(
    pair: &RasterPair,
    predicted_clear: &[bool],
    class_map: &[u8],
    floor: usize,
) -> Vec<ClassRow> {
    let classes: std::collections::BTreeSet<u8> = class_map.iter().copied().collect();
    classes
        .into_iter()
        .map(|k| {
            let keep: Vec<bool> = class_map.iter().map(|&c| c == k).collect();
            let sub = pair.select(&keep);
            let pred: Vec<bool> = predicted_clear
                .iter()
                .zip(&keep)
                .filter(|(_, &m)| m)
                .map(|(&p, _)| p)
                .collect();
            let squared_error: Vec<SquaredError> = (0..pair.bands())
                .map(|b| SquaredError::over(&sub, b, &pred))
                .collect();
            let evaluated = squared_error.first().map_or(0, |s| s.count);
            ClassRow {
                class: k,
                pixels: sub.pixels(),
                evaluated,
                accuracy: confusion(&pred, &sub.teacher_clear).accuracy(),
                squared_error,
                flagged: evaluated < floor,
            }
        })
        .collect()
}

/// Full report for one raster pair.
pub fn evaluate(pair: &RasterPair, opts: &EvalOptions) -> Result<EvalReport, Error> {
    pair.validate()?;
    let mut report = scores(pair, opts)?;
    let predicted = classify_cloud(&pair.clear_probability, opts.threshold);
    let mask = evaluation_mask(pair, &predicted);
    for b in 0..pair.bands() {
        let name = &opts.band_names[b];
        let (h, w) = (pair.height, pair.width);
        report.entries.insert(
            format!("band.{name}.morans_i_teacher"),
            Value::Metric(morans_i(&pair.teacher[b], &mask, h, w)),
        );
        report.entries.insert(
            format!("band.{name}.morans_i_emulator"),
            Value::Metric(morans_i(&pair.mean[b], &mask, h, w)),
        );
    }
    Ok(report)
}

/// Report over the union of all pixels of several tiles. Moran's I is
/// taken per tile and averaged with weights equal to each tile's
/// evaluated pixel count; tiles where it is undefined are left out.
pub fn aggregate_report(pairs: &[RasterPair], opts: &EvalOptions) -> Result<EvalReport, Error> {
    for p in pairs {
        p.validate()?;
    }
    let merged = concat(pairs)?;
    let mut report = scores(&merged, opts)?;
    let bands = merged.bands();
    for b in 0..bands {
        let name = &opts.band_names[b];
        for (which, field) in [("teacher", 0), ("emulator", 1)] {
            let (mut num, mut den) = (0.0, 0usize);
            for p in pairs {
                let mask =
                    evaluation_mask(p, &classify_cloud(&p.clear_probability, opts.threshold));
                let f = if field == 0 {
                    &p.teacher[b]
                } else {
                    &p.mean[b]
                };
                if let Some(i) = morans_i(f, &mask, p.height, p.width) {
                    let n = mask.iter().filter(|&&m| m).count();
                    num += n as f64 * i;
                    den += n;
                }
            }
            report.entries.insert(
                format!("band.{name}.morans_i_{which}"),
                Value::Metric((den > 0).then(|| num / den as f64)),
            );
        }
    }
    report
        .entries
        .insert("tiles".into(), Value::Count(pairs.len()));
    Ok(report)
}

fn concat(pairs: &[RasterPair]) -> Result<RasterPair, Error> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::Misaligned("no rasters to aggregate".into()))?;
    let bands = first.bands();
    if pairs.iter().any(|p| p.bands() != bands) {
        return Err(Error::Misaligned("tiles disagree on band count".into()));
    }
    let with_classes = first.class_map.is_some();
    if pairs.iter().any(|p| p.class_map.is_some() != with_classes) {
        return Err(Error::Misaligned(
            "class maps present on some tiles only".into(),
        ));
    }
    let n: usize = pairs.iter().map(|p| p.pixels()).sum();
    let join_bands = |get: &dyn Fn(&RasterPair) -> &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..bands)
            .map(|b| {
                pairs
                    .iter()
                    .flat_map(|p| get(p)[b].iter().copied())
                    .collect()
            })
            .collect()
    };
    Ok(RasterPair {
        height: 1,
        width: n,
        teacher: join_bands(&|p| &p.teacher),
        teacher_clear: pairs
            .iter()
            .flat_map(|p| p.teacher_clear.iter().copied())
            .collect(),
        mean: join_bands(&|p| &p.mean),
        variance: join_bands(&|p| &p.variance),
        clear_probability: pairs
            .iter()
            .flat_map(|p| p.clear_probability.iter().copied())
            .collect(),
        class_map: with_classes.then(|| {
            pairs
                .iter()
                .flat_map(|p| p.class_map.as_ref().unwrap().iter().copied())
                .collect()
        }),
    })
}

/// Pixels clear in the teacher mask and in the thresholded prediction.
fn evaluation_mask(pair: &RasterPair, predicted: &[bool]) -> Vec<bool> {
    pair.teacher_clear
        .iter()
        .zip(predicted)
        .map(|(&t, &p)| t && p)
        .collect()
}

/// Everything except Moran's I, which needs the raster geometry.
fn scores(pair: &RasterPair, opts: &EvalOptions) -> Result<EvalReport, Error> {
    if opts.band_names.len() != pair.bands() {
        return Err(Error::Misaligned(format!(
            "{} band names for {} bands",
            opts.band_names.len(),
            pair.bands()
        )));
    }
    let mut e = BTreeMap::new();
    let predicted = classify_cloud(&pair.clear_probability, opts.threshold);
    let mask = evaluation_mask(pair, &predicted);
    e.insert("pixels".to_string(), Value::Count(pair.pixels()));
    e.insert(
        "evaluated_pixels".to_string(),
        Value::Count(mask.iter().filter(|&&m| m).count()),
    );

    for b in 0..pair.bands() {
        let key = |k: &str| format!("band.{}.{k}", opts.band_names[b]);
        let (mt, cvt) = mean_and_cv(&pair.teacher[b], &mask);
        let (me, cve) = mean_and_cv(&pair.mean[b], &mask);
        e.insert(key("mean_teacher"), Value::Metric(mt));
        e.insert(key("mean_emulator"), Value::Metric(me));
        e.insert(
            key("mean_difference"),
            Value::Metric(mt.zip(me).map(|(t, m)| t - m)),
        );
        e.insert(key("cv_teacher"), Value::Metric(cvt));
        e.insert(key("cv_emulator"), Value::Metric(cve));
        let rel = match (cvt, cve) {
            (Some(t), Some(m)) if t != 0.0 => Some(100.0 * (t - m) / t),
            _ => None,
        };
        e.insert(key("cv_relative_difference"), Value::Metric(rel));
        e.insert(
            key("correlation"),
            Value::Metric(correlation(&pair.teacher[b], &pair.mean[b], &mask)),
        );
        e.insert(
            key("rmse"),
            Value::Metric(SquaredError::over(pair, b, &predicted).rmse()),
        );
    }

    let c = confusion(&predicted, &pair.teacher_clear);
    e.insert(
        "cloud.threshold".into(),
        Value::Metric(Some(opts.threshold)),
    );
    e.insert("cloud.accuracy".into(), Value::Metric(c.accuracy()));
    e.insert("cloud.sensitivity".into(), Value::Metric(c.sensitivity()));
    e.insert("cloud.specificity".into(), Value::Metric(c.specificity()));
    e.insert("cloud.true_clear".into(), Value::Count(c.true_clear));
    e.insert("cloud.true_cloudy".into(), Value::Count(c.true_cloudy));
    e.insert("cloud.false_clear".into(), Value::Count(c.false_clear));
    e.insert("cloud.false_cloudy".into(), Value::Count(c.false_cloudy));
    let sweep = threshold_sweep(
        &pair.clear_probability,
        &pair.teacher_clear,
        &opts.sweep_levels,
    )?;
    e.insert("cloud.auc".into(), Value::Metric(sweep.auc));
    e.insert("cloud.auc_levels".into(), Value::Metric(sweep.auc_levels));
    e.insert(
        "cloud.best_threshold".into(),
        Value::Metric(sweep.best_threshold),
    );
    e.insert(
        "cloud.best_accuracy".into(),
        Value::Metric(sweep.best_accuracy),
    );

    let mut calibration = Vec::new();
    for b in 0..pair.bands() {
        let name = &opts.band_names[b];
        let cal = calibration_curve(pair, b, &opts.calibration_levels)?;
        e.insert(
            format!("calibration.{name}.evaluated"),
            Value::Count(cal.evaluated),
        );
        e.insert(
            format!("calibration.{name}.zero_variance"),
            Value::Count(cal.zero_variance),
        );
        for (q, f) in cal.levels.iter().zip(&cal.coverage) {
            e.insert(format!("calibration.{name}.q{q:.3}"), Value::Metric(*f));
        }
        calibration.push((name.clone(), cal));
    }

    if let Some(classes) = &pair.class_map {
        let rows = stratified_report(pair, &predicted, classes, opts.class_floor);
        for r in &rows {
            let key = |k: &str| format!("class.{}.{k}", r.class);
            e.insert(key("pixels"), Value::Count(r.pixels));
            e.insert(key("evaluated"), Value::Count(r.evaluated));
            e.insert(key("flagged"), Value::Flag(r.flagged));
            e.insert(key("accuracy"), Value::Metric(r.accuracy));
            for b in 0..pair.bands() {
                e.insert(
                    key(&format!("rmse.{}", opts.band_names[b])),
                    Value::Metric(r.rmse(b)),
                );
            }
        }
        for b in 0..pair.bands() {
            let kept = rows
                .iter()
                .filter(|r| !r.flagged)
                .fold(SquaredError::default(), |acc, r| {
                    acc.merge(r.squared_error[b])
                });
            e.insert(
                format!("class.summary.rmse.{}", opts.band_names[b]),
                Value::Metric(kept.rmse()),
            );
        }
    }

    Ok(EvalReport {
        entries: e,
        sweep,
        calibration,
    })
}
