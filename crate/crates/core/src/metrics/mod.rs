//! Agreement between emulator predictions and teacher retrievals.
//!
//! A metric that cannot be computed (no clear pixels, zero variance, an
//! empty class) is `None` and serialises as `undefined`, never as 0.
//!
//! Reductions over pixels sort their terms before summing, so every
//! metric except Moran's I is bit-identical under any permutation of the
//! pixels.

mod calibration;
mod cloud;
mod regression;
mod report;
mod spatial;

pub use calibration::{calibration_curve, central_quantile, Calibration};
pub use cloud::{confusion, roc_exact, threshold_sweep, Confusion, SweepPoint, ThresholdSweep};
pub use regression::{conditional_rmse, correlation, mean_and_cv, SquaredError};
pub use report::{
    aggregate_report, evaluate, stratified_report, ClassRow, EvalOptions, EvalReport, Value,
    DEFAULT_CLASS_FLOOR,
};
pub use spatial::{edge_pixels, morans_i};

/// A metric value, `None` when undefined.
pub type Metric = Option<f64>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("rasters are not aligned: {0}")]
    Misaligned(String),
    #[error("invalid evaluation levels: {0}")]
    Levels(String),
}

/// A teacher retrieval and an emulator prediction over the same pixels.
/// Per-band fields are `[band][pixel]`, pixels row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterPair {
    pub height: usize,
    pub width: usize,
    pub teacher: Vec<Vec<f64>>,
    /// `true` = clear sky.
    pub teacher_clear: Vec<bool>,
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    pub clear_probability: Vec<f64>,
    pub class_map: Option<Vec<u8>>,
}

impl RasterPair {
    pub fn validate(&self) -> Result<(), Error> {
        let n = self.pixels();
        let bad = |what: &str, len: usize| {
            Error::Misaligned(format!("{what} has {len} pixels, expected {n}"))
        };
        if self.teacher.len() != self.mean.len() || self.mean.len() != self.variance.len() {
            return Err(Error::Misaligned(format!(
                "band counts differ: teacher {}, mean {}, variance {}",
                self.teacher.len(),
                self.mean.len(),
                self.variance.len()
            )));
        }
        for (what, fields) in [
            ("teacher", &self.teacher),
            ("mean", &self.mean),
            ("variance", &self.variance),
        ] {
            if let Some(f) = fields.iter().find(|f| f.len() != n) {
                return Err(bad(what, f.len()));
            }
        }
        if self.teacher_clear.len() != n {
            return Err(bad("teacher mask", self.teacher_clear.len()));
        }
        if self.clear_probability.len() != n {
            return Err(bad("clear probability", self.clear_probability.len()));
        }
        if let Some(c) = &self.class_map {
            if c.len() != n {
                return Err(bad("class map", c.len()));
            }
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn bands(&self) -> usize {
        self.teacher.len()
    }

    /// Keeps only the pixels where `keep` is true, as a `1 × k` raster.
    pub fn select(&self, keep: &[bool]) -> RasterPair {
        let pick = |v: &[f64]| {
            v.iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&x, _)| x)
                .collect::<Vec<_>>()
        };
        let n = keep.iter().filter(|&&k| k).count();
        RasterPair {
            height: 1,
            width: n,
            teacher: self.teacher.iter().map(|b| pick(b)).collect(),
            teacher_clear: self
                .teacher_clear
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&c, _)| c)
                .collect(),
            mean: self.mean.iter().map(|b| pick(b)).collect(),
            variance: self.variance.iter().map(|b| pick(b)).collect(),
            clear_probability: pick(&self.clear_probability),
            class_map: self.class_map.as_ref().map(|c| {
                c.iter()
                    .zip(keep)
                    .filter(|(_, &k)| k)
                    .map(|(&x, _)| x)
                    .collect()
            }),
        }
    }
}

/// Sum whose result does not depend on the order of `values`.
pub fn ordered_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Formats a metric for reports.
pub fn format_metric(m: Metric) -> String {
    match m {
        Some(v) => format!("{v:?}"),
        None => "undefined".to_string(),
    }
}
