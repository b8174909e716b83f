use statrs::distribution::{ContinuousCDF, Normal};

use super::{Error, Metric, RasterPair};

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub levels: Vec<f64>,
    /// Observed coverage at each level; undefined without evaluated pixels.
    pub coverage: Vec<Metric>,
    pub evaluated: usize,
    /// Clear pixels skipped because their predictive variance is not > 0.
    pub zero_variance: usize,
}

/// Half-width, in standard deviations, of the central `q` interval of a
/// normal distribution.
pub fn central_quantile(q: f64) -> f64 {
    if q >= 1.0 {
        return f64::INFINITY;
    }
    if q <= 0.0 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(0.5 + 0.5 * q)
}

/// For each level `q`, the fraction of teacher-clear pixels whose teacher
/// value falls inside the central `q` interval of `Normal(E[y], Var[y])`.
pub fn calibration_curve(
    pair: &RasterPair,
    band: usize,
    levels: &[f64],
) -> Result<Calibration, Error> {
    if levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Levels(
            "calibration levels must lie in [0, 1]".into(),
        ));
    }
    if levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Levels("calibration levels must be sorted".into()));
    }
    let (t, m, v) = (&pair.teacher[band], &pair.mean[band], &pair.variance[band]);
    let mut scaled = Vec::new();
    let mut zero_variance = 0;
    for i in 0..pair.pixels() {
        if !pair.teacher_clear[i] {
            continue;
        }
        if v[i] > 0.0 {
            scaled.push((t[i] - m[i]).abs() / v[i].sqrt());
        } else {
            zero_variance += 1;
        }
    }
    let n = scaled.len();
    let coverage = levels
        .iter()
        .map(|&q| {
            let half = central_quantile(q);
            (n > 0).then(|| scaled.iter().filter(|&&s| s <= half).count() as f64 / n as f64)
        })
        .collect();
    Ok(Calibration {
        levels: levels.to_vec(),
        coverage,
        evaluated: n,
        zero_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert!((central_quantile(0.95) - 1.959963984540054).abs() < 1e-9);
        assert_eq!(central_quantile(1.0), f64::INFINITY);
        assert_eq!(central_quantile(0.0), 0.0);
    }

    #[test]
    fn full_level_covers_everything_and_zero_variance_is_counted() {
        let pair = RasterPair {
            height: 1,
            width: 3,
            teacher: vec![vec![0.0, 5.0, 1.0]],
            teacher_clear: vec![true, true, true],
            mean: vec![vec![0.1, 0.0, 1.0]],
            variance: vec![vec![0.01, 0.01, 0.0]],
            clear_probability: vec![1.0; 3],
            class_map: None,
        };
        let c = calibration_curve(&pair, 0, &[0.5, 1.0]).unwrap();
        assert_eq!(c.coverage, vec![Some(0.0), Some(1.0)]);
        assert_eq!((c.evaluated, c.zero_variance), (2, 1));
    }
}
