use super::{ordered_sum, Metric, RasterPair};

/// Sum of squared residuals and the pixel count behind it, so RMSEs over
/// disjoint pixel sets can be recombined.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SquaredError {
    pub sum: f64,
    pub count: usize,
}

impl SquaredError {
    /// Residuals `teacher − mean` on pixels clear in both masks.
    pub fn over(pair: &RasterPair, band: usize, reference_clear: &[bool]) -> Self {
        let (t, m) = (&pair.teacher[band], &pair.mean[band]);
        let terms: Vec<f64> = (0..pair.pixels())
            .filter(|&i| pair.teacher_clear[i] && reference_clear[i])
            .map(|i| (t[i] - m[i]).powi(2))
            .collect();
        Self {
            count: terms.len(),
            sum: ordered_sum(terms),
        }
    }

    pub fn rmse(&self) -> Metric {
        (self.count > 0).then(|| (self.sum / self.count as f64).sqrt())
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            sum: self.sum + other.sum,
            count: self.count + other.count,
        }
    }
}

/// Root-mean-square of `teacher − E[y]` over pixels that both the teacher
/// mask and `reference_clear` call clear.
pub fn conditional_rmse(pair: &RasterPair, band: usize, reference_clear: &[bool]) -> Metric {
    SquaredError::over(pair, band, reference_clear).rmse()
}

/// Mean and coefficient of variation (percent, population standard
/// deviation) of `field` over pixels where `mask` is true.
///
/// Both are undefined below two pixels; CV is also undefined at zero mean.
pub fn mean_and_cv(field: &[f64], mask: &[bool]) -> (Metric, Metric) {
    let vals: Vec<f64> = field
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if vals.len() < 2 {
        return (None, None);
    }
    let n = vals.len() as f64;
    let mean = ordered_sum(vals.iter().copied()) / n;
    let var = ordered_sum(vals.iter().map(|v| (v - mean).powi(2))) / n;
    let cv = (mean != 0.0).then(|| 100.0 * var.sqrt() / mean);
    (Some(mean), cv)
}

/// Pearson correlation of `a` and `b` over pixels where `mask` is true.
pub fn correlation(a: &[f64], b: &[f64], mask: &[bool]) -> Metric {
    let idx: Vec<usize> = (0..a.len()).filter(|&i| mask[i]).collect();
    if idx.len() < 2 {
        return None;
    }
    let n = idx.len() as f64;
    let ma = ordered_sum(idx.iter().map(|&i| a[i])) / n;
    let mb = ordered_sum(idx.iter().map(|&i| b[i])) / n;
    let sab = ordered_sum(idx.iter().map(|&i| (a[i] - ma) * (b[i] - mb)));
    let saa = ordered_sum(idx.iter().map(|&i| (a[i] - ma).powi(2)));
    let sbb = ordered_sum(idx.iter().map(|&i| (b[i] - mb).powi(2)));
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
