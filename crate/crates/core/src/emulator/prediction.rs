use super::{Error, ModelConfig, VarianceMode};
use crate::autodiff::logistic;
use crate::tensor::Tensor;

/// Log-variance outputs are clamped to this range before exponentiation.
pub const LOG_VARIANCE_RANGE: (f64, f64) = (-10.0, 10.0);

pub(crate) fn clamp_log_variance(s: f64) -> f64 {
    s.clamp(LOG_VARIANCE_RANGE.0, LOG_VARIANCE_RANGE.1)
}

/// Channel layout of the packed head output:
/// `[ŷ_0..ŷ_{B-1}, s_0..s_{B-1} (or one shared s), φ]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadLayout {
    pub bands: usize,
    pub variance: VarianceMode,
}

impl HeadLayout {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            bands: config.output_bands,
            variance: config.variance,
        }
    }

    pub fn channels(&self) -> usize {
        match self.variance {
            VarianceMode::PerBand => 2 * self.bands + 1,
            VarianceMode::Scalar => self.bands + 2,
        }
    }

    /// Channel holding the log-variance for `band`.
    pub fn log_variance_channel(&self, band: usize) -> usize {
        match self.variance {
            VarianceMode::PerBand => self.bands + band,
            VarianceMode::Scalar => self.bands,
        }
    }

    pub fn log_variance_channels(&self) -> std::ops::Range<usize> {
        match self.variance {
            VarianceMode::PerBand => self.bands..2 * self.bands,
            VarianceMode::Scalar => self.bands..self.bands + 1,
        }
    }

    pub fn logit_channel(&self) -> usize {
        self.channels() - 1
    }
}

/// One network evaluation: reflectance, log-variance (per band, already
/// broadcast in scalar mode) and the clear-sky logit, with matching
/// leading dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DcPrediction {
    pub reflectance: Tensor,
    pub log_variance: Tensor,
    pub clear_logit: Tensor,
}

impl DcPrediction {
    /// Splits a packed head output `[.., channels]`.
    pub fn from_head(head: &Tensor, config: &ModelConfig) -> Result<Self, Error> {
        let layout = HeadLayout::new(config);
        let c = layout.channels();
        if head.last_dim() != c || head.shape().is_empty() {
            return Err(Error::Config(format!(
                "head output {:?} does not have {c} trailing channels",
                head.shape()
            )));
        }
        let lead = &head.shape()[..head.shape().len() - 1];
        let pixels = head.len() / c;
        let b = layout.bands;
        let mut y = Vec::with_capacity(pixels * b);
        let mut s = Vec::with_capacity(pixels * b);
        let mut phi = Vec::with_capacity(pixels);
        for px in head.data().chunks_exact(c) {
            y.extend_from_slice(&px[..b]);
            for band in 0..b {
                s.push(px[layout.log_variance_channel(band)]);
            }
            phi.push(px[layout.logit_channel()]);
        }
        let with = |last: usize| {
            let mut v = lead.to_vec();
            v.push(last);
            v
        };
        Ok(Self {
            reflectance: Tensor::new(with(b), y)?,
            log_variance: Tensor::new(with(b), s)?,
            clear_logit: Tensor::new(with(1), phi)?,
        })
    }

    pub fn bands(&self) -> usize {
        self.reflectance.last_dim()
    }

    pub fn pixels(&self) -> usize {
        self.clear_logit.len()
    }

    /// σ̂² per pixel and band, from the clamped log-variance.
    pub fn variance(&self) -> Tensor {
        self.log_variance.map(|s| clamp_log_variance(s).exp())
    }

    /// Clear-sky probability p̂ = logistic(φ̂).
    pub fn clear_probability(&self) -> Tensor {
        self.clear_logit.map(logistic)
    }

    pub(crate) fn check(&self) -> Result<(), Error> {
        let lead = |t: &Tensor| t.shape()[..t.shape().len().saturating_sub(1)].to_vec();
        let l = lead(&self.reflectance);
        if self.reflectance.shape() != self.log_variance.shape()
            || lead(&self.clear_logit) != l
            || self.clear_logit.last_dim() != 1
        {
            return Err(Error::Config(format!(
                "prediction parts disagree: {:?}, {:?}, {:?}",
                self.reflectance.shape(),
                self.log_variance.shape(),
                self.clear_logit.shape()
            )));
        }
        Ok(())
    }
}

/// Monte-Carlo predictive moments at every pixel and band.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveDistribution {
    /// E[y], shaped like the reflectance output.
    pub mean: Tensor,
    /// Var[y] ≥ 0, same shape as `mean`.
    pub variance: Tensor,
    /// Mean clear-sky probability, `[.., 1]`.
    pub clear_probability: Tensor,
    pub samples: usize,
}

/// Reduces `T` stochastic predictions to predictive moments:
///
/// ```text
/// E[y]   = 1/T Σ ŷ_t
/// Var[y] = 1/T Σ (ŷ_t² + σ̂_t²) − E[y]²
/// p̂      = 1/T Σ logistic(φ̂_t)
/// ```
///
/// The variance is evaluated as `1/T Σ (ŷ_t − E[y])² + 1/T Σ σ̂_t²`, the same
/// quantity without cancellation, so it never falls below the mean σ̂².
/// Samples are reduced in slice order.
pub fn predictive_moments(samples: &[DcPrediction]) -> Result<PredictiveDistribution, Error> {
    let first = samples.first().ok_or(Error::NoSamples)?;
    for s in samples {
        s.check()?;
        if s.reflectance.shape() != first.reflectance.shape() {
            return Err(Error::Config("samples have different shapes".into()));
        }
    }
    let t = samples.len() as f64;
    let n = first.reflectance.len();
    let mut sum = vec![0.0; n];
    let mut aleatoric = vec![0.0; n];
    let mut prob = vec![0.0; first.clear_logit.len()];
    for s in samples {
        let (y, lv) = (s.reflectance.data(), s.log_variance.data());
        for i in 0..n {
            sum[i] += y[i];
            aleatoric[i] += clamp_log_variance(lv[i]).exp();
        }
        for (p, &phi) in prob.iter_mut().zip(s.clear_logit.data()) {
            *p += logistic(phi);
        }
    }
    let mean: Vec<f64> = sum.iter().map(|v| v / t).collect();
    let mut spread = vec![0.0; n];
    for s in samples {
        for ((d, &y), &m) in spread.iter_mut().zip(s.reflectance.data()).zip(&mean) {
            *d += (y - m) * (y - m);
        }
    }
    let variance: Vec<f64> = spread
        .iter()
        .zip(&aleatoric)
        .map(|(d, a)| d / t + a / t)
        .collect();
    prob.iter_mut().for_each(|p| *p /= t);
    let shape = first.reflectance.shape().to_vec();
    Ok(PredictiveDistribution {
        mean: Tensor::new(shape.clone(), mean)?,
        variance: Tensor::new(shape, variance)?,
        clear_probability: Tensor::new(first.clear_logit.shape().to_vec(), prob)?,
        samples: samples.len(),
    })
}

/// Clear-sky mask from probabilities: clear iff `p > threshold`.
/// Ties count as non-clear.
pub fn classify_cloud(probability: &[f64], threshold: f64) -> Vec<bool> {
    probability.iter().map(|&p| p > threshold).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_goes_to_non_clear() {
        assert_eq!(
            classify_cloud(&[0.2, 0.5, 0.9], 0.5),
            vec![false, false, true]
        );
        assert_eq!(
            classify_cloud(&[0.0, 1e-9, 1.0], 0.0),
            vec![false, true, true]
        );
        assert_eq!(classify_cloud(&[0.0, 0.4, 1.0], 1.0), vec![false; 3]);
    }

    #[test]
    fn split_scalar_variance_broadcasts() {
        let cfg = ModelConfig {
            output_bands: 2,
            variance: VarianceMode::Scalar,
            ..Default::default()
        };
        let head = Tensor::new(vec![1, 4], vec![0.1, 0.2, -3.0, 1.5]).unwrap();
        let p = DcPrediction::from_head(&head, &cfg).unwrap();
        assert_eq!(p.reflectance.data(), &[0.1, 0.2]);
        assert_eq!(p.log_variance.data(), &[-3.0, -3.0]);
        assert_eq!(p.clear_logit.data(), &[1.5]);
    }

    #[test]
    fn empty_sample_set_is_an_error() {
        assert!(matches!(predictive_moments(&[]), Err(Error::NoSamples)));
    }
}
