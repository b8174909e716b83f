//! The two-part discrete–continuous loss.
//!
//! ```text
//! L = −1/D Σ_i [y_i ln p̂_i + (1−y_i) ln(1−p̂_i)]
//!   + 1/D⁺ Σ_{i clear} Σ_b [½ exp(−s_ib) (y_ib − ŷ_ib)² + ½ s_ib]
//! ```
//!
//! `D` counts every pixel, `D⁺` only clear ones (label 1). `s` is the
//! log-variance, clamped to [`LOG_VARIANCE_RANGE`]. With a shared
//! (scalar) variance the squared residuals are summed over bands before
//! scaling and `½ s` is counted once per pixel.

use super::prediction::{clamp_log_variance, LOG_VARIANCE_RANGE};
use super::{DcPrediction, Error, HeadLayout, ModelConfig, VarianceMode};
use crate::autodiff::{logistic, CustomOp, Graph, Var};
use crate::tensor::Tensor;

/// One training example: an `[h, w, c]` input patch, `[h, w, bands]`
/// teacher reflectance and an `[h, w]` clear-sky label (1 = clear).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub target: Tensor,
    pub label: Tensor,
}

/// A stack of samples along a new leading axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub targets: Tensor,
    pub labels: Tensor,
}

impl Batch {
    pub fn stack(samples: &[&Sample]) -> Result<Self, Error> {
        let first = samples.first().ok_or(Error::EmptyBatch)?;
        let stack = |get: &dyn Fn(&Sample) -> &Tensor| -> Result<Tensor, Error> {
            let shape = get(first).shape().to_vec();
            let mut data = Vec::with_capacity(get(first).len() * samples.len());
            for s in samples {
                if get(s).shape() != shape {
                    return Err(Error::Config(format!(
                        "cannot stack samples of shapes {shape:?} and {:?}",
                        get(s).shape()
                    )));
                }
                data.extend_from_slice(get(s).data());
            }
            let mut full = vec![samples.len()];
            full.extend(shape);
            Ok(Tensor::new(full, data)?)
        };
        Ok(Self {
            inputs: stack(&|s| &s.input)?,
            targets: stack(&|s| &s.target)?,
            labels: stack(&|s| &s.label)?,
        })
    }

    pub fn pixels(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    /// Mean binary cross-entropy over all pixels.
    pub classification: f64,
    /// Conditional regression term over clear pixels (0 when there are none).
    pub regression: f64,
    pub pixels: usize,
    pub clear_pixels: usize,
}

impl LossComponents {
    pub fn total(&self) -> f64 {
        self.classification + self.regression
    }
}

/// Evaluates the loss for an already split prediction.
pub fn dc_loss(
    pred: &DcPrediction,
    targets: &Tensor,
    labels: &Tensor,
) -> Result<LossComponents, Error> {
    pred.check()?;
    let bands = pred.bands();
    let layout = HeadLayout {
        bands,
        variance: VarianceMode::PerBand,
    };
    let c = layout.channels();
    let mut head = Vec::with_capacity(pred.pixels() * c);
    for i in 0..pred.pixels() {
        head.extend_from_slice(&pred.reflectance.data()[i * bands..(i + 1) * bands]);
        head.extend_from_slice(&pred.log_variance.data()[i * bands..(i + 1) * bands]);
        head.push(pred.clear_logit.data()[i]);
    }
    let (parts, _) = evaluate(&head, layout, targets, labels, false)?;
    Ok(parts)
}

/// Records the loss on `graph` as a function of the packed head output.
pub fn dc_loss_on_graph(
    graph: &mut Graph<'_>,
    head: Var,
    config: &ModelConfig,
    targets: &Tensor,
    labels: &Tensor,
) -> Result<(Var, LossComponents), Error> {
    let layout = HeadLayout::new(config);
    let head_value = graph.value(head);
    let (parts, grad) = evaluate(head_value.data(), layout, targets, labels, true)?;
    let grad = Tensor::new(head_value.shape().to_vec(), grad.expect("requested"))?;
    let var = graph.custom(
        &[head],
        Tensor::scalar(parts.total()),
        Box::new(DcLossOp { grad }),
    );
    Ok((var, parts))
}

struct DcLossOp {
    grad: Tensor,
}

impl CustomOp for DcLossOp {
    fn name(&self) -> &'static str {
        "dc_loss"
    }

    fn backward(
        &self,
        _inputs: &[&Tensor],
        _output: &Tensor,
        grad_out: &Tensor,
    ) -> Vec<Option<Tensor>> {
        let g = grad_out.item();
        vec![Some(self.grad.map(|v| v * g))]
    }
}

fn evaluate(
    head: &[f64],
    layout: HeadLayout,
    targets: &Tensor,
    labels: &Tensor,
    want_grad: bool,
) -> Result<(LossComponents, Option<Vec<f64>>), Error> {
    let c = layout.channels();
    let bands = layout.bands;
    let d = labels.len();
    if d == 0 {
        return Err(Error::EmptyBatch);
    }
    if head.len() != d * c || targets.len() != d * bands {
        return Err(Error::Config(format!(
            "loss operands disagree: {} head values, {} targets, {d} labels",
            head.len(),
            targets.len()
        )));
    }
    let mut clear = 0usize;
    for (i, &y) in labels.data().iter().enumerate() {
        if y == 1.0 {
            clear += 1;
            let t = &targets.data()[i * bands..(i + 1) * bands];
            if let Some(bad) = t.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "non-finite target {bad} at clear pixel {i}"
                )));
            }
        } else if y != 0.0 {
            return Err(Error::Label(y));
        }
    }

    let mut grad = want_grad.then(|| vec![0.0; head.len()]);
    let inv_d = 1.0 / d as f64;
    let inv_clear = if clear > 0 { 1.0 / clear as f64 } else { 0.0 };
    let (lo, hi) = LOG_VARIANCE_RANGE;
    let mut bce = 0.0;
    let mut reg = 0.0;
    for i in 0..d {
        let px = &head[i * c..(i + 1) * c];
        let phi = px[layout.logit_channel()];
        let y = labels.data()[i];
        bce += phi.max(0.0) - phi * y + (-phi.abs()).exp().ln_1p();
        if let Some(g) = &mut grad {
            g[i * c + layout.logit_channel()] = (logistic(phi) - y) * inv_d;
        }
        if y != 1.0 {
            continue;
        }
        let t = &targets.data()[i * bands..(i + 1) * bands];
        match layout.variance {
            VarianceMode::PerBand => {
                for b in 0..bands {
                    let raw = px[layout.log_variance_channel(b)];
                    let s = clamp_log_variance(raw);
                    let prec = (-s).exp();
                    let r = t[b] - px[b];
                    reg += 0.5 * prec * r * r + 0.5 * s;
                    if let Some(g) = &mut grad {
                        g[i * c + b] = -prec * r * inv_clear;
                        if (lo..=hi).contains(&raw) {
                            g[i * c + layout.log_variance_channel(b)] =
                                (0.5 - 0.5 * prec * r * r) * inv_clear;
                        }
                    }
                }
            }
            VarianceMode::Scalar => {
                let raw = px[layout.log_variance_channel(0)];
                let s = clamp_log_variance(raw);
                let prec = (-s).exp();
                let mut sq = 0.0;
                for b in 0..bands {
                    let r = t[b] - px[b];
                    sq += r * r;
                    if let Some(g) = &mut grad {
                        g[i * c + b] = -prec * r * inv_clear;
                    }
                }
                reg += 0.5 * prec * sq + 0.5 * s;
                if let Some(g) = &mut grad {
                    if (lo..=hi).contains(&raw) {
                        g[i * c + layout.log_variance_channel(0)] =
                            (0.5 - 0.5 * prec * sq) * inv_clear;
                    }
                }
            }
        }
    }
    Ok((
        LossComponents {
            classification: bce * inv_d,
            regression: reg * inv_clear,
            pixels: d,
            clear_pixels: clear,
        },
        grad,
    ))
}
