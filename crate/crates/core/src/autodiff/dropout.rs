//! Concrete (relaxed Bernoulli) dropout.
//!
//! `p` is always the *drop* probability, `p = logistic(logit)`. The keep
//! gate for a uniform draw `u` is
//!
//! ```text
//! z = logistic((ln(1-p) - ln p + ln u - ln(1-u)) / temperature)
//! ```
//!
//! which tends to the indicator `u > p` as the temperature goes to zero,
//! so `E[z] -> 1 - p`. Gated activations are rescaled by `1 / (1 - p)`.

use super::{logistic, ParamId, ParamRole, ParamStore};
use crate::tensor::Tensor;

/// Bernoulli entropy in nats; `H(0) = H(1) = 0`.
pub fn bernoulli_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

/// Keep gate for one noise draw. `logit` is the logit of the drop rate.
pub(crate) fn keep_gate(logit: f64, u: f64, temperature: f64) -> f64 {
    logistic((-logit + (u / (1.0 - u)).ln()) / temperature)
}

/// A learnable dropout rate attached to the input of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteDropoutLayer {
    /// Scalar parameter holding `logit(p)`.
    pub logit: ParamId,
    pub temperature: f64,
    pub weight_scale: f64,
    pub dropout_scale: f64,
}

impl ConcreteDropoutLayer {
    /// Registers the logit parameter in `store`, initialised so that the
    /// drop rate equals `init_rate`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        init_rate: f64,
        temperature: f64,
        weight_scale: f64,
        dropout_scale: f64,
    ) -> Self {
        assert!(
            init_rate > 0.0 && init_rate < 1.0,
            "dropout rate must lie in (0, 1)"
        );
        assert!(temperature > 0.0, "temperature must be positive");
        assert!(weight_scale >= 0.0 && dropout_scale >= 0.0);
        let logit = store.add(
            name,
            ParamRole::DropoutLogit,
            Tensor::scalar(super::logit(init_rate)),
        );
        Self {
            logit,
            temperature,
            weight_scale,
            dropout_scale,
        }
    }

    /// Current drop rate.
    pub fn rate(&self, store: &ParamStore) -> f64 {
        logistic(store.get(self.logit).value.item())
    }
}

/// One summand of the variational regularizer: the layer's dropout logit
/// and the weight matrix it gates.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizerTerm {
    pub weight: ParamId,
    pub logit: ParamId,
    /// Input dimensionality of the gated layer (features, or channels for conv).
    pub input_dim: usize,
    pub weight_scale: f64,
    pub dropout_scale: f64,
}

impl RegularizerTerm {
    pub fn for_layer(layer: &ConcreteDropoutLayer, weight: ParamId, input_dim: usize) -> Self {
        Self {
            weight,
            logit: layer.logit,
            input_dim,
            weight_scale: layer.weight_scale,
            dropout_scale: layer.dropout_scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_endpoints_and_peak() {
        assert_eq!(bernoulli_entropy(0.0), 0.0);
        assert_eq!(bernoulli_entropy(1.0), 0.0);
        assert!((bernoulli_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bernoulli_entropy(0.9) < bernoulli_entropy(0.5));
    }

    #[test]
    fn gate_at_symmetric_point_is_half() {
        // p = 0.5, u = 0.5
        assert_eq!(keep_gate(0.0, 0.5, 0.1), 0.5);
    }

    #[test]
    fn gate_hardens_as_temperature_vanishes() {
        let z = keep_gate(0.0, 0.9, 1e-4);
        assert!(z > 1.0 - 1e-12, "z = {z}");
        let z = keep_gate(0.0, 0.1, 1e-4);
        assert!(z < 1e-12, "z = {z}");
    }
}
