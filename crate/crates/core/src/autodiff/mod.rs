//! Minimal reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied during a forward pass
//! together with the values it produced. [`Graph::backward`] walks the
//! record in reverse and returns the gradient of a scalar output with
//! respect to every [`Parameter`] that took part in the computation.
//!
//! The layer set is deliberately small: dense, 3×3 same-padded
//! convolution, ReLU, sigmoid, elementwise add, the concrete dropout
//! gate, and the variational regularizer. Anything else can be plugged
//! in through [`CustomOp`].

mod adam;
mod dropout;
mod gradcheck;
mod graph;
mod linalg;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use dropout::{bernoulli_entropy, ConcreteDropoutLayer, RegularizerTerm};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use graph::{CustomOp, GateNoise, Gradients, Graph, Var};
pub use params::{ParamId, ParamRole, ParamStore, Parameter};

/// Logistic function, written to stay finite for large `|x|`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`logistic`].
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch on {operand}: {detail}")]
    Dimension {
        op: &'static str,
        operand: &'static str,
        detail: String,
    },
    #[error("{op}: value out of domain: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("non-finite gradient in {role} parameter `{name}`")]
    NonFiniteGradient { role: ParamRole, name: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_is_stable_and_symmetric() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(3.0) + logistic(-3.0) - 1.0).abs() < 1e-15);
        assert_eq!(logistic(-800.0), 0.0);
        assert_eq!(logistic(800.0), 1.0);
        assert!((logit(logistic(1.25)) - 1.25).abs() < 1e-12);
    }
}
