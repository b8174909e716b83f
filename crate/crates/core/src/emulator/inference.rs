use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{predictive_moments, DcPrediction, Error, Model, PredictiveDistribution};
use crate::autodiff::GateNoise;
use crate::tensor::Tensor;

/// Default number of stochastic passes.
pub const DEFAULT_SAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Evaluate passes on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            parallel: false,
        }
    }
}

/// Noise stream for pass `t`: independent of evaluation order.
fn pass_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

/// Runs `samples` stochastic forward passes with active dropout gates and
/// reduces them to predictive moments.
pub fn mc_predict(
    model: &Model,
    input: &Tensor,
    opts: McOptions,
) -> Result<PredictiveDistribution, Error> {
    if opts.samples < 1 {
        return Err(Error::NoSamples);
    }
    let pass = |t: usize| -> Result<DcPrediction, Error> {
        let mut rng = pass_rng(opts.seed, t);
        model.predict(input.clone(), GateNoise::Sample(&mut rng))
    };
    let samples: Vec<DcPrediction> = if opts.parallel {
        (0..opts.samples)
            .into_par_iter()
            .map(pass)
            .collect::<Result<_, _>>()?
    } else {
        (0..opts.samples).map(pass).collect::<Result<_, _>>()?
    };
    predictive_moments(&samples)
}

/// Single deterministic pass with every gate replaced by its expectation
/// (the inverted-dropout rescaling makes that the identity).
pub fn static_predict(model: &Model, input: &Tensor) -> Result<DcPrediction, Error> {
    model.predict(input.clone(), GateNoise::Expectation)
}
