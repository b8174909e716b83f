use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dc_loss_on_graph, Batch, Error, Model, Sample};
use crate::autodiff::{AdamConfig, AdamState, GateNoise, Graph};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seeds batch shuffling and dropout noise.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Mean loss components over the batches of one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub classification: f64,
    pub regression: f64,
    pub regularizer: f64,
    pub dropout_rates: Vec<f64>,
    pub steps: usize,
}

impl EpochLog {
    pub fn loss(&self) -> f64 {
        self.classification + self.regression + self.regularizer
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Data loss (without the regularizer) of every optimizer step.
    pub step_losses: Vec<f64>,
}

/// Minimises the discrete–continuous loss plus the dropout regularizer
/// with Adam. Gate noise is redrawn on every forward pass.
///
/// `on_epoch` runs after each completed epoch; an error from it stops
/// training.
pub fn train<F>(
    model: &mut Model,
    data: &[Sample],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainingLog, Error>
where
    F: FnMut(&EpochLog, &Model) -> Result<(), Error>,
{
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(config.adam, model.params());
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let terms = model.regularizer_terms();
    let model_config = model.config().clone();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut cls, mut reg, mut kl, mut steps) = (0.0, 0.0, 0.0, 0usize);
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let samples: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let batch = Batch::stack(&samples)?;
            let grads = {
                let mut graph = Graph::new(model.params());
                let head = model.forward(&mut graph, batch.inputs, GateNoise::Sample(&mut rng))?;
                let (data_loss, parts) = dc_loss_on_graph(
                    &mut graph,
                    head,
                    &model_config,
                    &batch.targets,
                    &batch.labels,
                )?;
                let reg_var = graph.regularizer(&terms);
                let reg_value = graph.value(reg_var).item();
                for (term, value) in [
                    ("classification", parts.classification),
                    ("regression", parts.regression),
                    ("regularizer", reg_value),
                ] {
                    if !value.is_finite() {
                        return Err(Error::NonFinite {
                            epoch,
                            batch: bi,
                            term,
                            value,
                        });
                    }
                }
                let total = graph.add(data_loss, reg_var)?;
                cls += parts.classification;
                reg += parts.regression;
                kl += reg_value;
                log.step_losses.push(parts.total());
                graph.backward(total)
            };
            model.params_mut().accumulate(&grads);
            adam.step(model.params_mut()).map_err(|e| Error::Diverged {
                epoch,
                batch: bi,
                source: e,
            })?;
            steps += 1;
        }
        let n = steps as f64;
        let entry = EpochLog {
            epoch,
            classification: cls / n,
            regression: reg / n,
            regularizer: kl / n,
            dropout_rates: model.dropout_rates(),
            steps,
        };
        on_epoch(&entry, model)?;
        log.epochs.push(entry);
    }
    Ok(log)
}
