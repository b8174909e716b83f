use rand::distr::{Distribution, Open01, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::{Architecture, DcPrediction, Error, ModelConfig};
use crate::autodiff::{
    ConcreteDropoutLayer, GateNoise, Graph, ParamId, ParamRole, ParamStore, RegularizerTerm, Var,
};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    gate: Option<ConcreteDropoutLayer>,
    weight: ParamId,
    bias: ParamId,
    fan_in: usize,
    conv: bool,
}

/// A discrete–continuous network: a hidden trunk followed by one head that
/// emits reflectance, log-variance and the clear-sky logit at every pixel.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    hidden: Vec<Layer>,
    head: Layer,
}

impl Model {
    /// Builds and initialises a model.
    ///
    /// Hidden weights use He (fan-in) normal initialisation; the head is
    /// drawn from a narrower uniform. Every hidden layer is preceded by a
    /// concrete dropout gate; the head only when `dropout_on_head` is set.
    pub fn build(config: ModelConfig) -> Result<Self, Error> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let conv = config.architecture.is_convolutional();
        let ws = config.weight_regularizer_scale();
        let ds = config.dropout_regularizer_scale();

        let mut hidden = Vec::with_capacity(config.hidden_layers);
        let mut c_in = config.input_channels;
        for l in 0..config.hidden_layers {
            let gate = ConcreteDropoutLayer::new(
                &mut params,
                &format!("hidden{l}.dropout_logit"),
                config.init_dropout,
                config.temperature,
                ws,
                ds,
            );
            let fan_in = if conv { 9 * c_in } else { c_in };
            let std = (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let shape = weight_shape(conv, c_in, config.hidden_units);
            let n: usize = shape.iter().product();
            let w: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let weight = params.add(
                format!("hidden{l}.weight"),
                ParamRole::Weight,
                Tensor::new(shape, w)?,
            );
            let bias = params.add(
                format!("hidden{l}.bias"),
                ParamRole::Bias,
                Tensor::zeros(&[config.hidden_units]),
            );
            hidden.push(Layer {
                gate: Some(gate),
                weight,
                bias,
                fan_in: c_in,
                conv,
            });
            c_in = config.hidden_units;
        }

        let gate = config.dropout_on_head.then(|| {
            ConcreteDropoutLayer::new(
                &mut params,
                "head.dropout_logit",
                config.init_dropout,
                config.temperature,
                ws,
                ds,
            )
        });
        let out = config.head_channels();
        let fan_in = if conv { 9 * c_in } else { c_in };
        let limit = 0.5 / (fan_in as f64).sqrt();
        let uniform = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        let shape = weight_shape(conv, c_in, out);
        let n: usize = shape.iter().product();
        let w: Vec<f64> = (0..n).map(|_| uniform.sample(&mut rng)).collect();
        let weight = params.add("head.weight", ParamRole::Weight, Tensor::new(shape, w)?);
        let mut b = vec![0.0; out];
        for s in super::HeadLayout::new(&config).log_variance_channels() {
            b[s] = config.init_log_variance;
        }
        let bias = params.add("head.bias", ParamRole::Bias, Tensor::vector(&b));
        let head = Layer {
            gate,
            weight,
            bias,
            fan_in: c_in,
            conv,
        };

        Ok(Self {
            config,
            params,
            hidden,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.num_scalars()
    }

    /// Number of dropout gates, in forward order.
    pub fn gate_count(&self) -> usize {
        self.layers().filter(|l| l.gate.is_some()).count()
    }

    /// Current drop rate of every gate, in forward order.
    pub fn dropout_rates(&self) -> Vec<f64> {
        self.layers()
            .filter_map(|l| l.gate.as_ref())
            .map(|g| g.rate(&self.params))
            .collect()
    }

    /// Overwrites the drop rate of every gate.
    pub fn set_dropout_rate(&mut self, rate: f64) {
        assert!(rate > 0.0 && rate < 1.0);
        let ids: Vec<ParamId> = self
            .layers()
            .filter_map(|l| l.gate.as_ref().map(|g| g.logit))
            .collect();
        for id in ids {
            self.params.get_mut(id).value = Tensor::scalar(crate::autodiff::logit(rate));
        }
    }

    /// Updates N and the regularizer scales derived from it.
    pub fn set_dataset_size(&mut self, n: u64) -> Result<(), Error> {
        let mut cfg = self.config.clone();
        cfg.dataset_size = n;
        cfg.validate()?;
        let (ws, ds) = (
            cfg.weight_regularizer_scale(),
            cfg.dropout_regularizer_scale(),
        );
        for layer in self
            .hidden
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
        {
            if let Some(g) = &mut layer.gate {
                g.weight_scale = ws;
                g.dropout_scale = ds;
            }
        }
        self.config = cfg;
        Ok(())
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.hidden.iter().chain(std::iter::once(&self.head))
    }

    /// Weight and bias ids of every layer, hidden layers first.
    pub fn layer_params(&self) -> Vec<(ParamId, ParamId)> {
        self.layers().map(|l| (l.weight, l.bias)).collect()
    }

    /// One regularizer term per gated layer.
    pub fn regularizer_terms(&self) -> Vec<RegularizerTerm> {
        self.layers()
            .filter_map(|l| {
                l.gate
                    .as_ref()
                    .map(|g| RegularizerTerm::for_layer(g, l.weight, l.fan_in))
            })
            .collect()
    }

    /// Shape of the noise tensor each gate consumes for an input of shape
    /// `[b, h, w, c]`: one draw per item and feature.
    pub fn gate_noise_shapes(&self, batch: usize) -> Vec<[usize; 2]> {
        self.layers()
            .filter(|l| l.gate.is_some())
            .map(|l| [batch, l.fan_in])
            .collect()
    }

    /// Draws a full set of gate noise for a batch.
    pub fn sample_gate_noise(&self, batch: usize, rng: &mut dyn rand::RngCore) -> Vec<Tensor> {
        self.gate_noise_shapes(batch)
            .into_iter()
            .map(|s| sample_uniform(&s, rng))
            .collect()
    }

    /// Records a forward pass on `graph` and returns the raw head output,
    /// shaped `[b, h, w, head_channels]`.
    pub fn forward(
        &self,
        graph: &mut Graph<'_>,
        input: Tensor,
        mut noise: GateNoise<'_>,
    ) -> Result<Var, Error> {
        let shape = input.shape().to_vec();
        if shape.len() != 4 || shape[3] != self.config.input_channels {
            return Err(Error::Config(format!(
                "expected input [b, h, w, {}], got {shape:?}",
                self.config.input_channels
            )));
        }
        if let GateNoise::Fixed(fixed) = &noise {
            if fixed.len() != self.gate_count() {
                return Err(Error::Config(format!(
                    "{} noise tensors supplied for {} gates",
                    fixed.len(),
                    self.gate_count()
                )));
            }
        }
        let batch = shape[0];
        let mut gate_index = 0;
        let mut x = graph.constant(input);
        let mut first_hidden = None;
        let last = self.hidden.len() - 1;
        for (i, layer) in self.hidden.iter().enumerate() {
            x = self.apply_layer(graph, layer, x, batch, &mut noise, &mut gate_index)?;
            x = graph.relu(x);
            if i == 0 {
                first_hidden = Some(x);
            }
            if i == last && i > 0 && self.config.architecture == Architecture::Dcvdsr {
                x = graph.add(x, first_hidden.expect("first layer ran"))?;
            }
        }
        self.apply_layer(graph, &self.head, x, batch, &mut noise, &mut gate_index)
    }

    fn apply_layer(
        &self,
        graph: &mut Graph<'_>,
        layer: &Layer,
        mut x: Var,
        batch: usize,
        noise: &mut GateNoise<'_>,
        gate_index: &mut usize,
    ) -> Result<Var, Error> {
        if let Some(gate) = &layer.gate {
            let logit = graph.param(gate.logit);
            let shape = [batch, layer.fan_in];
            match noise {
                GateNoise::Sample(rng) => {
                    let u = sample_uniform(&shape, &mut **rng);
                    x = graph.concrete_gate(x, logit, &u, gate.temperature)?;
                }
                GateNoise::Fixed(fixed) => {
                    x = graph.concrete_gate(x, logit, &fixed[*gate_index], gate.temperature)?;
                }
                GateNoise::Expectation => {}
            }
            *gate_index += 1;
        }
        let (w, b) = (graph.param(layer.weight), graph.param(layer.bias));
        Ok(if layer.conv {
            graph.conv3x3(x, w, b)?
        } else {
            graph.dense(x, w, b)?
        })
    }

    /// Forward pass without recording gradients, split into its three outputs.
    pub fn predict(&self, input: Tensor, noise: GateNoise<'_>) -> Result<DcPrediction, Error> {
        let mut graph = Graph::new(&self.params);
        let head = self.forward(&mut graph, input, noise)?;
        DcPrediction::from_head(graph.value(head), &self.config)
    }
}

fn weight_shape(conv: bool, c_in: usize, c_out: usize) -> Vec<usize> {
    if conv {
        vec![3, 3, c_in, c_out]
    } else {
        vec![c_in, c_out]
    }
}

fn sample_uniform(shape: &[usize], rng: &mut dyn rand::RngCore) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| Open01.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and data agree")
}
