use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// Dense layers applied independently at every pixel.
    Dcfc,
    /// Stack of 3×3 convolutions.
    Dccnn,
    /// `Dccnn` plus an additive skip from the first to the last hidden activation.
    Dcvdsr,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::Dcfc,
        Architecture::Dccnn,
        Architecture::Dcvdsr,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Dcfc => "dcfc",
            Architecture::Dccnn => "dccnn",
            Architecture::Dcvdsr => "dcvdsr",
        }
    }

    pub fn is_convolutional(self) -> bool {
        !matches!(self, Architecture::Dcfc)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::UnknownArchitecture(s.to_string()))
    }
}

/// How the aleatoric variance head is shaped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceMode {
    /// One log-variance per band.
    PerBand,
    /// A single log-variance shared by all bands.
    Scalar,
}

impl VarianceMode {
    fn tag(self) -> &'static str {
        match self {
            VarianceMode::PerBand => "per-band",
            VarianceMode::Scalar => "scalar",
        }
    }
}

impl FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "per-band" => Ok(VarianceMode::PerBand),
            "scalar" => Ok(VarianceMode::Scalar),
            other => Err(Error::Config(format!("unknown variance mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub hidden_layers: usize,
    /// Hidden units (dense) or channels (convolutional).
    pub hidden_units: usize,
    pub input_channels: usize,
    pub output_bands: usize,
    pub variance: VarianceMode,
    /// Regularizer precision τ.
    pub tau: f64,
    /// Prior length-scale term, used directly as ℓ² in the weight regularizer.
    pub length_scale: f64,
    pub temperature: f64,
    pub init_dropout: f64,
    /// Number of training observations N the regularizer scales are divided by.
    pub dataset_size: u64,
    pub dropout_on_head: bool,
    /// Initial bias of the log-variance outputs.
    pub init_log_variance: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Dcfc,
            hidden_layers: 3,
            hidden_units: 512,
            input_channels: 8,
            output_bands: 6,
            variance: VarianceMode::PerBand,
            tau: 1e-5,
            length_scale: 1e-14,
            temperature: 0.1,
            init_dropout: 0.1,
            dataset_size: 1_000_000,
            dropout_on_head: false,
            init_log_variance: -5.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden_layers == 0 {
            return fail("hidden_layers must be at least 1");
        }
        if self.architecture == Architecture::Dcvdsr && self.hidden_layers < 2 {
            return fail("dcvdsr needs at least 2 hidden layers for its skip connection");
        }
        if self.hidden_units == 0 || self.input_channels == 0 || self.output_bands == 0 {
            return fail("units, input channels and bands must be at least 1");
        }
        if !(self.tau > 0.0) || !(self.length_scale >= 0.0) || self.dataset_size == 0 {
            return fail("tau and dataset_size must be positive, length_scale non-negative");
        }
        if !(self.temperature > 0.0) {
            return fail("temperature must be positive");
        }
        if !(self.init_dropout > 0.0 && self.init_dropout < 1.0) {
            return fail("init_dropout must lie in (0, 1)");
        }
        if !self.init_log_variance.is_finite() {
            return fail("init_log_variance must be finite");
        }
        Ok(())
    }

    /// Distance from the tile edge within which a prediction depends on
    /// zero padding: one pixel per 3×3 convolution, none for dense models.
    pub fn edge_margin(&self) -> usize {
        if self.architecture.is_convolutional() {
            self.hidden_layers + 1
        } else {
            0
        }
    }

    /// Per-layer scale of the `‖W‖²/(1−p)` term: ℓ²/N.
    pub fn weight_regularizer_scale(&self) -> f64 {
        self.length_scale / self.dataset_size as f64
    }

    /// Per-layer scale of the entropy term: 2/(τN).
    pub fn dropout_regularizer_scale(&self) -> f64 {
        2.0 / (self.tau * self.dataset_size as f64)
    }

    /// Channels emitted by the output head.
    pub fn head_channels(&self) -> usize {
        match self.variance {
            VarianceMode::PerBand => 2 * self.output_bands + 1,
            VarianceMode::Scalar => self.output_bands + 2,
        }
    }

    /// Canonical key-sorted `key=value` lines.
    pub fn to_canonical_text(&self) -> String {
        let mut m = BTreeMap::new();
        m.insert("architecture", self.architecture.tag().to_string());
        m.insert("dataset_size", self.dataset_size.to_string());
        m.insert("dropout_on_head", self.dropout_on_head.to_string());
        m.insert("hidden_layers", self.hidden_layers.to_string());
        m.insert("hidden_units", self.hidden_units.to_string());
        m.insert("init_dropout", format!("{:?}", self.init_dropout));
        m.insert("init_log_variance", format!("{:?}", self.init_log_variance));
        m.insert("input_channels", self.input_channels.to_string());
        m.insert("length_scale", format!("{:?}", self.length_scale));
        m.insert("output_bands", self.output_bands.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("tau", format!("{:?}", self.tau));
        m.insert("temperature", format!("{:?}", self.temperature));
        m.insert("variance", self.variance.tag().to_string());
        m.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn from_canonical_text(text: &str) -> Result<Self, Error> {
        let mut cfg = ModelConfig::default();
        let mut seen = 0;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed line `{line}`")))?;
            cfg.set(key.trim(), value.trim())?;
            seen += 1;
        }
        if seen != 14 {
            return Err(Error::Config(format!(
                "expected 14 model keys, found {seen}"
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, Error> {
            v.parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
        }
        match key {
            "architecture" => self.architecture = value.parse()?,
            "dataset_size" => self.dataset_size = num(key, value)?,
            "dropout_on_head" => self.dropout_on_head = num(key, value)?,
            "hidden_layers" => self.hidden_layers = num(key, value)?,
            "hidden_units" => self.hidden_units = num(key, value)?,
            "init_dropout" => self.init_dropout = num(key, value)?,
            "init_log_variance" => self.init_log_variance = num(key, value)?,
            "input_channels" => self.input_channels = num(key, value)?,
            "length_scale" => self.length_scale = num(key, value)?,
            "output_bands" => self.output_bands = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "temperature" => self.temperature = num(key, value)?,
            "variance" => self.variance = value.parse()?,
            other => return Err(Error::Config(format!("unknown model key `{other}`"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let cfg = ModelConfig {
            architecture: Architecture::Dcvdsr,
            hidden_units: 17,
            variance: VarianceMode::Scalar,
            temperature: 0.07,
            seed: 99,
            ..Default::default()
        };
        let text = cfg.to_canonical_text();
        let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(ModelConfig::from_canonical_text(&text).unwrap(), cfg);
    }

    #[test]
    fn architecture_tags() {
        assert_eq!("dcfc".parse::<Architecture>().unwrap(), Architecture::Dcfc);
        assert_eq!(
            "dccnn".parse::<Architecture>().unwrap(),
            Architecture::Dccnn
        );
        assert_eq!(
            "dcvdsr".parse::<Architecture>().unwrap(),
            Architecture::Dcvdsr
        );
        assert!(matches!(
            "DCFC".parse::<Architecture>(),
            Err(Error::UnknownArchitecture(_))
        ));
        assert!("resnet".parse::<Architecture>().is_err());
    }

    #[test]
    fn regularizer_scales_follow_prior_settings() {
        let cfg = ModelConfig {
            dataset_size: 1000,
            ..Default::default()
        };
        assert!((cfg.weight_regularizer_scale() - 1e-17).abs() < 1e-30);
        assert!((cfg.dropout_regularizer_scale() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ModelConfig {
                hidden_layers: 0,
                ..Default::default()
            },
            ModelConfig {
                output_bands: 0,
                ..Default::default()
            },
            ModelConfig {
                architecture: Architecture::Dcvdsr,
                hidden_layers: 1,
                ..Default::default()
            },
            ModelConfig {
                init_dropout: 1.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(ModelConfig::default().validate().is_ok());
    }
}
