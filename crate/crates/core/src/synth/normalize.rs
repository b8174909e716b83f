use std::fmt::Write as _;
use std::path::Path;

use super::tile::{TileDataset, INPUT_CHANNELS};
use super::Error;
use crate::io::write_atomic;

/// Smallest standard deviation used for scaling.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-channel affine input scaling, fitted on the training split.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: Vec<f64>,
    /// Channels whose spread fell below the floor.
    pub floored: Vec<String>,
}

/// Fits mean and population standard deviation of every input channel
/// over all pixels of `tiles`.
pub fn fit_stats(tiles: &[TileDataset]) -> Result<NormStats, Error> {
    if tiles.is_empty() {
        return Err(Error::Config(
            "cannot fit normalisation on zero tiles".into(),
        ));
    }
    let c = INPUT_CHANNELS.len();
    let mut n = 0usize;
    let mut sum = vec![0.0; c];
    let mut interleaved = Vec::with_capacity(tiles.len());
    for t in tiles {
        let x = t.inputs_interleaved()?;
        for px in x.chunks_exact(c) {
            for k in 0..c {
                sum[k] += px[k];
            }
        }
        n += x.len() / c;
        interleaved.push(x);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0; c];
    for x in &interleaved {
        for px in x.chunks_exact(c) {
            for k in 0..c {
                sq[k] += (px[k] - mean[k]).powi(2);
            }
        }
    }
    Ok(NormStats::new(
        INPUT_CHANNELS.iter().map(|s| s.to_string()).collect(),
        mean,
        sq.iter().map(|s| (s / n as f64).sqrt()).collect(),
    ))
}

impl NormStats {
    /// Applies the standard-deviation floor and records floored channels.
    pub fn new(names: Vec<String>, mean: Vec<f64>, std: Vec<f64>) -> Self {
        let mut floored = Vec::new();
        let std = std
            .iter()
            .zip(&names)
            .map(|(&s, name)| {
                if s <= STD_FLOOR {
                    floored.push(name.clone());
                    STD_FLOOR
                } else {
                    s
                }
            })
            .collect();
        Self {
            names,
            mean,
            std,
            floored,
        }
    }

    pub fn channels(&self) -> usize {
        self.names.len()
    }

    /// Scales pixel-interleaved values in place: `(x − mean) / std`.
    pub fn normalize(&self, interleaved: &mut [f64]) {
        let c = self.channels();
        for px in interleaved.chunks_exact_mut(c) {
            for ((v, m), s) in px.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn denormalize(&self, interleaved: &mut [f64]) {
        let c = self.channels();
        for px in interleaved.chunks_exact_mut(c) {
            for ((v, m), s) in px.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
    }

    /// One `name mean std` line per channel, floats in shortest
    /// round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in 0..self.channels() {
            writeln!(s, "{} {:?} {:?}", self.names[k], self.mean[k], self.std[k]).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, Error> {
        let (mut names, mut mean, mut std) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let bad = || Error::Corrupt(format!("normalisation line {}: `{line}`", i + 1));
            let mut parts = line.split_whitespace();
            let (Some(name), Some(m), Some(s), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            names.push(name.to_string());
            mean.push(m.parse::<f64>().map_err(|_| bad())?);
            std.push(s.parse::<f64>().map_err(|_| bad())?);
        }
        Ok(Self::new(names, mean, std))
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        write_atomic(path, self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
