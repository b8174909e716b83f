//! Band-limited random fields.

use rand::Rng;
use std::f64::consts::TAU;

/// Number of plane waves summed per field.
pub const MODES: usize = 24;

/// Spatial band of a field, as wavelengths in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub min_wavelength: f64,
    pub max_wavelength: f64,
}

impl Band {
    pub const LAND: Band = Band {
        min_wavelength: 12.0,
        max_wavelength: 120.0,
    };
    pub const ATMOSPHERE: Band = Band {
        min_wavelength: 60.0,
        max_wavelength: 300.0,
    };
    pub const CLOUD: Band = Band {
        min_wavelength: 20.0,
        max_wavelength: 90.0,
    };
}

/// A sum of [`MODES`] random plane waves, standardised to zero mean and
/// unit population variance over the `h × w` grid (row-major).
///
/// A grid on which every wave is flat would have zero variance; the
/// result is then all zeros.
pub fn smooth_field<R: Rng + ?Sized>(rng: &mut R, h: usize, w: usize, band: Band) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64)> = (0..MODES)
        .map(|_| {
            let wl = rng.random_range(band.min_wavelength..band.max_wavelength);
            let dir = rng.random_range(0.0..TAU);
            let phase = rng.random_range(0.0..TAU);
            let k = TAU / wl;
            (k * dir.cos(), k * dir.sin(), phase)
        })
        .collect();
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let (y, x) = (r as f64, c as f64);
            out.push(
                waves
                    .iter()
                    .map(|&(ky, kx, p)| (ky * y + kx * x + p).cos())
                    .sum(),
            );
        }
    }
    standardize(&mut out);
    out
}

pub(crate) fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
    for x in v.iter_mut() {
        *x = (*x - mean) * scale;
    }
}
