use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::{smooth_field, standardize, Band};
use super::physics::{coefficients, toa_reflectance, BandSpec, BANDS};
use super::Error;
use crate::autodiff::logistic;

/// Smallest tile side accepted by [`generate_scene`].
pub const MIN_SIDE: usize = 50;
/// Class-map cut points on the vegetation latent.
pub const CLASS_CUTS: [f64; 3] = [-0.8, 0.2, 1.0];
pub const NUM_CLASSES: usize = CLASS_CUTS.len() + 1;
pub const CLOUD_ALBEDO_RANGE: (f64, f64) = (0.6, 0.95);
pub const AOD_RANGE: (f64, f64) = (0.02, 0.6);

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    /// Fraction of cloudy pixels, in `[0, 1]`.
    pub cloud_coverage: f64,
    /// Multiplier on the teacher's retrieval noise; 0 makes the teacher
    /// exact on clear pixels.
    pub teacher_noise: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            height: 100,
            width: 100,
            cloud_coverage: 0.3,
            teacher_noise: 1.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.height < MIN_SIDE || self.width < MIN_SIDE {
            return Err(Error::Config(format!(
                "tile is {}×{}, both sides must be at least {MIN_SIDE}",
                self.height, self.width
            )));
        }
        if !(0.0..=1.0).contains(&self.cloud_coverage) {
            return Err(Error::Config(format!(
                "cloud_coverage {} is outside [0, 1]",
                self.cloud_coverage
            )));
        }
        if !(self.teacher_noise >= 0.0 && self.teacher_noise.is_finite()) {
            return Err(Error::Config(format!(
                "teacher_noise {} must be finite and ≥ 0",
                self.teacher_noise
            )));
        }
        Ok(())
    }
}

/// Surface, atmosphere and geometry of one synthetic acquisition. Every
/// field is row-major over `height × width`.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneParams {
    pub height: usize,
    pub width: usize,
    pub bands: Vec<BandSpec>,
    /// Surface reflectance, one field per band, in `[0, 1]`.
    pub surface: Vec<Vec<f64>>,
    /// Aerosol optical depth at 550 nm, ≥ 0.
    pub aod: Vec<f64>,
    /// Solar zenith in degrees, in `[0, 90)`. The view is nadir.
    pub solar_zenith: Vec<f64>,
    /// Cloud-top albedo; only read where the pixel is cloudy.
    pub cloud_albedo: Vec<f64>,
    /// `true` = clear sky.
    pub clear: Vec<bool>,
    pub class_map: Vec<u8>,
}

impl SceneParams {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Spectral loadings of each band on the (vegetation, soil) latents.
const LOADINGS: [(f64, f64); 6] = [
    (-0.6, 0.6),
    (-0.4, 0.7),
    (-0.7, 0.5),
    (0.8, 0.4),
    (-0.3, 0.8),
    (-0.5, 0.7),
];
const OWN_LOADING: f64 = 0.5;

pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<SceneParams, Error> {
    config.validate()?;
    let (h, w) = (config.height, config.width);
    let n = h * w;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let veg = smooth_field(&mut rng, h, w, Band::LAND);
    let soil = smooth_field(&mut rng, h, w, Band::LAND);
    let mut surface = Vec::with_capacity(BANDS.len());
    for (band, &(a, c)) in BANDS.iter().zip(&LOADINGS) {
        let own = smooth_field(&mut rng, h, w, Band::LAND);
        let mut u: Vec<f64> = (0..n)
            .map(|i| a * veg[i] + c * soil[i] + OWN_LOADING * own[i])
            .collect();
        standardize(&mut u);
        let sigma = (1.0 + band.variation * band.variation).ln().sqrt();
        surface.push(
            u.iter()
                .map(|&z| {
                    (band.mean_reflectance * (sigma * z - 0.5 * sigma * sigma).exp())
                        .clamp(0.0, 1.0)
                })
                .collect(),
        );
    }

    let aod_z = smooth_field(&mut rng, h, w, Band::ATMOSPHERE);
    let aod_offset: f64 = rng.random_range(-1.0..1.0);
    let (aod_lo, aod_hi) = AOD_RANGE;
    let aod = aod_z
        .iter()
        .map(|&z| aod_lo + (aod_hi - aod_lo) * logistic(z + aod_offset))
        .collect();

    let base_zenith: f64 = rng.random_range(15.0..55.0);
    let zen_z = smooth_field(&mut rng, h, w, Band::ATMOSPHERE);
    let solar_zenith = (0..n)
        .map(|i| {
            let col = (i % w) as f64 / (w - 1) as f64;
            (base_zenith + 8.0 * (col - 0.5) + 2.0 * zen_z[i]).clamp(0.0, 89.0)
        })
        .collect();

    let cloud_z = smooth_field(&mut rng, h, w, Band::CLOUD);
    let albedo_z = smooth_field(&mut rng, h, w, Band::CLOUD);
    let (alb_lo, alb_hi) = CLOUD_ALBEDO_RANGE;
    let cloud_albedo = albedo_z
        .iter()
        .map(|&z| alb_lo + (alb_hi - alb_lo) * logistic(1.5 * z))
        .collect();

    Ok(SceneParams {
        height: h,
        width: w,
        bands: BANDS.to_vec(),
        surface,
        aod,
        solar_zenith,
        cloud_albedo,
        clear: cloud_mask(&cloud_z, config.cloud_coverage),
        class_map: veg
            .iter()
            .map(|&z| CLASS_CUTS.iter().filter(|&&c| z >= c).count() as u8)
            .collect(),
    })
}

/// Marks the `round(coverage·n)` largest latent values cloudy.
fn cloud_mask(latent: &[f64], coverage: f64) -> Vec<bool> {
    let n = latent.len();
    let cloudy = (coverage * n as f64).round() as usize;
    if cloudy == 0 {
        return vec![true; n];
    }
    let mut sorted = latent.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[n - cloudy];
    latent.iter().map(|&z| z < cut).collect()
}

/// Top-of-atmosphere reflectance of band `band` over the whole scene.
pub fn toa_forward(scene: &SceneParams, band: usize) -> Vec<f64> {
    let spec = &scene.bands[band];
    (0..scene.pixels())
        .map(|i| {
            if scene.clear[i] {
                let c = coefficients(spec, scene.aod[i], scene.solar_zenith[i]);
                toa_reflectance(scene.surface[band][i], &c)
            } else {
                scene.cloud_albedo[i].clamp(0.0, 1.0)
            }
        })
        .collect()
}
