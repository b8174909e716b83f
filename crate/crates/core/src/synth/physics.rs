//! Closed-form stand-in for atmospheric radiative transfer.
//!
//! For aerosol optical depth `A` (at 550 nm) and solar zenith `θ`, band `b`
//! sees an aerosol extinction `τ_b = A·(λ_b / 0.55)^-1.3` and
//!
//! ```text
//! ρ_path = ω_b · (1 − exp(−τ_b / cos θ))
//! t      = exp(−½ τ_b (1 / cos θ + 1))
//! S      = 0.3 · (1 − exp(−τ_b))
//! TOA    = ρ_path + t·SR / (1 − S·SR)
//! ```
//!
//! Every coefficient vanishes (or reaches 1 for `t`) at zero aerosol, so a
//! transparent atmosphere reproduces the surface exactly. Path reflectance
//! grows with aerosol; transmittance falls with aerosol and zenith angle;
//! `S` stays in `[0, 0.3)`.

/// Ångström exponent of the aerosol model.
pub const ANGSTROM_EXPONENT: f64 = 1.3;
/// Upper bound of the spherical albedo.
pub const MAX_SPHERICAL_ALBEDO: f64 = 0.3;

/// One solar reflective band of the synthetic sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandSpec {
    pub name: &'static str,
    /// Centre wavelength in micrometres.
    pub wavelength: f64,
    /// Scene-mean surface reflectance.
    pub mean_reflectance: f64,
    /// Coefficient of variation of surface reflectance (fraction).
    pub variation: f64,
    /// Aerosol single-scattering path weight ω_b.
    pub path_weight: f64,
}

pub const BANDS: [BandSpec; 6] = [
    BandSpec {
        name: "blue",
        wavelength: 0.46,
        mean_reflectance: 0.064,
        variation: 0.88,
        path_weight: 0.30,
    },
    BandSpec {
        name: "green",
        wavelength: 0.51,
        mean_reflectance: 0.084,
        variation: 0.80,
        path_weight: 0.27,
    },
    BandSpec {
        name: "red",
        wavelength: 0.64,
        mean_reflectance: 0.155,
        variation: 0.62,
        path_weight: 0.22,
    },
    BandSpec {
        name: "nir",
        wavelength: 0.86,
        mean_reflectance: 0.307,
        variation: 0.34,
        path_weight: 0.16,
    },
    BandSpec {
        name: "swir1",
        wavelength: 1.6,
        mean_reflectance: 0.327,
        variation: 0.38,
        path_weight: 0.10,
    },
    BandSpec {
        name: "swir2",
        wavelength: 2.3,
        mean_reflectance: 0.231,
        variation: 0.51,
        path_weight: 0.07,
    },
];

/// Atmospheric coefficients for one band at one pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub path_reflectance: f64,
    pub transmittance: f64,
    pub spherical_albedo: f64,
}

pub fn aerosol_extinction(band: &BandSpec, aod: f64) -> f64 {
    aod * (band.wavelength / 0.55).powf(-ANGSTROM_EXPONENT)
}

pub fn coefficients(band: &BandSpec, aod: f64, solar_zenith_deg: f64) -> Coefficients {
    let tau = aerosol_extinction(band, aod);
    let mu = solar_zenith_deg.to_radians().cos();
    Coefficients {
        path_reflectance: band.path_weight * (1.0 - (-tau / mu).exp()),
        transmittance: (-0.5 * tau * (1.0 / mu + 1.0)).exp(),
        spherical_albedo: MAX_SPHERICAL_ALBEDO * (1.0 - (-tau).exp()),
    }
}

/// Top-of-atmosphere reflectance of a clear pixel, clipped to `[0, 1]`.
pub fn toa_reflectance(surface: f64, c: &Coefficients) -> f64 {
    let toa = c.path_reflectance + c.transmittance * surface / (1.0 - c.spherical_albedo * surface);
    toa.clamp(0.0, 1.0)
}

/// Exact inverse of [`toa_reflectance`] on its unclipped range: the
/// teacher's own atmospheric correction.
pub fn surface_reflectance(toa: f64, c: &Coefficients) -> f64 {
    let d = toa - c.path_reflectance;
    d / (c.transmittance + c.spherical_albedo * d)
}
