//! The teacher's retrieval run directly on raw tile inputs.

use super::physics::{coefficients, surface_reflectance, BANDS};
use super::tile::INPUT_CHANNELS;

/// Blue TOA reflectance above which a pixel is called cloudy.
pub const CLOUD_TEST_THRESHOLD: f64 = 0.55;

/// Retrieves surface reflectance and a clear-sky flag for each pixel of
/// unnormalised, pixel-interleaved inputs in tile channel order.
///
/// Cloudy pixels get reflectance 0.
pub fn retrieve(inputs: &[f64], sr: &mut Vec<f64>, clear: &mut Vec<bool>) {
    let c = INPUT_CHANNELS.len();
    sr.clear();
    clear.clear();
    for px in inputs.chunks_exact(c) {
        let (zenith, aod) = (px[6], px[7]);
        let is_clear = px[0] <= CLOUD_TEST_THRESHOLD;
        clear.push(is_clear);
        for (b, band) in BANDS.iter().enumerate() {
            sr.push(if is_clear {
                surface_reflectance(px[b], &coefficients(band, aod, zenith)).clamp(0.0, 1.0)
            } else {
                0.0
            });
        }
    }
}
