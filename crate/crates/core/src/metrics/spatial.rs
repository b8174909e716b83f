use super::Metric;

/// Smallest number of unmasked pixels for which Moran's I is reported.
pub const MIN_PIXELS: usize = 9;

/// Pixels of a `height × width` grid lying within `margin` of its edge.
pub fn edge_pixels(height: usize, width: usize, margin: usize) -> usize {
    let inner = height.saturating_sub(2 * margin) * width.saturating_sub(2 * margin);
    height * width - inner
}

/// Moran's I of a row-major `height × width` field under binary rook
/// (4-neighbour) weights. Pixels with `mask[i] == false` are dropped along
/// with every weight that touches them.
///
/// `I = (n / W) · (Σ_i Σ_j w_ij z_i z_j) / (Σ_i z_i²)`, `z` centred on the
/// unmasked mean. Sums run over `i` in raster order and, for each `i`,
/// over neighbours `j` in increasing index order.
///
/// Undefined below [`MIN_PIXELS`] unmasked pixels, without any unmasked
/// neighbour pair, or on a constant field.
pub fn morans_i(field: &[f64], mask: &[bool], height: usize, width: usize) -> Metric {
    assert_eq!(field.len(), height * width);
    assert_eq!(mask.len(), field.len());
    let n = mask.iter().filter(|&&m| m).count();
    if n < MIN_PIXELS {
        return None;
    }
    let mut total = 0.0;
    for i in 0..field.len() {
        if mask[i] {
            total += field[i];
        }
    }
    let mean = total / n as f64;
    let z: Vec<f64> = field.iter().map(|v| v - mean).collect();

    let (mut cross, mut weights) = (0.0, 0usize);
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if !mask[i] {
                continue;
            }
            let up = (r > 0).then(|| i - width);
            let left = (c > 0).then(|| i - 1);
            let right = (c + 1 < width).then(|| i + 1);
            let down = (r + 1 < height).then(|| i + width);
            for j in [up, left, right, down].into_iter().flatten() {
                if mask[j] {
                    cross += z[i] * z[j];
                    weights += 1;
                }
            }
        }
    }
    let mut sq = 0.0;
    for i in 0..field.len() {
        if mask[i] {
            sq += z[i] * z[i];
        }
    }
    if weights == 0 || sq == 0.0 {
        return None;
    }
    Some((n as f64 / weights as f64) * (cross / sq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_is_perfectly_dispersed() {
        let f: Vec<f64> = (0..16).map(|i| ((i / 4 + i % 4) % 2) as f64).collect();
        assert_eq!(morans_i(&f, &[true; 16], 4, 4), Some(-1.0));
    }

    #[test]
    fn degenerate_fields_are_undefined() {
        assert_eq!(morans_i(&[0.5; 16], &[true; 16], 4, 4), None);
        assert_eq!(morans_i(&[0.5; 4], &[true; 4], 2, 2), None);
        // isolated pixels: no weights at all
        let f: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let mask: Vec<bool> = (0..25).map(|i| (i / 5 + i % 5) % 2 == 0).collect();
        assert_eq!(morans_i(&f, &mask, 5, 5), None);
    }
}
