use super::normalize::NormStats;
use super::tile::{TileDataset, INPUT_CHANNELS, TEACHER_CHANNELS};
use super::Error;
use crate::emulator::Sample;
use crate::tensor::Tensor;

/// Training patch side length.
pub const PATCH_SIZE: usize = 50;

/// Top-left corners of every whole `size × size` window at the given
/// stride, row by row. Windows that would cross the far edge are dropped.
pub fn patch_origins(
    height: usize,
    width: usize,
    size: usize,
    stride: usize,
) -> Result<Vec<(usize, usize)>, Error> {
    if size == 0 || stride == 0 {
        return Err(Error::Config(
            "patch size and stride must be positive".into(),
        ));
    }
    if size > height || size > width {
        return Err(Error::Config(format!(
            "patch size {size} exceeds the {height}×{width} tile"
        )));
    }
    let rows = (0..=height - size).step_by(stride);
    Ok(rows
        .flat_map(|r| (0..=width - size).step_by(stride).map(move |c| (r, c)))
        .collect())
}

/// The whole tile as one normalised sample.
pub fn tile_sample(tile: &TileDataset, stats: &NormStats) -> Result<Sample, Error> {
    if stats.channels() != INPUT_CHANNELS.len() {
        return Err(Error::Config(format!(
            "normalisation has {} channels, tiles have {}",
            stats.channels(),
            INPUT_CHANNELS.len()
        )));
    }
    let (h, w) = (tile.height(), tile.width());
    let mut input = tile.inputs_interleaved()?;
    stats.normalize(&mut input);
    let sr = tile.teacher_sr()?;
    let bands = TEACHER_CHANNELS.len();
    let mut target = Vec::with_capacity(h * w * bands);
    for i in 0..h * w {
        target.extend(sr.iter().map(|b| b[i]));
    }
    let label = tile
        .clear_mask()?
        .iter()
        .map(|&c| if c { 1.0 } else { 0.0 })
        .collect();
    Ok(Sample {
        input: Tensor::new(vec![h, w, INPUT_CHANNELS.len()], input)?,
        target: Tensor::new(vec![h, w, bands], target)?,
        label: Tensor::new(vec![h, w], label)?,
    })
}

/// Cuts normalised `size × size` samples from `tile` in the scan order of
/// [`patch_origins`].
pub fn extract_patches(
    tile: &TileDataset,
    stats: &NormStats,
    size: usize,
    stride: usize,
) -> Result<Vec<Sample>, Error> {
    let origins = patch_origins(tile.height(), tile.width(), size, stride)?;
    let whole = tile_sample(tile, stats)?;
    Ok(origins
        .into_iter()
        .map(|(r, c)| crop(&whole, r, c, size))
        .collect())
}

/// Copies the `size × size` window at `(r0, c0)` out of an `[h, w, ..]`
/// sample.
pub fn crop(sample: &Sample, r0: usize, c0: usize, size: usize) -> Sample {
    let cut = |t: &Tensor| {
        let w = t.shape()[1];
        let depth: usize = t.shape()[2..].iter().product();
        let mut data = Vec::with_capacity(size * size * depth);
        for r in r0..r0 + size {
            let start = (r * w + c0) * depth;
            data.extend_from_slice(&t.data()[start..start + size * depth]);
        }
        let mut shape = vec![size, size];
        shape.extend_from_slice(&t.shape()[2..]);
        Tensor::new(shape, data).expect("window fits")
    };
    Sample {
        input: cut(&sample.input),
        target: cut(&sample.target),
        label: cut(&sample.label),
    }
}
