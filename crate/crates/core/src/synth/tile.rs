//! Multi-channel raster tiles and their on-disk form.
//!
//! ```text
//! "GTIL"          4 bytes
//! version         u16
//! height, width   u32, u32
//! channel count   u32
//! names           per channel: u32 byte length, UTF-8 bytes
//! data            f32 per pixel, channel-major, each channel row-major
//! crc32           u32 over every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::physics::BANDS;
use super::scene::{generate_scene, toa_forward, SceneConfig, SceneParams};
use super::Error;
use crate::io::write_atomic;

pub const TILE_MAGIC: &[u8; 4] = b"GTIL";
pub const TILE_VERSION: u16 = 1;

/// Model inputs, in network channel order. Extra ancillary inputs, such
/// as a time-of-acquisition feature, are added here; checkpoints record the
/// channel count and refuse a mismatched list.
pub const INPUT_CHANNELS: [&str; 8] = [
    "toa_blue",
    "toa_green",
    "toa_red",
    "toa_nir",
    "toa_swir1",
    "toa_swir2",
    "solar_zenith",
    "aod",
];
pub const TEACHER_CHANNELS: [&str; 6] = [
    "sr_blue", "sr_green", "sr_red", "sr_nir", "sr_swir1", "sr_swir2",
];
/// 1 = clear sky.
pub const CLEAR_MASK: &str = "clear_mask";
pub const CLASS_MAP: &str = "class_map";

/// Standard deviation of the teacher's retrieval error at reflectance `sr`.
pub fn teacher_noise_std(sr: f64) -> f64 {
    0.002 + 0.015 * sr
}

/// Named `f32` channels over a shared `height × width` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    height: usize,
    width: usize,
    names: Vec<String>,
    channels: Vec<Vec<f32>>,
}

impl Raster {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            names: Vec::new(),
            channels: Vec::new(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn push(&mut self, name: &str, data: Vec<f32>) -> Result<(), Error> {
        if data.len() != self.pixels() {
            return Err(Error::Shape(format!(
                "channel `{name}` has {} values for a {}×{} raster",
                data.len(),
                self.height,
                self.width
            )));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(Error::Shape(format!("duplicate channel `{name}`")));
        }
        self.names.push(name.to_string());
        self.channels.push(data);
        Ok(())
    }

    pub fn push_f64(&mut self, name: &str, data: &[f64]) -> Result<(), Error> {
        self.push(name, data.iter().map(|&v| v as f32).collect())
    }

    pub fn channel(&self, name: &str) -> Result<&[f32], Error> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.channels[i].as_slice())
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    pub fn channel_f64(&self, name: &str) -> Result<Vec<f64>, Error> {
        Ok(self.channel(name)?.iter().map(|&v| v as f64).collect())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18 + self.channels.len() * (16 + 4 * self.pixels()) + 4);
        out.extend_from_slice(TILE_MAGIC);
        out.extend_from_slice(&TILE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.channels.len() as u32).to_le_bytes());
        for name in &self.names {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for ch in &self.channels {
            for v in ch {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, Error> {
        let corrupt = |m: &str| Error::Corrupt(m.to_string());
        if bytes.len() < 18 + 4 {
            return Err(corrupt("file too short"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
            return Err(corrupt("checksum mismatch"));
        }
        if &body[..4] != TILE_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes([body[4], body[5]]);
        if version != TILE_VERSION {
            return Err(Error::Version {
                found: version,
                expected: TILE_VERSION,
            });
        }
        let mut pos = 6;
        let u32_at = |pos: &mut usize| -> Result<usize, Error> {
            let b = body
                .get(*pos..*pos + 4)
                .ok_or_else(|| corrupt("header overruns file"))?;
            *pos += 4;
            Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
        };
        let height = u32_at(&mut pos)?;
        let width = u32_at(&mut pos)?;
        let count = u32_at(&mut pos)?;
        let mut raster = Raster::new(height, width);
        let mut names = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = u32_at(&mut pos)?;
            let raw = body
                .get(pos..pos + len)
                .ok_or_else(|| corrupt("channel name overruns file"))?;
            names.push(
                String::from_utf8(raw.to_vec())
                    .map_err(|_| corrupt("channel name is not UTF-8"))?,
            );
            pos += len;
        }
        let n = height * width;
        if n.checked_mul(4 * count) != Some(body.len() - pos) {
            return Err(corrupt("data block does not match the header"));
        }
        for (k, name) in names.iter().enumerate() {
            let start = pos + 4 * n * k;
            let data = body[start..start + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            raster
                .push(name, data)
                .map_err(|e| corrupt(&e.to_string()))?;
        }
        Ok(raster)
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        write_atomic(path, &self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        Self::decode(&std::fs::read(path)?)
    }
}

/// One generated acquisition: model inputs plus the teacher's retrieval.
#[derive(Clone, Debug, PartialEq)]
pub struct TileDataset {
    pub id: String,
    /// Synthetic acquisition time; also the generation seed.
    pub acquisition: u64,
    pub raster: Raster,
}

impl TileDataset {
    pub fn id_for(seed: u64) -> String {
        format!("tile-{seed:05}")
    }

    pub fn height(&self) -> usize {
        self.raster.height()
    }

    pub fn width(&self) -> usize {
        self.raster.width()
    }

    /// Teacher surface reflectance, one row-major field per band.
    pub fn teacher_sr(&self) -> Result<Vec<Vec<f64>>, Error> {
        TEACHER_CHANNELS
            .iter()
            .map(|c| self.raster.channel_f64(c))
            .collect()
    }

    pub fn clear_mask(&self) -> Result<Vec<bool>, Error> {
        Ok(self
            .raster
            .channel(CLEAR_MASK)?
            .iter()
            .map(|&v| v == 1.0)
            .collect())
    }

    pub fn class_map(&self) -> Result<Vec<u8>, Error> {
        Ok(self
            .raster
            .channel(CLASS_MAP)?
            .iter()
            .map(|&v| v as u8)
            .collect())
    }

    /// Inputs interleaved per pixel, `[h·w·C]` in [`INPUT_CHANNELS`] order.
    pub fn inputs_interleaved(&self) -> Result<Vec<f64>, Error> {
        let chans: Vec<&[f32]> = INPUT_CHANNELS
            .iter()
            .map(|c| self.raster.channel(c))
            .collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(self.raster.pixels() * chans.len());
        for i in 0..self.raster.pixels() {
            out.extend(chans.iter().map(|c| c[i] as f64));
        }
        Ok(out)
    }
}

/// Generates the scene for `seed`, runs the forward model and the noisy
/// teacher retrieval, and packs everything into a tile.
///
/// Cloudy pixels carry teacher reflectance 0; the mask is authoritative.
pub fn build_tile(seed: u64, config: &SceneConfig) -> Result<TileDataset, Error> {
    let scene = generate_scene(seed, config)?;
    tile_from_scene(seed, &scene, config.teacher_noise)
}

pub fn tile_from_scene(
    seed: u64,
    scene: &SceneParams,
    teacher_noise: f64,
) -> Result<TileDataset, Error> {
    let mut raster = Raster::new(scene.height, scene.width);
    for (b, name) in INPUT_CHANNELS[..BANDS.len()].iter().enumerate() {
        raster.push_f64(name, &toa_forward(scene, b))?;
    }
    raster.push_f64(INPUT_CHANNELS[6], &scene.solar_zenith)?;
    raster.push_f64(INPUT_CHANNELS[7], &scene.aod)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    for (b, name) in TEACHER_CHANNELS.iter().enumerate() {
        let sr: Vec<f64> = (0..scene.pixels())
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let truth = scene.surface[b][i];
                if scene.clear[i] {
                    (truth + teacher_noise * teacher_noise_std(truth) * z).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        raster.push_f64(name, &sr)?;
    }
    raster.push(
        CLEAR_MASK,
        scene
            .clear
            .iter()
            .map(|&c| if c { 1.0 } else { 0.0 })
            .collect(),
    )?;
    raster.push(
        CLASS_MAP,
        scene.class_map.iter().map(|&c| c as f32).collect(),
    )?;
    Ok(TileDataset {
        id: TileDataset::id_for(seed),
        acquisition: seed,
        raster,
    })
}
