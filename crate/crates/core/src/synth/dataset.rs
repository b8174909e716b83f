//! Train/test tile sets split by acquisition and the manifest that
//! records them.
//!
//! The manifest is plain text. Lines starting with `#` carry the scene
//! settings as `# key=value`; every other non-empty line is one tile:
//!
//! ```text
//! <id>\t<path relative to the manifest>\t<train|test>\t<seed>
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::scene::SceneConfig;
use super::tile::{build_tile, Raster, TileDataset};
use super::Error;
use crate::io::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TILE_DIR: &str = "tiles";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub split: Split,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub scene: SceneConfig,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn to_text(&self) -> String {
        let s = &self.scene;
        let mut out = format!(
            "# height={}\n# width={}\n# cloud_coverage={:?}\n# teacher_noise={:?}\n",
            s.height, s.width, s.cloud_coverage, s.teacher_noise
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.id,
                e.path.display(),
                e.split,
                e.seed
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut scene = SceneConfig::default();
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let bad = |m: &str| Error::Manifest {
                line: i + 1,
                message: m.to_string(),
            };
            let line = raw.trim_end();
            if line.trim().is_empty() {
                continue;
            }
            if let Some(setting) = line.strip_prefix('#') {
                let Some((k, v)) = setting.trim().split_once('=') else {
                    continue;
                };
                let num = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| bad(&format!("bad value for `{k}`")))
                };
                match k.trim() {
                    "height" => scene.height = v.trim().parse().map_err(|_| bad("bad height"))?,
                    "width" => scene.width = v.trim().parse().map_err(|_| bad("bad width"))?,
                    "cloud_coverage" => scene.cloud_coverage = num(v)?,
                    "teacher_noise" => scene.teacher_noise = num(v)?,
                    other => return Err(bad(&format!("unknown setting `{other}`"))),
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, path, split, seed] = fields[..] else {
                return Err(bad("expected 4 tab-separated fields"));
            };
            entries.push(ManifestEntry {
                id: id.to_string(),
                path: PathBuf::from(path),
                split: split
                    .parse()
                    .map_err(|_| bad(&format!("unknown split `{split}`")))?,
                seed: seed.parse().map_err(|_| bad("bad seed"))?,
            });
        }
        scene.validate()?;
        Ok(Self { scene, entries })
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        write_atomic(path, self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub train: Vec<TileDataset>,
    pub test: Vec<TileDataset>,
}

/// Fails if any seed repeats, within or across splits.
pub fn check_disjoint(train_seeds: &[u64], test_seeds: &[u64]) -> Result<(), Error> {
    let mut seen = BTreeSet::new();
    for &s in train_seeds.iter().chain(test_seeds) {
        if !seen.insert(s) {
            return Err(Error::Config(format!(
                "seed {s} appears more than once; train and test acquisitions must be disjoint"
            )));
        }
    }
    Ok(())
}

/// Generates every tile in memory, in seed-list order.
pub fn generate_dataset(
    train_seeds: &[u64],
    test_seeds: &[u64],
    scene: &SceneConfig,
) -> Result<Dataset, Error> {
    check_disjoint(train_seeds, test_seeds)?;
    scene.validate()?;
    let make = |seeds: &[u64]| -> Result<Vec<TileDataset>, Error> {
        seeds.par_iter().map(|&s| build_tile(s, scene)).collect()
    };
    let train = make(train_seeds)?;
    let test = make(test_seeds)?;
    let entries = train
        .iter()
        .map(|t| (t, Split::Train))
        .chain(test.iter().map(|t| (t, Split::Test)))
        .map(|(t, split)| ManifestEntry {
            id: t.id.clone(),
            path: Path::new(TILE_DIR).join(format!("{}.gtil", t.id)),
            split,
            seed: t.acquisition,
        })
        .collect();
    Ok(Dataset {
        manifest: Manifest {
            scene: scene.clone(),
            entries,
        },
        train,
        test,
    })
}

/// Generates the dataset and writes the tiles plus [`MANIFEST_FILE`]
/// under `out_dir`.
pub fn build_dataset(
    train_seeds: &[u64],
    test_seeds: &[u64],
    scene: &SceneConfig,
    out_dir: &Path,
) -> Result<Dataset, Error> {
    let ds = generate_dataset(train_seeds, test_seeds, scene)?;
    let tiles: Vec<&TileDataset> = ds.train.iter().chain(&ds.test).collect();
    tiles
        .par_iter()
        .zip(&ds.manifest.entries)
        .try_for_each(|(t, e)| t.raster.write(&out_dir.join(&e.path)))?;
    ds.manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(ds)
}

/// Reads every tile listed in the manifest at `manifest_path`.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, Error> {
    let manifest = Manifest::read(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for e in &manifest.entries {
        let raster = Raster::read(&root.join(&e.path))?;
        if raster.height() != manifest.scene.height || raster.width() != manifest.scene.width {
            return Err(Error::Shape(format!(
                "tile {} is {}×{}, manifest says {}×{}",
                e.id,
                raster.height(),
                raster.width(),
                manifest.scene.height,
                manifest.scene.width
            )));
        }
        let tile = TileDataset {
            id: e.id.clone(),
            acquisition: e.seed,
            raster,
        };
        match e.split {
            Split::Train => train.push(tile),
            Split::Test => test.push(tile),
        }
    }
    Ok(Dataset {
        manifest,
        train,
        test,
    })
}

/// Rebuilds the tile an entry describes from its seed alone.
pub fn regenerate(entry: &ManifestEntry, scene: &SceneConfig) -> Result<TileDataset, Error> {
    build_tile(entry.seed, scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_seeds_are_rejected() {
        assert!(check_disjoint(&[1, 2, 3], &[4, 5]).is_ok());
        assert!(matches!(
            check_disjoint(&[1, 2, 3], &[3, 4]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            check_disjoint(&[1, 1], &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn manifest_text_round_trip() {
        let m = Manifest {
            scene: SceneConfig {
                height: 60,
                width: 80,
                cloud_coverage: 0.25,
                teacher_noise: 0.5,
            },
            entries: vec![
                ManifestEntry {
                    id: "tile-00001".into(),
                    path: "tiles/tile-00001.gtil".into(),
                    split: Split::Train,
                    seed: 1,
                },
                ManifestEntry {
                    id: "tile-00009".into(),
                    path: "tiles/tile-00009.gtil".into(),
                    split: Split::Test,
                    seed: 9,
                },
            ],
        };
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
        assert!(matches!(
            Manifest::parse("a\tb\tvalidation\t3\n"),
            Err(Error::Manifest { line: 1, .. })
        ));
    }
}
