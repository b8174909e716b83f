use emu_core::synth::{
    self, build_dataset, coefficients, extract_patches, fit_stats, generate_scene, load_dataset,
    patch_origins, regenerate, tile_sample, toa_forward, toa_reflectance, Manifest, SceneConfig,
    Split, BANDS, MANIFEST_FILE,
};
use proptest::prelude::*;

// Frozen from a separate scalar evaluation of the closed form at
// SR = 0.3, AOD = 0.2, solar zenith 30°.
const GOLDEN_TOA: [f64; 6] = [
    0.3090996333085195,
    0.3015466007148684,
    0.2928267569412296,
    0.28788511466466615,
    0.2911470463033667,
    0.2933783301161845,
];

fn scalar_toa(wavelength: f64, path_weight: f64, sr: f64, aod: f64, zenith_deg: f64) -> f64 {
    let tau = aod * (wavelength / 0.55f64).powf(-1.3);
    let mu = (zenith_deg * std::f64::consts::PI / 180.0).cos();
    let path = path_weight * (1.0 - (-tau / mu).exp());
    let t = (-0.5 * tau * (1.0 / mu + 1.0)).exp();
    let s = 0.3 * (1.0 - (-tau).exp());
    path + t * sr / (1.0 - s * sr)
}

#[test]
fn golden_toa_values() {
    for (band, golden) in BANDS.iter().zip(GOLDEN_TOA) {
        let got = toa_reflectance(0.3, &coefficients(band, 0.2, 30.0));
        assert!(
            (got - golden).abs() < 1e-14,
            "{}: {got} vs {golden}",
            band.name
        );
        let again = scalar_toa(band.wavelength, band.path_weight, 0.3, 0.2, 30.0);
        assert!((again - golden).abs() < 1e-14);
    }
}

proptest! {
    #[test]
    fn toa_increases_with_surface(
        band in 0usize..6,
        sr in 0.0f64..0.9,
        aod in 0.0f64..1.0,
        zenith in 0.0f64..80.0,
    ) {
        let c = coefficients(&BANDS[band], aod, zenith);
        let h = 1e-4;
        prop_assert!(toa_reflectance(sr + h, &c) > toa_reflectance(sr, &c));
    }

    #[test]
    fn spherical_albedo_stays_bounded(band in 0usize..6, aod in 0.0f64..5.0, zenith in 0.0f64..89.0) {
        let c = coefficients(&BANDS[band], aod, zenith);
        prop_assert!((0.0..=0.3).contains(&c.spherical_albedo));
        prop_assert!(c.path_reflectance >= 0.0);
        prop_assert!(c.transmittance > 0.0 && c.transmittance <= 1.0);
    }
}

#[test]
fn blue_mean_echoes_the_target_magnitude() {
    let cfg = SceneConfig::default();
    let means: Vec<f64> = (0..10)
        .map(|seed| {
            let s = generate_scene(seed, &cfg).unwrap();
            s.surface[0].iter().sum::<f64>() / s.pixels() as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    assert!((mean - 0.064).abs() < 0.02, "mean blue SR {mean}");
    let nir = generate_scene(0, &cfg).unwrap();
    assert!(nir.surface[3].iter().sum::<f64>() > nir.surface[0].iter().sum::<f64>());
}

#[test]
fn clouds_outshine_clear_visible_pixels() {
    let cfg = SceneConfig::default();
    for band in 0..3 {
        let (mut clear, mut cloudy) = (Vec::new(), Vec::new());
        for seed in 0..5 {
            let s = generate_scene(seed, &cfg).unwrap();
            for (i, v) in toa_forward(&s, band).into_iter().enumerate() {
                if s.clear[i] {
                    clear.push(v)
                } else {
                    cloudy.push(v)
                }
            }
        }
        clear.sort_by(f64::total_cmp);
        let p99 = clear[(clear.len() as f64 * 0.99) as usize];
        let dimmest = cloudy.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            dimmest > p99,
            "band {band}: dimmest cloud {dimmest}, clear p99 {p99}"
        );
    }
}

#[test]
fn dataset_is_reproducible_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SceneConfig::default();
    let ds = build_dataset(&[1, 2, 3], &[10], &cfg, dir.path()).unwrap();
    let ids = |split| {
        ds.manifest
            .split(split)
            .map(|e| e.id.clone())
            .collect::<Vec<_>>()
    };
    let (train, test) = (ids(Split::Train), ids(Split::Test));
    assert!(train.iter().all(|id| !test.contains(id)));

    let manifest_path = dir.path().join(MANIFEST_FILE);
    let manifest = Manifest::read(&manifest_path).unwrap();
    assert_eq!(manifest, ds.manifest);
    for e in &manifest.entries {
        let on_disk = std::fs::read(dir.path().join(&e.path)).unwrap();
        assert_eq!(
            regenerate(e, &manifest.scene).unwrap().raster.encode(),
            on_disk,
            "{}",
            e.id
        );
    }
    let loaded = load_dataset(&manifest_path).unwrap();
    assert_eq!(loaded.train.len(), 3);
    assert_eq!(loaded.test[0].raster, ds.test[0].raster);

    assert!(matches!(
        build_dataset(&[1, 2], &[2], &cfg, dir.path()),
        Err(synth::Error::Config(_))
    ));
}

#[test]
fn stride_equal_to_size_covers_each_pixel_once() {
    for (h, w, size) in [(100, 100, 50), (150, 100, 50), (60, 90, 30)] {
        let mut count = vec![0u32; h * w];
        for (r0, c0) in patch_origins(h, w, size, size).unwrap() {
            for r in r0..r0 + size {
                for c in c0..c0 + size {
                    count[r * w + c] += 1;
                }
            }
        }
        assert!(count.iter().all(|&k| k == 1), "{h}×{w}/{size}");
    }
}

#[test]
fn patches_and_normalisation_on_real_tiles() {
    let cfg = SceneConfig::default();
    let tiles: Vec<_> = (0..2)
        .map(|s| synth::build_tile(s, &cfg).unwrap())
        .collect();
    let stats = fit_stats(&tiles).unwrap();
    assert!(stats.floored.is_empty());

    // fitted channels come out standardised over the training pixels
    let c = stats.channels();
    let mut all = Vec::new();
    for t in &tiles {
        all.extend(tile_sample(t, &stats).unwrap().input.into_data());
    }
    let n = (all.len() / c) as f64;
    for k in 0..c {
        let mean = all.iter().skip(k).step_by(c).sum::<f64>() / n;
        let var = all
            .iter()
            .skip(k)
            .step_by(c)
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 1e-6, "channel {k} mean {mean}");
        assert!(
            (var.sqrt() - 1.0).abs() < 1e-6,
            "channel {k} std {}",
            var.sqrt()
        );
    }

    let patches = extract_patches(&tiles[0], &stats, 50, 50).unwrap();
    assert_eq!(patches.len(), 4);
    assert_eq!(patches[0].input.shape(), &[50, 50, 8]);
    assert_eq!(patches[3].target.shape(), &[50, 50, 6]);
    let whole = tile_sample(&tiles[0], &stats).unwrap();
    // the last patch starts at (50, 50)
    assert_eq!(
        patches[3].label.data()[0],
        whole.label.data()[50 * 100 + 50]
    );
    assert!(extract_patches(&tiles[0], &stats, 101, 50).is_err());
}

#[test]
fn teacher_retrieval_inverts_clear_pixels() {
    let cfg = SceneConfig {
        teacher_noise: 0.0,
        ..Default::default()
    };
    let tile = synth::build_tile(4, &cfg).unwrap();
    let inputs = tile.inputs_interleaved().unwrap();
    let (mut sr, mut clear) = (Vec::new(), Vec::new());
    synth::teacher::retrieve(&inputs, &mut sr, &mut clear);
    let mask = tile.clear_mask().unwrap();
    let agree = clear.iter().zip(&mask).filter(|(a, b)| a == b).count();
    assert!(agree as f64 / mask.len() as f64 > 0.99);
    let truth = tile.teacher_sr().unwrap();
    let mut worst = 0.0f64;
    for i in 0..mask.len() {
        if mask[i] && clear[i] {
            for b in 0..6 {
                worst = worst.max((sr[i * 6 + b] - truth[b][i]).abs());
            }
        }
    }
    // f32 storage bounds the agreement
    assert!(worst < 1e-4, "worst {worst}");
}
