use std::path::PathBuf;

use srpac_core::acquisition::{acquire_stack, add_noise, load_stack, save_stack, PositioningModel};
use srpac_core::bounds::{nd_map, BoundsConfig, NdBound, SpectrumModel};
use srpac_core::fusion::{decompose, fuse};
use srpac_core::montecarlo::{
    exceedance_map, p2_lower_bound_map, run, run_on, snr_sweep, spearman, unreliable_spatial, LocalizeMode, LocalizeParams, McExperiment,
    Quantities, Quantity, SceneSpec,
};
use srpac_core::grid::FrequencyGrid;
use srpac_core::plane::signed_freq;
use srpac_core::scene::{apply_blur, load_scene, save_scene, synth_power_law, Psf};

fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets").join(name)
}

fn experiment(side: usize, nd: Vec<usize>, trials: usize) -> McExperiment {
    McExperiment {
        scene: SceneSpec::PowerLaw { side, eta: 0.0, seed: 1 },
        psf: Psf::Dirac,
        model: PositioningModel::new(2, 0.01, 1),
        nd,
        trials,
        seed: 5,
        noise_sigma: 0.0,
        quantities: Quantities::ALL,
    }
}

#[test]
fn stack_survives_disk_round_trip() {
    let scene = synth_power_law(32, 0.0, 9).unwrap();
    let model = PositioningModel::new(2, 0.02, 2);
    let mut stack = acquire_stack(&scene, &Psf::Gaussian { width: 0.5 }, &model, 4, 0).unwrap();
    add_noise(&mut stack, 0.01).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_stack(&stack, dir.path()).unwrap();
    let back = load_stack(dir.path()).unwrap();
    assert_eq!(back.frames.len(), stack.frames.len());
    let (lo, hi) = stack.frames.iter().flat_map(|f| f.pixels.data().iter().copied()).fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    let step = (hi - lo) / 65535.0;
    for (a, b) in stack.frames.iter().zip(&back.frames) {
        assert_eq!(a.position, b.position);
        for (x, y) in a.pixels.data().iter().zip(b.pixels.data()) {
            assert!((x - y).abs() <= step, "{x} vs {y}");
        }
    }
}

#[test]
fn integer_images_reload_exactly() {
    let scene = load_scene(&asset("camera_256.pgm")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.pgm");
    save_scene(&scene, &path).unwrap();
    assert_eq!(load_scene(&path).unwrap().pixels(), scene.pixels());
}

#[test]
fn exact_positions_reproduce_blurred_scene() {
    let scene = synth_power_law(48, 0.3, 2).unwrap();
    let psf = Psf::Gaussian { width: 0.5 };
    let stack = acquire_stack(&scene, &psf, &PositioningModel::new(3, 0.0, 2), 0, 0).unwrap();
    let z = apply_blur(&scene, &psf).unwrap();
    let d = decompose(&fuse(&stack).unwrap(), &z, &stack).unwrap();
    assert!(d.max_rel_error() < 1e-10);
}

#[test]
fn trial_results_do_not_depend_on_pool_size() {
    let exp = experiment(32, vec![3], 6);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&exp).unwrap());
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run(&exp).unwrap());
    assert_eq!(one.per_nd[0].max_rel_error, four.per_nd[0].max_rel_error);
    assert_eq!(one.per_nd[0].total, four.per_nd[0].total);
}

#[test]
fn exceedance_is_certain_at_zero_threshold() {
    let res = run(&experiment(32, vec![2], 10)).unwrap();
    let ex = exceedance_map(&res, 0, Quantity::Total, 0.0).unwrap();
    assert!(ex.valid_values().all(|v| v == 1.0));
}

#[test]
fn snr_spread_shrinks_with_frames() {
    // In dB the spread stays roughly constant; the error energy itself tightens.
    let res = run(&McExperiment { quantities: Quantities::NONE, ..experiment(64, vec![1, 16, 256], 30) }).unwrap();
    let spread: Vec<f64> = res
        .per_nd
        .iter()
        .map(|r| {
            let e: Vec<f64> = r.hf_snr_db.iter().map(|s| 10f64.powf(-s / 10.0)).collect();
            let mean = e.iter().sum::<f64>() / e.len() as f64;
            (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (e.len() - 1) as f64).sqrt()
        })
        .collect();
    assert!(spread.windows(2).all(|w| w[1] < w[0]), "{spread:?}");
    let sw = snr_sweep(&McExperiment { quantities: Quantities::NONE, ..experiment(64, vec![1, 16, 256], 30) }).unwrap();
    assert!(sw.mean_db.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn floor_map_is_empty_without_position_error() {
    let scene = load_scene(&asset("camera_256.pgm")).unwrap();
    let f = p2_lower_bound_map(&scene, &Psf::Dirac, 2, 0.0, 0.1).unwrap();
    assert_eq!(f.fraction_above, 0.0);
}

#[test]
fn camera_floor_fraction() {
    let scene = load_scene(&asset("camera_256.pgm")).unwrap();
    let f = p2_lower_bound_map(&scene, &Psf::Dirac, 2, 0.01, 0.1).unwrap();
    assert!((f.fraction_above - 0.009).abs() <= 0.005, "{}", f.fraction_above);
}

#[test]
fn power_law_floor_exceeds_only_at_the_band_edge() {
    let scene = synth_power_law(64, 0.0, 3).unwrap();
    let f = p2_lower_bound_map(&scene, &Psf::Dirac, 2, 0.03, 0.1).unwrap();
    let grid = FrequencyGrid::new(32, 2).unwrap();
    let m = 64usize;
    let mut hits = 0;
    for i in 0..m {
        for j in 0..m {
            if f.p0.valid[(i, j)] && f.p0.values[(i, j)] > 0.1 {
                let k = [signed_freq(i, m), signed_freq(j, m)];
                assert!(grid.in_hf_band(k) && k[0].abs().max(k[1].abs()) >= 28, "{k:?}");
                hits += 1;
            }
        }
    }
    assert!(hits > 0 && f.fraction_above < 0.05);
}

#[test]
fn empty_unreliable_band_has_no_weight() {
    let scene = load_scene(&asset("astronaut_256.pgm")).unwrap();
    let prm = LocalizeParams { r: 2, epsilon: 0.0, nd: 4, p: 0.1, thr: 0.1, mode: LocalizeMode::Theory };
    let band = unreliable_spatial(&scene, &Psf::Dirac, &prm).unwrap();
    assert_eq!(band.weight_db, f64::NEG_INFINITY);
    assert!(band.image.data().iter().all(|&v| v == 0.0));
}

#[test]
fn exceedance_ranks_like_theoretical_frame_counts() {
    let scene = load_scene(&asset("astronaut_256.pgm")).unwrap();
    let (r, eps, nd, p) = (2, 0.01, 64, 0.1);
    let exp = McExperiment {
        scene: SceneSpec::File { path: asset("astronaut_256.pgm") },
        psf: Psf::Dirac,
        model: PositioningModel::new(r, eps, nd),
        nd: vec![nd],
        trials: 100,
        seed: 2,
        noise_sigma: 0.0,
        quantities: Quantities { alias: true, ..Quantities::NONE },
    };
    let res = run_on(&exp, &scene).unwrap();
    let ex = exceedance_map(&res, 0, Quantity::Alias, p).unwrap();
    let mut cfg = BoundsConfig::power_law(r, eps, p, 0.9, 0.0);
    cfg.spectrum = SpectrumModel::measured(scene.amplitude(), "astronaut");
    let (_, nds) = nd_map(&cfg).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (idx, v) in ex.values.data().iter().enumerate() {
        if let (true, Some(b)) = (ex.valid.data()[idx], nds.data()[idx]) {
            x.push(*v);
            y.push(match b {
                NdBound::Frames(k) => k as f64,
                NdBound::NotReachable => f64::INFINITY,
            });
        }
    }
    // Most bins never exceed, so ranks are heavily tied at zero and rho is
    // capped near sqrt(3 f (1 - f)) for an exceeding share f.
    let f = x.iter().filter(|&&v| v > 0.0).count() as f64 / x.len() as f64;
    let ceiling = (3.0 * f * (1.0 - f)).sqrt();
    let rho = spearman(&x, &y);
    assert!(rho > 0.8 * ceiling, "spearman {rho}, tie ceiling {ceiling}");
    let mean_nd = |hit: bool| {
        let v: Vec<f64> = x.iter().zip(&y).filter(|(e, _)| (**e > 0.0) == hit).map(|(_, n)| n.min(1e9).log10()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean_nd(true) > mean_nd(false) + 1.0);
}

