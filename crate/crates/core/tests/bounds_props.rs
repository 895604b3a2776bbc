use std::f64::consts::PI;

use proptest::prelude::*;
use srpac_core::bounds::{
    alias_maps, nd_min_alias, nd_min_approx, plan, power_law_coefficients, BoundsConfig, NdBound, Verdict,
};
use srpac_core::scene::Psf;
use srpac_core::table;

fn frames(b: NdBound) -> u64 {
    b.frames().unwrap_or(u64::MAX)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn approx_count_grows_with_epsilon_and_confidence(
        r in 2usize..6,
        e in 0.0005f64..0.01,
        p in 0.02f64..0.2,
        big_p in 0.5f64..0.99,
    ) {
        prop_assume!(e * 1.2 < 1.0 / (PI * r as f64));
        let base = frames(nd_min_approx(&BoundsConfig::power_law(r, e, p, big_p, 0.0)).unwrap());
        let wider = frames(nd_min_approx(&BoundsConfig::power_law(r, e * 1.2, p, big_p, 0.0)).unwrap());
        let surer = frames(nd_min_approx(&BoundsConfig::power_law(r, e, p, (big_p + 1.0) / 2.0, 0.0)).unwrap());
        let looser = frames(nd_min_approx(&BoundsConfig::power_law(r, e, p * 1.5, big_p, 0.0)).unwrap());
        prop_assert!(wider >= base);
        prop_assert!(surer >= base);
        prop_assert!(looser <= base);
    }
}

#[test]
fn zero_error_needs_one_frame() {
    let rep = plan(&BoundsConfig::power_law(2, 0.0, 0.05, 0.95, 0.0)).unwrap();
    assert_eq!(rep.nd_total, NdBound::Frames(1));
    assert_eq!(rep.verdict, Verdict::Ok);
}

#[test]
fn epsilon_beyond_frontier_is_rejected() {
    for r in [2usize, 5] {
        let e = 1.0 / (PI * r as f64);
        let err = plan(&BoundsConfig::power_law(r, e, 0.05, 0.95, 0.0)).unwrap_err();
        assert_eq!(err.kind(), "domain");
    }
}

#[test]
fn aliasing_is_unreachable_for_r3_at_one_percent() {
    let rep = plan(&BoundsConfig::power_law(3, 0.01, 0.05, 0.95, 0.0)).unwrap();
    assert_eq!(rep.nd_alias, NdBound::NotReachable);
    assert_eq!(rep.verdict, Verdict::NrAlias);
}

#[test]
fn nd_bound_serializes_nr() {
    assert_eq!(serde_json::to_string(&NdBound::NotReachable).unwrap(), "\"NR\"");
    assert_eq!(serde_json::to_string(&NdBound::Frames(7)).unwrap(), "7");
    let back: NdBound = serde_json::from_str("\"NR\"").unwrap();
    assert_eq!(back, NdBound::NotReachable);
    assert!(NdBound::NotReachable > NdBound::Frames(u64::MAX));
}

#[test]
fn gaussian_psf_needs_more_alias_frames() {
    let mut cfg = BoundsConfig::power_law(2, 0.001, 0.05, 0.95, 0.0);
    let dirac = nd_min_alias(&cfg).unwrap();
    cfg.psf = Psf::Gaussian { width: 0.5 };
    let blurred = nd_min_alias(&cfg).unwrap();
    assert!(blurred > dirac, "{blurred:?} vs {dirac:?}");
}

#[test]
fn corner_shortcut_tracks_exact_floor() {
    // At small epsilon the cubic term is negligible; the excluded near-DC
    // alias carries the remaining gap.
    let e = 0.001;
    let maps = alias_maps(&BoundsConfig::power_law(2, e, 0.05, 0.95, 0.0)).unwrap();
    let exact = *maps.p0.at_freq([31, 31]);
    let shortcut = power_law_coefficients(2, 32, 0.0).unwrap().p0_star(e);
    assert!((exact - shortcut).abs() / exact < 0.05, "exact {exact} shortcut {shortcut}");
}

#[test]
fn table_last_column_is_one_frame() {
    let cells = table::table1(32, Psf::Dirac).unwrap();
    for c in cells.iter().filter(|c| c.epsilon == 0.0001) {
        assert_eq!(c.approx, NdBound::Frames(1));
    }
    assert!(table::is_monotone(&cells));
}
