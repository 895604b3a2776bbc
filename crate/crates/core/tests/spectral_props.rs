use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use srpac_core::dft::Fft2;
use srpac_core::grid::{shift_factor, trig_sums, FrequencyGrid};
use srpac_core::plane::{signed_freq, Plane};

fn naive_trig(delta: [i64; 2], r: usize) -> [f64; 4] {
    let mut s = [0.0; 4];
    for a in 0..r as i64 {
        for b in 0..r as i64 {
            let th = 2.0 * PI / r as f64 * (delta[0] * a + delta[1] * b) as f64;
            s[0] += th.cos();
            s[1] += th.sin();
            s[2] += th.cos() * th.cos();
            s[3] += th.sin() * th.sin();
        }
    }
    s
}

proptest! {
    #[test]
    fn decompose_round_trips(n in (1usize..9).prop_map(|h| 2 * h), r in 2usize..7, x in any::<u32>(), y in any::<u32>()) {
        let grid = FrequencyGrid::new(n, r).unwrap();
        let m = grid.hr_side();
        let kp = [signed_freq(x as usize % m, m), signed_freq(y as usize % m, m)];
        let idx = grid.decompose(kp).unwrap();
        prop_assert!(grid.in_lr(idx.k));
        prop_assert_eq!(grid.alias_freq(idx.k, idx.gamma), kp);
        let set = grid.alias_set(idx.k).unwrap();
        prop_assert_eq!(set.len(), r * r);
        prop_assert!(set.contains(&idx.gamma));
        for alpha in set {
            let ka = grid.alias_freq(idx.k, alpha);
            prop_assert!(grid.in_hr(ka));
            prop_assert_eq!(grid.decompose(ka).unwrap().k, idx.k);
        }
    }

    #[test]
    fn trig_sums_match_brute_force(d0 in -40i64..40, d1 in -40i64..40, r in 2usize..9) {
        let t = trig_sums([d0, d1], r);
        let s = naive_trig([d0, d1], r);
        for (a, b) in [t.cos, t.sin, t.cos2, t.sin2].iter().zip(s) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn integer_shift_factor_is_a_root_of_unity(k in -16i64..16, d in -5i64..5) {
        let f = shift_factor(k, 32, d as f64);
        let q = 2.0 * PI * k as f64 / 32.0;
        if k == -16 {
            prop_assert!((f.re - (PI * d as f64).cos()).abs() < 1e-12 && f.im == 0.0);
        } else {
            prop_assert!((f - Complex64::from_polar(1.0, -q * d as f64)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_round_trip(vals in prop::collection::vec(-100.0f64..100.0, 64)) {
        let p = Plane::from_vec(8, vals.clone());
        let f = Fft2::new(8);
        let back = f.inverse_real(&f.forward(&p));
        for (a, b) in back.data().iter().zip(&vals) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn parseval_holds() {
    let p = Plane::from_fn(16, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
    let s = Fft2::new(16).forward(&p);
    let e_pix: f64 = p.data().iter().map(|v| v * v).sum();
    let e_spec: f64 = s.data().iter().map(|v| v.norm_sqr()).sum::<f64>() / 256.0;
    assert!((e_pix - e_spec).abs() < 1e-9 * e_pix);
}
