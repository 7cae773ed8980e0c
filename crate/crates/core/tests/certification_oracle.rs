mod common;

use common::*;
use proptest::prelude::*;
use viewrobust::geometry::ViewBounds;
use viewrobust::stats::{binomial_upper_tail, clopper_pearson_lower, inverse_normal_cdf, normal_cdf};
use viewrobust::target::ViewpointClassifier;
use viewrobust::viewrs::{certify, SmoothingConfig};
use viewrobust::Viewpoint64;

/// Class 0 while the normalized ψ offset stays below `d`.
struct HalfSpace(f64);

impl ViewpointClassifier<f64> for HalfSpace {
    fn predict(&self, v: &Viewpoint64) -> viewrobust::Result<usize> {
        Ok(usize::from(v.psi / 180.0 >= self.0))
    }
}

#[test]
fn lower_bound_matches_enumeration_for_small_n() {
    let mut worst = 0.0f64;
    for n in 1..=30u64 {
        for k in 0..=n {
            for alpha in [1e-3, 0.01, 0.05, 0.2] {
                let got = clopper_pearson_lower(k, n, alpha);
                let want = lower_bound_by_enumeration(k, n, alpha);
                worst = worst.max((got - want).abs());
            }
        }
    }
    assert!(worst <= 1e-9, "max deviation {worst}");
}

#[test]
fn lower_bound_all_successes_closed_form() {
    let got = clopper_pearson_lower(1000, 1000, 1e-3);
    assert!((got - 0.001f64.powf(0.001)).abs() <= 1e-9, "{got}");
}

#[test]
fn half_space_radius_is_sound_at_n_1000() {
    let d = 0.15;
    let bounds = ViewBounds::standard();
    let over = (0..200)
        .filter(|&s| {
            let cfg = SmoothingConfig {
                seed: s,
                ..Default::default()
            };
            certify(&HalfSpace(d), 2, 0, &bounds, &cfg).unwrap().radius > d
        })
        .count();
    assert!(over <= 2, "{over} of 200 radii exceed {d}");
}

#[test]
fn half_space_radius_converges_at_n_100000() {
    let d = 0.15;
    let cfg = SmoothingConfig {
        n: 100_000,
        seed: 7,
        ..Default::default()
    };
    let rec = certify(&HalfSpace(d), 2, 0, &ViewBounds::standard(), &cfg).unwrap();
    assert!(rec.correct);
    assert!((rec.radius - d).abs() <= 0.02, "radius {}", rec.radius);
}

proptest! {
    #[test]
    fn tail_matches_enumeration(n in 1u64..60, k_frac in 0.0f64..=1.0, p in 0.001f64..0.999) {
        let k = (k_frac * n as f64).round() as u64;
        let a = binomial_upper_tail(k, n, p);
        let b = binomial_tail_by_enumeration(k, n, p);
        prop_assert!((a - b).abs() < 1e-11, "{} vs {}", a, b);
    }

    #[test]
    fn lower_bound_has_coverage_property(n in 1u64..200, k_frac in 0.0f64..=1.0, alpha in 1e-4f64..0.3) {
        let k = (k_frac * n as f64).round() as u64;
        let p = clopper_pearson_lower(k, n, alpha);
        prop_assert!((0.0..=1.0).contains(&p));
        if k > 0 {
            prop_assert!(binomial_upper_tail(k, n, p) >= alpha * (1.0 - 1e-9));
            prop_assert!(binomial_upper_tail(k, n, p * (1.0 - 1e-6)) <= alpha * (1.0 + 1e-6));
            prop_assert!(p <= k as f64 / n as f64);
        }
    }

    #[test]
    fn quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
        let x = inverse_normal_cdf(p);
        prop_assert!((normal_cdf(x) - p).abs() <= 1e-12 * p.max(1e-3));
    }
}
