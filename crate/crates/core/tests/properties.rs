use proptest::prelude::*;
use pv_extremes::constants::{c_d, c_d_alpha, expected_pointy_count, k_d_alpha, unit_ball_volume};
use pv_extremes::extremes::{extremal_index_from, gumbel_cdf, gumbel_normalize, ks_distance, NormConst};
use pv_extremes::geometry::{
    circumcenter_with_origin, dist2, dot, norm, origin_in_hull, project_onto_complement, simplex_volume,
    union_ball_volume_lower_bound, BallPairConfig, HullTest,
};
use pv_extremes::typical_cell::pairs;
use pv_extremes::validation::{ball_pair_centers, hull_oracle};
use pv_extremes::{Dim, IntensityModel};
use std::f64::consts::PI;

fn dim(d: usize) -> Dim {
    Dim::new(d).unwrap()
}

fn points(d: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n)
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n > 1e-3).then(|| v.iter().map(|x| x / n).collect())
}

/// Area of the union of two disks with centers `dist` apart.
fn disk_union_area(r1: f64, r2: f64, dist: f64) -> f64 {
    let lens = if dist >= r1 + r2 {
        0.0
    } else if dist <= (r2 - r1).abs() {
        PI * r1.min(r2).powi(2)
    } else {
        let a1 = ((dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist * r1)).clamp(-1.0, 1.0).acos();
        let a2 = ((dist * dist + r2 * r2 - r1 * r1) / (2.0 * dist * r2)).clamp(-1.0, 1.0).acos();
        r1 * r1 * (a1 - a1.sin() * a1.cos()) + r2 * r2 * (a2 - a2.sin() * a2.cos())
    };
    PI * (r1 * r1 + r2 * r2) - lens
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn circumcenter_is_equidistant(d in 2usize..=4, seed in points(4, 4)) {
        let nuclei: Vec<Vec<f64>> = seed[..d].iter().map(|p| p[..d].to_vec()).collect();
        if let Ok(c) = circumcenter_with_origin(&nuclei) {
            let r = norm(&c);
            for x in &nuclei {
                prop_assert!((dist2(&c, x).sqrt() - r).abs() <= 1e-9 * r.max(1.0));
            }
        }
    }

    #[test]
    fn projection_is_orthogonal(u in prop::collection::vec(-1.0..1.0f64, 3), v in prop::collection::vec(-5.0..5.0f64, 3)) {
        if let Some(u) = unit(&u) {
            let p = project_onto_complement(&u, &v).unwrap();
            prop_assert!(dot(&p, &u).abs() <= 1e-12 * norm(&v).max(1.0));
        }
    }

    #[test]
    fn hull_test_matches_half_space_oracle(d in 2usize..=4, u in prop::collection::vec(-1.0..1.0f64, 4), raw in points(4, 4)) {
        if let Some(u0) = unit(&u[..d]) {
            let pts: Vec<Vec<f64>> = raw[..d].iter().map(|p| project_onto_complement(&u0, &p[..d]).unwrap()).collect();
            let t = origin_in_hull(&pts).unwrap();
            if let (false, Some(inside)) = (t == HullTest::Degenerate, hull_oracle(&u0, &pts, 1e-9)) {
                prop_assert_eq!(t.is_interior(), inside);
            }
        }
    }

    #[test]
    fn simplex_volume_is_rigid(pts in points(3, 4), shift in prop::collection::vec(-10.0..10.0f64, 3)) {
        let v = simplex_volume(&pts).unwrap();
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
        let mut swapped = pts.clone();
        swapped.swap(0, 3);
        prop_assert!((simplex_volume(&moved).unwrap() - v).abs() <= 1e-9 * v.max(1.0));
        prop_assert!((simplex_volume(&swapped).unwrap() - v).abs() <= 1e-9 * v.max(1.0));
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn expected_count_decreases(d in 2usize..=4, alpha in -1.0..2.0f64, t in 1.0..3.0f64, dt in 0.01..1.0f64) {
        let a = expected_pointy_count(dim(d), alpha, t).unwrap();
        let b = expected_pointy_count(dim(d), alpha, t + dt).unwrap();
        // Deep in the tail both values underflow to zero.
        prop_assert!(b < a || (a == 0.0 && b == 0.0), "{a} then {b}");
        prop_assert!(b >= 0.0);
    }

    #[test]
    fn alpha_zero_reduces(d in 2usize..=10) {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        prop_assert!(rel(c_d_alpha(dim(d), 0.0).unwrap(), c_d(dim(d))) < 1e-12);
        prop_assert!(rel(k_d_alpha(dim(d), 0.0).unwrap(), unit_ball_volume(dim(d))) < 1e-12);
    }

    #[test]
    fn measure_radius_round_trip(d in 2usize..=6, alpha in -1.5..3.0f64, r in 0.1..10.0f64) {
        let m = IntensityModel::from_alpha(alpha);
        let mass = m.ball_measure(dim(d), r);
        prop_assert!((m.radius_for_measure(dim(d), mass) - r).abs() <= 1e-10 * r);
    }

    #[test]
    fn union_bound_below_exact_area(r in 0.1..3.0f64, grow in 0.0..1.0f64, frac in 0.0..1.0f64) {
        let rp = r * (1.0 + grow);
        let lo = (rp * rp - r * r).sqrt();
        let delta = lo + frac * (r + rp - lo);
        let cfg = BallPairConfig::new(r, rp, delta).unwrap();
        let (c1, c2) = ball_pair_centers(&cfg, 2);
        prop_assert!((norm(&c1) - r).abs() < 1e-12 && (norm(&c2) - rp).abs() < 1e-12 * rp.max(1.0));
        prop_assert!((dist2(&c1, &c2).sqrt() - delta).abs() < 1e-9 * delta.max(1.0));
        let bound = union_ball_volume_lower_bound(&cfg, dim(2)).unwrap();
        prop_assert!(bound <= disk_union_area(r, rp, delta) * (1.0 + 1e-12));
    }

    #[test]
    fn normalization_is_affine_in_volume(ms in prop::collection::vec(0.5..4.0f64, 1..20), shift in -2.0..2.0f64) {
        let rho = 1e4;
        let base = gumbel_normalize(&ms, dim(2), rho, NormConst::Alpha1).unwrap();
        let moved: Vec<f64> = ms.iter().map(|m| (m * m + shift / PI).max(0.0).sqrt()).collect();
        let after = gumbel_normalize(&moved, dim(2), rho, NormConst::Alpha1).unwrap();
        for ((a, b), m) in base.iter().zip(&after).zip(&ms) {
            if m * m + shift / PI > 0.0 {
                prop_assert!((b - a - shift).abs() < 1e-9);
            }
        }
        let prime = gumbel_normalize(&ms, dim(2), rho, NormConst::Alpha1Prime).unwrap();
        for (a, p) in base.iter().zip(&prime) {
            prop_assert!((a - p - 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_distance_is_bounded(xs in prop::collection::vec(-5.0..5.0f64, 1..200)) {
        let k = ks_distance(&xs, gumbel_cdf).unwrap();
        prop_assert!((0.0..=1.0).contains(&k));
        prop_assert!(k >= 0.5 / xs.len() as f64);
    }

    #[test]
    fn extremal_index_is_positive(p in 0.01..0.99f64, lambda in 0.2..5.0f64) {
        let (theta, se) = extremal_index_from(p, 1000, lambda).unwrap();
        prop_assert!(theta > 0.0 && se > 0.0);
        prop_assert!(((-lambda * theta).exp() - p).abs() < 1e-12);
    }

    #[test]
    fn pair_count_formula(k in 0u64..10_000) {
        prop_assert_eq!(pairs(k), k * k.saturating_sub(1) / 2);
    }
}
