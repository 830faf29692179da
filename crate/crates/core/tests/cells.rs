use pv_extremes::constants::expected_pointy_count;
use pv_extremes::estimators::{estimate_tail, McConfig};
use pv_extremes::sampling::rng_stream;
use pv_extremes::typical_cell::{
    build_typical_cell, count_pointy_at_least, enumerate_vertices, sample_typical_cell, CellOptions, TypicalCell,
};
use pv_extremes::{Dim, IntensityModel};

fn dim(d: usize) -> Dim {
    Dim::new(d).unwrap()
}

fn cell(d: usize, model: IntensityModel, seed: u64, i: u64) -> TypicalCell {
    sample_typical_cell(dim(d), model, &mut rng_stream(seed, i), &CellOptions::default())
        .unwrap()
        .0
}

/// Polygon of the cell of the origin by clipping a large square with each
/// bisector half-plane in turn.
fn half_plane_cell(generators: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let l = 1e3;
    let mut poly = vec![[-l, -l], [l, -l], [l, l], [-l, l]];
    for g in generators {
        let h = 0.5 * (g[0] * g[0] + g[1] * g[1]);
        let f = |p: &[f64; 2]| p[0] * g[0] + p[1] * g[1] - h;
        let mut out = Vec::new();
        for i in 0..poly.len() {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            let (fa, fb) = (f(&a), f(&b));
            if fa <= 0.0 {
                out.push(a);
            }
            if (fa < 0.0) != (fb < 0.0) && fa != fb {
                let t = fa / (fa - fb);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        poly = out;
    }
    poly
}

#[test]
fn matches_half_plane_oracle() {
    for i in 0..100 {
        let c = cell(2, IntensityModel::Homogeneous, 31, i);
        let mut oracle = half_plane_cell(&c.generators);
        oracle.dedup_by(|a, b| (a[0] - b[0]).hypot(a[1] - b[1]) < 1e-9);
        assert_eq!(oracle.len(), c.vertices.len(), "cell {i}");
        for p in &oracle {
            let hit = c
                .vertices
                .iter()
                .any(|v| (v.location[0] - p[0]).abs() < 1e-9 && (v.location[1] - p[1]).abs() < 1e-9);
            assert!(hit, "cell {i}: oracle vertex {p:?} missing");
        }
    }
}

#[test]
fn no_vertex_beyond_certified_set() {
    for i in 0..1000 {
        let c = cell(2, IntensityModel::Homogeneous, 32, i);
        let at_d = enumerate_vertices(&c.generators, c.max_vertex_distance * (1.0 + 1e-9)).unwrap();
        let wide = enumerate_vertices(&c.generators, c.sampled_radius).unwrap();
        assert_eq!(at_d.vertices.len(), c.vertices.len(), "cell {i}");
        assert_eq!(wide.vertices.len(), c.vertices.len(), "cell {i}");
        for (a, b) in wide.vertices.iter().zip(&c.vertices) {
            assert_eq!(a.nucleus_indices, b.nucleus_indices);
            assert_eq!(a.pointy, b.pointy);
            assert!((a.norm - b.norm).abs() <= 1e-12 * b.norm);
        }
    }
}

#[test]
fn brute_force_agrees_in_three_dimensions() {
    for i in 0..50 {
        for model in [IntensityModel::Homogeneous, IntensityModel::RadialPower { alpha: 1.0 }] {
            let c = cell(3, model, 33, i);
            let e = enumerate_vertices(&c.generators, c.sampled_radius).unwrap();
            assert_eq!(e.vertices.len(), c.vertices.len(), "cell {i}");
            for (a, b) in e.vertices.iter().zip(&c.vertices) {
                assert_eq!(a.nucleus_indices, b.nucleus_indices);
                assert_eq!(a.pointy, b.pointy);
            }
        }
    }
}

#[test]
fn farthest_vertex_is_pointy() {
    for i in 0..10_000 {
        let c = cell(2, IntensityModel::Homogeneous, 34, i);
        let pointy_max = c.vertices.iter().filter(|v| v.pointy).map(|v| v.norm).fold(0.0, f64::max);
        assert_eq!(pointy_max, c.max_vertex_distance, "cell {i}");
        for t in [0.5, 1.0, c.max_vertex_distance] {
            assert_eq!(c.max_vertex_distance >= t, count_pointy_at_least(&c, t) >= 1);
        }
    }
}

#[test]
fn planar_cells_are_convex_polygons() {
    for i in 0..1000 {
        let c = cell(2, IntensityModel::Homogeneous, 35, i);
        assert!(c.vertices.len() >= 3);
        assert!(2.0 * c.max_vertex_distance <= c.sampled_radius);
        let mut vs: Vec<_> = c.vertices.iter().collect();
        vs.sort_by(|a, b| {
            let ta = a.location[1].atan2(a.location[0]);
            let tb = b.location[1].atan2(b.location[0]);
            ta.total_cmp(&tb)
        });
        let n = vs.len();
        for k in 0..n {
            let (a, b, e) = (&vs[k].location, &vs[(k + 1) % n].location, &vs[(k + 2) % n].location);
            let cross = (b[0] - a[0]) * (e[1] - b[1]) - (b[1] - a[1]) * (e[0] - b[0]);
            assert!(cross > 0.0, "cell {i} not convex at {k}");
            // Consecutive vertices share a nucleus: the boundary is one cycle.
            let shared = vs[k]
                .nucleus_indices
                .iter()
                .filter(|g| vs[(k + 1) % n].nucleus_indices.contains(g))
                .count();
            assert_eq!(shared, 1, "cell {i}");
        }
    }
}

#[test]
fn radial_power_cells_are_certified() {
    let model = IntensityModel::RadialPower { alpha: -1.0 };
    for i in 0..200 {
        let c = build_typical_cell(dim(2), model, &mut rng_stream(36, i), &CellOptions::default()).unwrap();
        assert!(2.0 * c.max_vertex_distance <= c.sampled_radius);
        assert_eq!(c.model, model);
    }
}

#[test]
fn mean_pointy_counts_follow_exact_law() {
    for (alpha, seed) in [(0.0, 37), (1.0, 38)] {
        let cfg = McConfig::new(100_000, seed).with_workers(1);
        let r = estimate_tail(dim(2), alpha, &[0.0, 0.5, 1.0], &cfg).unwrap();
        for (i, &t) in r.t_grid.iter().enumerate() {
            let exact = expected_pointy_count(dim(2), alpha, t).unwrap();
            let e = &r.empirical_count[i];
            assert!(e.within(exact, 3.0), "alpha {alpha} t {t}: {e:?} vs {exact}");
        }
    }
}
