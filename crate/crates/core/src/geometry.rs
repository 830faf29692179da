//! Geometric kernels: simplex volumes, circumcenters through the origin,
//! projections, the origin-in-hull test and the pointy-vertex predicate.

use crate::constants::{ball_volume_any, Dim, MAX_DIM};
use crate::error::{Error, Result};
use crate::linalg::System;
use crate::sampling::{IntensityModel, RngStream};
use crate::stats::{MCEstimate, RunningStats};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Barycentric coordinates at or below this value count as boundary.
pub const HULL_TAU: f64 = 1e-12;

/// Tolerance on `‖u0‖ = 1` for projections.
pub const UNIT_TOL: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Volume of the simplex spanned by `d + 1` points of `R^d`,
/// `|det(x_1 - x_0, ..., x_d - x_0)| / d!`.
pub fn simplex_volume<P: AsRef<[f64]>>(points: &[P]) -> Result<f64> {
    let n = points.len();
    if n < 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: n,
        });
    }
    let d = n - 1;
    if d > MAX_DIM {
        return Err(Error::InvalidDimension(d));
    }
    let x0 = points[0].as_ref();
    let mut m = System::new(d, d);
    for (r, p) in points[1..].iter().enumerate() {
        let p = p.as_ref();
        if p.len() != d || x0.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.len().min(x0.len()),
            });
        }
        for c in 0..d {
            m.set(r, c, p[c] - x0[c]);
        }
    }
    Ok(m.determinant().abs() / factorial(d))
}

/// Writes into `out` the center `c` of the sphere through the origin and
/// the `d` given points, i.e. the solution of `⟨x_i, c⟩ = ‖x_i‖² / 2`.
#[inline]
pub(crate) fn circumcenter_into<'a>(
    sys: &mut System,
    d: usize,
    nuclei: impl Iterator<Item = &'a [f64]>,
    out: &mut [f64],
) -> Option<()> {
    sys.reshape(d, d);
    for (r, x) in nuclei.enumerate() {
        let mut sq = 0.0;
        for c in 0..d {
            sys.set(r, c, x[c]);
            sq += x[c] * x[c];
        }
        sys.set_rhs(r, 0.5 * sq);
    }
    sys.solve_in_place(out)
}

/// Center of the sphere passing through the origin and the `d` nuclei.
pub fn circumcenter_with_origin<P: AsRef<[f64]>>(nuclei: &[P]) -> Result<Vec<f64>> {
    let d = nuclei.len();
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Error::InvalidDimension(d));
    }
    for x in nuclei {
        if x.as_ref().len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.as_ref().len(),
            });
        }
    }
    let mut c = vec![0.0; d];
    let mut sys = System::new(d, d);
    circumcenter_into(&mut sys, d, nuclei.iter().map(|x| x.as_ref()), &mut c)
        .ok_or(Error::SingularConfiguration)?;
    Ok(c)
}

/// Orthogonal projection of `v` onto the hyperplane `u0^⊥`.
pub fn project_onto_complement(u0: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u0.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u0.len(),
            found: v.len(),
        });
    }
    let n = norm(u0);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit(n));
    }
    let s = dot(u0, v);
    Ok(v.iter().zip(u0).map(|(vi, ui)| vi - s * ui).collect())
}

/// Outcome of the origin-in-hull test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HullTest {
    /// The origin lies in the relative interior of the hull.
    Interior,
    /// The origin lies strictly outside.
    Exterior,
    /// Boundary case or affinely degenerate points; callers count these.
    Degenerate,
}

impl HullTest {
    #[inline]
    pub fn is_interior(self) -> bool {
        self == HullTest::Interior
    }
}

/// Solves `Σ λ_i p_i = 0, Σ λ_i = 1` for `d` points given as rows of `p`
/// and classifies the barycentric coordinates.
pub(crate) fn hull_test_rows(p: &[[f64; MAX_DIM]], d: usize) -> HullTest {
    // d coordinate equations plus the affine row; one equation is redundant
    // because the points span at most a (d-1)-dimensional subspace.
    let mut sys = System::new(d + 1, d);
    for (i, pi) in p.iter().take(d).enumerate() {
        for r in 0..d {
            sys.set(r, i, pi[r]);
        }
        sys.set(d, i, 1.0);
    }
    sys.set_rhs(d, 1.0);
    let mut lambda = [0.0; MAX_DIM];
    if sys.solve(&mut lambda[..d]).is_none() {
        return HullTest::Degenerate;
    }
    let mut inside = true;
    for &l in &lambda[..d] {
        if !l.is_finite() || l.abs() <= HULL_TAU {
            return HullTest::Degenerate;
        }
        if l < 0.0 {
            inside = false;
        }
    }
    if inside {
        HullTest::Interior
    } else {
        HullTest::Exterior
    }
}

/// Whether the origin is in the relative interior of the convex hull of
/// `d` points of `R^d` lying in a common `(d-1)`-dimensional linear
/// subspace.
pub fn origin_in_hull<P: AsRef<[f64]>>(points: &[P]) -> Result<HullTest> {
    let d = points.len();
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Error::InvalidDimension(d));
    }
    let mut rows = [[0.0; MAX_DIM]; MAX_DIM];
    for (row, p) in rows.iter_mut().zip(points) {
        let p = p.as_ref();
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
        row[..d].copy_from_slice(p);
    }
    Ok(hull_test_rows(&rows, d))
}

/// Pointy test for a vertex `c` determined by the origin and the `d`
/// nuclei yielded by `nuclei`.
pub(crate) fn pointy_test_with<'a>(
    d: usize,
    c: &[f64],
    nuclei: impl Iterator<Item = &'a [f64]>,
) -> HullTest {
    let cn = norm(c);
    let mut u0 = [0.0; MAX_DIM];
    for k in 0..d {
        u0[k] = c[k] / cn;
    }
    let mut rows = [[0.0; MAX_DIM]; MAX_DIM];
    for (row, x) in rows.iter_mut().zip(nuclei) {
        let mut len2 = 0.0;
        for k in 0..d {
            row[k] = x[k] - c[k];
            len2 += row[k] * row[k];
        }
        let inv = 1.0 / len2.sqrt();
        let mut s = 0.0;
        for k in 0..d {
            row[k] *= inv;
            s += row[k] * u0[k];
        }
        for k in 0..d {
            row[k] -= s * u0[k];
        }
    }
    hull_test_rows(&rows, d)
}

/// Full pointy classification of the vertex `c` with its `d` nuclei,
/// including the degenerate outcome.
pub fn pointy_test<P: AsRef<[f64]>>(c: &[f64], nuclei: &[P]) -> Result<HullTest> {
    let d = c.len();
    if nuclei.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: nuclei.len(),
        });
    }
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Error::InvalidDimension(d));
    }
    for x in nuclei {
        if x.as_ref().len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.as_ref().len(),
            });
        }
    }
    if norm(c) < 1e-12 {
        return Err(Error::ZeroVertex);
    }
    Ok(pointy_test_with(d, c, nuclei.iter().map(|x| x.as_ref())))
}

/// Whether the vertex `c` locally maximizes the distance to the nucleus at
/// the origin. Degenerate configurations report `false`.
pub fn is_pointy<P: AsRef<[f64]>>(c: &[f64], nuclei: &[P]) -> Result<bool> {
    pointy_test(c, nuclei).map(HullTest::is_interior)
}

/// Two balls whose boundaries both pass through the origin: radii
/// `r <= r_prime` and center distance `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallPairConfig {
    pub r: f64,
    pub r_prime: f64,
    pub delta: f64,
}

impl BallPairConfig {
    pub fn new(r: f64, r_prime: f64, delta: f64) -> Result<Self> {
        if !(r > 0.0) || !(r_prime >= r) {
            return Err(Error::InvalidBallPair(format!(
                "need 0 < r <= r', got r = {r}, r' = {r_prime}"
            )));
        }
        // Both spheres contain the origin, so the balls cannot be disjoint.
        if !(delta >= 0.0) || delta > r + r_prime {
            return Err(Error::InvalidBallPair(format!(
                "need 0 <= delta <= r + r', got delta = {delta}"
            )));
        }
        Ok(BallPairConfig { r, r_prime, delta })
    }

    /// Whether `delta² >= r'² - r²`.
    pub fn separated(&self) -> bool {
        self.delta * self.delta >= self.r_prime * self.r_prime - self.r * self.r
    }
}

/// Lower bound on the volume of the union of two balls through the origin:
/// `κ_d r^d / 2 + κ_d r'^d / 2 + κ_{d-1} r^{d-1} δ / (2d)`.
pub fn union_ball_volume_lower_bound(cfg: &BallPairConfig, d: Dim) -> Result<f64> {
    if !cfg.separated() {
        return Err(Error::ConditionViolated {
            r: cfg.r,
            r_prime: cfg.r_prime,
            delta: cfg.delta,
        });
    }
    let dd = d.get();
    let kd = ball_volume_any(dd);
    let kd1 = ball_volume_any(dd - 1);
    let df = dd as f64;
    Ok(0.5 * kd * cfg.r.powi(dd as i32)
        + 0.5 * kd * cfg.r_prime.powi(dd as i32)
        + kd1 * cfg.r.powi(dd as i32 - 1) * cfg.delta / (2.0 * df))
}

/// Monte Carlo estimate of the `m_α`-measure of the union of two balls by
/// uniform sampling in their joint bounding box.
pub fn mc_union_ball_volume(
    center1: &[f64],
    r: f64,
    center2: &[f64],
    r_prime: f64,
    model: IntensityModel,
    n: u64,
    seed: u64,
) -> Result<MCEstimate> {
    let d = center1.len();
    if center2.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: center2.len(),
        });
    }
    let dim = Dim::new(d)?;
    model.check(dim)?;
    if !(r > 0.0 && r_prime > 0.0) || n == 0 {
        return Err(Error::InvalidArgument(
            "radii must be positive and n >= 1".into(),
        ));
    }
    let alpha = model.alpha();
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    let mut box_volume = 1.0;
    for k in 0..d {
        lo[k] = (center1[k] - r).min(center2[k] - r_prime);
        hi[k] = (center1[k] + r).max(center2[k] + r_prime);
        box_volume *= hi[k] - lo[k];
    }
    let (r2, rp2) = (r * r, r_prime * r_prime);
    let mut rng = RngStream::new(seed, 0);
    let mut stats = RunningStats::default();
    let mut x = vec![0.0; d];
    for _ in 0..n {
        for k in 0..d {
            x[k] = lo[k] + (hi[k] - lo[k]) * rng.random::<f64>();
        }
        let inside = dist2(&x, center1) < r2 || dist2(&x, center2) < rp2;
        let w = if !inside {
            0.0
        } else if alpha == 0.0 {
            box_volume
        } else {
            box_volume * norm(&x).powf(alpha)
        };
        stats.push(w);
    }
    Ok(stats.estimate(seed, 0))
}
