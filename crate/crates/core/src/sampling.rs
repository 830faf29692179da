//! Reproducible random sources: per-replicate streams, uniform directions
//! and Poisson processes with homogeneous or radial-power intensity.

use crate::constants::{check_alpha, unit_sphere_area, Dim};
use crate::error::{Error, Result};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

/// Intensity measure of the Poisson process: Lebesgue, or `‖x‖^α dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityModel {
    Homogeneous,
    RadialPower { alpha: f64 },
}

impl IntensityModel {
    /// `RadialPower` for `alpha != 0`, `Homogeneous` otherwise.
    pub fn from_alpha(alpha: f64) -> Self {
        if alpha == 0.0 {
            IntensityModel::Homogeneous
        } else {
            IntensityModel::RadialPower { alpha }
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            IntensityModel::Homogeneous => 0.0,
            IntensityModel::RadialPower { alpha } => alpha,
        }
    }

    pub fn check(&self, d: Dim) -> Result<()> {
        check_alpha(d, self.alpha())
    }

    /// `m_α(B_R(0)) = d κ_d R^{d+α} / (d+α)`.
    pub fn ball_measure(&self, d: Dim, radius: f64) -> f64 {
        let p = d.get() as f64 + self.alpha();
        unit_sphere_area(d) * radius.powf(p) / p
    }

    /// Radius `R` with `m_α(B_R(0)) = mass`.
    pub fn radius_for_measure(&self, d: Dim, mass: f64) -> f64 {
        let p = d.get() as f64 + self.alpha();
        (mass * p / unit_sphere_area(d)).powf(1.0 / p)
    }
}

/// Counter-based random stream keyed by `(master_seed, replicate_index)`.
///
/// The key selects a ChaCha8 seed and one of its 2^64 streams, so draws are
/// a pure function of the pair, independent of thread scheduling.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    replicate_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, replicate_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(replicate_index);
        RngStream {
            master_seed,
            replicate_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replicate_index(&self) -> u64 {
        self.replicate_index
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Poisson variate with the given mean (0 for a zero mean).
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let dist = Poisson::new(mean).expect("finite positive Poisson mean");
        dist.sample(&mut self.rng) as u64
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Stream for replicate `replicate_index` of a run seeded by `master_seed`.
pub fn rng_stream(master_seed: u64, replicate_index: u64) -> RngStream {
    RngStream::new(master_seed, replicate_index)
}

/// Writes a uniform unit vector into `out` (normalized Gaussian).
#[inline]
pub(crate) fn uniform_sphere_into(rng: &mut RngStream, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = rng.normal();
            s += *v * *v;
        }
        if s > 1e-300 {
            let inv = 1.0 / s.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// Uniform random direction on the unit sphere of `R^d`.
pub fn uniform_sphere(d: Dim, rng: &mut RngStream) -> Vec<f64> {
    let mut u = vec![0.0; d.get()];
    uniform_sphere_into(rng, &mut u);
    u
}

/// Poisson process restricted to the annulus `r_in <= ‖x‖ < r_out`.
///
/// Radii follow `F(r) = (r^{d+α} - r_in^{d+α}) / (r_out^{d+α} - r_in^{d+α})`
/// by inversion; directions are uniform.
pub fn poisson_annulus(
    d: Dim,
    model: IntensityModel,
    r_in: f64,
    r_out: f64,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    model.check(d)?;
    if !(r_in >= 0.0) || !(r_out > r_in) || !r_out.is_finite() {
        return Err(Error::EmptyAnnulus { r_in, r_out });
    }
    let mean = model.ball_measure(d, r_out) - model.ball_measure(d, r_in);
    let count = rng.poisson(mean);
    let p = d.get() as f64 + model.alpha();
    let (lo, hi) = (r_in.powf(p), r_out.powf(p));
    let mut points = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let u: f64 = rng.random();
        let radius = (lo + u * (hi - lo)).powf(1.0 / p);
        let mut x = uniform_sphere(d, rng);
        x.iter_mut().for_each(|v| *v *= radius);
        points.push(x);
    }
    Ok(points)
}

/// Unit-intensity homogeneous Poisson process in the box `[lo, hi]`.
pub fn poisson_box(d: Dim, lo: &[f64], hi: &[f64], rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    let n = d.get();
    if lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: lo.len().min(hi.len()),
        });
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !b.is_finite() || !a.is_finite()) {
        return Err(Error::BadBox);
    }
    let volume: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let count = rng.poisson(volume);
    let mut points = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let x: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect();
        points.push(x);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RunningStats;
    use std::f64::consts::PI;

    fn dim(d: usize) -> Dim {
        Dim::new(d).unwrap()
    }

    #[test]
    fn streams_reproduce_and_differ() {
        let mut a = rng_stream(42, 0);
        let mut b = rng_stream(42, 0);
        let mut c = rng_stream(42, 1);
        let xa: Vec<u64> = (0..1000).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..1000).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..1000).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn sphere_points_are_unit_and_centered() {
        let mut rng = rng_stream(1, 0);
        let n = 1_000_000;
        let mut first = RunningStats::default();
        for _ in 0..n {
            let u = uniform_sphere(dim(2), &mut rng);
            assert!((u[0].hypot(u[1]) - 1.0).abs() < 1e-12);
            first.push(u[0]);
        }
        assert!(first.mean().abs() < 3.0 / (2.0 * n as f64).sqrt());
    }

    #[test]
    fn sphere_second_moment_3d() {
        let mut rng = rng_stream(2, 0);
        let mut sq = RunningStats::default();
        for _ in 0..1_000_000 {
            let u = uniform_sphere(dim(3), &mut rng);
            sq.push(u[0] * u[0]);
        }
        let est = sq.estimate(2, 0);
        assert!(est.within(1.0 / 3.0, 3.0), "{est:?}");
    }

    fn mean_count(d: Dim, model: IntensityModel, r_in: f64, r_out: f64, reps: u64) -> crate::MCEstimate {
        let mut s = RunningStats::default();
        for i in 0..reps {
            let mut rng = rng_stream(5, i);
            s.push(poisson_annulus(d, model, r_in, r_out, &mut rng).unwrap().len() as f64);
        }
        s.estimate(5, 0)
    }

    #[test]
    fn annulus_counts() {
        let e = mean_count(dim(2), IntensityModel::Homogeneous, 0.0, 1.0, 100_000);
        assert!(e.within(PI, 3.0), "{e:?}");
        let e = mean_count(dim(2), IntensityModel::from_alpha(-1.0), 0.0, 1.0, 100_000);
        assert!(e.within(2.0 * PI, 3.0), "{e:?}");
        let e = mean_count(dim(3), IntensityModel::from_alpha(1.0), 1.0, 2.0, 100_000);
        assert!(e.within(15.0 * PI, 3.0), "{e:?}");
    }

    #[test]
    fn annulus_errors() {
        let mut rng = rng_stream(0, 0);
        assert!(matches!(
            poisson_annulus(dim(2), IntensityModel::Homogeneous, 1.0, 1.0, &mut rng),
            Err(Error::EmptyAnnulus { .. })
        ));
        assert!(matches!(
            poisson_annulus(dim(2), IntensityModel::from_alpha(-2.5), 0.0, 1.0, &mut rng),
            Err(Error::AlphaOutOfRange { .. })
        ));
    }

    #[test]
    fn radial_law_matches_inverse_cdf() {
        // KS distance of ‖X‖ against F on 10^5 samples.
        let d = dim(2);
        let model = IntensityModel::from_alpha(1.5);
        let (r_in, r_out) = (0.5, 2.0);
        let mut radii = Vec::new();
        let mut i = 0;
        while radii.len() < 100_000 {
            let mut rng = rng_stream(8, i);
            i += 1;
            for x in poisson_annulus(d, model, r_in, r_out, &mut rng).unwrap() {
                radii.push(x[0].hypot(x[1]));
            }
        }
        radii.truncate(100_000);
        let p = 3.5;
        let cdf = |r: f64| (r.powf(p) - r_in.powf(p)) / (r_out.powf(p) - r_in.powf(p));
        let ks = crate::extremes::ks_distance(&radii, cdf).unwrap();
        assert!(ks < 0.01, "ks = {ks}");
    }

    #[test]
    fn isotropy_and_disjoint_independence() {
        let d = dim(3);
        let model = IntensityModel::Homogeneous;
        let n = 20_000u64;
        let mut sum = [0.0; 3];
        let mut total = 0usize;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for i in 0..n {
            let mut rng = rng_stream(9, i);
            let inner = poisson_annulus(d, model, 0.0, 1.0, &mut rng).unwrap();
            let outer = poisson_annulus(d, model, 1.0, 1.3, &mut rng).unwrap();
            for x in inner.iter().chain(&outer) {
                let r = crate::geometry::norm(x);
                for k in 0..3 {
                    sum[k] += x[k] / r;
                }
                total += 1;
            }
            a.push(inner.len() as f64);
            b.push(outer.len() as f64);
        }
        let mean_dir = sum.iter().map(|s| s / total as f64).map(|v| v * v).sum::<f64>().sqrt();
        assert!(mean_dir < 3.0 / (total as f64).sqrt(), "{mean_dir}");
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
        let corr = cov / (ma.sqrt() * mb.sqrt());
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "{corr}");
    }

    #[test]
    fn box_counts() {
        for (side, want) in [(1.0, 1.0), (10.0, 100.0)] {
            let mut s = RunningStats::default();
            for i in 0..100_000 {
                let mut rng = rng_stream(3, i);
                s.push(poisson_box(dim(2), &[0.0, 0.0], &[side, side], &mut rng).unwrap().len() as f64);
            }
            assert!(s.estimate(3, 0).within(want, 3.0));
        }
        let mut rng = rng_stream(3, 0);
        assert_eq!(
            poisson_box(dim(2), &[0.0, 1.0], &[1.0, 1.0], &mut rng),
            Err(Error::BadBox)
        );
    }

    #[test]
    fn box_complete_spatial_randomness() {
        // Condition on the total count: cell counts on a 4x4 grid are
        // multinomial with equal probabilities.
        let mut rng = rng_stream(4, 0);
        let pts = poisson_box(dim(2), &[0.0, 0.0], &[40.0, 40.0], &mut rng).unwrap();
        let mut counts = [0.0f64; 16];
        for p in &pts {
            let i = ((p[0] / 10.0) as usize).min(3);
            let j = ((p[1] / 10.0) as usize).min(3);
            counts[4 * i + j] += 1.0;
        }
        let expected = pts.len() as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 0.999 quantile of chi-square with 15 degrees of freedom.
        assert!(chi2 < 37.697, "chi2 = {chi2}");
    }
}
