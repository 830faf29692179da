//! Box experiments for the largest far-vertex distance among the nuclei
//! of a window, Gumbel normalization and extremal-index estimation.

use crate::constants::{expected_pointy_count, extremal_norm_constants, unit_ball_volume, Dim, MAX_DIM};
use crate::error::{Error, Result};
use crate::parallel::{run_replicates, Merge};
use crate::sampling::{poisson_box, RngStream};
use crate::stats::MCEstimate;
use crate::clip::{CellOutcome, Clipper};
use crate::typical_cell::RawVertex;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

/// Expected number of nuclei whose cell reaches past half the buffer.
pub const BUFFER_TARGET: f64 = 1e-3;
/// Largest tolerated fraction of resampled replicates.
pub const MAX_FAILED_FRACTION: f64 = 0.01;
/// Default `ρ E#V(u)` for the extremal-index threshold.
pub const DEFAULT_EXPECTED_EXCEEDANCES: f64 = 2.0;
/// `ρ E#V(u)` at the threshold above which distances are pooled for the
/// i.i.d. control.
pub const POOL_EXPECTED_EXCEEDANCES: f64 = 50.0;

/// Configuration of a box experiment in the window `[0, n]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremeRunConfig {
    pub d: Dim,
    pub n: f64,
    pub buffer: f64,
    pub reps: u64,
    pub seed: u64,
}

impl ExtremeRunConfig {
    /// Config with the buffer from [`calibrated_buffer`].
    pub fn calibrated(d: Dim, n: f64, reps: u64, seed: u64) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument(format!("box side {n} must be positive")));
        }
        Ok(ExtremeRunConfig {
            d,
            n,
            buffer: calibrated_buffer(d, n.powi(d.get() as i32))?,
            reps,
            seed,
        })
    }

    pub fn rho(&self) -> f64 {
        self.n.powi(self.d.get() as i32)
    }

    fn check(&self) -> Result<()> {
        if !(self.n > 0.0) || !self.n.is_finite() {
            return Err(Error::InvalidArgument(format!("box side {} must be positive", self.n)));
        }
        if !(self.buffer > 0.0) || !self.buffer.is_finite() {
            return Err(Error::InvalidArgument(format!("buffer {} must be positive", self.buffer)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solves `f(x) = target` for decreasing `f` on `[0, ∞)` by bisection.
fn solve_decreasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Buffer `b` with `ρ E#V(b/2) = 1e-3` in the homogeneous model.
pub fn calibrated_buffer(d: Dim, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::BadRho(rho));
    }
    let f = |b: f64| rho * expected_pointy_count(d, 0.0, 0.5 * b).unwrap_or(f64::INFINITY);
    Ok(solve_decreasing(f, BUFFER_TARGET))
}

/// Threshold `u` with `ρ E#V(u) = expected`.
pub fn threshold_for_expected(d: Dim, rho: f64, expected: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::BadRho(rho));
    }
    if !(expected > 0.0) || expected >= rho * expected_pointy_count(d, 0.0, 0.0)? {
        return Err(Error::InvalidArgument(format!("no threshold with {expected} expected exceedances")));
    }
    let f = |u: f64| rho * expected_pointy_count(d, 0.0, u).unwrap_or(f64::INFINITY);
    Ok(solve_decreasing(f, expected))
}

/// Uniform grid over the sampled box for radius queries.
struct Grid {
    d: usize,
    lo: f64,
    h: f64,
    side: usize,
    start: Vec<u32>,
    order: Vec<u32>,
}

impl Grid {
    fn new(coords: &[f64], d: usize, lo: f64, hi: f64, h: f64) -> Self {
        let side = (((hi - lo) / h).ceil() as usize).max(1);
        let cells = side.pow(d as u32);
        let n = coords.len() / d;
        let mut cell_of = Vec::with_capacity(n);
        let mut start = vec![0u32; cells + 1];
        for p in coords.chunks_exact(d) {
            let mut c = 0;
            for &v in p.iter().rev() {
                c = c * side + Self::axis(lo, h, side, v);
            }
            cell_of.push(c as u32);
            start[c + 1] += 1;
        }
        for i in 0..cells {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut order = vec![0u32; n];
        for (i, &c) in cell_of.iter().enumerate() {
            order[fill[c as usize] as usize] = i as u32;
            fill[c as usize] += 1;
        }
        Grid {
            d,
            lo,
            h,
            side,
            start,
            order,
        }
    }

    #[inline]
    fn axis(lo: f64, h: f64, side: usize, v: f64) -> usize {
        (((v - lo) / h).floor().max(0.0) as usize).min(side - 1)
    }

    /// Calls `f` with the index of every point in cells meeting the cube
    /// of half-width `r` about `x`.
    fn for_each_near(&self, x: &[f64], r: f64, mut f: impl FnMut(usize)) {
        let d = self.d;
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for k in 0..d {
            lo[k] = Self::axis(self.lo, self.h, self.side, x[k] - r);
            hi[k] = Self::axis(self.lo, self.h, self.side, x[k] + r);
        }
        let mut idx = lo;
        loop {
            let mut c = 0;
            for k in (0..d).rev() {
                c = c * self.side + idx[k];
            }
            for &i in &self.order[self.start[c] as usize..self.start[c + 1] as usize] {
                f(i as usize);
            }
            let mut k = 0;
            loop {
                if k == d {
                    return;
                }
                if idx[k] < hi[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = lo[k];
                k += 1;
            }
        }
    }
}

/// Per-nucleus far-vertex distances against a fixed point set, by the
/// certified local kernel.
pub(crate) struct LocalCells {
    d: usize,
    coords: Vec<f64>,
    grid: Grid,
    /// Sampled region `[lo, hi]^d`.
    lo: f64,
    hi: f64,
    start_radius: f64,
    local: Vec<f64>,
    clipper: Clipper,
    raw: Vec<RawVertex>,
}

/// Outcome of one nucleus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LocalD {
    Certified(f64),
    /// The cell could not be certified inside the sampled region.
    Uncertified,
    /// A vertex tie or singular solve.
    Degenerate,
}

impl LocalCells {
    pub(crate) fn new(d: Dim, coords: Vec<f64>, lo: f64, hi: f64) -> Self {
        let dd = d.get();
        // Most cells close at the first radius.
        let start_radius = 2.0 * threshold_for_expected(d, 1.0, 0.05).expect("valid threshold");
        let h = (0.5 * start_radius).max(0.5);
        let grid = Grid::new(&coords, dd, lo, hi, h);
        LocalCells {
            d: dd,
            coords,
            grid,
            lo,
            hi,
            start_radius,
            local: Vec::new(),
            clipper: Clipper::new(dd),
            raw: Vec::new(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub(crate) fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    /// `D` of the cell of point `i`.
    pub(crate) fn far_distance(&mut self, i: usize) -> LocalD {
        let d = self.d;
        let mut x = [0.0; MAX_DIM];
        x[..d].copy_from_slice(self.point(i));
        let avail = x[..d]
            .iter()
            .map(|&v| (v - self.lo).min(self.hi - v))
            .fold(f64::INFINITY, f64::min);
        let mut radius = self.start_radius.min(avail);
        loop {
            let r2 = radius * radius;
            self.local.clear();
            let (coords, local) = (&self.coords, &mut self.local);
            self.grid.for_each_near(&x[..d], radius, |j| {
                if j == i {
                    return;
                }
                let p = &coords[j * d..(j + 1) * d];
                let mut s = 0.0;
                for k in 0..d {
                    let t = p[k] - x[k];
                    s += t * t;
                }
                if s <= r2 {
                    local.extend((0..d).map(|k| p[k] - x[k]));
                }
            });
            let local = &self.local;
            match self.clipper.compute(local.len() / d, |j| &local[j * d..(j + 1) * d], radius, false, &mut self.raw) {
                CellOutcome::Closed => {
                    return LocalD::Certified(self.raw.iter().map(|v| v.norm).fold(0.0, f64::max));
                }
                CellOutcome::Degenerate => return LocalD::Degenerate,
                CellOutcome::Open if radius >= avail => return LocalD::Uncertified,
                CellOutcome::Open => {}
            }
            // The last attempt uses all the room there is.
            radius = (radius * std::f64::consts::SQRT_2).min(avail);
        }
    }
}

/// One accepted replicate.
#[derive(Debug, Clone, PartialEq)]
struct ReplicateOutcome {
    maximum: f64,
    nuclei: u64,
    pooled: Vec<f64>,
    failed: u64,
    degenerate: u64,
}

#[derive(Debug, Default)]
struct Outcomes(Vec<ReplicateOutcome>, Option<Error>);

impl Merge for Outcomes {
    fn merge(&mut self, other: Self) {
        self.0.extend(other.0);
        if self.1.is_none() {
            self.1 = other.1;
        }
    }
}

enum Attempt {
    Accepted(ReplicateOutcome),
    Uncertified,
    Degenerate,
}

/// Samples the enlarged box and computes `D` for every nucleus in the
/// window.
fn box_replicate(cfg: &ExtremeRunConfig, pool_threshold: f64, rng: &mut RngStream) -> Result<Attempt> {
    let d = cfg.d.get();
    let (lo, hi) = (-cfg.buffer, cfg.n + cfg.buffer);
    let pts = poisson_box(cfg.d, &vec![lo; d], &vec![hi; d], rng)?;
    let coords: Vec<f64> = pts.into_iter().flatten().collect();
    let mut cells = LocalCells::new(cfg.d, coords, lo, hi);
    let mut maximum = 0.0f64;
    let mut nuclei = 0;
    let mut pooled = Vec::new();
    for i in 0..cells.len() {
        if !cells.point(i).iter().all(|&v| (0.0..=cfg.n).contains(&v)) {
            continue;
        }
        nuclei += 1;
        match cells.far_distance(i) {
            LocalD::Certified(dist) => {
                maximum = maximum.max(dist);
                if dist >= pool_threshold {
                    pooled.push(dist);
                }
            }
            LocalD::Uncertified => return Ok(Attempt::Uncertified),
            LocalD::Degenerate => return Ok(Attempt::Degenerate),
        }
    }
    Ok(Attempt::Accepted(ReplicateOutcome {
        maximum,
        nuclei,
        pooled,
        failed: 0,
        degenerate: 0,
    }))
}

/// Result of [`run_box_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeReport {
    pub config: ExtremeRunConfig,
    /// Largest `D(x)` over the nuclei of the window, per replicate.
    pub maxima: Vec<f64>,
    /// Nuclei in the window, per replicate.
    pub nuclei_counts: Vec<u64>,
    pub rho: f64,
    /// Maxima normalized with `α₁`.
    pub normalized: Vec<f64>,
    /// Threshold used for `theta_hat`.
    pub theta_threshold: f64,
    pub theta_hat: MCEstimate,
    /// Kolmogorov distance of `normalized` to the standard Gumbel law.
    pub ks_gumbel: f64,
    /// Replicates discarded and redrawn because a cell reached the buffer
    /// edge or met a singular configuration.
    pub failed_replicates: u64,
    pub degenerate_count: u64,
    /// Every `D(x)` at or above `pool_threshold`, replicate by replicate.
    pub tail_pool: Vec<f64>,
    pub pool_threshold: f64,
}

/// Runs `cfg.reps` accepted replicates of the box experiment.
pub fn run_box_experiment(cfg: &ExtremeRunConfig, workers: usize) -> Result<ExtremeReport> {
    cfg.check()?;
    let rho = cfg.rho();
    let d = cfg.d;
    let pool_threshold = threshold_for_expected(d, rho, POOL_EXPECTED_EXCEEDANCES)
        .unwrap_or(0.0);
    // Total redraws allowed before giving up on the buffer.
    let budget = ((MAX_FAILED_FRACTION * cfg.reps as f64).floor() as u64).max(1);
    let out = run_replicates(cfg.reps, cfg.seed, workers, Outcomes::default, |acc, mut rng| {
        if acc.1.is_some() {
            return;
        }
        let mut failed = 0;
        let mut degenerate = 0;
        loop {
            match box_replicate(cfg, pool_threshold, &mut rng) {
                Ok(Attempt::Accepted(o)) => {
                    acc.0.push(ReplicateOutcome {
                        failed,
                        degenerate,
                        ..o
                    });
                    return;
                }
                Ok(Attempt::Uncertified) => failed += 1,
                Ok(Attempt::Degenerate) => {
                    degenerate += 1;
                    failed += 1;
                }
                Err(e) => {
                    acc.1 = Some(e);
                    return;
                }
            }
            if failed > budget {
                acc.1 = Some(Error::BufferTooSmall {
                    failed,
                    reps: cfg.reps,
                });
                return;
            }
        }
    });
    if let Some(e) = out.1 {
        return Err(e);
    }
    let failed: u64 = out.0.iter().map(|o| o.failed).sum();
    if failed as f64 > MAX_FAILED_FRACTION * cfg.reps as f64 {
        return Err(Error::BufferTooSmall {
            failed,
            reps: cfg.reps,
        });
    }
    let maxima: Vec<f64> = out.0.iter().map(|o| o.maximum).collect();
    let normalized = gumbel_normalize(&maxima, d, rho, NormConst::Alpha1)?;
    let ks_gumbel = ks_distance(&normalized, gumbel_cdf)?;
    let theta_threshold = threshold_for_expected(d, rho, DEFAULT_EXPECTED_EXCEEDANCES)?;
    let mut report = ExtremeReport {
        config: *cfg,
        nuclei_counts: out.0.iter().map(|o| o.nuclei).collect(),
        tail_pool: out.0.iter().flat_map(|o| o.pooled.iter().copied()).collect(),
        degenerate_count: out.0.iter().map(|o| o.degenerate).sum(),
        maxima,
        rho,
        normalized,
        theta_threshold,
        theta_hat: MCEstimate {
            mean: f64::NAN,
            std_error: f64::NAN,
            reps: cfg.reps,
            master_seed: cfg.seed,
            degenerate_count: 0,
        },
        ks_gumbel,
        failed_replicates: failed,
        pool_threshold,
    };
    report.theta_hat = estimate_extremal_index(&report, theta_threshold, d)?;
    Ok(report)
}

/// Which constant centers the normalized maxima.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormConst {
    /// Limit law `exp(-e^{-t})`.
    Alpha1,
    /// Limit law `exp(-θ e^{-t})`.
    Alpha1Prime,
}

/// `κ_d M^d - ln(c ρ (ln ρ)^{d-1})` for each maximum `M`.
pub fn gumbel_normalize(maxima: &[f64], d: Dim, rho: f64, which: NormConst) -> Result<Vec<f64>> {
    if !(rho > std::f64::consts::E) || !rho.is_finite() {
        return Err(Error::BadRho(rho));
    }
    let k = extremal_norm_constants(d);
    let c = match which {
        NormConst::Alpha1 => k.alpha1,
        NormConst::Alpha1Prime => k.alpha1_prime,
    };
    let dd = d.get() as i32;
    let shift = c.ln() + rho.ln() + (dd - 1) as f64 * rho.ln().ln();
    let kappa = unit_ball_volume(d);
    Ok(maxima.iter().map(|&m| kappa * m.powi(dd) - shift).collect())
}

/// Standard Gumbel distribution function `exp(-e^{-t})`.
pub fn gumbel_cdf(t: f64) -> f64 {
    (-(-t).exp()).exp()
}

/// Kolmogorov distance between the empirical distribution of `sample` and
/// the continuous distribution function `cdf`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut dist = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        dist = dist.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(dist)
}

/// `θ̂ = -ln p / λ` where `p` is the fraction of `n` maxima at or below the
/// threshold and `λ` the expected exceedance count; the standard error is
/// the delta-method image of the binomial error of `p`.
pub fn extremal_index_from(p_le: f64, n: u64, lambda: f64) -> Result<(f64, f64)> {
    if !(p_le > 0.0 && p_le < 1.0) {
        return Err(Error::ThresholdOutOfRange {
            u: f64::NAN,
            reason: format!("empirical P(M <= u) = {p_le} must lie strictly between 0 and 1"),
        });
    }
    let theta = -p_le.ln() / lambda;
    let se = (p_le * (1.0 - p_le) / n as f64).sqrt() / (p_le * lambda);
    Ok((theta, se))
}

fn check_threshold(d: Dim, rho: f64, u: f64) -> Result<f64> {
    let lambda = rho * expected_pointy_count(d, 0.0, u)?;
    if !(0.2..=5.0).contains(&lambda) {
        return Err(Error::ThresholdOutOfRange {
            u,
            reason: format!("rho * E#V(u) = {lambda} is outside [0.2, 5]"),
        });
    }
    Ok(lambda)
}

fn index_from_maxima(maxima: &[f64], u: f64, lambda: f64, seed: u64) -> Result<MCEstimate> {
    if maxima.is_empty() {
        return Err(Error::EmptySample);
    }
    let below = maxima.iter().filter(|&&m| m <= u).count();
    let p = below as f64 / maxima.len() as f64;
    let (theta, se) = extremal_index_from(p, maxima.len() as u64, lambda).map_err(|e| match e {
        Error::ThresholdOutOfRange { reason, .. } => Error::ThresholdOutOfRange { u, reason },
        e => e,
    })?;
    Ok(MCEstimate {
        mean: theta,
        std_error: se,
        reps: maxima.len() as u64,
        master_seed: seed,
        degenerate_count: 0,
    })
}

/// Block-maximum estimate of the extremal index at threshold `u`, with the
/// exact expected pointy count as marginal tail.
pub fn estimate_extremal_index(report: &ExtremeReport, u: f64, d: Dim) -> Result<MCEstimate> {
    let lambda = check_threshold(d, report.rho, u)?;
    let mut est = index_from_maxima(&report.maxima, u, lambda, report.config.seed)?;
    est.degenerate_count = report.degenerate_count;
    Ok(est)
}

/// Maxima of i.i.d. sequences with the empirical marginal of `D`: each
/// replicate draws as many values as it had nuclei, resampling the pooled
/// tail above `pool_threshold`. Maxima below the pool threshold are
/// reported as the threshold itself.
pub fn iid_control_maxima(report: &ExtremeReport, seed: u64) -> Result<Vec<f64>> {
    let total: u64 = report.nuclei_counts.iter().sum();
    if total == 0 || report.tail_pool.is_empty() {
        return Err(Error::EmptySample);
    }
    let p = report.tail_pool.len() as f64 / total as f64;
    let pool = &report.tail_pool;
    let mut maxima = Vec::with_capacity(report.nuclei_counts.len());
    for (k, &n) in report.nuclei_counts.iter().enumerate() {
        let mut rng = RngStream::new(seed, k as u64);
        let hits = Binomial::new(n, p)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sample(&mut rng);
        let mut m = report.pool_threshold;
        for _ in 0..hits {
            m = m.max(pool[rng.random_range(0..pool.len())]);
        }
        maxima.push(m);
    }
    Ok(maxima)
}

/// Extremal index of the i.i.d. control at threshold `u`.
pub fn iid_control_index(report: &ExtremeReport, u: f64, seed: u64) -> Result<MCEstimate> {
    let d = report.config.d;
    if u < report.pool_threshold {
        return Err(Error::ThresholdOutOfRange {
            u,
            reason: format!("below the pooled-tail threshold {}", report.pool_threshold),
        });
    }
    let lambda = check_threshold(d, report.rho, u)?;
    index_from_maxima(&iid_control_maxima(report, seed)?, u, lambda, seed)
}

/// Far-vertex distance of every point of `coords` whose cell is certified
/// inside `[lo, hi]^d`, with `NaN` for the others.
pub fn far_distances(d: Dim, coords: &[Vec<f64>], lo: f64, hi: f64) -> Result<Vec<f64>> {
    let dd = d.get();
    if let Some(p) = coords.iter().find(|p| p.len() != dd) {
        return Err(Error::DimensionMismatch {
            expected: dd,
            found: p.len(),
        });
    }
    let flat: Vec<f64> = coords.iter().flatten().copied().collect();
    let mut cells = LocalCells::new(d, flat, lo, hi);
    Ok((0..cells.len())
        .map(|i| match cells.far_distance(i) {
            LocalD::Certified(v) => v,
            _ => f64::NAN,
        })
        .collect())
}
