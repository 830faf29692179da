//! Monte Carlo drivers with standard errors.
//!
//! Every estimator draws replicate `i` from the stream `(seed, i)` and
//! folds replicates through [`run_replicates`], so results depend only on
//! `(seed, reps)`.

use crate::constants::{check_alpha, expected_pointy_count, tail_asymptotic, unit_ball_volume, Dim, MAX_DIM};
use crate::error::{Error, Result};
use crate::geometry::{hull_test_rows, HullTest};
use crate::linalg::System;
use crate::parallel::{default_workers, run_replicates, Merge};
use crate::sampling::{uniform_sphere_into, IntensityModel, RngStream};
use crate::stats::{MCEstimate, RunningStats};
use crate::typical_cell::{count_pointy_at_least, pairs, sample_typical_cell, CellOptions};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest tolerated fraction of degenerate replicates.
pub const MAX_DEGENERATE_FRACTION: f64 = 1e-3;

/// Replicate count, master seed and worker threads of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub reps: u64,
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(reps: u64, seed: u64) -> Self {
        McConfig {
            reps,
            seed,
            workers: default_workers(),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    fn check(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Acc {
    stats: RunningStats,
    degenerate: u64,
}

impl Merge for Acc {
    fn merge(&mut self, other: Self) {
        self.stats.merge(&other.stats);
        self.degenerate += other.degenerate;
    }
}

fn finish(acc: Acc, cfg: &McConfig) -> Result<MCEstimate> {
    check_degenerate(acc.degenerate, cfg.reps)?;
    Ok(acc.stats.estimate(cfg.seed, acc.degenerate))
}

fn check_degenerate(degenerate: u64, reps: u64) -> Result<()> {
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * reps as f64 {
        return Err(Error::TooManyDegenerate { degenerate, reps });
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// One draw of `d+1` uniform directions.
struct SimplexDraw {
    u: [[f64; MAX_DIM]; MAX_DIM + 1],
}

impl SimplexDraw {
    fn sample(d: usize, rng: &mut RngStream) -> Self {
        let mut u = [[0.0; MAX_DIM]; MAX_DIM + 1];
        for row in u.iter_mut().take(d + 1) {
            uniform_sphere_into(rng, &mut row[..d]);
        }
        SimplexDraw { u }
    }

    fn volume(&self, d: usize, d_fact: f64) -> f64 {
        let mut sys = System::new(d, d);
        for i in 0..d {
            for c in 0..d {
                sys.set(i, c, self.u[i + 1][c] - self.u[0][c]);
            }
        }
        sys.determinant().abs() / d_fact
    }

    /// Whether the origin of `U_0^⊥` lies inside the hull of the projected
    /// `U_1, ..., U_d`.
    fn projected_hull(&self, d: usize) -> HullTest {
        let u0 = &self.u[0];
        let mut rows = [[0.0; MAX_DIM]; MAX_DIM];
        for (row, ui) in rows.iter_mut().zip(&self.u[1..=d]) {
            let s: f64 = (0..d).map(|k| ui[k] * u0[k]).sum();
            for k in 0..d {
                row[k] = ui[k] - s * u0[k];
            }
        }
        hull_test_rows(&rows, d)
    }

    fn edge_product(&self, d: usize, alpha: f64) -> f64 {
        let mut p = 1.0;
        for ui in &self.u[1..=d] {
            let r2: f64 = (0..d).map(|k| (ui[k] - self.u[0][k]).powi(2)).sum();
            p *= r2.powf(0.5 * alpha);
        }
        p
    }
}

fn simplex_estimator<F>(d: Dim, cfg: &McConfig, f: F) -> Result<MCEstimate>
where
    F: Fn(&SimplexDraw, usize) -> Option<f64> + Sync,
{
    cfg.check()?;
    let dd = d.get();
    let acc = run_replicates(cfg.reps, cfg.seed, cfg.workers, Acc::default, |acc, mut rng| {
        let draw = SimplexDraw::sample(dd, &mut rng);
        match f(&draw, dd) {
            Some(x) => acc.stats.push(x),
            None => acc.degenerate += 1,
        }
    });
    finish(acc, cfg)
}

/// Mean volume of the simplex on `d+1` uniform directions, restricted to
/// draws where `U_0^⊥` projections of the others surround the origin.
pub fn estimate_c_d(d: Dim, cfg: &McConfig) -> Result<MCEstimate> {
    let d_fact = factorial(d.get());
    simplex_estimator(d, cfg, |s, d| match s.projected_hull(d) {
        HullTest::Interior => Some(s.volume(d, d_fact)),
        HullTest::Exterior => Some(0.0),
        HullTest::Degenerate => None,
    })
}

/// As [`estimate_c_d`] with the weight `∏_{i≥1} ‖U_i - U_0‖^α`.
pub fn estimate_c_d_alpha(d: Dim, alpha: f64, cfg: &McConfig) -> Result<MCEstimate> {
    check_alpha(d, alpha)?;
    let d_fact = factorial(d.get());
    simplex_estimator(d, cfg, |s, d| match s.projected_hull(d) {
        HullTest::Interior => Some(s.edge_product(d, alpha) * s.volume(d, d_fact)),
        HullTest::Exterior => Some(0.0),
        HullTest::Degenerate => None,
    })
}

/// Frequency of the projected-hull event alone.
pub fn estimate_wendel(d: Dim, cfg: &McConfig) -> Result<MCEstimate> {
    simplex_estimator(d, cfg, |s, d| match s.projected_hull(d) {
        HullTest::Interior => Some(1.0),
        HullTest::Exterior => Some(0.0),
        HullTest::Degenerate => None,
    })
}

/// Unconditioned mean simplex volume.
pub fn estimate_miles(d: Dim, cfg: &McConfig) -> Result<MCEstimate> {
    let d_fact = factorial(d.get());
    simplex_estimator(d, cfg, |s, d| Some(s.volume(d, d_fact)))
}

/// `m_α(B_1(-e_1)) = ∫_{B_1(-e_1)} ‖x‖^α dx` by uniform sampling in the ball.
pub fn estimate_k_d_alpha_mc(d: Dim, alpha: f64, cfg: &McConfig) -> Result<MCEstimate> {
    check_alpha(d, alpha)?;
    cfg.check()?;
    let dd = d.get();
    let kappa = unit_ball_volume(d);
    let acc = run_replicates(cfg.reps, cfg.seed, cfg.workers, Acc::default, |acc, mut rng| {
        let mut x = [0.0; MAX_DIM];
        uniform_sphere_into(&mut rng, &mut x[..dd]);
        let r = rng.random::<f64>().powf(1.0 / dd as f64);
        x[..dd].iter_mut().for_each(|v| *v *= r);
        x[0] -= 1.0;
        let n2: f64 = x[..dd].iter().map(|v| v * v).sum();
        if n2 > 0.0 {
            acc.stats.push(kappa * n2.powf(0.5 * alpha));
        } else {
            acc.degenerate += 1;
        }
    });
    finish(acc, cfg)
}

/// Per-threshold accumulators over a shared cell ensemble.
#[derive(Debug, Clone, Default, PartialEq)]
struct TailAcc {
    prob: Vec<RunningStats>,
    count: Vec<RunningStats>,
    pairs: Vec<RunningStats>,
    rejected: u64,
}

impl Merge for TailAcc {
    fn merge(&mut self, other: Self) {
        self.prob.merge(other.prob);
        self.count.merge(other.count);
        self.pairs.merge(other.pairs);
        self.rejected += other.rejected;
    }
}

fn cell_ensemble(d: Dim, alpha: f64, t_grid: &[f64], cfg: &McConfig) -> Result<TailAcc> {
    check_alpha(d, alpha)?;
    cfg.check()?;
    if let Some(&t) = t_grid.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::NegativeThreshold(t));
    }
    if t_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("t_grid must be ascending".into()));
    }
    let model = IntensityModel::from_alpha(alpha);
    let opts = CellOptions::default();
    let n = t_grid.len();
    let init = || TailAcc {
        prob: vec![RunningStats::default(); n],
        count: vec![RunningStats::default(); n],
        pairs: vec![RunningStats::default(); n],
        rejected: 0,
    };
    let failure = std::sync::Mutex::new(None);
    let acc = run_replicates(cfg.reps, cfg.seed, cfg.workers, init, |acc, mut rng| {
        match sample_typical_cell(d, model, &mut rng, &opts) {
            Ok((cell, rejected)) => {
                acc.rejected += rejected;
                for (i, &t) in t_grid.iter().enumerate() {
                    let k = count_pointy_at_least(&cell, t);
                    acc.prob[i].push(if k >= 1 { 1.0 } else { 0.0 });
                    acc.count[i].push(k as f64);
                    acc.pairs[i].push(pairs(k) as f64);
                }
            }
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
            }
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    check_degenerate(acc.rejected, cfg.reps)?;
    Ok(acc)
}

/// Mean number of pointy vertices at distance at least `t` over
/// independent typical cells. Rejected cell draws count as degenerate.
pub fn estimate_pointy_count(d: Dim, alpha: f64, t: f64, cfg: &McConfig) -> Result<MCEstimate> {
    let acc = cell_ensemble(d, alpha, &[t], cfg)?;
    Ok(acc.count[0].estimate(cfg.seed, acc.rejected))
}

/// Tail probabilities of the far vertex distance with the pair-count
/// bracket, all thresholds evaluated on one cell ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub t_grid: Vec<f64>,
    /// `P(D >= t)`.
    pub empirical_prob: Vec<MCEstimate>,
    /// Exact `E[#pointy vertices at distance >= t]`.
    pub exact_expected_count: Vec<f64>,
    /// Empirical counterpart of `exact_expected_count`.
    pub empirical_count: Vec<MCEstimate>,
    /// `E[k (k-1) / 2]` for `k` pointy vertices at distance `>= t`.
    pub pair_count: Vec<MCEstimate>,
    /// Leading-order tail; `None` at `t = 0`.
    pub asymptotic: Vec<Option<f64>>,
}

impl TailReport {
    /// Lower and upper bracket for `P(D >= t)` at grid index `i`, widened
    /// by `n_se` standard errors of the probability and pair estimates.
    pub fn bracket(&self, i: usize, n_se: f64) -> (f64, f64) {
        let p = &self.empirical_prob[i];
        let q = &self.pair_count[i];
        let e = self.exact_expected_count[i];
        let lower_se = p.std_error.hypot(q.std_error);
        (e - q.mean - n_se * lower_se, e + n_se * p.std_error)
    }

    pub fn bracket_holds(&self, i: usize, n_se: f64) -> bool {
        let (lo, hi) = self.bracket(i, n_se);
        let p = self.empirical_prob[i].mean;
        lo <= p && p <= hi
    }

    /// Ratio of mean pair count to mean pointy count at grid index `i`.
    pub fn pair_ratio(&self, i: usize) -> f64 {
        self.pair_count[i].mean / self.empirical_count[i].mean
    }
}

pub fn estimate_tail(d: Dim, alpha: f64, t_grid: &[f64], cfg: &McConfig) -> Result<TailReport> {
    let acc = cell_ensemble(d, alpha, t_grid, cfg)?;
    let est = |v: &[RunningStats]| -> Vec<MCEstimate> {
        v.iter().map(|s| s.estimate(cfg.seed, acc.rejected)).collect()
    };
    Ok(TailReport {
        t_grid: t_grid.to_vec(),
        empirical_prob: est(&acc.prob),
        exact_expected_count: t_grid
            .iter()
            .map(|&t| expected_pointy_count(d, alpha, t))
            .collect::<Result<_>>()?,
        empirical_count: est(&acc.count),
        pair_count: est(&acc.pairs),
        asymptotic: t_grid
            .iter()
            .map(|&t| tail_asymptotic(d, alpha, t).ok())
            .collect(),
    })
}
