//! Dispatch of a [`RunConfig`] to the library and the result envelope.

use crate::config::{Command, RunConfig};
use crate::CliError;
use chrono::{DateTime, Utc};
use pv_extremes::constants::{
    c_d, c_d_alpha, conditional_mean_ratio, expected_pointy_count, extremal_norm_constants, k_d_alpha,
    miles_mean_simplex_volume, tail_asymptotic, tail_prefactor_alpha, unit_ball_volume, unit_sphere_area,
    wendel_probability,
};
use pv_extremes::estimators::{
    estimate_c_d, estimate_c_d_alpha, estimate_k_d_alpha_mc, estimate_miles, estimate_pointy_count, estimate_tail,
    estimate_wendel, McConfig, TailReport,
};
use pv_extremes::extremes::{estimate_extremal_index, iid_control_index, run_box_experiment, ExtremeReport, ExtremeRunConfig};
use pv_extremes::validation::{run_all, CriterionReport, Depth};
use pv_extremes::MCEstimate;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub schema_version: String,
    /// Version of the tool that produced the envelope.
    pub tool_version: String,
    pub command: Command,
    pub config: RunConfig,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub results: Results,
    pub degenerate_count: u64,
}

impl ResultEnvelope {
    /// True unless this is a `validate` run with a failing criterion.
    pub fn passed(&self) -> bool {
        match &self.results {
            Results::Validate(v) => v.passed,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Results {
    Constants(ConstantsResult),
    Estimate(EstimateResult),
    PointyCount(PointyCountResult),
    Tail(TailResult),
    SimplexStats(SimplexStatsResult),
    ExtremalIndex(ExtremalIndexResult),
    Validate(ValidateResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointyRow {
    pub t: f64,
    pub expected_count: f64,
    /// Leading-order tail; absent at `t = 0`.
    pub asymptotic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsResult {
    pub d: usize,
    pub alpha: f64,
    pub kappa_d: f64,
    pub sphere_area: f64,
    pub c_d: f64,
    pub c_d_alpha: f64,
    pub k_d_alpha: f64,
    pub tail_prefactor: f64,
    pub theta: f64,
    pub alpha1: f64,
    pub alpha1_prime: f64,
    pub wendel_probability: f64,
    pub miles_mean_volume: f64,
    pub conditional_mean_ratio: f64,
    pub pointy: Vec<PointyRow>,
}

/// A Monte Carlo estimate next to its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub quantity: String,
    pub estimate: MCEstimate,
    pub exact: f64,
    /// `(mean - exact) / std_error`; absent when not finite.
    pub z_score: Option<f64>,
}

impl EstimateResult {
    fn new(quantity: &str, estimate: MCEstimate, exact: f64) -> Self {
        let z = estimate.z_score(exact);
        EstimateResult {
            quantity: quantity.into(),
            estimate,
            exact,
            z_score: z.is_finite().then_some(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointyCountResult {
    pub t: f64,
    #[serde(flatten)]
    pub count: EstimateResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailResult {
    pub report: TailReport,
    /// `E#V - E#pairs - 3 SE` at each `t`.
    pub bracket_lower: Vec<f64>,
    /// `E#V + 3 SE` at each `t`.
    pub bracket_upper: Vec<f64>,
    pub bracket_holds: Vec<bool>,
    /// Mean pair count over mean pointy count; absent without pointy vertices.
    pub pair_ratio: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexStatsResult {
    pub wendel: EstimateResult,
    pub miles: EstimateResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalIndexResult {
    pub report: ExtremeReport,
    pub theta: MCEstimate,
    pub theta_target: f64,
    pub iid_theta: MCEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResult {
    pub depth: Depth,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

/// Runs the experiment and wraps it in an envelope. Nothing is written.
pub fn run(cfg: &RunConfig) -> Result<ResultEnvelope, CliError> {
    let started = Utc::now();
    let (results, degenerate_count) = dispatch(cfg)?;
    Ok(ResultEnvelope {
        schema_version: SCHEMA_VERSION.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command,
        config: cfg.clone(),
        started,
        finished: Utc::now(),
        results,
        degenerate_count,
    })
}

fn dispatch(cfg: &RunConfig) -> Result<(Results, u64), CliError> {
    let d = cfg.dim();
    let alpha = cfg.alpha.unwrap_or(0.0);
    let mc = McConfig::new(cfg.reps.unwrap_or(1), cfg.seed).with_workers(cfg.workers);
    Ok(match cfg.command {
        Command::Constants => {
            let ext = extremal_norm_constants(d);
            let mut pointy = Vec::new();
            for &t in cfg.t.as_deref().unwrap_or(&[]) {
                pointy.push(PointyRow {
                    t,
                    expected_count: expected_pointy_count(d, alpha, t)?,
                    asymptotic: tail_asymptotic(d, alpha, t).ok(),
                });
            }
            let r = ConstantsResult {
                d: cfg.d,
                alpha,
                kappa_d: unit_ball_volume(d),
                sphere_area: unit_sphere_area(d),
                c_d: c_d(d),
                c_d_alpha: c_d_alpha(d, alpha)?,
                k_d_alpha: k_d_alpha(d, alpha)?,
                tail_prefactor: tail_prefactor_alpha(d, alpha)?,
                theta: ext.theta,
                alpha1: ext.alpha1,
                alpha1_prime: ext.alpha1_prime,
                wendel_probability: wendel_probability(d),
                miles_mean_volume: miles_mean_simplex_volume(d),
                conditional_mean_ratio: conditional_mean_ratio(d),
                pointy,
            };
            (Results::Constants(r), 0)
        }
        Command::EstimateCd => {
            let e = estimate_c_d(d, &mc)?;
            (Results::Estimate(EstimateResult::new("c_d", e, c_d(d))), e.degenerate_count)
        }
        Command::EstimateCdAlpha => {
            let e = estimate_c_d_alpha(d, alpha, &mc)?;
            (Results::Estimate(EstimateResult::new("c_d_alpha", e, c_d_alpha(d, alpha)?)), e.degenerate_count)
        }
        Command::KAlpha => {
            let e = estimate_k_d_alpha_mc(d, alpha, &mc)?;
            (Results::Estimate(EstimateResult::new("k_d_alpha", e, k_d_alpha(d, alpha)?)), e.degenerate_count)
        }
        Command::PointyCount => {
            let t = cfg.t.as_ref().expect("resolved")[0];
            let e = estimate_pointy_count(d, alpha, t, &mc)?;
            let count = EstimateResult::new("pointy_count", e, expected_pointy_count(d, alpha, t)?);
            (Results::PointyCount(PointyCountResult { t, count }), e.degenerate_count)
        }
        Command::Tail => {
            let report = estimate_tail(d, alpha, cfg.t.as_ref().expect("resolved"), &mc)?;
            let k = report.t_grid.len();
            let (bracket_lower, bracket_upper) = (0..k).map(|i| report.bracket(i, 3.0)).unzip();
            let degenerate = report.empirical_prob.first().map_or(0, |e| e.degenerate_count);
            let r = TailResult {
                bracket_holds: (0..k).map(|i| report.bracket_holds(i, 3.0)).collect(),
                pair_ratio: (0..k).map(|i| Some(report.pair_ratio(i)).filter(|x| x.is_finite())).collect(),
                bracket_lower,
                bracket_upper,
                report,
            };
            (Results::Tail(r), degenerate)
        }
        Command::SimplexStats => {
            let w = estimate_wendel(d, &mc)?;
            let m = estimate_miles(d, &McConfig { seed: cfg.seed.wrapping_add(1), ..mc })?;
            let r = SimplexStatsResult {
                wendel: EstimateResult::new("wendel_probability", w, wendel_probability(d)),
                miles: EstimateResult::new("miles_mean_volume", m, miles_mean_simplex_volume(d)),
            };
            (Results::SimplexStats(r), w.degenerate_count + m.degenerate_count)
        }
        Command::ExtremalIndex => {
            let n = cfg.n.expect("resolved");
            let ecfg = ExtremeRunConfig::calibrated(d, n, cfg.reps.expect("resolved"), cfg.seed)?;
            let report = run_box_experiment(&ecfg, cfg.workers)?;
            let theta = estimate_extremal_index(&report, report.theta_threshold, d)?;
            let iid_theta = iid_control_index(&report, report.theta_threshold, cfg.seed.wrapping_add(1))?;
            let degenerate = report.degenerate_count;
            let r = ExtremalIndexResult {
                theta,
                theta_target: extremal_norm_constants(d).theta,
                iid_theta,
                report,
            };
            (Results::ExtremalIndex(r), degenerate)
        }
        Command::Validate => {
            let depth = if cfg.deep == Some(true) { Depth::Full } else { Depth::Reduced };
            let criteria = run_all(depth, cfg.workers);
            let r = ValidateResult {
                depth,
                passed: criteria.iter().all(|c| c.passed),
                criteria,
            };
            (Results::Validate(r), 0)
        }
    })
}
