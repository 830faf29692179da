//! Closed-form constants for the far-vertex problem.
//!
//! Every quantity is assembled in log space from `ln Γ` and exponentiated
//! last, so that dimensions up to [`MAX_DIM`] never overflow intermediate
//! factorials or powers.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 12;

/// Ambient dimension, `2 <= d <= 12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dim(usize);

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        if (2..=MAX_DIM).contains(&d) {
            Ok(Dim(d))
        } else {
            Err(Error::InvalidDimension(d))
        }
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    #[inline]
    pub(crate) fn f(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<usize> for Dim {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        Dim::new(d)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.0
    }
}

impl std::fmt::Display for Dim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Rejects `alpha <= -d` (and non-finite alpha).
pub fn check_alpha(d: Dim, alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > -d.f() {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange { alpha, d: d.get() })
    }
}

#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Euler beta function.
pub fn beta(a: f64, b: f64) -> f64 {
    ln_beta(a, b).exp()
}

fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `ln κ_k` for any `k >= 0` (κ_0 = 1, κ_1 = 2).
fn ln_ball_volume(k: usize) -> f64 {
    let k = k as f64;
    0.5 * k * PI.ln() - ln_gamma(0.5 * k + 1.0)
}

/// Volume of the unit ball, `κ_d = π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: Dim) -> f64 {
    ln_ball_volume(d.get()).exp()
}

/// Volume of the unit ball in any dimension `k >= 0`.
pub(crate) fn ball_volume_any(k: usize) -> f64 {
    ln_ball_volume(k).exp()
}

/// Surface area of the unit sphere in `R^d`, `d κ_d`.
pub fn unit_sphere_area(d: Dim) -> f64 {
    d.f() * unit_ball_volume(d)
}

fn ln_c_d(d: Dim) -> f64 {
    let df = d.f();
    df * ln_gamma(0.5 * df)
        - (df - 1.0) * 2f64.ln()
        - 0.5 * PI.ln()
        - ln_factorial(d.get() - 1)
        - (df - 1.0) * ln_gamma(0.5 * (df + 1.0))
}

/// Mean volume of the random simplex with vertices uniform on the sphere,
/// restricted to the event that the first vertex is pointy for the others:
///
/// `C_d = Γ(d/2)^d / (2^{d-1} √π (d-1)! Γ((d+1)/2)^{d-1})`.
pub fn c_d(d: Dim) -> f64 {
    ln_c_d(d).exp()
}

/// One step of the dimension recursion for `C_d`, mapping `C_{d-1}` to `C_d`.
///
/// Requires `d >= 3`.
pub fn c_d_recursion_step(d: Dim, c_prev: f64) -> f64 {
    let df = d.f();
    let ratio = (ln_beta(0.5 * df, 0.5) - ln_beta(0.5 * (df - 1.0), 0.5)).exp();
    c_prev * ratio.powf(df - 1.0) / (2.0 * (df - 1.0))
}

fn ln_k_d_alpha(d: Dim, alpha: f64) -> f64 {
    let df = d.f();
    ((df - 1.0) * ball_volume_any(d.get() - 1)).ln() + (df + alpha - 1.0) * 2f64.ln()
        - (df + alpha).ln()
        + ln_beta(0.5 * (df - 1.0), 0.5 * (df + alpha + 1.0))
}

/// `m_α`-measure of a unit ball whose boundary passes through the origin:
///
/// `K_{d,α} = (d-1) κ_{d-1} 2^{d+α-1} / (d+α) · B((d-1)/2, (d+α+1)/2)`.
pub fn k_d_alpha(d: Dim, alpha: f64) -> Result<f64> {
    check_alpha(d, alpha)?;
    Ok(ln_k_d_alpha(d, alpha).exp())
}

fn ln_c_d_alpha(d: Dim, alpha: f64) -> f64 {
    let df = d.f();
    (df * df + df * (alpha - 2.0) + 1.0) * 2f64.ln()
        - 0.5 * df * PI.ln()
        - ln_factorial(d.get() - 1)
        + ln_gamma(0.5 * df)
        + df * ln_beta(0.5 * (df + alpha), 0.5 * df)
        - ln_beta(0.5 * (df + alpha), 0.5)
}

/// Weighted conditioned simplex mean for the radial-power model:
///
/// `C_{d,α} = 2^{d²+d(α-2)+1} / (π^{d/2} (d-1)!) · Γ(d/2) · B((d+α)/2, d/2)^d / B((d+α)/2, 1/2)`.
pub fn c_d_alpha(d: Dim, alpha: f64) -> Result<f64> {
    check_alpha(d, alpha)?;
    Ok(ln_c_d_alpha(d, alpha).exp())
}

/// Upper incomplete gamma function `Γ(s, x)` for integer `s >= 1`, via the
/// finite sum `(s-1)! e^{-x} Σ_{i<s} x^i / i!`.
pub fn upper_incomplete_gamma_int(s: u32, x: f64) -> f64 {
    assert!(s >= 1, "s must be at least 1");
    assert!(x >= 0.0, "x must be non-negative");
    ln_factorial(s as usize - 1).exp() * (-x).exp() * exp_partial_sum(s, x)
}

/// `Σ_{i<s} x^i / i!`.
fn exp_partial_sum(s: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..s {
        term *= x / i as f64;
        sum += term;
    }
    sum
}

fn ln_count_prefactor(d: Dim, alpha: f64) -> f64 {
    (d.get() as f64 + 1.0) * unit_sphere_area(d).ln() + ln_c_d_alpha(d, alpha)
}

/// Exact expected number of pointy vertices of the cell of the origin at
/// distance at least `t`:
///
/// `(dκ_d)^{d+1} C_{d,α} Γ(d, K t^{d+α}) / ((d+α) K^d)`.
pub fn expected_pointy_count(d: Dim, alpha: f64, t: f64) -> Result<f64> {
    check_alpha(d, alpha)?;
    if !(t >= 0.0) {
        return Err(Error::NegativeThreshold(t));
    }
    let df = d.f();
    let ln_k = ln_k_d_alpha(d, alpha);
    let x = ln_k.exp() * t.powf(df + alpha);
    let ln_value = ln_count_prefactor(d, alpha) - (df + alpha).ln() - df * ln_k
        + ln_factorial(d.get() - 1)
        - x
        + exp_partial_sum(d.get() as u32, x).ln();
    Ok(ln_value.exp())
}

/// Leading-order tail of the far vertex distance:
///
/// `(dκ_d)^{d+1} C_{d,α} / ((d+α) K) · t^{(d+α)(d-1)} e^{-K t^{d+α}}`,
/// which for `α = 0` is `C_d (dκ_d)^d t^{d(d-1)} e^{-κ_d t^d}`.
pub fn tail_asymptotic(d: Dim, alpha: f64, t: f64) -> Result<f64> {
    check_alpha(d, alpha)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    let df = d.f();
    let ln_k = ln_k_d_alpha(d, alpha);
    let ln_value = ln_count_prefactor(d, alpha) - (df + alpha).ln() - ln_k
        + (df + alpha) * (df - 1.0) * t.ln()
        - ln_k.exp() * t.powf(df + alpha);
    Ok(ln_value.exp())
}

/// The polynomial prefactor of the radial-power tail written out directly:
///
/// `2^{d²+d(α-2)-(α-2)} π^{d(d-1)/2} / (d-1)! · (Γ((d+α)/2) / Γ(d+α/2))^{d-1}`.
pub fn tail_prefactor_alpha(d: Dim, alpha: f64) -> Result<f64> {
    check_alpha(d, alpha)?;
    let df = d.f();
    let ln_value = (df * df + df * (alpha - 2.0) - (alpha - 2.0)) * 2f64.ln()
        + 0.5 * df * (df - 1.0) * PI.ln()
        - ln_factorial(d.get() - 1)
        + (df - 1.0) * (ln_gamma(0.5 * (df + alpha)) - ln_gamma(df + 0.5 * alpha));
    Ok(ln_value.exp())
}

/// Normalizing constants of the two Gumbel limits for the box maximum and
/// the extremal index they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalConstants {
    /// Constant of the stationary (clustered) maximum.
    pub alpha1: f64,
    /// Constant of the marginal tail, `d^d κ_d C_d`.
    pub alpha1_prime: f64,
    /// `alpha1 / alpha1_prime`.
    pub theta: f64,
}

pub fn extremal_norm_constants(d: Dim) -> ExtremalConstants {
    let df = d.f();
    let ln_alpha1 = -ln_factorial(d.get())
        + (df - 1.0) * (0.5 * PI.ln() + ln_gamma(0.5 * df + 1.0) - ln_gamma(0.5 * (df + 1.0)));
    let ln_alpha1_prime = df * df.ln() + ln_ball_volume(d.get()) + ln_c_d(d);
    let alpha1 = ln_alpha1.exp();
    let alpha1_prime = ln_alpha1_prime.exp();
    let theta = alpha1 / alpha1_prime;
    debug_assert!((theta - 0.5 / df).abs() < 1e-12);
    ExtremalConstants {
        alpha1,
        alpha1_prime,
        theta,
    }
}

/// Unconditioned mean volume of a simplex with `d+1` i.i.d. uniform vertices
/// on the unit sphere.
pub fn miles_mean_simplex_volume(d: Dim) -> f64 {
    let df = d.f();
    let ln_value = -ln_factorial(d.get()) + ln_gamma(0.5 * (df * df + 1.0))
        - ln_gamma(0.5 * df * df)
        + ln_gamma(0.5 * df)
        - ln_gamma(0.5)
        + df * (ln_gamma(0.5 * df) - ln_gamma(0.5 * (df + 1.0)));
    ln_value.exp()
}

/// Ratio of the pointy-conditioned mean simplex volume to the unconditioned
/// one, `d Γ(d²/2) Γ((d+1)/2) / (Γ((d²+1)/2) Γ(d/2))`.
pub fn conditional_mean_ratio(d: Dim) -> f64 {
    let df = d.f();
    (df.ln() + ln_gamma(0.5 * df * df) + ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * (df * df + 1.0))
        - ln_gamma(0.5 * df))
        .exp()
}

/// Probability that `d` uniform directions project around the origin of a
/// hyperplane: `2^{-(d-1)}`.
pub fn wendel_probability(d: Dim) -> f64 {
    0.5f64.powi(d.get() as i32 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: usize) -> Dim {
        Dim::new(d).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn dim_bounds() {
        assert!(Dim::new(1).is_err());
        assert!(Dim::new(13).is_err());
        assert_eq!(Dim::new(12).unwrap().get(), 12);
    }

    #[test]
    fn ball_volumes() {
        assert!(rel(unit_ball_volume(dim(2)), PI) < 1e-14);
        assert!(rel(unit_ball_volume(dim(3)), 4.0 * PI / 3.0) < 1e-14);
        assert!(rel(unit_ball_volume(dim(4)), PI * PI / 2.0) < 1e-14);
        assert!(rel(ball_volume_any(1), 2.0) < 1e-14);
    }

    #[test]
    fn c_d_values() {
        assert!(rel(c_d(dim(2)), 1.0 / PI) < 1e-13);
        assert!(rel(c_d(dim(3)), PI / 64.0) < 1e-13);
        assert!(rel(c_d(dim(4)), 5.003_515_241_596_927e-3) < 1e-12);
    }

    #[test]
    fn k_alpha_values() {
        assert!(rel(k_d_alpha(dim(2), 0.0).unwrap(), PI) < 1e-13);
        assert!(rel(k_d_alpha(dim(2), -1.0).unwrap(), 4.0) < 1e-13);
        assert!(rel(k_d_alpha(dim(2), 1.0).unwrap(), 32.0 / 9.0) < 1e-13);
        assert!(matches!(
            k_d_alpha(dim(2), -2.0),
            Err(Error::AlphaOutOfRange { .. })
        ));
    }

    #[test]
    fn c_alpha_values() {
        assert!(rel(c_d_alpha(dim(2), 0.0).unwrap(), 1.0 / PI) < 1e-13);
        assert!(rel(c_d_alpha(dim(3), 0.0).unwrap(), PI / 64.0) < 1e-13);
        // 2/π² for the Crofton-related case in the plane.
        assert!(rel(c_d_alpha(dim(2), -1.0).unwrap(), 2.0 / (PI * PI)) < 1e-13);
        assert!(c_d_alpha(dim(3), -3.0).is_err());
    }

    #[test]
    fn incomplete_gamma_small_cases() {
        assert!(rel(upper_incomplete_gamma_int(1, 2.0), (-2.0f64).exp()) < 1e-15);
        assert!(rel(upper_incomplete_gamma_int(2, 1.0), 2.0 / std::f64::consts::E) < 1e-15);
        assert!(rel(upper_incomplete_gamma_int(3, 0.0), 2.0) < 1e-15);
    }

    #[test]
    fn pointy_count_values() {
        assert!(rel(expected_pointy_count(dim(2), 0.0, 0.0).unwrap(), 4.0) < 1e-13);
        let want = (4.0 + 4.0 * PI) * (-PI).exp();
        assert!(rel(expected_pointy_count(dim(2), 0.0, 1.0).unwrap(), want) < 1e-13);
        assert!(rel(expected_pointy_count(dim(3), 0.0, 0.0).unwrap(), 9.0 * PI * PI / 8.0) < 1e-13);
        assert!(matches!(
            expected_pointy_count(dim(2), 0.0, -1.0),
            Err(Error::NegativeThreshold(_))
        ));
    }

    #[test]
    fn tail_values() {
        let t: f64 = 1.5;
        let want = 4.0 * PI * t * t * (-PI * t * t).exp();
        assert!(rel(tail_asymptotic(dim(2), 0.0, t).unwrap(), want) < 1e-13);
        assert!(rel(tail_asymptotic(dim(2), 0.0, 2.0).unwrap(), 16.0 * PI * (-4.0 * PI).exp()) < 1e-13);
    }

    #[test]
    fn extremal_constants_low_dims() {
        let c2 = extremal_norm_constants(dim(2));
        assert!(rel(c2.alpha1, 1.0) < 1e-13);
        assert!(rel(c2.alpha1_prime, 4.0) < 1e-13);
        assert!((c2.theta - 0.25).abs() < 1e-13);
        let c3 = extremal_norm_constants(dim(3));
        assert!(rel(c3.alpha1, 3.0 * PI * PI / 32.0) < 1e-13);
        assert!(rel(c3.alpha1_prime, 9.0 * PI * PI / 16.0) < 1e-13);
    }

    #[test]
    fn miles_and_wendel() {
        assert!(rel(miles_mean_simplex_volume(dim(2)), 1.5 / PI) < 1e-13);
        assert!(rel(miles_mean_simplex_volume(dim(3)), 4.0 * PI / 105.0) < 1e-13);
        assert_eq!(wendel_probability(dim(2)), 0.5);
        assert_eq!(wendel_probability(dim(3)), 0.25);
        assert_eq!(wendel_probability(dim(5)), 0.0625);
        for d in 2..=MAX_DIM {
            let d = dim(d);
            let ratio = c_d(d) / (wendel_probability(d) * miles_mean_simplex_volume(d));
            assert!(rel(ratio, conditional_mean_ratio(d)) < 1e-10);
            assert!(conditional_mean_ratio(d) >= 1.0);
        }
    }

    #[test]
    fn no_overflow_at_max_dim() {
        let d = dim(MAX_DIM);
        for v in [
            c_d(d),
            miles_mean_simplex_volume(d),
            c_d_alpha(d, 3.0).unwrap(),
            expected_pointy_count(d, 0.0, 1.0).unwrap(),
        ] {
            assert!(v.is_finite() && v > 0.0, "{v}");
        }
    }
}
