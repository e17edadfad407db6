//! Transition probabilities `b(x) = P(X_t = x | X_{t−1}, …, X_{t−p})`.
//!
//! Two routes are provided. The exact route convolves the thinned-lag laws
//! with the innovation pmf. The Davies route inverts the conditional chf
//! `φ(u) = φ_ε(u) Π_j φ_{Y_j}(u)^{x_{t−j}}`:
//!
//! ```text
//! b(x) = (1/π) ∫_0^π Re(φ(u) e^{−iux}) du,                         x ≥ 1
//! a(x) = P(X_t < x) = 1/2 − (1/π) ∫_0^π Re(φ(u) e^{−iux} / (1 − e^{−iu})) du
//! b(0) = a(1)
//! ```
//!
//! The cdf integral is written over `(0, π)` because `φ(−u) = conj φ(u)`
//! makes the real part of its integrand even in `u`, so the integral over
//! `(−π, π)` is twice the half-interval one.

mod quadrature;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use quadrature::{QuadratureRule, DEFAULT_NODES};

use crate::error::{GinarError, Result};
use crate::innovations::InnovationSpec;
use crate::model::GinarModel;
use crate::thinning::{convolve_truncated, ThinningSpec};

/// Probabilities below this are floored before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMethod {
    Exact,
    #[default]
    Davies,
}

impl std::str::FromStr for TransitionMethod {
    type Err = GinarError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(TransitionMethod::Exact),
            "davies" => Ok(TransitionMethod::Davies),
            other => Err(GinarError::InvalidParameter(format!(
                "unknown transition method {other:?}"
            ))),
        }
    }
}

fn check_lags(model: &GinarModel, lags: &[u64]) -> Result<()> {
    if lags.len() != model.p() {
        return Err(GinarError::LengthMismatch {
            expected: model.p(),
            got: lags.len(),
        });
    }
    Ok(())
}

fn pow_count(z: Complex64, k: u64) -> Complex64 {
    z.powu(u32::try_from(k).unwrap_or(u32::MAX))
}

/// `Π_j φ_{Y_j}(u)^{lags_j}`.
pub fn thinning_chf_product(
    thinning: ThinningSpec,
    alphas: &[f64],
    lags: &[u64],
    u: f64,
) -> Complex64 {
    alphas
        .iter()
        .zip(lags)
        .filter(|(_, &x)| x > 0)
        .map(|(&a, &x)| pow_count(thinning.counting_chf(a, u), x))
        .product()
}

/// Conditional chf of `X_t` given `lags` (newest first).
pub fn transition_chf(model: &GinarModel, u: f64, lags: &[u64]) -> Result<Complex64> {
    check_lags(model, lags)?;
    Ok(transition_chf_with(model, &model.innovation(), u, lags))
}

/// Conditional chf with an explicit innovation law, e.g. a time-varying mean.
pub fn transition_chf_with(
    model: &GinarModel,
    innovation: &InnovationSpec,
    u: f64,
    lags: &[u64],
) -> Complex64 {
    innovation.chf(u) * thinning_chf_product(model.thinning(), model.alphas(), lags, u)
}

/// The conditional chf tabulated at the nodes of a quadrature rule.
#[derive(Debug, Clone)]
pub struct DaviesTable {
    phi: Vec<Complex64>,
}

impl DaviesTable {
    pub fn new(model: &GinarModel, lags: &[u64], rule: &QuadratureRule) -> Result<Self> {
        check_lags(model, lags)?;
        Ok(Self::with_innovation(
            model,
            &model.innovation(),
            lags,
            rule,
        ))
    }

    pub fn with_innovation(
        model: &GinarModel,
        innovation: &InnovationSpec,
        lags: &[u64],
        rule: &QuadratureRule,
    ) -> Self {
        let phi = rule
            .nodes()
            .iter()
            .map(|&u| transition_chf_with(model, innovation, u, lags))
            .collect();
        Self { phi }
    }

    /// Multiplies tabulated thinning products by the innovation chf.
    pub fn from_thinning_product(
        product: &[Complex64],
        innovation: &InnovationSpec,
        rule: &QuadratureRule,
    ) -> Self {
        let phi = product
            .iter()
            .zip(rule.nodes())
            .map(|(p, &u)| p * innovation.chf(u))
            .collect();
        Self { phi }
    }

    /// `b(x)` before clamping to `[0, 1]`.
    pub fn prob_unclamped(&self, x: u64, rule: &QuadratureRule) -> f64 {
        if x == 0 {
            return self.cdf(1, rule);
        }
        let xf = x as f64;
        let s: f64 = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .zip(&self.phi)
            .map(|((&u, &w), f)| {
                let (sin, cos) = (u * xf).sin_cos();
                w * (f.re * cos + f.im * sin)
            })
            .sum();
        s / PI
    }

    pub fn prob(&self, x: u64, rule: &QuadratureRule) -> f64 {
        self.prob_unclamped(x, rule).clamp(0.0, 1.0)
    }

    /// `a(x) = P(X_t < x)` for `x ≥ 1`; `a(0) = 0`.
    pub fn cdf(&self, x: u64, rule: &QuadratureRule) -> f64 {
        if x == 0 {
            return 0.0;
        }
        let xf = x as f64;
        let s: f64 = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .zip(&self.phi)
            .map(|((&u, &w), f)| {
                let e = Complex64::from_polar(1.0, -u * xf);
                let d = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -u);
                w * (f * e / d).re
            })
            .sum();
        0.5 - s / PI
    }
}

/// Law of `Σ_j α_j ⊙ lags_j` on `0..=xmax`.
pub fn thinned_sum_pmf(model: &GinarModel, lags: &[u64], xmax: u64) -> Result<Vec<f64>> {
    check_lags(model, lags)?;
    Ok(thinned_sum_pmf_unchecked(
        model.thinning(),
        model.alphas(),
        lags,
        xmax,
    ))
}

pub(crate) fn thinned_sum_pmf_unchecked(
    thinning: ThinningSpec,
    alphas: &[f64],
    lags: &[u64],
    xmax: u64,
) -> Vec<f64> {
    let len = xmax as usize + 1;
    let mut acc = vec![0.0; len];
    acc[0] = 1.0;
    for (&a, &x) in alphas.iter().zip(lags) {
        if x == 0 || a == 0.0 {
            continue;
        }
        let row = thinning.thinned_pmf_row(a, x, xmax);
        acc = convolve_truncated(&acc, &row, len);
    }
    acc
}

/// `b(x)` from a thinned-sum law and an innovation pmf row, both covering `0..=x`.
pub(crate) fn combine_exact(sum_pmf: &[f64], innovation_pmf: &[f64], x: u64) -> f64 {
    let x = x as usize;
    (0..=x).map(|s| sum_pmf[s] * innovation_pmf[x - s]).sum()
}

/// Exact `b(x)` by convolution.
pub fn transition_prob_conv(model: &GinarModel, x: u64, lags: &[u64]) -> Result<f64> {
    let s = thinned_sum_pmf(model, lags, x)?;
    let e = model.innovation().pmf_row(x);
    Ok(combine_exact(&s, &e, x))
}

/// Exact `b(0..=xmax)`.
pub fn transition_pmf_conv(model: &GinarModel, lags: &[u64], xmax: u64) -> Result<Vec<f64>> {
    let s = thinned_sum_pmf(model, lags, xmax)?;
    let e = model.innovation().pmf_row(xmax);
    Ok((0..=xmax).map(|x| combine_exact(&s, &e, x)).collect())
}

/// `b(x)` by chf inversion, clamped to `[0, 1]`.
pub fn transition_prob_davies(
    model: &GinarModel,
    x: u64,
    lags: &[u64],
    rule: &QuadratureRule,
) -> Result<f64> {
    Ok(DaviesTable::new(model, lags, rule)?.prob(x, rule))
}

/// `a(x) = P(X_t < x | lags)` by chf inversion.
pub fn transition_cdf_davies(
    model: &GinarModel,
    x: u64,
    lags: &[u64],
    rule: &QuadratureRule,
) -> Result<f64> {
    Ok(DaviesTable::new(model, lags, rule)?.cdf(x, rule))
}

pub fn transition_prob(
    model: &GinarModel,
    x: u64,
    lags: &[u64],
    method: TransitionMethod,
    rule: &QuadratureRule,
) -> Result<f64> {
    match method {
        TransitionMethod::Exact => transition_prob_conv(model, x, lags),
        TransitionMethod::Davies => transition_prob_davies(model, x, lags, rule),
    }
}

/// `log b(x)`, floored at `log(1e−300)`.
pub fn log_transition(
    model: &GinarModel,
    x: u64,
    lags: &[u64],
    method: TransitionMethod,
    rule: &QuadratureRule,
) -> Result<f64> {
    Ok(floored_ln(transition_prob(model, x, lags, method, rule)?))
}

pub(crate) fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rule() -> QuadratureRule {
        QuadratureRule::default()
    }

    #[test]
    fn zero_alpha_reduces_to_innovation() {
        let m = GinarModel::po_inar(vec![0.0], 1.0).unwrap();
        for x in 0..10 {
            assert_abs_diff_eq!(
                transition_prob_conv(&m, x, &[5]).unwrap(),
                m.innovation().pmf(x),
                epsilon = 1e-15
            );
        }
        assert_abs_diff_eq!(
            transition_prob_davies(&m, 1, &[5], &rule()).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            transition_cdf_davies(&m, 1, &[5], &rule()).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn closed_form_zero_state() {
        let m = GinarModel::po_inar(vec![0.5], 1.0).unwrap();
        let expected = (-1.0f64).exp() * 0.25;
        assert_abs_diff_eq!(expected, 0.091_969_860_292_860_58, epsilon = 1e-15);
        assert_abs_diff_eq!(
            transition_prob_conv(&m, 0, &[2]).unwrap(),
            expected,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            transition_prob_davies(&m, 0, &[2], &rule()).unwrap(),
            expected,
            epsilon = 1e-8
        );
    }

    #[test]
    fn nested_sum_matches_convolution() {
        let m = GinarModel::po_inar(vec![0.3, 0.4], 1.5).unwrap();
        let lags = [3u64, 4];
        for x in 0..=12u64 {
            let mut nested = 0.0;
            for i1 in 0..=lags[0].min(x) {
                for i2 in 0..=lags[1].min(x - i1) {
                    nested += m.thinning().thinned_pmf(0.3, lags[0], i1)
                        * m.thinning().thinned_pmf(0.4, lags[1], i2)
                        * m.innovation().pmf(x - i1 - i2);
                }
            }
            assert_abs_diff_eq!(
                transition_prob_conv(&m, x, &lags).unwrap(),
                nested,
                epsilon = 1e-15
            );
        }
        let total: f64 = transition_pmf_conv(&m, &lags, 60).unwrap().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn chf_special_values() {
        let m = GinarModel::nb_inar(vec![0.3, 0.2], 1.0, 1.0).unwrap();
        assert_eq!(
            transition_chf(&m, 0.0, &[4, 2]).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        let u = 0.7;
        assert_eq!(
            transition_chf(&m, u, &[0, 0]).unwrap(),
            m.innovation().chf(u)
        );
        assert!(transition_chf(&m, u, &[1]).is_err());
    }

    #[test]
    fn chf_matches_transition_series() {
        let m = GinarModel::geom_inar(vec![0.3, 0.2], 1.0).unwrap();
        let lags = [5u64, 3];
        let pmf = transition_pmf_conv(&m, &lags, 150).unwrap();
        for u in [-2.5, -0.4, 0.3, 1.1, 3.0] {
            let series: Complex64 = pmf
                .iter()
                .enumerate()
                .map(|(x, p)| p * Complex64::from_polar(1.0, u * x as f64))
                .sum();
            assert!((series - transition_chf(&m, u, &lags).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn davies_cdf_differences_give_probabilities() {
        let m = GinarModel::nb_inar(vec![0.4], 1.2, 0.8).unwrap();
        let table = DaviesTable::new(&m, &[6], &rule()).unwrap();
        let r = rule();
        let mut prev = table.cdf(1, &r);
        for x in 1..40 {
            let next = table.cdf(x + 1, &r);
            assert!(next >= prev - 1e-12);
            assert_abs_diff_eq!(next - prev, table.prob(x, &r), epsilon = 1e-8);
            prev = next;
        }
        assert_abs_diff_eq!(prev, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn half_interval_cdf_matches_full_interval() {
        let m = GinarModel::po_inar(vec![0.35, 0.25], 2.0).unwrap();
        let lags = [4u64, 7];
        let full = QuadratureRule::on_interval(600, -PI, PI).unwrap();
        for x in 1..20u64 {
            let direct: f64 = full.integrate(|u| {
                let phi = transition_chf(&m, u, &lags).unwrap();
                let e = Complex64::from_polar(1.0, -u * x as f64);
                (phi * e / (1.0 - Complex64::from_polar(1.0, -u))).re
            });
            let a_full = 0.5 - direct / (2.0 * PI);
            let a_half = transition_cdf_davies(&m, x, &lags, &rule()).unwrap();
            assert_abs_diff_eq!(a_full, a_half, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_transition_round_trip_and_floor() {
        let m = GinarModel::po_inar(vec![0.5], 1.0).unwrap();
        for method in [TransitionMethod::Exact, TransitionMethod::Davies] {
            let l = log_transition(&m, 3, &[2], method, &rule()).unwrap();
            let p = transition_prob(&m, 3, &[2], method, &rule()).unwrap();
            assert_abs_diff_eq!(l.exp(), p, epsilon = 1e-12 * p);
        }
        let l = log_transition(&m, 400, &[0], TransitionMethod::Exact, &rule()).unwrap();
        assert_eq!(l, PROB_FLOOR.ln());
    }

    #[test]
    fn method_parsing() {
        assert_eq!(
            "exact".parse::<TransitionMethod>().unwrap(),
            TransitionMethod::Exact
        );
        assert!("fft".parse::<TransitionMethod>().is_err());
    }
}
