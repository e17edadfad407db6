//! Saddlepoint likelihood for binomial thinning.
//!
//! The conditional cgf is `K_t(u) = Σ_j x_{t−j} log(1 − α_j + α_j e^u) + K_ε(u)`.
//! At `x_t > 0` the density approximation is
//! `exp(K_t(ũ) − ũ x_t) / sqrt(2π K″_t(ũ))` with `K′_t(ũ) = x_t`. At `x_t = 0`
//! there is no finite root and the exact `P(X_t = 0) = Π_j (1−α_j)^{x_{t−j}} P(ε = 0)`
//! is used instead. The objective is the sum of the log densities.

use std::f64::consts::PI;

use super::params::ModelTemplate;
use super::{initial_theta, validate_series, FitOptions, FitResult, Method};
use crate::error::{GinarError, Result};
use crate::innovations::Cgf;
use crate::model::GinarModel;
use crate::optim::minimize;
use crate::thinning::ThinningSpec;

const ROOT_TOLERANCE: f64 = 1e-10;

fn require_binomial(model: &GinarModel) -> Result<()> {
    if model.thinning() != ThinningSpec::Binomial {
        return Err(GinarError::Unsupported(
            "the saddlepoint method requires binomial thinning".into(),
        ));
    }
    Ok(())
}

/// `K_t(u)` with its first two derivatives.
pub fn conditional_cgf(model: &GinarModel, lags: &[u64], u: f64) -> Result<Cgf> {
    require_binomial(model)?;
    if lags.len() != model.p() {
        return Err(GinarError::LengthMismatch {
            expected: model.p(),
            got: lags.len(),
        });
    }
    cgf_unchecked(model, lags, u)
}

fn cgf_unchecked(model: &GinarModel, lags: &[u64], u: f64) -> Result<Cgf> {
    let mut k = model.innovation().cgf(u)?;
    let eu = u.exp();
    for (&a, &x) in model.alphas().iter().zip(lags) {
        if x == 0 || a == 0.0 {
            continue;
        }
        let xf = x as f64;
        let m = 1.0 - a + a * eu;
        k.value += xf * m.ln();
        k.d1 += xf * a * eu / m;
        k.d2 += xf * a * (1.0 - a) * eu / (m * m);
    }
    Ok(k)
}

/// Root of `K′_t(u) = x` for `x ≥ 1`, by Newton steps kept inside a bracket.
pub fn solve_saddlepoint(model: &GinarModel, lags: &[u64], x: u64) -> Result<f64> {
    require_binomial(model)?;
    if x == 0 {
        return Err(GinarError::Domain("no saddlepoint at x = 0".into()));
    }
    let xf = x as f64;
    let bound = model.innovation().cgf_upper_bound();
    // Past the edge of the convergence region the derivative is effectively infinite.
    let d1 = |u: f64| match cgf_unchecked(model, lags, u) {
        Ok(k) => Ok(k.d1),
        Err(GinarError::Domain(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    };
    let mean = d1(0.0)?;
    let mut u = (xf / mean).ln();
    if bound.is_finite() && u >= bound {
        u = bound - 1e-3 * bound.abs().max(1e-3);
    }
    // Bracket the root.
    let mut lo = u - 1.0;
    let mut width = 1.0;
    while d1(lo)? >= xf {
        width *= 2.0;
        lo = u - width;
        if width > 1e6 {
            return Err(GinarError::Numerical(
                "failed to bracket the saddlepoint from below".into(),
            ));
        }
    }
    let mut hi = if bound.is_finite() {
        (u + 1.0).min(0.5 * (u.max(lo) + bound))
    } else {
        u + 1.0
    };
    let mut tries = 0;
    while d1(hi)? <= xf {
        tries += 1;
        if tries > 200 {
            return Err(GinarError::Numerical(
                "failed to bracket the saddlepoint from above".into(),
            ));
        }
        hi = if bound.is_finite() {
            0.5 * (hi + bound)
        } else {
            hi + 2.0 * (hi - lo)
        };
    }
    let mut u = u.clamp(lo, hi);
    for _ in 0..200 {
        let k = match cgf_unchecked(model, lags, u) {
            Ok(k) => k,
            Err(GinarError::Domain(_)) => {
                hi = u;
                u = 0.5 * (lo + hi);
                continue;
            }
            Err(e) => return Err(e),
        };
        let f = k.d1 - xf;
        if f.abs() <= ROOT_TOLERANCE {
            return Ok(u);
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let newton = u - f / k.d2;
        u = if newton > lo && newton < hi && k.d2 > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
            let k = cgf_unchecked(model, lags, u)?;
            if (k.d1 - xf).abs() <= ROOT_TOLERANCE {
                return Ok(u);
            }
            break;
        }
    }
    Err(GinarError::Numerical(format!(
        "saddlepoint equation did not converge at x = {x}"
    )))
}

/// Saddlepoint log density of `x` given `lags` (exact at `x = 0`).
pub fn saddlepoint_log_density(model: &GinarModel, lags: &[u64], x: u64) -> Result<f64> {
    require_binomial(model)?;
    if lags.len() != model.p() {
        return Err(GinarError::LengthMismatch {
            expected: model.p(),
            got: lags.len(),
        });
    }
    if x == 0 {
        let thin: f64 = model
            .alphas()
            .iter()
            .zip(lags)
            .map(|(&a, &l)| l as f64 * (-a).ln_1p())
            .sum();
        return Ok(thin + model.innovation().ln_pmf(0));
    }
    let u = solve_saddlepoint(model, lags, x)?;
    let k = cgf_unchecked(model, lags, u)?;
    Ok(-0.5 * (2.0 * PI * k.d2).ln() + k.value - u * x as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlepointLoglik {
    pub value: f64,
    /// Points skipped because the saddlepoint equation could not be solved.
    pub failures: usize,
}

pub fn saddlepoint_loglik(series: &[u64], model: &GinarModel) -> Result<SaddlepointLoglik> {
    require_binomial(model)?;
    let p = model.p();
    let mut lags = vec![0u64; p];
    let mut value = 0.0;
    let mut failures = 0;
    for t in p..series.len() {
        for j in 0..p {
            lags[j] = series[t - j - 1];
        }
        match saddlepoint_log_density(model, &lags, series[t]) {
            Ok(v) => value += v,
            Err(GinarError::Numerical(_)) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(SaddlepointLoglik { value, failures })
}

pub fn fit_saddlepoint(
    series: &[u64],
    template: &ModelTemplate,
    options: &FitOptions,
) -> Result<FitResult> {
    options.validate()?;
    Method::Saddlepoint.check_template(template)?;
    validate_series(series, template, template.k(false))?;
    let theta0 = initial_theta(series, template, options)?;
    let z0 = template.to_unconstrained(&theta0, false)?;
    let n = (series.len() - template.p) as f64;
    let objective = |z: &[f64]| {
        let Ok(model) = template.model(&template.from_unconstrained(z, false), false) else {
            return f64::INFINITY;
        };
        match saddlepoint_loglik(series, &model) {
            Ok(l) if l.value.is_finite() => -l.value / n,
            _ => f64::INFINITY,
        }
    };
    let result = minimize(objective, &z0, &options.optim());
    let theta_hat = template.from_unconstrained(&result.x, false);
    let ll = saddlepoint_loglik(series, &template.model(&theta_hat, false)?)?;
    let mut flags = Vec::new();
    if ll.failures > 0 {
        flags.push(format!("skipped_points={}", ll.failures));
    }
    if !result.converged {
        flags.push("not_converged".into());
    }
    Ok(FitResult {
        method: Method::Saddlepoint,
        template: *template,
        param_names: template.param_names(false),
        theta_hat,
        objective: Some(ll.value),
        converged: result.converged,
        iterations: result.iterations,
        n_used: series.len() - template.p,
        covariance: None,
        flags,
        seasonal_period: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_lags_poisson_root_and_density() {
        let model = GinarModel::po_inar(vec![0.5], 1.0).unwrap();
        for x in 1..30u64 {
            let u = solve_saddlepoint(&model, &[0], x).unwrap();
            assert_abs_diff_eq!(u, (x as f64).ln(), epsilon = 1e-9);
            if x >= 3 {
                let approx = saddlepoint_log_density(&model, &[0], x).unwrap().exp();
                let exact = model.innovation().pmf(x);
                assert!((approx / exact - 1.0).abs() < 0.03, "x={x}");
            }
        }
    }

    #[test]
    fn roots_satisfy_the_equation() {
        let model = GinarModel::nb_inar(vec![0.4, 0.3], 1.5, 2.0).unwrap();
        for lags in [[0u64, 0], [3, 1], [20, 9]] {
            for x in 1..60u64 {
                let u = solve_saddlepoint(&model, &lags, x).unwrap();
                let k = conditional_cgf(&model, &lags, u).unwrap();
                assert!((k.d1 - x as f64).abs() <= 1e-10, "lags={lags:?} x={x}");
            }
        }
    }

    #[test]
    fn exact_zero_probability() {
        let model = GinarModel::po_inar(vec![0.5], 1.0).unwrap();
        assert_abs_diff_eq!(
            saddlepoint_log_density(&model, &[2], 0).unwrap(),
            (0.25f64 * (-1.0f64).exp()).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn rejects_other_thinning() {
        let model = GinarModel::geom_inar(vec![0.5], 1.0).unwrap();
        assert!(matches!(
            saddlepoint_log_density(&model, &[1], 2),
            Err(GinarError::Unsupported(_))
        ));
    }
}
