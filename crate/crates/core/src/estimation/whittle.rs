//! Periodogram and Whittle estimation.
//!
//! The criterion `(1/N) Σ_j [log f(ν_j) + I(ν_j)/f(ν_j)]` only sees the
//! autoregressive shape of `f` and its scale `c = σ²_ε + μ_X Σ β_j`. The
//! scale is profiled out (`ĉ = mean_j I(ν_j)/g(ν_j)` with `f = c·g`), the
//! coefficients are minimized over the simplex, and then
//! `μ̂_ε = x̄ (1 − Σ α̂_j)` and `σ̂²_ε = ĉ − x̄ Σ β̂_j`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::params::{interior_alphas, ModelTemplate};
use super::{initial_theta, validate_series, FitOptions, FitResult, Method};
use crate::error::{GinarError, Result};
use crate::model::ar_transfer_norm_sqr;
use crate::optim::minimize;

/// `(ν_j, I(ν_j))` at `ν_j = 2πj/N`, `j = 1..=⌊N/2⌋`, with
/// `I(ν) = |Σ_t (x_t − x̄) e^{−iνt}|² / (2πN)`.
pub fn periodogram(series: &[u64]) -> Result<Vec<(f64, f64)>> {
    let n = series.len();
    if n < 4 {
        return Err(GinarError::InvalidSeries(format!(
            "periodogram needs at least 4 values, got {n}"
        )));
    }
    let mean = series.iter().sum::<u64>() as f64 / n as f64;
    let mut buf: Vec<Complex64> = series
        .iter()
        .map(|&x| Complex64::new(x as f64 - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok((1..=n / 2)
        .map(|j| {
            (
                2.0 * PI * j as f64 / n as f64,
                buf[j].norm_sqr() / (2.0 * PI * n as f64),
            )
        })
        .collect())
}

/// Shape `g(ν) = 1/(2π|1 − Σ α_j e^{−iνj}|²)` so that `f = c·g`.
fn shape(alphas: &[f64], nu: f64) -> f64 {
    1.0 / (2.0 * PI * ar_transfer_norm_sqr(alphas, nu))
}

/// `(1/N) Σ_j [log f(ν_j) + I_j/f(ν_j)]` with `f = c·g(α)`.
pub fn whittle_criterion(pgram: &[(f64, f64)], n: usize, alphas: &[f64], c: f64) -> f64 {
    pgram
        .iter()
        .map(|&(nu, i)| {
            let f = c * shape(alphas, nu);
            f.ln() + i / f
        })
        .sum::<f64>()
        / n as f64
}

/// Profiled scale `ĉ(α)` and the criterion at `(α, ĉ)`.
pub fn whittle_profile(pgram: &[(f64, f64)], n: usize, alphas: &[f64]) -> (f64, f64) {
    let c = pgram
        .iter()
        .map(|&(nu, i)| i / shape(alphas, nu))
        .sum::<f64>()
        / pgram.len() as f64;
    (c, whittle_criterion(pgram, n, alphas, c))
}

pub fn fit_whittle(
    series: &[u64],
    template: &ModelTemplate,
    options: &FitOptions,
) -> Result<FitResult> {
    options.validate()?;
    validate_series(series, template, template.k(false))?;
    let n = series.len();
    let p = template.p;
    let pgram = periodogram(series)?;
    if pgram.iter().all(|&(_, i)| i == 0.0) {
        return Err(GinarError::InvalidSeries(
            "periodogram is identically zero".into(),
        ));
    }
    let theta0 = initial_theta(series, template, options)?;
    let a0 = interior_alphas(&theta0[..p]);
    let rest = 1.0 - a0.iter().sum::<f64>();
    let z0: Vec<f64> = a0.iter().map(|a| (a / rest).ln()).collect();
    let to_alphas = |z: &[f64]| -> Vec<f64> {
        let e: Vec<f64> = z.iter().map(|v| v.clamp(-30.0, 30.0).exp()).collect();
        let d = 1.0 + e.iter().sum::<f64>();
        e.iter().map(|v| v / d).collect()
    };
    let objective = |z: &[f64]| whittle_profile(&pgram, n, &to_alphas(z)).1;
    let result = minimize(objective, &z0, &options.optim());
    let alphas = to_alphas(&result.x);
    let (c, value) = whittle_profile(&pgram, n, &alphas);
    let xbar = series.iter().sum::<u64>() as f64 / n as f64;
    let mu = xbar * (1.0 - alphas.iter().sum::<f64>());
    let mut flags = Vec::new();
    let mut theta = alphas.clone();
    theta.push(mu);
    if template.has_r() {
        let beta: f64 = alphas
            .iter()
            .map(|&a| template.thinning.variance_coeff(a))
            .sum();
        let sigma2 = c - xbar * beta;
        let r = (sigma2 - mu) / (mu * mu);
        theta.push(if r.is_finite() && r >= 0.0 {
            r
        } else {
            flags.push("r_clamped".into());
            0.0
        });
    }
    if !result.converged {
        flags.push("not_converged".into());
    }
    Ok(FitResult {
        method: Method::Whittle,
        template: *template,
        param_names: template.param_names(false),
        theta_hat: theta,
        objective: Some(value),
        converged: result.converged,
        iterations: result.iterations,
        n_used: n - p,
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
    fn constant_series_has_zero_periodogram() {
        assert!(periodogram(&[5; 16])
            .unwrap()
            .iter()
            .all(|&(_, i)| i == 0.0));
        assert!(periodogram(&[1, 2, 3]).is_err());
    }

    #[test]
    fn matches_direct_sum() {
        let series: Vec<u64> = (0..16u64).map(|t| (t * 7 + 3) % 5 + t % 3).collect();
        let n = series.len();
        let mean = series.iter().sum::<u64>() as f64 / n as f64;
        let pg = periodogram(&series).unwrap();
        assert_eq!(pg.len(), 8);
        for (j, &(nu, i)) in pg.iter().enumerate() {
            let nu_j = 2.0 * PI * (j + 1) as f64 / n as f64;
            assert_abs_diff_eq!(nu, nu_j, epsilon = 1e-15);
            let s: Complex64 = series
                .iter()
                .enumerate()
                .map(|(t, &x)| {
                    (x as f64 - mean) * Complex64::from_polar(1.0, -nu_j * (t + 1) as f64)
                })
                .sum();
            assert_abs_diff_eq!(i, s.norm_sqr() / (2.0 * PI * n as f64), epsilon = 1e-10);
        }
    }

    #[test]
    fn criterion_matches_brute_force() {
        let series: Vec<u64> = (0..32u64).map(|t| (t * t + 1) % 7).collect();
        let pg = periodogram(&series).unwrap();
        let alphas = [0.3, 0.1];
        let c = 2.5;
        let mut brute = 0.0;
        for j in 1..=16 {
            let nu = 2.0 * PI * j as f64 / 32.0;
            let a = Complex64::new(1.0, 0.0)
                - 0.3 * Complex64::from_polar(1.0, -nu)
                - 0.1 * Complex64::from_polar(1.0, -2.0 * nu);
            let f = c / (2.0 * PI * a.norm_sqr());
            brute += f.ln() + pg[j - 1].1 / f;
        }
        assert_abs_diff_eq!(
            whittle_criterion(&pg, 32, &alphas, c),
            brute / 32.0,
            epsilon = 1e-12
        );
        let (c_hat, v) = whittle_profile(&pg, 32, &alphas);
        assert!(v <= whittle_criterion(&pg, 32, &alphas, c_hat * 1.01));
        assert!(v <= whittle_criterion(&pg, 32, &alphas, c_hat * 0.99));
    }
}
