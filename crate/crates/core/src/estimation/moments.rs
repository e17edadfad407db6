//! Moment-based estimators: Yule-Walker and conditional least squares.

use nalgebra::{DMatrix, DVector};

use super::params::{clamp_alphas, ModelTemplate};
use super::{validate_series, FitResult, Method};
use crate::error::{GinarError, Result};

const SIGMA2_FLOOR: f64 = 1e-8;

/// `γ̂(k) = (1/n) Σ_{t=1}^{n−|k|} (x_t − x̄)(x_{t+|k|} − x̄)`.
pub fn sample_acvf(series: &[u64], k: usize) -> f64 {
    let n = series.len();
    if n == 0 || k >= n {
        return 0.0;
    }
    let mean = series.iter().sum::<u64>() as f64 / n as f64;
    (0..n - k)
        .map(|t| (series[t] as f64 - mean) * (series[t + k] as f64 - mean))
        .sum::<f64>()
        / n as f64
}

/// `ρ̂(0..=maxlag)`; all zero beyond lag 0 for a constant series.
pub fn sample_acf(series: &[u64], maxlag: usize) -> Vec<f64> {
    let g0 = sample_acvf(series, 0);
    (0..=maxlag)
        .map(|k| {
            if k == 0 {
                1.0
            } else if g0 > 0.0 {
                sample_acvf(series, k) / g0
            } else {
                0.0
            }
        })
        .collect()
}

fn mean(series: &[u64]) -> f64 {
    series.iter().sum::<u64>() as f64 / series.len() as f64
}

/// `r = (σ² − μ)/μ²`, clamped at zero.
fn overdispersion(sigma2: f64, mu: f64, flags: &mut Vec<String>) -> f64 {
    let r = (sigma2 - mu) / (mu * mu);
    if r.is_finite() && r >= 0.0 {
        r
    } else {
        flags.push("r_clamped".into());
        0.0
    }
}

/// Yule-Walker estimates from `Γ̂ α̂ = γ̂`, `μ̂_ε = (1 − Σ α̂_j) x̄` and
/// `σ̂²_ε = γ̂(0) − Σ α̂_j γ̂(j) − x̄ Σ β̂_j`.
pub fn fit_yw(series: &[u64], template: &ModelTemplate) -> Result<FitResult> {
    validate_series(series, template, template.k(false))?;
    let p = template.p;
    let gamma: Vec<f64> = (0..=p).map(|k| sample_acvf(series, k)).collect();
    let big = DMatrix::from_fn(p, p, |i, j| gamma[i.abs_diff(j)]);
    let rhs = DVector::from_iterator(p, gamma[1..].iter().copied());
    let scale = gamma[0].abs().max(f64::MIN_POSITIVE);
    let lu = big.clone().lu();
    let det_ok = big.clone().svd(false, false).singular_values.min() > 1e-12 * scale;
    let raw = lu
        .solve(&rhs)
        .filter(|s| det_ok && s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| GinarError::Singular("sample autocovariance matrix".into()))?;
    let mut flags = Vec::new();
    let (alphas, clamped) = clamp_alphas(raw.as_slice());
    if clamped {
        flags.push("alpha_clamped".into());
    }
    let xbar = mean(series);
    let mu = (1.0 - alphas.iter().sum::<f64>()) * xbar;
    let mut theta = alphas.clone();
    theta.push(mu);
    if template.has_r() {
        let v = gamma[0]
            - alphas
                .iter()
                .zip(&gamma[1..])
                .map(|(a, g)| a * g)
                .sum::<f64>();
        let beta: f64 = alphas
            .iter()
            .map(|&a| template.thinning.variance_coeff(a))
            .sum();
        let sigma2 = v - xbar * beta;
        theta.push(overdispersion(sigma2, mu, &mut flags));
    }
    Ok(FitResult {
        method: Method::YuleWalker,
        template: *template,
        param_names: template.param_names(false),
        theta_hat: theta,
        objective: None,
        converged: true,
        iterations: 0,
        n_used: series.len() - p,
        covariance: None,
        flags,
        seasonal_period: None,
    })
}

/// Least-squares regression of `x_t` on `(x_{t−1}, …, x_{t−p}, 1)`.
/// Estimates are not forced into the parameter space.
pub fn fit_cls(series: &[u64], template: &ModelTemplate) -> Result<FitResult> {
    validate_series(series, template, template.k(false))?;
    let p = template.p;
    let m = series.len() - p;
    let design = DMatrix::from_fn(m, p + 1, |i, j| {
        if j < p {
            series[p + i - j - 1] as f64
        } else {
            1.0
        }
    });
    let y = DVector::from_iterator(m, series[p..].iter().map(|&v| v as f64));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax.max(1.0) {
        return Err(GinarError::Singular(
            "CLS design matrix is rank deficient".into(),
        ));
    }
    let coef = svd
        .solve(&y, 1e-12 * smax)
        .map_err(|e| GinarError::Singular(format!("CLS least squares: {e}")))?;
    let alphas: Vec<f64> = coef.iter().take(p).copied().collect();
    let mu = coef[p];
    let resid = &y - &design * &coef;
    let u_n = resid.norm_squared();
    let mut flags = Vec::new();
    if clamp_alphas(&alphas).1 || mu <= 0.0 {
        flags.push("outside_parameter_space".into());
    }
    let mut theta = alphas.clone();
    theta.push(mu);
    if template.has_r() {
        let sigma2 = cls_sigma2(series, template, &alphas, mu)?;
        theta.push(overdispersion(sigma2, mu, &mut flags));
    }
    Ok(FitResult {
        method: Method::Cls,
        template: *template,
        param_names: template.param_names(false),
        theta_hat: theta,
        objective: Some(u_n),
        converged: true,
        iterations: 0,
        n_used: m,
        covariance: None,
        flags,
        seasonal_period: None,
    })
}

/// Two-step CLS innovation variance: the minimizer over `σ²` of
/// `Σ_t [(x_t − m_t)² − Σ_j β_j x_{t−j} − σ²]²`, floored at a small positive value.
pub fn cls_sigma2(
    series: &[u64],
    template: &ModelTemplate,
    alphas: &[f64],
    mu: f64,
) -> Result<f64> {
    let p = template.p;
    if alphas.len() != p {
        return Err(GinarError::LengthMismatch {
            expected: p,
            got: alphas.len(),
        });
    }
    if series.len() <= p {
        return Err(GinarError::InvalidSeries(format!(
            "need more than {p} observations"
        )));
    }
    let betas: Vec<f64> = alphas
        .iter()
        .map(|&a| template.thinning.variance_coeff(a))
        .collect();
    let m = series.len() - p;
    let total: f64 = (p..series.len())
        .map(|t| {
            let lags = (1..=p).map(|j| series[t - j] as f64);
            let cond_mean = alphas
                .iter()
                .zip(lags.clone())
                .map(|(a, x)| a * x)
                .sum::<f64>()
                + mu;
            let thin_var: f64 = betas.iter().zip(lags).map(|(b, x)| b * x).sum();
            (series[t] as f64 - cond_mean).powi(2) - thin_var
        })
        .sum();
    Ok((total / m as f64).max(SIGMA2_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::Family;
    use approx::assert_abs_diff_eq;

    const SERIES: [u64; 20] = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3, 2, 3, 8, 4];

    #[test]
    fn acvf_cases() {
        assert_eq!(sample_acvf(&[4; 10], 0), 0.0);
        assert_eq!(sample_acvf(&[4; 10], 3), 0.0);
        let n = SERIES.len() as f64;
        let mean = SERIES.iter().sum::<u64>() as f64 / n;
        let var = SERIES
            .iter()
            .map(|&x| (x as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        assert_abs_diff_eq!(sample_acvf(&SERIES, 0), var, epsilon = 1e-12);
        for k in 1..5 {
            let mut brute = 0.0;
            for s in 0..SERIES.len() {
                for t in 0..SERIES.len() {
                    if t == s + k {
                        brute += (SERIES[s] as f64 - mean) * (SERIES[t] as f64 - mean);
                    }
                }
            }
            assert_abs_diff_eq!(sample_acvf(&SERIES, k), brute / n, epsilon = 1e-12);
        }
    }

    #[test]
    fn yw_scalar_solution() {
        let fit = fit_yw(&SERIES, &Family::PoInar.template(1)).unwrap();
        let a = sample_acvf(&SERIES, 1) / sample_acvf(&SERIES, 0);
        assert_eq!(fit.theta_hat[0], a);
        assert!(fit.objective.is_none());
    }

    #[test]
    fn yw_singular_on_constant_series() {
        assert!(matches!(
            fit_yw(&[3; 30], &Family::PoInar.template(2)),
            Err(GinarError::Singular(_))
        ));
    }

    #[test]
    fn cls_noiseless_line() {
        // x_t = 0.5 x_{t−1} + 1 scaled by 4096 so every value is an integer.
        let mut series = vec![40_960u64];
        for _ in 0..12 {
            series.push(series.last().unwrap() / 2 + 4096);
        }
        let fit = fit_cls(&series, &Family::PoInar.template(1)).unwrap();
        assert_abs_diff_eq!(fit.theta_hat[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.theta_hat[1] / 4096.0, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn cls_sigma2_is_scalar_minimizer() {
        let t = Family::NbInar.template(1);
        let (a, mu) = (0.35, 2.1);
        let s2 = cls_sigma2(&SERIES, &t, &[a], mu).unwrap();
        let objective = |v: f64| -> f64 {
            (1..SERIES.len())
                .map(|i| {
                    let m = a * SERIES[i - 1] as f64 + mu;
                    let c = a * (1.0 - a) * SERIES[i - 1] as f64 + v;
                    ((SERIES[i] as f64 - m).powi(2) - c).powi(2)
                })
                .sum()
        };
        let numeric = crate::optim::golden_section(objective, 0.0, 50.0, 1e-12);
        assert_abs_diff_eq!(s2, numeric, epsilon = 1e-6);
    }
}
