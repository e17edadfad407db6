//! Covariance estimates, confidence sets, information criteria and residual diagnostics.
//!
//! Every covariance here estimates `cov(θ̂)` directly (not the asymptotic
//! covariance of `√n(θ̂ − θ)`), so intervals are `θ̂_j ± z sqrt(Σ_jj)` and the
//! region is `(θ − θ̂)ᵀ Σ⁻¹ (θ − θ̂) ≤ χ²_{k}(level)` with `k` the number of
//! parameters.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{GinarError, Result};
use crate::estimation::{cml_score_hessian, fit, FitOptions, FitResult, LikelihoodProblem, Method};
use crate::model::{GinarModel, SeasonalMeanModel, DEFAULT_BURNIN};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSource {
    ObservedInformation,
    Sandwich,
    ParametricBootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub matrix: Vec<Vec<f64>>,
    pub source: CovarianceSource,
    pub bootstrap_reps: Option<usize>,
    /// Bootstrap refits that failed and were dropped.
    pub failures: usize,
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.matrix[j][j].max(0.0).sqrt())
            .collect()
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        let k = self.dim();
        DMatrix::from_fn(k, k, |i, j| self.matrix[i][j])
    }
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| 0.5 * (m[(i, j)] + m[(j, i)]))
                .collect()
        })
        .collect()
}

fn invert(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let inv = m
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| GinarError::Singular(format!("{what} is not invertible")))?;
    Ok(inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmlCovarianceKind {
    ObservedInformation,
    Sandwich,
}

/// Observed-information `(−∇²ℓ)⁻¹` or sandwich `J⁻¹ K J⁻¹` covariance, with
/// `J = −∇²ℓ` and `K = Σ_t s_t s_tᵀ` the outer products of the per-observation
/// scores `s_t = ∇b(x_t) / b(x_t)`.
pub fn cml_covariance(
    series: &[u64],
    fit: &FitResult,
    kind: CmlCovarianceKind,
    options: &FitOptions,
) -> Result<CovarianceEstimate> {
    if !matches!(fit.method, Method::Cml | Method::SeasonalCml) {
        return Err(GinarError::Unsupported(format!(
            "information-based covariance needs a CML fit, got {}",
            fit.method
        )));
    }
    let problem = LikelihoodProblem::new(
        series,
        &fit.template,
        fit.seasonal_period,
        options.transition,
        options.quad_nodes,
    )?;
    let sh = cml_score_hessian(&problem, &fit.theta_hat)?;
    let k = fit.k();
    let j = DMatrix::from_fn(k, k, |a, b| -sh.hessian[a][b]);
    let j_inv = invert(&j, "observed information")?;
    let matrix = match kind {
        CmlCovarianceKind::ObservedInformation => j_inv,
        CmlCovarianceKind::Sandwich => {
            let mut outer = DMatrix::<f64>::zeros(k, k);
            for s in &sh.scores {
                for a in 0..k {
                    for b in 0..k {
                        outer[(a, b)] += s[a] * s[b];
                    }
                }
            }
            &j_inv * outer * &j_inv
        }
    };
    let source = match kind {
        CmlCovarianceKind::ObservedInformation => CovarianceSource::ObservedInformation,
        CmlCovarianceKind::Sandwich => CovarianceSource::Sandwich,
    };
    Ok(CovarianceEstimate {
        matrix: from_matrix(&matrix),
        source,
        bootstrap_reps: None,
        failures: 0,
    })
}

/// Parametric bootstrap: simulate `reps` series of the same length from the
/// fitted model, refit each with the same method and return the sample
/// covariance of the refitted estimates. Replicate `b` draws from the stream
/// derived from `(seed, b)`.
pub fn bootstrap_covariance(
    series: &[u64],
    fit: &FitResult,
    reps: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<CovarianceEstimate> {
    if reps < 2 {
        return Err(GinarError::InvalidParameter(
            "bootstrap needs at least 2 replicates".into(),
        ));
    }
    let model = fit.model()?;
    let seasonal = fit.seasonal_model();
    let n = series.len();
    let mut refit_options = options.clone();
    refit_options.initializer = Default::default();
    refit_options.seasonal_period = fit.seasonal_period;
    let estimates: Vec<Option<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, &[b as u64]);
            let sim = match &seasonal {
                Some(s) => model.simulate_seasonal(s, n, DEFAULT_BURNIN, &mut rng),
                None => model.simulate(n, DEFAULT_BURNIN, &mut rng),
            }
            .ok()?;
            let f = fit_by(&sim, fit, &refit_options).ok()?;
            f.theta_hat
                .iter()
                .all(|v| v.is_finite())
                .then_some(f.theta_hat)
        })
        .collect();
    let ok: Vec<Vec<f64>> = estimates.into_iter().flatten().collect();
    let failures = reps - ok.len();
    if failures * 10 > reps {
        return Err(GinarError::Numerical(format!(
            "{failures} of {reps} bootstrap refits failed"
        )));
    }
    Ok(CovarianceEstimate {
        matrix: sample_covariance(&ok),
        source: CovarianceSource::ParametricBootstrap,
        bootstrap_reps: Some(reps),
        failures,
    })
}

fn fit_by(series: &[u64], original: &FitResult, options: &FitOptions) -> Result<FitResult> {
    fit(series, &original.template, original.method, options)
}

/// Unbiased sample covariance of row vectors.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / m as f64)
        .collect();
    let mut cov = vec![vec![0.0; k]; k];
    for r in rows {
        for a in 0..k {
            for b in a..k {
                cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    let denom = (m.max(2) - 1) as f64;
    for a in 0..k {
        for b in a..k {
            cov[a][b] /= denom;
            cov[b][a] = cov[a][b];
        }
    }
    cov
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(GinarError::InvalidParameter(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

fn check_dims(fit: &FitResult, cov: &CovarianceEstimate) -> Result<()> {
    if cov.dim() != fit.k() {
        return Err(GinarError::LengthMismatch {
            expected: fit.k(),
            got: cov.dim(),
        });
    }
    Ok(())
}

/// `θ̂_j ± z_{(1+level)/2} sqrt(Σ_jj)`.
pub fn confidence_interval(
    fit: &FitResult,
    cov: &CovarianceEstimate,
    level: f64,
) -> Result<Vec<Interval>> {
    check_level(level)?;
    check_dims(fit, cov)?;
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    Ok(fit
        .param_names
        .iter()
        .zip(&fit.theta_hat)
        .zip(cov.std_errors())
        .map(|((name, &est), se)| Interval {
            name: name.clone(),
            estimate: est,
            lower: est - z * se,
            upper: est + z * se,
        })
        .collect())
}

/// Ellipsoid `{θ : (θ − θ̂)ᵀ Σ⁻¹ (θ − θ̂) ≤ χ²_k(level)}`.
#[derive(Debug, Clone)]
pub struct ConfidenceRegion {
    center: Vec<f64>,
    precision: DMatrix<f64>,
    threshold: f64,
}

impl ConfidenceRegion {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Quadratic form `(θ − θ̂)ᵀ Σ⁻¹ (θ − θ̂)`.
    pub fn distance(&self, theta: &[f64]) -> f64 {
        let k = self.center.len();
        let d: Vec<f64> = theta.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let mut q = 0.0;
        for i in 0..k {
            for j in 0..k {
                q += d[i] * self.precision[(i, j)] * d[j];
            }
        }
        q
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.center.len() && self.distance(theta) <= self.threshold
    }
}

pub fn confidence_region(
    fit: &FitResult,
    cov: &CovarianceEstimate,
    level: f64,
) -> Result<ConfidenceRegion> {
    check_level(level)?;
    check_dims(fit, cov)?;
    let precision = invert(&cov.to_matrix(), "covariance matrix")?;
    let chi = ChiSquared::new(fit.k() as f64).map_err(|e| GinarError::Numerical(e.to_string()))?;
    Ok(ConfidenceRegion {
        center: fit.theta_hat.clone(),
        precision,
        threshold: chi.inverse_cdf(level),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
}

/// `AIC = −2ℓ + 2k`, `BIC = −2ℓ + k log(n − p)`; likelihood fits only.
pub fn information_criteria(fit: &FitResult) -> Result<InformationCriteria> {
    if !fit.method.is_likelihood() {
        return Err(GinarError::Unsupported(format!(
            "information criteria need a likelihood fit, got {}",
            fit.method
        )));
    }
    let ll = fit
        .objective
        .ok_or_else(|| GinarError::Numerical("fit has no log-likelihood".into()))?;
    let k = fit.k() as f64;
    Ok(InformationCriteria {
        aic: -2.0 * ll + 2.0 * k,
        bic: -2.0 * ll + k * (fit.n_used as f64).ln(),
    })
}

/// Conditional mean and variance of `x_t` for `t = p+1..n`.
fn conditional_moments(
    model: &GinarModel,
    seasonal: Option<&SeasonalMeanModel>,
    series: &[u64],
) -> Result<Vec<(f64, f64)>> {
    let p = model.p();
    if series.len() <= p {
        return Err(GinarError::InvalidSeries(format!(
            "need more than {p} observations"
        )));
    }
    let base = model.innovation();
    let mut lags = vec![0u64; p];
    Ok((p..series.len())
        .map(|t| {
            for j in 0..p {
                lags[j] = series[t - j - 1];
            }
            let innovation = match seasonal {
                Some(s) => base.with_mu(s.mu((t + 1) as f64)),
                None => base,
            };
            (
                model.conditional_mean_with(&lags, innovation.mu()),
                model.conditional_variance_with(&lags, innovation.variance()),
            )
        })
        .collect())
}

/// `(x_t − E[x_t | past]) / sqrt(var[x_t | past])` for `t = p+1..n`.
pub fn pearson_residuals(model: &GinarModel, series: &[u64]) -> Result<Vec<f64>> {
    pearson_residuals_seasonal(model, None, series)
}

pub fn pearson_residuals_seasonal(
    model: &GinarModel,
    seasonal: Option<&SeasonalMeanModel>,
    series: &[u64],
) -> Result<Vec<f64>> {
    let p = model.p();
    Ok(conditional_moments(model, seasonal, series)?
        .into_iter()
        .zip(&series[p..])
        .map(|((m, v), &x)| (x as f64 - m) / v.sqrt())
        .collect())
}

/// Root mean squared one-step prediction error of the conditional mean.
pub fn prediction_rmse(
    model: &GinarModel,
    seasonal: Option<&SeasonalMeanModel>,
    series: &[u64],
) -> Result<f64> {
    let p = model.p();
    let moments = conditional_moments(model, seasonal, series)?;
    let sse: f64 = moments
        .iter()
        .zip(&series[p..])
        .map(|((m, _), &x)| (x as f64 - m).powi(2))
        .sum();
    Ok((sse / moments.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjungBox {
    pub statistic: f64,
    pub p_value: f64,
    pub lags: usize,
}

/// `Q = n(n+2) Σ_{k=1}^{L} ρ̂_k² / (n − k)` against `χ²_L`.
pub fn ljung_box(residuals: &[f64], lags: usize) -> Result<LjungBox> {
    let n = residuals.len();
    if lags == 0 || lags >= n {
        return Err(GinarError::InvalidParameter(format!(
            "need 0 < lags < n, got lags = {lags}, n = {n}"
        )));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let c0: f64 = residuals.iter().map(|r| (r - mean).powi(2)).sum();
    let nf = n as f64;
    let statistic = if c0 > 0.0 {
        nf * (nf + 2.0)
            * (1..=lags)
                .map(|k| {
                    let ck: f64 = (0..n - k)
                        .map(|t| (residuals[t] - mean) * (residuals[t + k] - mean))
                        .sum();
                    (ck / c0).powi(2) / (nf - k as f64)
                })
                .sum::<f64>()
    } else {
        0.0
    };
    let chi = ChiSquared::new(lags as f64).map_err(|e| GinarError::Numerical(e.to_string()))?;
    Ok(LjungBox {
        statistic,
        p_value: chi.sf(statistic),
        lags,
    })
}
