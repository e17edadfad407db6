//! Estimators for `θ = (α_1, …, α_p, μ_ε[, r])`.

mod cml;
mod moments;
pub mod params;
mod pseudo;
mod saddlepoint;
mod whittle;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cml::{cml_score_hessian, fit_cml, fit_cml_seasonal, LikelihoodProblem, ScoreHessian};
pub use moments::{cls_sigma2, fit_cls, fit_yw, sample_acf, sample_acvf};
pub use params::{Family, ModelTemplate, ParamKind};
pub use pseudo::{fit_pseudo, pseudo_loglik};
pub use saddlepoint::{
    conditional_cgf, fit_saddlepoint, saddlepoint_log_density, saddlepoint_loglik,
    solve_saddlepoint, SaddlepointLoglik,
};
pub use whittle::{fit_whittle, periodogram, whittle_criterion, whittle_profile};

use crate::error::{GinarError, Result};
use crate::inference::CovarianceEstimate;
use crate::innovations::InnovationSpec;
use crate::model::{GinarModel, SeasonalMeanModel};
use crate::optim::OptimOptions;
use crate::transition::{TransitionMethod, DEFAULT_NODES};
use params::{clamp_alphas, R_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cml,
    #[serde(rename = "yw")]
    YuleWalker,
    Cls,
    Pseudo,
    Whittle,
    #[serde(rename = "saddle")]
    Saddlepoint,
    #[serde(rename = "cml_seasonal")]
    SeasonalCml,
}

impl Method {
    pub const STANDARD: [Method; 6] = [
        Method::Cml,
        Method::Cls,
        Method::YuleWalker,
        Method::Pseudo,
        Method::Whittle,
        Method::Saddlepoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cml => "cml",
            Method::YuleWalker => "yw",
            Method::Cls => "cls",
            Method::Pseudo => "pseudo",
            Method::Whittle => "whittle",
            Method::Saddlepoint => "saddle",
            Method::SeasonalCml => "cml_seasonal",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Cml => "CML",
            Method::YuleWalker => "YW",
            Method::Cls => "CLS",
            Method::Pseudo => "Pseudo",
            Method::Whittle => "Whittle",
            Method::Saddlepoint => "Saddle",
            Method::SeasonalCml => "CML (seasonal)",
        }
    }

    /// Whether the objective is a (pseudo or approximate) log-likelihood.
    pub fn is_likelihood(self) -> bool {
        matches!(
            self,
            Method::Cml | Method::Pseudo | Method::Saddlepoint | Method::SeasonalCml
        )
    }

    /// Rejects combinations that the estimator cannot handle.
    pub fn check_template(self, template: &ModelTemplate) -> Result<()> {
        use crate::thinning::ThinningSpec;
        match self {
            Method::Saddlepoint if template.thinning != ThinningSpec::Binomial => Err(
                GinarError::Unsupported("the saddlepoint method requires binomial thinning".into()),
            ),
            Method::SeasonalCml
                if matches!(template.thinning, ThinningSpec::RhoBinomial { .. }) =>
            {
                Err(GinarError::Unsupported(
                    "seasonal CML supports binomial or negative binomial thinning".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = GinarError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cml" => Ok(Method::Cml),
            "yw" | "yule-walker" | "yule_walker" => Ok(Method::YuleWalker),
            "cls" => Ok(Method::Cls),
            "pseudo" => Ok(Method::Pseudo),
            "whittle" => Ok(Method::Whittle),
            "saddle" | "saddlepoint" => Ok(Method::Saddlepoint),
            "cml_seasonal" | "cml-seasonal" | "seasonal" => Ok(Method::SeasonalCml),
            other => Err(GinarError::InvalidParameter(format!(
                "unknown method {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum Initializer {
    #[default]
    YuleWalker,
    /// Natural-scale starting values in layout order.
    Provided(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub transition: TransitionMethod,
    pub quad_nodes: usize,
    pub initializer: Initializer,
    /// Period of the seasonal innovation mean (seasonal CML only).
    pub seasonal_period: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            transition: TransitionMethod::Davies,
            quad_nodes: DEFAULT_NODES,
            initializer: Initializer::YuleWalker,
            seasonal_period: None,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) || self.max_iterations == 0 {
            return Err(GinarError::InvalidParameter(
                "tolerances and iteration limits must be positive".into(),
            ));
        }
        if self.quad_nodes < 2 {
            return Err(GinarError::InvalidParameter(
                "quadrature needs at least 2 nodes".into(),
            ));
        }
        if let Some(period) = self.seasonal_period {
            if !(period.is_finite() && period > 0.0) {
                return Err(GinarError::InvalidParameter(format!(
                    "seasonal period must be positive, got {period}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn optim(&self) -> OptimOptions {
        OptimOptions {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            ..OptimOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub template: ModelTemplate,
    pub param_names: Vec<String>,
    pub theta_hat: Vec<f64>,
    /// Log-likelihood for likelihood methods, the minimized criterion for
    /// CLS and Whittle, absent for Yule-Walker.
    pub objective: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Number of conditioned observations, `n − p`.
    pub n_used: usize,
    pub covariance: Option<CovarianceEstimate>,
    pub flags: Vec<String>,
    pub seasonal_period: Option<f64>,
}

impl FitResult {
    pub fn is_seasonal(&self) -> bool {
        self.seasonal_period.is_some()
    }

    pub fn k(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.theta_hat[i])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.theta_hat[..self.template.p]
    }

    /// The fitted model, projected into the parameter space when the
    /// estimates fall outside it. The second value reports the projection.
    pub fn model_clamped(&self) -> Result<(GinarModel, bool)> {
        let p = self.template.p;
        let (alphas, mut clamped) = clamp_alphas(&self.theta_hat[..p]);
        let mu = if self.is_seasonal() {
            self.theta_hat[p].exp()
        } else {
            self.theta_hat[p]
        };
        let mu = if mu.is_finite() && mu > 0.0 {
            mu
        } else {
            clamped = true;
            1e-8
        };
        let r = if self.template.has_r() {
            let r = *self.theta_hat.last().expect("r present");
            if !(r >= R_FLOOR) {
                clamped = true;
            }
            Some(if r.is_finite() {
                r.max(R_FLOOR)
            } else {
                R_FLOOR
            })
        } else {
            None
        };
        let innovation: InnovationSpec = self.template.innovation_spec(mu, r);
        Ok((
            GinarModel::new(alphas, self.template.thinning, innovation)?,
            clamped,
        ))
    }

    pub fn model(&self) -> Result<GinarModel> {
        Ok(self.model_clamped()?.0)
    }

    pub fn seasonal_model(&self) -> Option<SeasonalMeanModel> {
        let period = self.seasonal_period?;
        self.template.seasonal(&self.theta_hat, period).ok()
    }
}

/// Fits `series` with any estimator.
pub fn fit(
    series: &[u64],
    template: &ModelTemplate,
    method: Method,
    options: &FitOptions,
) -> Result<FitResult> {
    match method {
        Method::Cml => fit_cml(series, template, options),
        Method::YuleWalker => fit_yw(series, template),
        Method::Cls => fit_cls(series, template),
        Method::Pseudo => fit_pseudo(series, template, options),
        Method::Whittle => fit_whittle(series, template, options),
        Method::Saddlepoint => fit_saddlepoint(series, template, options),
        Method::SeasonalCml => {
            let period = options.seasonal_period.ok_or_else(|| {
                GinarError::InvalidParameter("seasonal CML needs a seasonal period".into())
            })?;
            fit_cml_seasonal(series, template, period, options)
        }
    }
}

pub(crate) fn validate_series(series: &[u64], template: &ModelTemplate, k: usize) -> Result<()> {
    template.validate()?;
    if series.len() <= template.p + k {
        return Err(GinarError::InvalidSeries(format!(
            "series of length {} is too short for {} parameters at order {}",
            series.len(),
            k,
            template.p
        )));
    }
    if series.iter().all(|&x| x == 0) {
        return Err(GinarError::InvalidSeries(
            "series is identically zero".into(),
        ));
    }
    Ok(())
}

/// Starting values for iterative estimators: Yule-Walker clamped into the
/// interior, with a fixed fallback when the moment equations are singular.
pub(crate) fn initial_theta(
    series: &[u64],
    template: &ModelTemplate,
    options: &FitOptions,
) -> Result<Vec<f64>> {
    if let Initializer::Provided(theta) = &options.initializer {
        let k = template.k(false);
        if theta.len() != k {
            return Err(GinarError::LengthMismatch {
                expected: k,
                got: theta.len(),
            });
        }
        return Ok(theta.clone());
    }
    let p = template.p;
    let mean = series.iter().sum::<u64>() as f64 / series.len() as f64;
    let mut theta = match fit_yw(series, template) {
        Ok(f) => f.theta_hat,
        Err(_) => {
            let mut t = vec![0.3 / p as f64; p];
            t.push(mean * 0.7);
            if template.has_r() {
                t.push(1.0);
            }
            t
        }
    };
    let alphas = params::interior_alphas(&theta[..p]);
    theta[p] = (mean * (1.0 - alphas.iter().sum::<f64>())).max(0.05 * mean.max(0.1));
    theta[..p].copy_from_slice(&alphas);
    if template.has_r() {
        theta[p + 1] = theta[p + 1].clamp(0.05, 20.0);
    }
    Ok(theta)
}
