//! Parameter layouts, model templates and the unconstrained reparametrization.
//!
//! The natural parameter vector is `[α_1, …, α_p, μ_ε, (r)]`, or
//! `[α_1, …, α_p, b0, b1, b2, (r)]` for the seasonal mean. Iterative methods
//! optimize over `z ∈ R^k` with
//!
//! ```text
//! α_j = e^{z_j} / (1 + Σ_k e^{z_k})     (open simplex: α_j > 0, Σ α_j < 1)
//! μ_ε = e^z,  r = e^z,  b_i = z
//! ```

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GinarError, Result};
use crate::innovations::{InnovationFamily, InnovationSpec};
use crate::model::{GinarModel, SeasonalMeanModel};
use crate::thinning::ThinningSpec;

/// Bound on unconstrained coordinates; keeps `exp` finite.
const Z_BOUND: f64 = 30.0;

/// Smallest value of `r` used when building a model from estimates.
pub const R_FLOOR: f64 = 1e-8;

/// The three process families used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PoInar,
    NbInar,
    GeomInar,
}

impl Family {
    pub fn template(self, p: usize) -> ModelTemplate {
        match self {
            Family::PoInar => {
                ModelTemplate::new(p, ThinningSpec::Binomial, InnovationFamily::Poisson)
            }
            Family::NbInar => {
                ModelTemplate::new(p, ThinningSpec::Binomial, InnovationFamily::NegBinomial)
            }
            Family::GeomInar => {
                ModelTemplate::new(p, ThinningSpec::NegBinomial, InnovationFamily::Poisson)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::PoInar => "po-inar",
            Family::NbInar => "nb-inar",
            Family::GeomInar => "geom-inar",
        }
    }
}

impl FromStr for Family {
    type Err = GinarError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "po-inar" | "poinar" => Ok(Family::PoInar),
            "nb-inar" | "nbinar" => Ok(Family::NbInar),
            "geom-inar" | "geominar" => Ok(Family::GeomInar),
            other => Err(GinarError::InvalidParameter(format!(
                "unknown family {other:?} (expected po-inar, nb-inar or geom-inar)"
            ))),
        }
    }
}

/// Model family and order, without parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelTemplate {
    pub p: usize,
    pub thinning: ThinningSpec,
    pub innovation: InnovationFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Alpha,
    Positive,
    Free,
}

impl ModelTemplate {
    pub fn new(p: usize, thinning: ThinningSpec, innovation: InnovationFamily) -> Self {
        Self {
            p,
            thinning,
            innovation,
        }
    }

    pub fn of_model(model: &GinarModel) -> Self {
        Self::new(model.p(), model.thinning(), model.innovation().family())
    }

    pub fn family(&self) -> Option<Family> {
        match (self.thinning, self.innovation) {
            (ThinningSpec::Binomial, InnovationFamily::Poisson) => Some(Family::PoInar),
            (ThinningSpec::Binomial, InnovationFamily::NegBinomial) => Some(Family::NbInar),
            (ThinningSpec::NegBinomial, InnovationFamily::Poisson) => Some(Family::GeomInar),
            _ => None,
        }
    }

    pub fn has_r(&self) -> bool {
        self.innovation == InnovationFamily::NegBinomial
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(GinarError::InvalidModel(
                "order p must be at least 1".into(),
            ));
        }
        self.thinning.validate()
    }

    /// Number of free parameters.
    pub fn k(&self, seasonal: bool) -> usize {
        self.p + if seasonal { 3 } else { 1 } + usize::from(self.has_r())
    }

    pub fn param_names(&self, seasonal: bool) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.p).map(|j| format!("alpha{j}")).collect();
        if seasonal {
            names.extend(["b0", "b1", "b2"].map(String::from));
        } else {
            names.push("mu_eps".into());
        }
        if self.has_r() {
            names.push("r".into());
        }
        names
    }

    pub fn kinds(&self, seasonal: bool) -> Vec<ParamKind> {
        let mut kinds = vec![ParamKind::Alpha; self.p];
        if seasonal {
            kinds.extend([ParamKind::Free; 3]);
        } else {
            kinds.push(ParamKind::Positive);
        }
        if self.has_r() {
            kinds.push(ParamKind::Positive);
        }
        kinds
    }

    fn check_len(&self, theta: &[f64], seasonal: bool) -> Result<()> {
        let k = self.k(seasonal);
        if theta.len() != k {
            return Err(GinarError::LengthMismatch {
                expected: k,
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub fn innovation_spec(&self, mu: f64, r: Option<f64>) -> InnovationSpec {
        match self.innovation {
            InnovationFamily::Poisson => InnovationSpec::Poisson { mu },
            InnovationFamily::Geometric => InnovationSpec::Geometric { mu },
            InnovationFamily::NegBinomial => InnovationSpec::NegBinomial {
                mu,
                r: r.unwrap_or(R_FLOOR),
            },
        }
    }

    /// Model at a natural parameter vector; fails outside the parameter space.
    ///
    /// For seasonal layouts the innovation mean is `exp(b0)`; the
    /// time-varying mean comes from [`ModelTemplate::seasonal`].
    pub fn model(&self, theta: &[f64], seasonal: bool) -> Result<GinarModel> {
        self.check_len(theta, seasonal)?;
        let p = self.p;
        let mu = if seasonal { theta[p].exp() } else { theta[p] };
        let r = self.has_r().then(|| theta[theta.len() - 1]);
        GinarModel::new(
            theta[..p].to_vec(),
            self.thinning,
            self.innovation_spec(mu, r),
        )
    }

    pub fn seasonal(&self, theta: &[f64], period: f64) -> Result<SeasonalMeanModel> {
        self.check_len(theta, true)?;
        let p = self.p;
        SeasonalMeanModel::new(theta[p], theta[p + 1], theta[p + 2], period)
    }

    /// Natural parameters of a model, in layout order.
    pub fn theta_of(model: &GinarModel) -> Vec<f64> {
        let mut theta = model.alphas().to_vec();
        theta.push(model.innovation().mu());
        if let InnovationSpec::NegBinomial { r, .. } = model.innovation() {
            theta.push(r);
        }
        theta
    }

    /// Maps natural parameters to the unconstrained space, first pulling them
    /// strictly inside the parameter space.
    pub fn to_unconstrained(&self, theta: &[f64], seasonal: bool) -> Result<Vec<f64>> {
        self.check_len(theta, seasonal)?;
        let p = self.p;
        let alphas = interior_alphas(&theta[..p]);
        let rest = 1.0 - alphas.iter().sum::<f64>();
        let mut z: Vec<f64> = alphas
            .iter()
            .map(|a| (a / rest).ln().clamp(-Z_BOUND, Z_BOUND))
            .collect();
        for (v, kind) in theta[p..].iter().zip(&self.kinds(seasonal)[p..]) {
            z.push(match kind {
                ParamKind::Positive => v.max(1e-10).ln().clamp(-Z_BOUND, Z_BOUND),
                _ => *v,
            });
        }
        Ok(z)
    }

    pub fn from_unconstrained(&self, z: &[f64], seasonal: bool) -> Vec<f64> {
        let p = self.p;
        let e: Vec<f64> = z[..p]
            .iter()
            .map(|v| v.clamp(-Z_BOUND, Z_BOUND).exp())
            .collect();
        let denom = 1.0 + e.iter().sum::<f64>();
        let mut theta: Vec<f64> = e.iter().map(|v| v / denom).collect();
        for (v, kind) in z[p..].iter().zip(&self.kinds(seasonal)[p..]) {
            theta.push(match kind {
                ParamKind::Positive => v.clamp(-Z_BOUND, Z_BOUND).exp(),
                _ => *v,
            });
        }
        theta
    }
}

/// Pulls thinning coefficients inside the open simplex used by the optimizer.
pub fn interior_alphas(alphas: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = alphas
        .iter()
        .map(|v| if v.is_finite() { v.max(1e-3) } else { 1e-3 })
        .collect();
    let total: f64 = a.iter().sum();
    let cap = 0.95;
    if total > cap {
        a.iter_mut().for_each(|v| *v *= cap / total);
    }
    a
}

/// Projects thinning coefficients onto `α_j ≥ 0`, `Σ α_j ≤ 0.999`.
/// Returns the projected vector and whether anything changed.
pub fn clamp_alphas(alphas: &[f64]) -> (Vec<f64>, bool) {
    let mut changed = false;
    let mut a: Vec<f64> = alphas
        .iter()
        .map(|&v| {
            if v < 0.0 || !v.is_finite() {
                changed = true;
                0.0
            } else {
                v
            }
        })
        .collect();
    let total: f64 = a.iter().sum();
    let cap = 0.999;
    if total > cap {
        changed = true;
        a.iter_mut().for_each(|v| *v *= cap / total);
    }
    (a, changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn names_and_kinds() {
        let t = Family::NbInar.template(2);
        assert_eq!(t.param_names(false), ["alpha1", "alpha2", "mu_eps", "r"]);
        assert_eq!(
            t.param_names(true),
            ["alpha1", "alpha2", "b0", "b1", "b2", "r"]
        );
        assert_eq!(t.k(false), 4);
        assert_eq!(
            Family::GeomInar.template(1).param_names(false),
            ["alpha1", "mu_eps"]
        );
    }

    #[test]
    fn round_trip_transform() {
        let t = Family::NbInar.template(3);
        let theta = vec![0.2, 0.1, 0.4, 1.7, 0.6];
        let z = t.to_unconstrained(&theta, false).unwrap();
        let back = t.from_unconstrained(&z, false);
        for (a, b) in theta.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        // p = 1 reduces to the logistic map.
        let t1 = Family::PoInar.template(1);
        let th = t1.from_unconstrained(&[0.3, 0.0], false);
        assert_abs_diff_eq!(th[0], 1.0 / (1.0 + (-0.3f64).exp()), epsilon = 1e-15);
    }

    #[test]
    fn any_z_gives_valid_model() {
        let t = Family::GeomInar.template(4);
        for z in [
            [30.0, 30.0, 30.0, 30.0, -30.0],
            [-50.0, 10.0, 0.0, 5.0, 40.0],
        ] {
            let theta = t.from_unconstrained(&z, false);
            assert!(t.model(&theta, false).is_ok(), "{theta:?}");
        }
    }

    #[test]
    fn family_parsing() {
        assert_eq!("po-inar".parse::<Family>().unwrap(), Family::PoInar);
        assert_eq!("NB_INAR".parse::<Family>().unwrap(), Family::NbInar);
        assert!("inar".parse::<Family>().is_err());
        assert_eq!(
            Family::GeomInar.template(1).family(),
            Some(Family::GeomInar)
        );
    }

    #[test]
    fn clamping() {
        let (a, changed) = clamp_alphas(&[-0.1, 0.5]);
        assert!(changed);
        assert_eq!(a, vec![0.0, 0.5]);
        let (a, changed) = clamp_alphas(&[0.7, 0.6]);
        assert!(changed);
        assert_abs_diff_eq!(a.iter().sum::<f64>(), 0.999, epsilon = 1e-12);
        assert!(!clamp_alphas(&[0.2, 0.3]).1);
    }
}
