//! Innovation families, all parametrized by their mean `mu`.
//!
//! The negative binomial uses `(mu, r)` with variance `mu + r·mu²`. Internally
//! that is size `k = 1/r` and failure probability `q = mu/(k+mu)`, so
//! `P(ε = x) = Γ(x+k)/(Γ(k) x!) (1−q)^k q^x`. The geometric family is the
//! `k = 1` case: `P(ε = x) = mu^x/(1+mu)^{x+1}`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, GinarError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationFamily {
    Poisson,
    NegBinomial,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InnovationSpec {
    Poisson { mu: f64 },
    NegBinomial { mu: f64, r: f64 },
    Geometric { mu: f64 },
}

/// Cumulant generating function and its first two derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cgf {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl InnovationSpec {
    pub fn poisson(mu: f64) -> Result<Self> {
        let s = InnovationSpec::Poisson { mu };
        s.validate()?;
        Ok(s)
    }

    pub fn neg_binomial(mu: f64, r: f64) -> Result<Self> {
        let s = InnovationSpec::NegBinomial { mu, r };
        s.validate()?;
        Ok(s)
    }

    pub fn geometric(mu: f64) -> Result<Self> {
        let s = InnovationSpec::Geometric { mu };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mu = self.mu();
        if !(mu.is_finite() && mu > 0.0) {
            return invalid(format!("innovation mean must be positive, got {mu}"));
        }
        if let InnovationSpec::NegBinomial { r, .. } = *self {
            if !(r.is_finite() && r > 0.0) {
                return invalid(format!("overdispersion r must be positive, got {r}"));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> InnovationFamily {
        match self {
            InnovationSpec::Poisson { .. } => InnovationFamily::Poisson,
            InnovationSpec::NegBinomial { .. } => InnovationFamily::NegBinomial,
            InnovationSpec::Geometric { .. } => InnovationFamily::Geometric,
        }
    }

    pub fn mu(&self) -> f64 {
        match *self {
            InnovationSpec::Poisson { mu }
            | InnovationSpec::NegBinomial { mu, .. }
            | InnovationSpec::Geometric { mu } => mu,
        }
    }

    /// Same family and dispersion with a different mean.
    pub fn with_mu(&self, mu: f64) -> Self {
        match *self {
            InnovationSpec::Poisson { .. } => InnovationSpec::Poisson { mu },
            InnovationSpec::NegBinomial { r, .. } => InnovationSpec::NegBinomial { mu, r },
            InnovationSpec::Geometric { .. } => InnovationSpec::Geometric { mu },
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InnovationSpec::Poisson { mu } => mu,
            InnovationSpec::NegBinomial { mu, r } => mu + r * mu * mu,
            InnovationSpec::Geometric { mu } => mu * (1.0 + mu),
        }
    }

    /// `(k, q)` for the negative-binomial-type families.
    fn size_and_q(&self) -> Option<(f64, f64)> {
        match *self {
            InnovationSpec::Poisson { .. } => None,
            InnovationSpec::NegBinomial { mu, r } => {
                let k = 1.0 / r;
                Some((k, mu / (k + mu)))
            }
            InnovationSpec::Geometric { mu } => Some((1.0, mu / (1.0 + mu))),
        }
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        let xf = x as f64;
        match *self {
            InnovationSpec::Poisson { mu } => xf * mu.ln() - mu - ln_factorial(x),
            InnovationSpec::Geometric { mu } => xf * mu.ln() - (xf + 1.0) * mu.ln_1p(),
            InnovationSpec::NegBinomial { .. } => {
                let (k, q) = self.size_and_q().expect("negative binomial");
                ln_gamma(xf + k) - ln_gamma(k) - ln_factorial(x) + k * (-q).ln_1p() + xf * q.ln()
            }
        }
    }

    pub fn pmf(&self, x: u64) -> f64 {
        self.ln_pmf(x).exp()
    }

    /// `pmf(0..=xmax)`.
    pub fn pmf_row(&self, xmax: u64) -> Vec<f64> {
        (0..=xmax).map(|x| self.pmf(x)).collect()
    }

    pub fn chf(&self, u: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, u);
        match *self {
            InnovationSpec::Poisson { mu } => (mu * (e - 1.0)).exp(),
            InnovationSpec::Geometric { mu } => 1.0 / ((1.0 + mu) - mu * e),
            InnovationSpec::NegBinomial { .. } => {
                let (k, q) = self.size_and_q().expect("negative binomial");
                // Re(1 − q e^{iu}) > 0, so the principal log is continuous here.
                (k * ((1.0 - q).ln() - (1.0 - q * e).ln())).exp()
            }
        }
    }

    /// `log E[exp(uε)]` with its first two derivatives in `u`.
    pub fn cgf(&self, u: f64) -> Result<Cgf> {
        let eu = u.exp();
        match *self {
            InnovationSpec::Poisson { mu } => Ok(Cgf {
                value: mu * (eu - 1.0),
                d1: mu * eu,
                d2: mu * eu,
            }),
            _ => {
                let (k, q) = self.size_and_q().expect("negative binomial type");
                let qe = q * eu;
                if !(qe < 1.0) {
                    return Err(GinarError::Domain(format!(
                        "cgf argument {u} outside convergence region u < {}",
                        -q.ln()
                    )));
                }
                let denom = 1.0 - qe;
                Ok(Cgf {
                    value: k * ((1.0 - q).ln() - denom.ln()),
                    d1: k * qe / denom,
                    d2: k * qe / (denom * denom),
                })
            }
        }
    }

    /// Supremum of the cgf convergence region (`+∞` for Poisson).
    pub fn cgf_upper_bound(&self) -> f64 {
        match self.size_and_q() {
            None => f64::INFINITY,
            Some((_, q)) => -q.ln(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            InnovationSpec::Poisson { mu } => {
                Poisson::new(mu).expect("positive mean").sample(rng) as u64
            }
            InnovationSpec::Geometric { mu } => Geometric::new(1.0 / (1.0 + mu))
                .expect("valid probability")
                .sample(rng),
            InnovationSpec::NegBinomial { mu, r } => {
                let k = 1.0 / r;
                let lambda = Gamma::new(k, mu / k)
                    .expect("positive gamma parameters")
                    .sample(rng);
                if lambda <= 0.0 {
                    0
                } else {
                    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
                }
            }
        }
    }
}
