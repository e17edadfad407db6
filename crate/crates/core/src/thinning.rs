//! Generalized thinning operators `α ⊙ X = Y_1 + … + Y_X`.
//!
//! Each operator is determined by the law of its counting variates `Y_k`,
//! which always have mean `α`:
//!
//! * [`ThinningSpec::Binomial`]: `Y_k ~ Bernoulli(α)`, variance `α(1−α)`.
//! * [`ThinningSpec::NegBinomial`]: `Y_k ~ Geometric(1/(1+α))` on `{0,1,…}`,
//!   pmf `α^y/(1+α)^{y+1}`, variance `α(1+α)`.
//! * [`ThinningSpec::RhoBinomial`]: ρ-Bernoulli counting variates.
//!
//! ## ρ-Bernoulli parametrization
//!
//! The ρ-Bernoulli law with success probability `a` and dispersion `ρ ∈ [0,1)`
//! puts mass `1−a` at zero and `a (ρ/(1+ρ))^{y−1} (1/(1+ρ))` at `y ≥ 1`
//! (see [`rho_bernoulli_pmf`]). Given `Y > 0`, `Y` is geometric on `{1,2,…}`
//! with success probability `1/(1+ρ)`, so
//!
//! ```text
//! E[Y]   = a (1+ρ)
//! E[Y^2] = a (1+ρ)(1+2ρ)
//! ```
//!
//! The mean is not `a`, so the thinning coefficient `α` used throughout this
//! crate is the counting mean and the success probability is `a = α/(1+ρ)`.
//! With that choice `E[Y] = α` and `β = var(Y) = α(1+2ρ) − α²`, which reduces
//! to binomial thinning at `ρ = 0`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Counting-sequence family of a thinning operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ThinningSpec {
    Binomial,
    NegBinomial,
    RhoBinomial { rho: f64 },
}

impl ThinningSpec {
    pub fn rho_binomial(rho: f64) -> Result<Self> {
        let spec = ThinningSpec::RhoBinomial { rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let ThinningSpec::RhoBinomial { rho } = *self {
            if !(rho.is_finite() && (0.0..1.0).contains(&rho)) {
                return invalid(format!("rho must lie in [0, 1), got {rho}"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ThinningSpec::Binomial => "binomial",
            ThinningSpec::NegBinomial => "neg_binomial",
            ThinningSpec::RhoBinomial { .. } => "rho_binomial",
        }
    }

    /// Draws `α ⊙ x`.
    pub fn thin<R: Rng + ?Sized>(&self, alpha: f64, x: u64, rng: &mut R) -> Result<u64> {
        check_alpha(alpha)?;
        Ok(self.thin_unchecked(alpha, x, rng))
    }

    pub(crate) fn thin_unchecked<R: Rng + ?Sized>(&self, alpha: f64, x: u64, rng: &mut R) -> u64 {
        if x == 0 || alpha == 0.0 {
            return 0;
        }
        match *self {
            ThinningSpec::Binomial => {
                if alpha >= 1.0 {
                    return x;
                }
                Binomial::new(x, alpha)
                    .expect("validated binomial parameters")
                    .sample(rng)
            }
            // NB(x, 1/(1+α)) as a gamma mixture of Poissons.
            ThinningSpec::NegBinomial => gamma_poisson(x as f64, alpha, rng),
            ThinningSpec::RhoBinomial { rho } => {
                let a = alpha / (1.0 + rho);
                let successes = if a >= 1.0 {
                    x
                } else {
                    Binomial::new(x, a)
                        .expect("validated binomial parameters")
                        .sample(rng)
                };
                if successes == 0 || rho == 0.0 {
                    return successes;
                }
                // Each success is 1 + Geometric(1/(1+ρ)) failures.
                successes + gamma_poisson(successes as f64, rho, rng)
            }
        }
    }

    /// pmf of one counting variate `Y_k` at `y`.
    pub fn counting_pmf(&self, alpha: f64, y: u64) -> Result<f64> {
        check_alpha(alpha)?;
        Ok(self.counting_pmf_unchecked(alpha, y))
    }

    fn counting_pmf_unchecked(&self, alpha: f64, y: u64) -> f64 {
        match *self {
            ThinningSpec::Binomial => match y {
                0 => 1.0 - alpha,
                1 => alpha,
                _ => 0.0,
            },
            ThinningSpec::NegBinomial => {
                if alpha == 0.0 {
                    return if y == 0 { 1.0 } else { 0.0 };
                }
                (y as f64 * alpha.ln() - (y as f64 + 1.0) * (1.0 + alpha).ln()).exp()
            }
            ThinningSpec::RhoBinomial { rho } => rho_bernoulli_pmf(alpha / (1.0 + rho), rho, y),
        }
    }

    /// Characteristic function `E[exp(iuY)]` of one counting variate.
    pub fn counting_chf(&self, alpha: f64, u: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, u);
        match *self {
            ThinningSpec::Binomial => (1.0 - alpha) + alpha * e,
            ThinningSpec::NegBinomial => 1.0 / ((1.0 + alpha) - alpha * e),
            ThinningSpec::RhoBinomial { rho } => {
                let a = alpha / (1.0 + rho);
                let q = rho / (1.0 + rho);
                (1.0 - a) + a * e * (1.0 - q) / (1.0 - q * e)
            }
        }
    }

    /// Variance `β` of one counting variate with mean `alpha`.
    pub fn variance_coeff(&self, alpha: f64) -> f64 {
        match *self {
            ThinningSpec::Binomial => alpha * (1.0 - alpha),
            ThinningSpec::NegBinomial => alpha * (1.0 + alpha),
            ThinningSpec::RhoBinomial { rho } => alpha * (1.0 + 2.0 * rho) - alpha * alpha,
        }
    }

    /// `P(α ⊙ X = z | X = x)`.
    pub fn thinned_pmf(&self, alpha: f64, x: u64, z: u64) -> f64 {
        if x == 0 || alpha == 0.0 {
            return if z == 0 { 1.0 } else { 0.0 };
        }
        match *self {
            ThinningSpec::Binomial => binomial_pmf(x, alpha, z),
            ThinningSpec::NegBinomial => neg_binomial_thinned_pmf(x, alpha, z),
            ThinningSpec::RhoBinomial { .. } => self.thinned_pmf_row(alpha, x, z)[z as usize],
        }
    }

    /// `P(α ⊙ X = z | X = x)` for `z = 0..=zmax`.
    ///
    /// Entries are exact (not renormalized); mass beyond `zmax` is dropped.
    pub fn thinned_pmf_row(&self, alpha: f64, x: u64, zmax: u64) -> Vec<f64> {
        let len = zmax as usize + 1;
        if x == 0 || alpha == 0.0 {
            let mut row = vec![0.0; len];
            row[0] = 1.0;
            return row;
        }
        match *self {
            ThinningSpec::Binomial => (0..=zmax).map(|z| binomial_pmf(x, alpha, z)).collect(),
            ThinningSpec::NegBinomial => (0..=zmax)
                .map(|z| neg_binomial_thinned_pmf(x, alpha, z))
                .collect(),
            ThinningSpec::RhoBinomial { .. } => {
                let base: Vec<f64> = (0..=zmax)
                    .map(|y| self.counting_pmf_unchecked(alpha, y))
                    .collect();
                convolution_power(&base, x)
            }
        }
    }
}

/// ρ-Bernoulli pmf with success probability `success` and dispersion `rho`,
/// evaluated exactly as the defining formula (its mean is `success·(1+rho)`).
pub fn rho_bernoulli_pmf(success: f64, rho: f64, y: u64) -> f64 {
    if y == 0 {
        return 1.0 - success;
    }
    let q = rho / (1.0 + rho);
    success * q.powi((y - 1) as i32) / (1.0 + rho)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
        return invalid(format!(
            "thinning coefficient must lie in [0, 1], got {alpha}"
        ));
    }
    Ok(())
}

fn gamma_poisson<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> u64 {
    let lambda = Gamma::new(shape, scale)
        .expect("positive gamma parameters")
        .sample(rng);
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
}

pub(crate) fn binomial_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

fn neg_binomial_thinned_pmf(x: u64, alpha: f64, z: u64) -> f64 {
    let (xf, zf) = (x as f64, z as f64);
    let ln_p = -(alpha.ln_1p());
    let ln_q = alpha.ln() - alpha.ln_1p();
    (ln_gamma(zf + xf) - ln_gamma(xf) - ln_factorial(z) + xf * ln_p + zf * ln_q).exp()
}

/// `base^{*n}` truncated to `base.len()` entries, by binary powering.
fn convolution_power(base: &[f64], mut n: u64) -> Vec<f64> {
    let len = base.len();
    let mut result = vec![0.0; len];
    result[0] = 1.0;
    let mut power = base.to_vec();
    while n > 0 {
        if n & 1 == 1 {
            result = convolve_truncated(&result, &power, len);
        }
        n >>= 1;
        if n > 0 {
            power = convolve_truncated(&power, &power, len);
        }
    }
    result
}

pub(crate) fn convolve_truncated(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &ai) in a.iter().enumerate().take(len) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(len - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}
