//! The GINAR(p) process `X_t = Σ_j α_j ⊙ X_{t−j} + ε_t` and its closed-form moments.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GinarError, Result};
use crate::innovations::InnovationSpec;
use crate::thinning::ThinningSpec;

pub const DEFAULT_BURNIN: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GinarModel {
    alphas: Vec<f64>,
    thinning: ThinningSpec,
    innovation: InnovationSpec,
}

/// Log-linear seasonal innovation mean
/// `μ_t = exp(b0 + b1 sin(2πt/period) + b2 cos(2πt/period))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalMeanModel {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub period: f64,
}

impl SeasonalMeanModel {
    pub fn new(b0: f64, b1: f64, b2: f64, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(GinarError::InvalidModel(format!(
                "period must be positive, got {period}"
            )));
        }
        if ![b0, b1, b2].iter().all(|b| b.is_finite()) {
            return Err(GinarError::InvalidModel(
                "seasonal coefficients must be finite".into(),
            ));
        }
        Ok(Self { b0, b1, b2, period })
    }

    pub fn mu(&self, t: f64) -> f64 {
        let w = 2.0 * PI * t / self.period;
        (self.b0 + self.b1 * w.sin() + self.b2 * w.cos()).exp()
    }
}

impl GinarModel {
    pub fn new(
        alphas: Vec<f64>,
        thinning: ThinningSpec,
        innovation: InnovationSpec,
    ) -> Result<Self> {
        if alphas.is_empty() {
            return Err(GinarError::InvalidModel(
                "order p must be at least 1".into(),
            ));
        }
        for (j, &a) in alphas.iter().enumerate() {
            if !(a.is_finite() && (0.0..1.0).contains(&a)) {
                return Err(GinarError::InvalidModel(format!(
                    "alpha{} = {a} outside [0, 1)",
                    j + 1
                )));
            }
        }
        let total: f64 = alphas.iter().sum();
        if total >= 1.0 {
            return Err(GinarError::InvalidModel(format!(
                "sum of alphas {total} must be below 1"
            )));
        }
        thinning
            .validate()
            .map_err(|e| GinarError::InvalidModel(e.to_string()))?;
        innovation
            .validate()
            .map_err(|e| GinarError::InvalidModel(e.to_string()))?;
        Ok(Self {
            alphas,
            thinning,
            innovation,
        })
    }

    /// Binomial thinning with Poisson innovations.
    pub fn po_inar(alphas: Vec<f64>, mu: f64) -> Result<Self> {
        Self::new(
            alphas,
            ThinningSpec::Binomial,
            InnovationSpec::Poisson { mu },
        )
    }

    /// Binomial thinning with negative binomial innovations.
    pub fn nb_inar(alphas: Vec<f64>, mu: f64, r: f64) -> Result<Self> {
        Self::new(
            alphas,
            ThinningSpec::Binomial,
            InnovationSpec::NegBinomial { mu, r },
        )
    }

    /// Negative binomial thinning with Poisson innovations.
    pub fn geom_inar(alphas: Vec<f64>, mu: f64) -> Result<Self> {
        Self::new(
            alphas,
            ThinningSpec::NegBinomial,
            InnovationSpec::Poisson { mu },
        )
    }

    pub fn p(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn thinning(&self) -> ThinningSpec {
        self.thinning
    }

    pub fn innovation(&self) -> InnovationSpec {
        self.innovation
    }

    /// Copy with another innovation law (used for time-varying means).
    pub fn with_innovation(&self, innovation: InnovationSpec) -> Result<Self> {
        Self::new(self.alphas.clone(), self.thinning, innovation)
    }

    pub fn betas(&self) -> Vec<f64> {
        self.alphas
            .iter()
            .map(|&a| self.thinning.variance_coeff(a))
            .collect()
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alphas.iter().sum()
    }

    fn check_lags(&self, lags: &[u64]) -> Result<()> {
        if lags.len() != self.p() {
            return Err(GinarError::LengthMismatch {
                expected: self.p(),
                got: lags.len(),
            });
        }
        Ok(())
    }

    /// Simulates `n` values after discarding `burnin`. The recursion starts
    /// from `p` innovation draws.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        n: usize,
        burnin: usize,
        rng: &mut R,
    ) -> Result<Vec<u64>> {
        self.simulate_inner(n, burnin, rng, |_| self.innovation)
    }

    /// Simulation with innovation mean `seasonal.mu(t)` at retained time `t = 1..=n`.
    pub fn simulate_seasonal<R: Rng + ?Sized>(
        &self,
        seasonal: &SeasonalMeanModel,
        n: usize,
        burnin: usize,
        rng: &mut R,
    ) -> Result<Vec<u64>> {
        let base = self.innovation;
        self.simulate_inner(n, burnin, rng, |t| base.with_mu(seasonal.mu(t)))
    }

    fn simulate_inner<R: Rng + ?Sized>(
        &self,
        n: usize,
        burnin: usize,
        rng: &mut R,
        innovation_at: impl Fn(f64) -> InnovationSpec,
    ) -> Result<Vec<u64>> {
        if n == 0 {
            return Err(GinarError::InvalidParameter(
                "series length must be at least 1".into(),
            ));
        }
        let p = self.p();
        let start = -(burnin as f64);
        // Newest first.
        let mut lags: Vec<u64> = (0..p)
            .map(|k| innovation_at(start - (p - k) as f64).sample(rng))
            .collect();
        lags.reverse();
        let mut out = Vec::with_capacity(n);
        for step in 0..burnin + n {
            let t = (step as f64) - burnin as f64 + 1.0;
            let mut x = innovation_at(t).sample(rng);
            for (j, &a) in self.alphas.iter().enumerate() {
                x += self.thinning.thin_unchecked(a, lags[j], rng);
            }
            lags.rotate_right(1);
            lags[0] = x;
            if step >= burnin {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// `Σ α_j lags_j + μ_ε` with `lags` newest first.
    pub fn conditional_mean(&self, lags: &[u64]) -> Result<f64> {
        self.check_lags(lags)?;
        Ok(self.conditional_mean_with(lags, self.innovation.mu()))
    }

    pub(crate) fn conditional_mean_with(&self, lags: &[u64], mu: f64) -> f64 {
        self.alphas
            .iter()
            .zip(lags)
            .map(|(a, &x)| a * x as f64)
            .sum::<f64>()
            + mu
    }

    /// `Σ β_j lags_j + σ²_ε`.
    pub fn conditional_variance(&self, lags: &[u64]) -> Result<f64> {
        self.check_lags(lags)?;
        Ok(self.conditional_variance_with(lags, self.innovation.variance()))
    }

    pub(crate) fn conditional_variance_with(&self, lags: &[u64], sigma2: f64) -> f64 {
        self.alphas
            .iter()
            .zip(lags)
            .map(|(&a, &x)| self.thinning.variance_coeff(a) * x as f64)
            .sum::<f64>()
            + sigma2
    }

    pub fn marginal_mean(&self) -> f64 {
        self.innovation.mu() / (1.0 - self.alpha_sum())
    }

    /// `(Σ β_j μ_X + σ²_ε) / (1 − Σ α_j ρ(j))`.
    pub fn marginal_variance(&self) -> Result<f64> {
        let rho = self.acf(self.p())?;
        let denom = 1.0
            - self
                .alphas
                .iter()
                .enumerate()
                .map(|(j, a)| a * rho[j + 1])
                .sum::<f64>();
        Ok(self.innovation_scale() / denom)
    }

    /// Variance of the white noise driving the equivalent linear AR recursion,
    /// `σ²_ε + μ_X Σ β_j`.
    pub fn innovation_scale(&self) -> f64 {
        self.innovation.variance() + self.marginal_mean() * self.betas().iter().sum::<f64>()
    }

    /// Autocorrelations `ρ(0..=maxlag)`.
    pub fn acf(&self, maxlag: usize) -> Result<Vec<f64>> {
        let p = self.p();
        let a = &self.alphas;
        // ρ(k) − Σ_{j≠k} α_j ρ(|k−j|) = α_k for k = 1..p, with ρ(0) = 1.
        let mut m = DMatrix::<f64>::identity(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        for k in 1..=p {
            rhs[k - 1] = a[k - 1];
            for j in 1..=p {
                if j == k {
                    continue;
                }
                let lag = k.abs_diff(j);
                m[(k - 1, lag - 1)] -= a[j - 1];
            }
        }
        let sol = m
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| GinarError::Singular("Yule-Walker system for the ACF".into()))?;
        let mut rho = vec![1.0; maxlag.max(p) + 1];
        for k in 1..=p {
            rho[k] = sol[k - 1];
        }
        for k in p + 1..rho.len() {
            rho[k] = (1..=p).map(|j| a[j - 1] * rho[k - j]).sum();
        }
        rho.truncate(maxlag + 1);
        Ok(rho)
    }

    /// `f(ν) = (σ²_ε + μ_X Σ β_j) / (2π |1 − Σ α_j e^{−iνj}|²)`.
    pub fn spectral_density(&self, nu: f64) -> f64 {
        self.innovation_scale() / (2.0 * PI * ar_transfer_norm_sqr(&self.alphas, nu))
    }
}

/// `|1 − Σ α_j e^{−iνj}|²`.
pub(crate) fn ar_transfer_norm_sqr(alphas: &[f64], nu: f64) -> f64 {
    let mut z = Complex64::new(1.0, 0.0);
    for (j, &a) in alphas.iter().enumerate() {
        z -= a * Complex64::from_polar(1.0, -nu * (j + 1) as f64);
    }
    z.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn validation() {
        assert!(GinarModel::po_inar(vec![0.6, 0.4], 1.0).is_err());
        assert!(GinarModel::po_inar(vec![1.0], 1.0).is_err());
        assert!(GinarModel::po_inar(vec![-0.1], 1.0).is_err());
        assert!(GinarModel::po_inar(vec![], 1.0).is_err());
        assert!(GinarModel::po_inar(vec![0.5], 0.0).is_err());
        assert!(GinarModel::po_inar(vec![0.5, 0.49], 1.0).is_ok());
    }

    #[test]
    fn conditional_moments() {
        let m = GinarModel::po_inar(vec![0.0], 1.0).unwrap();
        assert_eq!(m.conditional_mean(&[7]).unwrap(), 1.0);
        assert_eq!(m.conditional_variance(&[7]).unwrap(), 1.0);
        let m = GinarModel::po_inar(vec![0.5], 1.0).unwrap();
        assert_eq!(m.conditional_mean(&[2]).unwrap(), 2.0);
        assert_eq!(m.conditional_variance(&[2]).unwrap(), 1.5);
        let m = GinarModel::geom_inar(vec![0.5], 1.0).unwrap();
        assert_eq!(m.conditional_variance(&[2]).unwrap(), 2.5);
        let m = GinarModel::po_inar(vec![0.1, 0.2, 0.3, 0.1], 10.0).unwrap();
        assert_abs_diff_eq!(
            m.conditional_mean(&[10, 10, 10, 10]).unwrap(),
            17.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            m.conditional_mean(&[1, 2]),
            Err(GinarError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn marginal_moments() {
        assert_eq!(
            GinarModel::po_inar(vec![0.0], 3.0).unwrap().marginal_mean(),
            3.0
        );
        let m = GinarModel::po_inar(vec![0.5], 1.0).unwrap();
        assert_eq!(m.marginal_mean(), 2.0);
        assert_abs_diff_eq!(m.marginal_variance().unwrap(), 2.0, epsilon = 1e-12);
        let m = GinarModel::po_inar(vec![0.1, 0.2, 0.3, 0.1], 10.0).unwrap();
        assert_abs_diff_eq!(m.marginal_mean(), 100.0 / 3.0, epsilon = 1e-9);
        let m = GinarModel::geom_inar(vec![0.5], 1.0).unwrap();
        assert_abs_diff_eq!(m.marginal_variance().unwrap(), 2.5 / 0.75, epsilon = 1e-12);
        let m = GinarModel::po_inar(vec![0.0], 1.0).unwrap();
        assert_eq!(m.marginal_variance().unwrap(), 1.0);
    }

    #[test]
    fn acf_cases() {
        let m = GinarModel::po_inar(vec![0.5], 1.0).unwrap();
        let rho = m.acf(6).unwrap();
        for (k, r) in rho.iter().enumerate() {
            assert_abs_diff_eq!(*r, 0.5f64.powi(k as i32), epsilon = 1e-14);
        }
        let rho = GinarModel::po_inar(vec![0.0], 1.0).unwrap().acf(3).unwrap();
        assert_eq!(rho, vec![1.0, 0.0, 0.0, 0.0]);
        // AR(2): ρ(1) = α1/(1−α2).
        let m = GinarModel::po_inar(vec![0.3, 0.2], 1.0).unwrap();
        let rho = m.acf(1).unwrap();
        assert_abs_diff_eq!(rho[1], 0.3 / 0.8, epsilon = 1e-14);
        assert_eq!(m.acf(0).unwrap(), vec![1.0]);
    }

    #[test]
    fn acf_recursion_holds() {
        let m = GinarModel::po_inar(vec![0.1, 0.2, 0.3, 0.1], 1.0).unwrap();
        let rho = m.acf(30).unwrap();
        for k in 1..=30usize {
            let rhs: f64 = (1..=4usize)
                .map(|j| m.alphas()[j - 1] * rho[k.abs_diff(j)])
                .sum();
            assert_abs_diff_eq!(rho[k], rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn spectral_density_cases() {
        let m = GinarModel::po_inar(vec![0.0], 1.0).unwrap();
        for nu in [-3.0, 0.0, 1.3] {
            assert_abs_diff_eq!(m.spectral_density(nu), 1.0 / (2.0 * PI), epsilon = 1e-15);
        }
        let m = GinarModel::nb_inar(vec![0.2, 0.3], 2.0, 0.7).unwrap();
        for nu in [0.1, 1.0, 2.9] {
            assert_abs_diff_eq!(
                m.spectral_density(nu),
                m.spectral_density(-nu),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn seasonal_mu_values() {
        assert_eq!(
            SeasonalMeanModel::new(0.0, 0.0, 0.0, 52.0)
                .unwrap()
                .mu(17.0),
            1.0
        );
        assert_abs_diff_eq!(
            SeasonalMeanModel::new(2f64.ln(), 0.0, 0.0, 52.0)
                .unwrap()
                .mu(3.0),
            2.0,
            epsilon = 1e-15
        );
        let s = SeasonalMeanModel::new(0.0, 1.0, 0.0, 52.0).unwrap();
        assert_abs_diff_eq!(s.mu(13.0), std::f64::consts::E, epsilon = 1e-14);
        assert!(SeasonalMeanModel::new(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn simulation_is_deterministic_and_iid_at_zero_alpha() {
        let m = GinarModel::po_inar(vec![0.0], 1.5).unwrap();
        let a = m
            .simulate(20_000, 10, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = m
            .simulate(20_000, 10, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a, b);
        let inn = m.innovation();
        let mut cdf_emp = 0.0;
        let mut cdf = 0.0;
        let mut ks: f64 = 0.0;
        for x in 0..15u64 {
            cdf_emp += a.iter().filter(|&&v| v == x).count() as f64 / a.len() as f64;
            cdf += inn.pmf(x);
            ks = ks.max((cdf_emp - cdf).abs());
        }
        assert!(ks < 1.63 / (a.len() as f64).sqrt(), "ks {ks}");
    }
}
