//! Conditional maximum likelihood, its derivatives, and the seasonal-mean variant.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::params::{ModelTemplate, ParamKind};
use super::{initial_theta, validate_series, FitOptions, FitResult, Method};
use crate::error::{GinarError, Result};
use crate::optim::minimize;
use crate::transition::{
    combine_exact, floored_ln, thinned_sum_pmf_unchecked, thinning_chf_product, DaviesTable,
    QuadratureRule, TransitionMethod, PROB_FLOOR,
};

/// Observations `x_t`, `t = p+1..n`, grouped by their lag vectors so that
/// per-configuration work (chf tables, thinned-sum laws) is done once.
#[derive(Debug, Clone)]
pub struct LikelihoodProblem {
    template: ModelTemplate,
    period: Option<f64>,
    method: TransitionMethod,
    rule: QuadratureRule,
    groups: Vec<Group>,
    /// Per observation: group index, index into that group's distinct values,
    /// and the time index `t` (1-based).
    obs: Vec<(usize, usize, f64)>,
    max_x: u64,
}

#[derive(Debug, Clone)]
struct Group {
    lags: Vec<u64>,
    xs: Vec<u64>,
}

impl LikelihoodProblem {
    /// Seasonal problems (`period` set) always use chf inversion.
    pub fn new(
        series: &[u64],
        template: &ModelTemplate,
        period: Option<f64>,
        method: TransitionMethod,
        quad_nodes: usize,
    ) -> Result<Self> {
        let p = template.p;
        if series.len() <= p {
            return Err(GinarError::InvalidSeries(format!(
                "need more than {p} observations"
            )));
        }
        let mut by_lags: BTreeMap<Vec<u64>, BTreeMap<u64, ()>> = BTreeMap::new();
        for t in p..series.len() {
            let lags: Vec<u64> = (1..=p).map(|j| series[t - j]).collect();
            by_lags.entry(lags).or_default().insert(series[t], ());
        }
        let groups: Vec<Group> = by_lags
            .into_iter()
            .map(|(lags, xs)| Group {
                lags,
                xs: xs.into_keys().collect(),
            })
            .collect();
        let index: BTreeMap<&[u64], usize> = groups
            .iter()
            .enumerate()
            .map(|(i, g)| (g.lags.as_slice(), i))
            .collect();
        let obs = (p..series.len())
            .map(|t| {
                let lags: Vec<u64> = (1..=p).map(|j| series[t - j]).collect();
                let gi = index[lags.as_slice()];
                let xi = groups[gi]
                    .xs
                    .binary_search(&series[t])
                    .expect("value recorded");
                (gi, xi, (t + 1) as f64)
            })
            .collect();
        let method = if period.is_some() {
            TransitionMethod::Davies
        } else {
            method
        };
        Ok(Self {
            template: *template,
            period,
            method,
            rule: QuadratureRule::gauss_legendre(quad_nodes)?,
            groups,
            obs,
            max_x: series[p..].iter().copied().max().unwrap_or(0),
        })
    }

    pub fn n_used(&self) -> usize {
        self.obs.len()
    }

    pub fn template(&self) -> &ModelTemplate {
        &self.template
    }

    pub fn is_seasonal(&self) -> bool {
        self.period.is_some()
    }

    /// `b(x_t)` for every conditioned observation, in time order.
    pub fn probabilities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let seasonal = self.is_seasonal();
        let model = self.template.model(theta, seasonal)?;
        let rule = &self.rule;
        if let Some(period) = self.period {
            let mean = self.template.seasonal(theta, period)?;
            let products: Vec<Vec<Complex64>> = self
                .groups
                .iter()
                .map(|g| {
                    rule.nodes()
                        .iter()
                        .map(|&u| {
                            thinning_chf_product(model.thinning(), model.alphas(), &g.lags, u)
                        })
                        .collect()
                })
                .collect();
            let base = model.innovation();
            return Ok(self
                .obs
                .iter()
                .map(|&(gi, xi, t)| {
                    let innovation = base.with_mu(mean.mu(t));
                    DaviesTable::from_thinning_product(&products[gi], &innovation, rule)
                        .prob(self.groups[gi].xs[xi], rule)
                })
                .collect());
        }
        let per_group: Vec<Vec<f64>> = match self.method {
            TransitionMethod::Davies => self
                .groups
                .iter()
                .map(|g| {
                    let table = DaviesTable::new(&model, &g.lags, rule)?;
                    Ok(g.xs.iter().map(|&x| table.prob(x, rule)).collect())
                })
                .collect::<Result<_>>()?,
            TransitionMethod::Exact => {
                let innovation = model.innovation().pmf_row(self.max_x);
                self.groups
                    .iter()
                    .map(|g| {
                        let xmax = *g.xs.last().expect("non-empty group");
                        let s = thinned_sum_pmf_unchecked(
                            model.thinning(),
                            model.alphas(),
                            &g.lags,
                            xmax,
                        );
                        g.xs.iter()
                            .map(|&x| combine_exact(&s, &innovation, x))
                            .collect()
                    })
                    .collect()
            }
        };
        Ok(self
            .obs
            .iter()
            .map(|&(gi, xi, _)| per_group[gi][xi])
            .collect())
    }

    /// `ℓ(θ) = Σ_t log b(x_t)`.
    pub fn loglik(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.probabilities(theta)?.into_iter().map(floored_ln).sum())
    }
}

/// Fits by conditional maximum likelihood.
pub fn fit_cml(
    series: &[u64],
    template: &ModelTemplate,
    options: &FitOptions,
) -> Result<FitResult> {
    options.validate()?;
    validate_series(series, template, template.k(false))?;
    let problem = LikelihoodProblem::new(
        series,
        template,
        None,
        options.transition,
        options.quad_nodes,
    )?;
    let theta0 = initial_theta(series, template, options)?;
    optimize_likelihood(&problem, Method::Cml, &theta0, options)
}

/// Fits with innovation mean `exp(b0 + b1 sin(2πt/period) + b2 cos(2πt/period))`.
pub fn fit_cml_seasonal(
    series: &[u64],
    template: &ModelTemplate,
    period: f64,
    options: &FitOptions,
) -> Result<FitResult> {
    options.validate()?;
    Method::SeasonalCml.check_template(template)?;
    if !(period.is_finite() && period > 0.0) {
        return Err(GinarError::InvalidParameter(format!(
            "seasonal period must be positive, got {period}"
        )));
    }
    validate_series(series, template, template.k(true))?;
    let problem = LikelihoodProblem::new(
        series,
        template,
        Some(period),
        TransitionMethod::Davies,
        options.quad_nodes,
    )?;
    let p = template.p;
    let theta0 = match &options.initializer {
        super::Initializer::Provided(theta) if theta.len() == template.k(true) => theta.clone(),
        _ => {
            let plain = initial_theta(
                series,
                template,
                &FitOptions {
                    initializer: super::Initializer::YuleWalker,
                    ..options.clone()
                },
            )?;
            let mut theta = plain[..p].to_vec();
            theta.extend([plain[p].ln(), 0.0, 0.0]);
            if template.has_r() {
                theta.push(plain[p + 1]);
            }
            theta
        }
    };
    optimize_likelihood(&problem, Method::SeasonalCml, &theta0, options)
}

fn optimize_likelihood(
    problem: &LikelihoodProblem,
    method: Method,
    theta0: &[f64],
    options: &FitOptions,
) -> Result<FitResult> {
    let template = problem.template;
    let seasonal = problem.is_seasonal();
    let n = problem.n_used() as f64;
    let z0 = template.to_unconstrained(theta0, seasonal)?;
    let objective = |z: &[f64]| {
        let theta = template.from_unconstrained(z, seasonal);
        match problem.loglik(&theta) {
            Ok(l) => -l / n,
            Err(_) => f64::INFINITY,
        }
    };
    let result = minimize(objective, &z0, &options.optim());
    let theta_hat = template.from_unconstrained(&result.x, seasonal);
    let loglik = problem.loglik(&theta_hat)?;
    let mut flags = Vec::new();
    if !result.converged {
        flags.push("not_converged".to_string());
    }
    Ok(FitResult {
        method,
        template,
        param_names: template.param_names(seasonal),
        theta_hat,
        objective: Some(loglik),
        converged: result.converged,
        iterations: result.iterations,
        n_used: problem.n_used(),
        covariance: None,
        flags,
        seasonal_period: problem.period,
    })
}

/// Gradient and Hessian of `ℓ` on the natural scale, with the per-observation
/// score terms `b^{(j)}(x_t) / b(x_t)`.
#[derive(Debug, Clone)]
pub struct ScoreHessian {
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
    pub steps: Vec<f64>,
}

/// Derivatives of `b(x_t)` by central differences (first derivatives
/// Richardson-extrapolated), assembled as
/// `∂ℓ/∂θ_j = Σ b^{(j)}/b` and `∂²ℓ/∂θ_j∂θ_k = Σ (b b^{(j,k)} − b^{(j)} b^{(k)}) / b²`.
pub fn cml_score_hessian(problem: &LikelihoodProblem, theta: &[f64]) -> Result<ScoreHessian> {
    let seasonal = problem.is_seasonal();
    let template = problem.template();
    let kinds = template.kinds(seasonal);
    let k = theta.len();
    if k != kinds.len() {
        return Err(GinarError::LengthMismatch {
            expected: kinds.len(),
            got: k,
        });
    }
    let p = template.p;
    let alpha_room = 1.0 - theta[..p].iter().sum::<f64>();
    let steps: Vec<f64> = theta
        .iter()
        .zip(&kinds)
        .map(|(&v, kind)| {
            let mut h = 1e-4 * v.abs().max(1.0);
            match kind {
                ParamKind::Alpha => h = h.min(v / 3.0).min(alpha_room / 3.0),
                ParamKind::Positive => h = h.min(v / 3.0),
                ParamKind::Free => {}
            }
            h
        })
        .collect();
    if steps.iter().any(|h| !(*h >= 1e-8)) {
        return Err(GinarError::Domain(
            "step-underflow: parameter too close to the boundary".into(),
        ));
    }
    let probs_at = |shift: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut t = theta.to_vec();
        for &(i, d) in shift {
            t[i] += d;
        }
        problem.probabilities(&t)
    };
    let b0 = probs_at(&[])?;
    let m = b0.len();
    let mut plus = Vec::with_capacity(k);
    let mut minus = Vec::with_capacity(k);
    let mut d1 = Vec::with_capacity(k);
    for j in 0..k {
        let h = steps[j];
        plus.push(probs_at(&[(j, h)])?);
        minus.push(probs_at(&[(j, -h)])?);
        // Richardson extrapolation over h and h/2.
        let half_plus = probs_at(&[(j, 0.5 * h)])?;
        let half_minus = probs_at(&[(j, -0.5 * h)])?;
        d1.push(
            (0..m)
                .map(|t| {
                    let coarse = (plus[j][t] - minus[j][t]) / (2.0 * h);
                    let fine = (half_plus[t] - half_minus[t]) / h;
                    (4.0 * fine - coarse) / 3.0
                })
                .collect::<Vec<f64>>(),
        );
    }
    let mut d2 = vec![vec![vec![0.0; m]; k]; k];
    for j in 0..k {
        d2[j][j] = (0..m)
            .map(|t| (plus[j][t] - 2.0 * b0[t] + minus[j][t]) / (steps[j] * steps[j]))
            .collect();
        for l in j + 1..k {
            let (hj, hl) = (steps[j], steps[l]);
            let pp = probs_at(&[(j, hj), (l, hl)])?;
            let pm = probs_at(&[(j, hj), (l, -hl)])?;
            let mp = probs_at(&[(j, -hj), (l, hl)])?;
            let mm = probs_at(&[(j, -hj), (l, -hl)])?;
            let v: Vec<f64> = (0..m)
                .map(|t| (pp[t] - pm[t] - mp[t] + mm[t]) / (4.0 * hj * hl))
                .collect();
            d2[l][j] = v.clone();
            d2[j][l] = v;
        }
    }
    let mut gradient = vec![0.0; k];
    let mut hessian = vec![vec![0.0; k]; k];
    let mut scores = vec![vec![0.0; k]; m];
    for t in 0..m {
        let b = b0[t].max(PROB_FLOOR);
        for j in 0..k {
            let s = d1[j][t] / b;
            scores[t][j] = s;
            gradient[j] += s;
        }
        for j in 0..k {
            for l in j..k {
                let h = (b * d2[j][l][t] - d1[j][t] * d1[l][t]) / (b * b);
                hessian[j][l] += h;
                if l != j {
                    hessian[l][j] += h;
                }
            }
        }
    }
    Ok(ScoreHessian {
        gradient,
        hessian,
        scores,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::Family;
    use crate::model::GinarModel;
    use crate::transition::transition_prob_conv;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn likelihood_matches_direct_sum() {
        let model = GinarModel::po_inar(vec![0.4, 0.2], 1.3).unwrap();
        let series = model
            .simulate(60, 50, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        let template = Family::PoInar.template(2);
        let theta = [0.4, 0.2, 1.3];
        let direct: f64 = (2..series.len())
            .map(|t| {
                transition_prob_conv(&model, series[t], &[series[t - 1], series[t - 2]])
                    .unwrap()
                    .ln()
            })
            .sum();
        for method in [TransitionMethod::Exact, TransitionMethod::Davies] {
            let problem = LikelihoodProblem::new(&series, &template, None, method, 300).unwrap();
            assert_eq!(problem.n_used(), 58);
            let l = problem.loglik(&theta).unwrap();
            assert!((l - direct).abs() < 1e-7, "{method:?}: {l} vs {direct}");
        }
    }

    #[test]
    fn hessian_symmetric_and_gradient_consistent() {
        let model = GinarModel::nb_inar(vec![0.4], 1.0, 0.8).unwrap();
        let series = model
            .simulate(300, 100, &mut ChaCha8Rng::seed_from_u64(4))
            .unwrap();
        let template = Family::NbInar.template(1);
        let problem =
            LikelihoodProblem::new(&series, &template, None, TransitionMethod::Exact, 300).unwrap();
        let theta = [0.4, 1.0, 0.8];
        let sh = cml_score_hessian(&problem, &theta).unwrap();
        for j in 0..3 {
            for l in 0..3 {
                assert!((sh.hessian[j][l] - sh.hessian[l][j]).abs() < 1e-8);
            }
            let h = 1e-6;
            let mut tp = theta.to_vec();
            tp[j] += h;
            let mut tm = theta.to_vec();
            tm[j] -= h;
            let fd = (problem.loglik(&tp).unwrap() - problem.loglik(&tm).unwrap()) / (2.0 * h);
            assert!(
                (fd - sh.gradient[j]).abs() < 1e-5 * fd.abs().max(1.0),
                "j={j} fd={fd} g={}",
                sh.gradient[j]
            );
        }
        let summed: f64 = sh.scores.iter().map(|s| s[0]).sum();
        assert!((summed - sh.gradient[0]).abs() < 1e-9);
    }

    #[test]
    fn step_underflow_near_boundary() {
        let series = vec![1, 2, 0, 1, 3, 1, 0, 2, 1, 1];
        let template = Family::PoInar.template(1);
        let problem =
            LikelihoodProblem::new(&series, &template, None, TransitionMethod::Exact, 300).unwrap();
        assert!(matches!(
            cml_score_hessian(&problem, &[1e-9, 1.0]),
            Err(GinarError::Domain(_))
        ));
    }
}
