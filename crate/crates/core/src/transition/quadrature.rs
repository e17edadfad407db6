use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const DEFAULT_NODES: usize = 300;

/// Gauss-Legendre rule mapped onto the open interval `(0, π)`.
///
/// The nodes never include the endpoints, which the cdf integrand relies on:
/// it has a removable singularity at `u = 0`. Rules that sample the endpoints
/// must not be substituted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_legendre(DEFAULT_NODES).expect("default node count is valid")
    }
}

impl QuadratureRule {
    pub fn gauss_legendre(count: usize) -> Result<Self> {
        Self::on_interval(count, 0.0, PI)
    }

    /// Gauss-Legendre rule on `(lo, hi)`.
    pub fn on_interval(count: usize, lo: f64, hi: f64) -> Result<Self> {
        if count < 2 {
            return invalid(format!("quadrature needs at least 2 nodes, got {count}"));
        }
        let (x, w) = legendre_nodes(count);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        Ok(Self {
            nodes: x.iter().map(|t| mid + half * t).collect(),
            weights: w.iter().map(|v| v * half).collect(),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * f(u))
            .sum()
    }
}

/// Nodes (increasing) and weights on `[−1, 1]` by Newton iteration on `P_n`.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        // Recompute the derivative at the converged root.
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        if (z * z - 1.0).abs() > 0.0 {
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [2, 3, 10, 300, 301] {
            let rule = QuadratureRule::gauss_legendre(n).unwrap();
            assert_abs_diff_eq!(rule.weights().iter().sum::<f64>(), PI, epsilon = 1e-10);
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(rule.nodes()[0] > 0.0 && *rule.nodes().last().unwrap() < PI);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let rule = QuadratureRule::gauss_legendre(5).unwrap();
        // ∫_0^π u^9 du = π^10/10, degree 9 = 2·5 − 1.
        assert_abs_diff_eq!(
            rule.integrate(|u| u.powi(9)),
            PI.powi(10) / 10.0,
            epsilon = 1e-8
        );
    }

    #[test]
    fn trigonometric_integrals() {
        let rule = QuadratureRule::default();
        assert_abs_diff_eq!(rule.integrate(|u| u.sin()), 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.integrate(|u| (50.0 * u).cos()), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            rule.integrate(|u| (37.0 * u).sin()),
            2.0 / 37.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rejects_tiny_rules() {
        assert!(QuadratureRule::gauss_legendre(1).is_err());
    }
}
