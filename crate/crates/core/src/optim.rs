//! Unconstrained minimization: a Nelder-Mead search followed by BFGS with
//! central-difference gradients.

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Nelder-Mead iterations before switching to BFGS.
    pub simplex_iterations: usize,
    pub initial_step: f64,
    pub gradient_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            simplex_iterations: 150,
            initial_step: 0.25,
            gradient_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

pub fn minimize(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &OptimOptions) -> OptimResult {
    let budget = opts.max_iterations.max(1);
    let nm_budget = opts.simplex_iterations.min(budget);
    let (x, value, used) = nelder_mead(&f, x0, opts.initial_step, nm_budget);
    bfgs(&f, x, value, budget.saturating_sub(used).max(1), used, opts)
}

fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut iter = 0;
    while iter < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let spread = (worst - best).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= 1e-10 * (1.0 + best.abs()) && size < 1e-6 {
            break;
        }
        iter += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(worst) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&x_best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    *v = eval(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, iter)
}

pub(crate) fn central_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * hi);
    }
    g
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn bfgs(
    f: &impl Fn(&[f64]) -> f64,
    mut x: Vec<f64>,
    mut fx: f64,
    max_iter: usize,
    used: usize,
    opts: &OptimOptions,
) -> OptimResult {
    let n = x.len();
    let mut h_inv = identity(n);
    let mut g = central_gradient(f, &x, opts.gradient_step);
    let mut iterations = used;
    let mut converged = g.iter().all(|v| v.is_finite()) && max_abs(&g) < opts.gradient_tolerance;
    let mut stalls = 0;
    for _ in 0..max_iter {
        if converged || !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
            break;
        }
        iterations += 1;
        let mut d: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| h_inv[i][j] * g[j]).sum::<f64>())
            .collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            h_inv = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        // Backtracking line search with the Armijo condition.
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let fnew = f(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            stalls += 1;
            if stalls > 1 {
                break;
            }
            h_inv = identity(n);
            continue;
        };
        stalls = 0;
        let gn = central_gradient(f, &xn, opts.gradient_step);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h_inv[i][j] * y[j]).sum())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] +=
                        (1.0 + yhy / sy) * s[i] * s[j] / sy - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        let change = (fx - fnew).abs();
        x = xn;
        fx = fnew;
        g = gn;
        converged = max_abs(&g) < opts.gradient_tolerance
            || (change <= 1e-15 * (1.0 + fx.abs())
                && max_abs(&g) < 100.0 * opts.gradient_tolerance);
    }
    let gradient_norm = max_abs(&g);
    if !converged && gradient_norm < 100.0 * opts.gradient_tolerance && fx.is_finite() {
        // The line search cannot improve on a point this flat; numerical
        // gradients carry noise of about this size.
        converged = true;
    }
    OptimResult {
        x,
        value: fx,
        iterations,
        converged,
        gradient_norm,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo).abs() > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(f, &[-1.2, 1.0], &OptimOptions::default());
        assert!(r.converged);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4,
            "{:?}",
            r.x
        );
    }

    #[test]
    fn quadratic_in_three_dimensions() {
        let f = |x: &[f64]| {
            (x[0] - 1.0).powi(2)
                + 2.0 * (x[1] + 0.5).powi(2)
                + 0.5 * (x[2] - 3.0).powi(2)
                + x[0] * x[1]
        };
        let r = minimize(f, &[0.0, 0.0, 0.0], &OptimOptions::default());
        // Stationary point of the quadratic.
        let (a, b) = (10.0 / 7.0, -6.0 / 7.0);
        assert!(
            (r.x[0] - a).abs() < 1e-5 && (r.x[1] - b).abs() < 1e-5 && (r.x[2] - 3.0).abs() < 1e-5
        );
    }

    #[test]
    fn handles_infinite_regions() {
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                f64::INFINITY
            } else {
                x[0] - x[0].ln()
            }
        };
        let r = minimize(f, &[3.0], &OptimOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn golden_section_minimum() {
        let x = golden_section(|x| (x - 0.3).powi(2), 0.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
