//! Conditional-mean and Monte Carlo forecasts.
//!
//! Histories are chronological (oldest first); only the last `p` values matter.
//! A Monte Carlo trajectory thins observed values while `h − j ≤ 0` and its own
//! simulated values afterwards, so every sample is an integer.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GinarError, Result};
use crate::model::{GinarModel, SeasonalMeanModel};
use crate::rng;

/// How a level-`γ` interval is read off an empirical pmf.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalRule {
    /// Grow from the median, adding whichever neighbour carries more mass
    /// (the lower one on ties), until the mass reaches `γ`.
    #[default]
    HighestMass,
    /// `[q_{(1−γ)/2}, q_{(1+γ)/2}]`, with `q_a` the smallest count whose
    /// empirical cdf is at least `a`.
    EqualTailed,
}

impl std::str::FromStr for IntervalRule {
    type Err = GinarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "highest_mass" | "highest-mass" => Ok(Self::HighestMass),
            "equal_tailed" | "equal-tailed" => Ok(Self::EqualTailed),
            _ => Err(GinarError::Parse(format!("unknown interval rule '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastInterval {
    pub level: f64,
    pub lower: u64,
    pub upper: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDistribution {
    pub horizon: usize,
    pub samples_per_horizon: usize,
    pub rule: IntervalRule,
    /// `pmf[k][x]` is the relative frequency of `x` at horizon `k + 1`.
    pub pmf: Vec<BTreeMap<u64, f64>>,
    pub median: Vec<u64>,
    pub mean: Vec<f64>,
    pub intervals: Vec<Vec<ForecastInterval>>,
}

/// Seasonal innovation mean for future times `t = start, start + 1, …` on the
/// same clock as [`GinarModel::simulate_seasonal`] (a series of length `n`
/// ends at `t = n`).
#[derive(Debug, Clone, Copy)]
pub struct SeasonalClock<'a> {
    pub model: &'a SeasonalMeanModel,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub replicates: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
    pub rule: IntervalRule,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            replicates: 5000,
            levels: vec![0.8, 0.95],
            seed: 0,
            rule: IntervalRule::default(),
        }
    }
}

fn check_history(model: &GinarModel, history: &[u64], h: usize) -> Result<()> {
    if history.len() < model.p() {
        return Err(GinarError::LengthMismatch {
            expected: model.p(),
            got: history.len(),
        });
    }
    if h == 0 {
        return Err(GinarError::InvalidParameter(
            "horizon must be at least 1".into(),
        ));
    }
    Ok(())
}

fn mu_at(model: &GinarModel, seasonal: Option<SeasonalClock>, k: usize) -> f64 {
    match seasonal {
        Some(c) => c.model.mu((c.start + k) as f64),
        None => model.innovation().mu(),
    }
}

/// `X̂(k) = Σ_j α_j X̂(k − j) + μ_ε`, with observed values for `k − j ≤ 0`.
pub fn forecast_mean(model: &GinarModel, history: &[u64], h: usize) -> Result<Vec<f64>> {
    forecast_mean_seasonal(model, None, history, h)
}

pub fn forecast_mean_seasonal(
    model: &GinarModel,
    seasonal: Option<SeasonalClock>,
    history: &[u64],
    h: usize,
) -> Result<Vec<f64>> {
    check_history(model, history, h)?;
    let p = model.p();
    let mut path: Vec<f64> = history[history.len() - p..]
        .iter()
        .map(|&x| x as f64)
        .collect();
    for k in 0..h {
        let len = path.len();
        let next = model
            .alphas()
            .iter()
            .enumerate()
            .map(|(j, a)| a * path[len - 1 - j])
            .sum::<f64>()
            + mu_at(model, seasonal, k);
        path.push(next);
    }
    Ok(path.split_off(p))
}

/// One trajectory of length `h`.
fn trajectory(
    model: &GinarModel,
    seasonal: Option<SeasonalClock>,
    last: &[u64],
    h: usize,
    seed: u64,
    b: usize,
) -> Vec<u64> {
    let mut rng = rng::stream(seed, &[b as u64]);
    let p = model.p();
    let thinning = model.thinning();
    let base = model.innovation();
    let mut path = last.to_vec();
    for k in 0..h {
        let innovation = match seasonal {
            Some(_) => base.with_mu(mu_at(model, seasonal, k)),
            None => base,
        };
        let len = path.len();
        let mut x = innovation.sample(&mut rng);
        for (j, &a) in model.alphas().iter().enumerate() {
            x += thinning.thin_unchecked(a, path[len - 1 - j], &mut rng);
        }
        path.push(x);
    }
    path.split_off(p)
}

fn check_options(options: &McOptions) -> Result<()> {
    if options.replicates == 0 {
        return Err(GinarError::InvalidParameter(
            "need at least one replicate".into(),
        ));
    }
    for &l in &options.levels {
        if !(l > 0.0 && l <= 1.0) {
            return Err(GinarError::InvalidParameter(format!(
                "level must lie in (0, 1], got {l}"
            )));
        }
    }
    Ok(())
}

pub fn forecast_mc(
    model: &GinarModel,
    history: &[u64],
    h: usize,
    options: &McOptions,
) -> Result<ForecastDistribution> {
    forecast_mc_seasonal(model, None, history, h, options)
}

/// Simulates `B` trajectories forward from the history. Trajectory `b` draws
/// from the stream derived from `(seed, b)`.
pub fn forecast_mc_seasonal(
    model: &GinarModel,
    seasonal: Option<SeasonalClock>,
    history: &[u64],
    h: usize,
    options: &McOptions,
) -> Result<ForecastDistribution> {
    check_history(model, history, h)?;
    check_options(options)?;
    let last = &history[history.len() - model.p()..];
    let b = options.replicates;
    let paths: Vec<Vec<u64>> = (0..b)
        .into_par_iter()
        .map(|i| trajectory(model, seasonal, last, h, options.seed, i))
        .collect();
    let mut out = ForecastDistribution {
        horizon: h,
        samples_per_horizon: b,
        rule: options.rule,
        pmf: Vec::with_capacity(h),
        median: Vec::with_capacity(h),
        mean: Vec::with_capacity(h),
        intervals: Vec::with_capacity(h),
    };
    for k in 0..h {
        let mut counts = BTreeMap::new();
        for path in &paths {
            *counts.entry(path[k]).or_insert(0usize) += 1;
        }
        let counts: Vec<(u64, usize)> = counts.into_iter().collect();
        let sum: u64 = paths.iter().map(|p| p[k]).sum();
        out.mean.push(sum as f64 / b as f64);
        out.median.push(quantile(&counts, b, 0.5));
        out.intervals.push(
            options
                .levels
                .iter()
                .map(|&l| interval(&counts, b, l, options.rule))
                .collect(),
        );
        out.pmf.push(
            counts
                .iter()
                .map(|&(x, c)| (x, c as f64 / b as f64))
                .collect(),
        );
    }
    Ok(out)
}

/// Number of samples needed to reach mass `a` out of `b`.
fn needed(a: f64, b: usize) -> usize {
    ((a * b as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Smallest support point whose empirical cdf is at least `a`.
fn quantile(counts: &[(u64, usize)], b: usize, a: f64) -> u64 {
    let target = needed(a, b).max(1);
    let mut cum = 0;
    for &(x, c) in counts {
        cum += c;
        if cum >= target {
            return x;
        }
    }
    counts.last().map_or(0, |&(x, _)| x)
}

fn interval(counts: &[(u64, usize)], b: usize, level: f64, rule: IntervalRule) -> ForecastInterval {
    let (lower, upper) = match rule {
        IntervalRule::EqualTailed => (
            quantile(counts, b, (1.0 - level) / 2.0),
            quantile(counts, b, (1.0 + level) / 2.0),
        ),
        IntervalRule::HighestMass => {
            let median = quantile(counts, b, 0.5);
            let mut lo = counts
                .iter()
                .position(|&(x, _)| x == median)
                .expect("median is a support point");
            let mut hi = lo;
            let mut mass = counts[lo].1;
            let target = needed(level, b);
            while mass < target {
                let below = if lo > 0 { counts[lo - 1].1 } else { 0 };
                let above = if hi + 1 < counts.len() {
                    counts[hi + 1].1
                } else {
                    0
                };
                if lo > 0 && below >= above {
                    lo -= 1;
                    mass += below;
                } else {
                    hi += 1;
                    mass += above;
                }
            }
            (counts[lo].0, counts[hi].0)
        }
    };
    ForecastInterval {
        level,
        lower,
        upper,
    }
}

/// Fraction of `t = p+1..n` whose observed `x_t` lies in the level interval
/// of the one-step Monte Carlo forecast from the preceding `p` values. The
/// forecast at `t` uses the seed derived from `(seed, t)`.
pub fn one_step_coverage(
    model: &GinarModel,
    series: &[u64],
    level: f64,
    options: &McOptions,
) -> Result<f64> {
    one_step_coverage_seasonal(model, None, series, level, options)
}

pub fn one_step_coverage_seasonal(
    model: &GinarModel,
    seasonal: Option<&SeasonalMeanModel>,
    series: &[u64],
    level: f64,
    options: &McOptions,
) -> Result<f64> {
    let p = model.p();
    if series.len() <= p {
        return Err(GinarError::InvalidSeries(format!(
            "need more than {p} observations"
        )));
    }
    let hits: usize = (p..series.len())
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let opts = McOptions {
                replicates: options.replicates,
                levels: vec![level],
                seed: rng::derive_seed(options.seed, &[t as u64]),
                rule: options.rule,
            };
            let clock = seasonal.map(|m| SeasonalClock {
                model: m,
                start: t + 1,
            });
            let f = forecast_mc_seasonal(model, clock, &series[t - p..t], 1, &opts)?;
            let iv = f.intervals[0][0];
            Ok(usize::from(iv.lower <= series[t] && series[t] <= iv.upper))
        })
        .sum::<Result<usize>>()?;
    Ok(hits as f64 / (series.len() - p) as f64)
}
