//! The `ginar` command line.
//!
//! Exit codes: 0 success, 2 usage or unsupported combination, 3 bad data or
//! I/O, 4 numerical failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{ErrorKind, GinarError, Result};
use crate::estimation::{fit, periodogram, sample_acf, Family, FitOptions, FitResult, Method};
use crate::forecast::{
    forecast_mc_seasonal, one_step_coverage_seasonal, IntervalRule, McOptions, SeasonalClock,
};
use crate::inference::{
    bootstrap_covariance, cml_covariance, confidence_interval, information_criteria, ljung_box,
    pearson_residuals_seasonal, prediction_rmse, CmlCovarianceKind, InformationCriteria, Interval,
    LjungBox,
};
use crate::io::{format_series, read_series};
use crate::model::{GinarModel, SeasonalMeanModel, DEFAULT_BURNIN};
use crate::rng;
use crate::simstudy::{emit_table, run_study_cached, StudyConfig, TableFormat};
use crate::transition::{TransitionMethod, DEFAULT_NODES};

#[derive(Debug, Parser)]
#[command(
    name = "ginar",
    version,
    about = "Generalized integer autoregressive models for count series"
)]
pub struct Cli {
    /// Worker threads for parallel work (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a series and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a model to a CSV series and write a JSON report.
    Fit(FitArgs),
    /// Monte Carlo forecasts from a fitted model.
    Forecast(ForecastArgs),
    /// Run a simulation study from a TOML config.
    Study(StudyArgs),
    /// Sample and theoretical autocorrelations as CSV.
    Acf(AcfArgs),
    /// Periodogram and spectral density as CSV.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    PoInar,
    NbInar,
    GeomInar,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::PoInar => Family::PoInar,
            FamilyArg::NbInar => Family::NbInar,
            FamilyArg::GeomInar => Family::GeomInar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cml,
    Yw,
    Cls,
    Pseudo,
    Whittle,
    Saddle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cml => Method::Cml,
            MethodArg::Yw => Method::YuleWalker,
            MethodArg::Cls => Method::Cls,
            MethodArg::Pseudo => Method::Pseudo,
            MethodArg::Whittle => Method::Whittle,
            MethodArg::Saddle => Method::Saddlepoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransitionArg {
    Exact,
    Davies,
}

impl From<TransitionArg> for TransitionMethod {
    fn from(t: TransitionArg) -> Self {
        match t {
            TransitionArg::Exact => TransitionMethod::Exact,
            TransitionArg::Davies => TransitionMethod::Davies,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovarianceArg {
    /// Observed information for CML fits, none otherwise.
    Auto,
    Observed,
    Sandwich,
    Bootstrap,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    HighestMass,
    EqualTailed,
}

impl From<RuleArg> for IntervalRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::HighestMass => IntervalRule::HighestMass,
            RuleArg::EqualTailed => IntervalRule::EqualTailed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Comma-separated thinning coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alphas: Vec<f64>,
    /// Innovation mean.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Negative binomial overdispersion (nb-inar only).
    #[arg(long)]
    pub r: Option<f64>,
}

impl ModelArgs {
    fn is_given(&self) -> bool {
        self.family.is_some() || !self.alphas.is_empty() || self.mu.is_some() || self.r.is_some()
    }

    fn model(&self) -> Result<GinarModel> {
        let family = self
            .family
            .ok_or_else(|| GinarError::InvalidParameter("--family is required".into()))?;
        let mu = self
            .mu
            .ok_or_else(|| GinarError::InvalidParameter("--mu is required".into()))?;
        if self.alphas.is_empty() {
            return Err(GinarError::InvalidParameter("--alphas is required".into()));
        }
        crate::simstudy::ModelConfig {
            family: family.into(),
            alphas: self.alphas.clone(),
            mu,
            r: self.r,
        }
        .model()
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_BURNIN)]
    pub burnin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seasonal log-mean coefficients `b0,b1,b2`; needs --seasonal-period.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub seasonal: Vec<f64>,
    #[arg(long)]
    pub seasonal_period: Option<f64>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Input CSV series.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, value_enum, default_value = "cml")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "davies")]
    pub transition: TransitionArg,
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub quad_nodes: usize,
    /// Fit a seasonal log-link innovation mean with this period (CML only).
    #[arg(long)]
    pub seasonal_period: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    pub covariance: CovarianceArg,
    #[arg(long, default_value_t = 500)]
    pub bootstrap_reps: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Ljung-Box lags on the Pearson residuals.
    #[arg(long, default_value_t = 20)]
    pub lags: usize,
    /// Also report one-step Monte Carlo forecast coverage with this many draws per time point.
    #[arg(long)]
    pub coverage_reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    /// Series to forecast from.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON written by `ginar fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub h: usize,
    #[arg(long = "replicates", short = 'B', default_value_t = 5000)]
    pub replicates: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.8, 0.95])]
    pub levels: Vec<f64>,
    #[arg(long, value_enum, default_value = "highest-mass")]
    pub rule: RuleArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-horizon median and intervals as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for study.csv, study.md and the cell cache.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AcfArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    pub maxlag: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Grid size on (0, π] when no series is given.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What `ginar fit` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub fit: FitResult,
    pub parameters: BTreeMap<String, f64>,
    pub intervals: Option<Vec<Interval>>,
    pub criteria: Option<InformationCriteria>,
    pub rmse: Option<f64>,
    pub ljung_box: Option<LjungBox>,
    pub forecast_coverage: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage | ErrorKind::Unsupported => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(GinarError::InvalidParameter(
                "--threads must be positive".into(),
            ));
        }
        // A second initialization (for example in tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Forecast(a) => cmd_forecast(&a),
        Command::Study(a) => cmd_study(&a),
        Command::Acf(a) => cmd_acf(&a),
        Command::Spectrum(a) => cmd_spectrum(&a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let model = a.model.model()?;
    let mut rng = rng::stream(a.seed, &[]);
    let series = match (a.seasonal.as_slice(), a.seasonal_period) {
        ([], None) => model.simulate(a.n, a.burnin, &mut rng)?,
        (&[b0, b1, b2], Some(period)) => model.simulate_seasonal(
            &SeasonalMeanModel::new(b0, b1, b2, period)?,
            a.n,
            a.burnin,
            &mut rng,
        )?,
        _ => {
            return Err(GinarError::InvalidParameter(
                "--seasonal takes b0,b1,b2 and needs --seasonal-period".into(),
            ))
        }
    };
    emit(a.out.as_deref(), &format_series(&series))
}

pub fn fit_report(series: &[u64], a: &FitArgs) -> Result<FitReport> {
    let mut method: Method = a.method.into();
    if a.seasonal_period.is_some() {
        if method != Method::Cml {
            return Err(GinarError::Unsupported(
                "--seasonal-period requires --method cml".into(),
            ));
        }
        method = Method::SeasonalCml;
    }
    let template = Family::from(a.family).template(a.p);
    let options = FitOptions {
        transition: a.transition.into(),
        quad_nodes: a.quad_nodes,
        seasonal_period: a.seasonal_period,
        ..FitOptions::default()
    };
    let mut result = fit(series, &template, method, &options)?;
    let mut warnings = Vec::new();
    let is_cml = matches!(method, Method::Cml | Method::SeasonalCml);
    let covariance = match (a.covariance, is_cml) {
        (CovarianceArg::None, _) | (CovarianceArg::Auto, false) => None,
        (CovarianceArg::Auto | CovarianceArg::Observed, _) => Some(cml_covariance(
            series,
            &result,
            CmlCovarianceKind::ObservedInformation,
            &options,
        )),
        (CovarianceArg::Sandwich, _) => Some(cml_covariance(
            series,
            &result,
            CmlCovarianceKind::Sandwich,
            &options,
        )),
        (CovarianceArg::Bootstrap, _) => Some(bootstrap_covariance(
            series,
            &result,
            a.bootstrap_reps,
            a.seed,
            &options,
        )),
    };
    match covariance {
        Some(Ok(c)) => result.covariance = Some(c),
        Some(Err(e)) if a.covariance == CovarianceArg::Auto => {
            warnings.push(format!("covariance: {e}"))
        }
        Some(Err(e)) => return Err(e),
        None => {}
    }
    let intervals = match &result.covariance {
        Some(c) => Some(confidence_interval(&result, c, a.level)?),
        None => None,
    };
    let criteria = information_criteria(&result).ok();
    let (model, clamped) = result.model_clamped()?;
    if clamped {
        warnings.push("estimates projected into the parameter space for diagnostics".into());
    }
    let seasonal = result.seasonal_model();
    let rmse = prediction_rmse(&model, seasonal.as_ref(), series).ok();
    let ljung = pearson_residuals_seasonal(&model, seasonal.as_ref(), series)
        .and_then(|r| ljung_box(&r, a.lags))
        .map_err(|e| warnings.push(format!("ljung_box: {e}")))
        .ok();
    let forecast_coverage = match a.coverage_reps {
        Some(b) => {
            let opts = McOptions {
                replicates: b,
                levels: vec![a.level],
                seed: a.seed,
                rule: IntervalRule::default(),
            };
            Some(one_step_coverage_seasonal(
                &model,
                seasonal.as_ref(),
                series,
                a.level,
                &opts,
            )?)
        }
        None => None,
    };
    let parameters = result
        .param_names
        .iter()
        .cloned()
        .zip(result.theta_hat.iter().copied())
        .collect();
    Ok(FitReport {
        fit: result,
        parameters,
        intervals,
        criteria,
        rmse,
        ljung_box: ljung,
        forecast_coverage,
        warnings,
    })
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let series = read_series(&a.input)?.counts;
    let report = fit_report(&series, a)?;
    emit(a.out.as_deref(), &to_json(&report))
}

/// Accepts either a full report or a bare fit result.
pub fn parse_fit_json(text: &str) -> Result<FitResult> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| GinarError::Parse(e.to_string()))?;
    let inner = value.get("fit").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| GinarError::Parse(e.to_string()))
}

pub fn forecast_csv(f: &crate::forecast::ForecastDistribution) -> String {
    let mut out = String::from("horizon,mean,median");
    if let Some(first) = f.intervals.first() {
        for iv in first {
            let _ = write!(out, ",lower_{0},upper_{0}", iv.level);
        }
    }
    out.push('\n');
    for k in 0..f.horizon {
        let _ = write!(out, "{},{},{}", k + 1, f.mean[k], f.median[k]);
        for iv in &f.intervals[k] {
            let _ = write!(out, ",{},{}", iv.lower, iv.upper);
        }
        out.push('\n');
    }
    out
}

pub fn cmd_forecast(a: &ForecastArgs) -> Result<()> {
    let series = read_series(&a.input)?.counts;
    let fit = parse_fit_json(&std::fs::read_to_string(&a.model)?)?;
    let model = fit.model()?;
    let seasonal = fit.seasonal_model();
    let clock = seasonal.as_ref().map(|m| SeasonalClock {
        model: m,
        start: series.len() + 1,
    });
    let opts = McOptions {
        replicates: a.replicates,
        levels: a.levels.clone(),
        seed: a.seed,
        rule: a.rule.into(),
    };
    let f = forecast_mc_seasonal(&model, clock, &series, a.h, &opts)?;
    if let Some(p) = &a.csv {
        std::fs::write(p, forecast_csv(&f))?;
    }
    emit(a.out.as_deref(), &to_json(&f))
}

pub fn cmd_study(a: &StudyArgs) -> Result<()> {
    let config = StudyConfig::from_toml(&std::fs::read_to_string(&a.config)?)?;
    std::fs::create_dir_all(&a.out)?;
    let result = run_study_cached(&config, Some(&a.out.join("cache")))?;
    std::fs::write(
        a.out.join("study.csv"),
        emit_table(&result, TableFormat::Csv),
    )?;
    std::fs::write(
        a.out.join("study.md"),
        emit_table(&result, TableFormat::Markdown),
    )?;
    Ok(())
}

fn optional_inputs(
    input: Option<&Path>,
    model: &ModelArgs,
) -> Result<(Option<Vec<u64>>, Option<GinarModel>)> {
    let series = input.map(read_series).transpose()?.map(|s| s.counts);
    let model = model.is_given().then(|| model.model()).transpose()?;
    if series.is_none() && model.is_none() {
        return Err(GinarError::InvalidParameter(
            "give --input, model flags, or both".into(),
        ));
    }
    Ok((series, model))
}

pub fn cmd_acf(a: &AcfArgs) -> Result<()> {
    let (series, model) = optional_inputs(a.input.as_deref(), &a.model)?;
    let sample = series.as_deref().map(|s| sample_acf(s, a.maxlag));
    let theory = model.as_ref().map(|m| m.acf(a.maxlag)).transpose()?;
    let mut out = String::from("lag");
    if sample.is_some() {
        out.push_str(",sample");
    }
    if theory.is_some() {
        out.push_str(",theoretical");
    }
    out.push('\n');
    for k in 0..=a.maxlag {
        let _ = write!(out, "{k}");
        if let Some(s) = &sample {
            let _ = write!(out, ",{}", s[k]);
        }
        if let Some(t) = &theory {
            let _ = write!(out, ",{}", t[k]);
        }
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)
}

pub fn cmd_spectrum(a: &SpectrumArgs) -> Result<()> {
    let (series, model) = optional_inputs(a.input.as_deref(), &a.model)?;
    let pgram = series.as_deref().map(periodogram).transpose()?;
    let grid: Vec<f64> = match &pgram {
        Some(pg) => pg.iter().map(|&(nu, _)| nu).collect(),
        None => {
            if a.grid == 0 {
                return Err(GinarError::InvalidParameter(
                    "--grid must be positive".into(),
                ));
            }
            (1..=a.grid)
                .map(|j| std::f64::consts::PI * j as f64 / a.grid as f64)
                .collect()
        }
    };
    let mut out = String::from("frequency");
    if pgram.is_some() {
        out.push_str(",periodogram");
    }
    if model.is_some() {
        out.push_str(",density");
    }
    out.push('\n');
    for (j, nu) in grid.iter().enumerate() {
        let _ = write!(out, "{nu}");
        if let Some(pg) = &pgram {
            let _ = write!(out, ",{}", pg[j].1);
        }
        if let Some(m) = &model {
            let _ = write!(out, ",{}", m.spectral_density(*nu));
        }
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)
}
