//! Monte Carlo studies: replicate generation, multi-method fitting and
//! bias/SD/RMSE aggregation with bootstrap standard errors.
//!
//! Replicate `i` at sample size `n` is simulated from the stream derived from
//! `(seed, n, i)`, so the data never depend on which estimators are run. SD is
//! the population (divide-by-`R`) deviation about the mean, which makes
//! `RMSE² = bias² + SD²` hold exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GinarError, Result};
use crate::estimation::{fit, Family, FitOptions, Method, ModelTemplate};
use crate::model::{GinarModel, DEFAULT_BURNIN};
use crate::rng;
use crate::transition::{TransitionMethod, DEFAULT_NODES};

type Column = (&'static str, fn(&CellResult) -> f64);

/// Share of failed fits above which a cell is flagged.
pub const FAILURE_FLAG_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub alphas: Vec<f64>,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

impl ModelConfig {
    pub fn model(&self) -> Result<GinarModel> {
        let alphas = self.alphas.clone();
        match (self.family, self.r) {
            (Family::PoInar, None) => GinarModel::po_inar(alphas, self.mu),
            (Family::GeomInar, None) => GinarModel::geom_inar(alphas, self.mu),
            (Family::NbInar, Some(r)) => GinarModel::nb_inar(alphas, self.mu, r),
            (Family::NbInar, None) => Err(GinarError::InvalidModel("nb-inar needs r".into())),
            (f, Some(_)) => Err(GinarError::InvalidModel(format!("{} takes no r", f.name()))),
        }
    }

    pub fn template(&self) -> ModelTemplate {
        self.family.template(self.alphas.len())
    }
}

fn default_bootstrap() -> usize {
    200
}
fn default_burnin() -> usize {
    DEFAULT_BURNIN
}
fn default_quad_nodes() -> usize {
    DEFAULT_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model: ModelConfig,
    pub sample_sizes: Vec<usize>,
    pub estimators: Vec<Method>,
    pub replicates: usize,
    /// Resamples of the replicate vector used for the standard errors.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    pub seed: u64,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
    #[serde(default)]
    pub transition: TransitionMethod,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: StudyConfig =
            toml::from_str(text).map_err(|e| GinarError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("study configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.model()?;
        if self.replicates < 2 {
            return Err(GinarError::InvalidParameter(
                "a study needs at least 2 replicates".into(),
            ));
        }
        if self.sample_sizes.is_empty() || self.estimators.is_empty() {
            return Err(GinarError::InvalidParameter(
                "sample sizes and estimators must be non-empty".into(),
            ));
        }
        let template = self.model.template();
        let k = template.k(false);
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n <= template.p + k) {
            return Err(GinarError::InvalidParameter(format!(
                "sample size {n} is too small for {k} parameters"
            )));
        }
        for &m in &self.estimators {
            if m == Method::SeasonalCml {
                return Err(GinarError::Unsupported(
                    "studies use stationary models; cml_seasonal is not allowed".into(),
                ));
            }
            m.check_template(&template).map_err(|_| {
                GinarError::Unsupported(format!(
                    "estimator {m} is not available for {}",
                    self.model.family.name()
                ))
            })?;
        }
        self.fit_options().validate()
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            quad_nodes: self.quad_nodes,
            transition: self.transition,
            ..FitOptions::default()
        }
    }

    /// Key of everything that determines a cell's estimates other than
    /// `(n, method)`. The estimator list and bootstrap count are excluded.
    pub fn cache_key(&self) -> String {
        let basis = serde_json::json!({
            "model": self.model,
            "replicates": self.replicates,
            "seed": self.seed,
            "burnin": self.burnin,
            "quad_nodes": self.quad_nodes,
            "transition": self.transition,
            "version": env!("CARGO_PKG_VERSION"),
        });
        let digest = Sha256::digest(basis.to_string().as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Series for replicate `rep` at sample size `n`.
pub fn replicate_series(
    config: &StudyConfig,
    model: &GinarModel,
    n: usize,
    rep: usize,
) -> Result<Vec<u64>> {
    let mut rng = rng::stream(config.seed, &[n as u64, rep as u64]);
    model.simulate(n, config.burnin, &mut rng)
}

/// Estimates of one `(n, method)` cell, `None` where the fit failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEstimates {
    pub n: usize,
    pub method: Method,
    pub estimates: Vec<Option<Vec<f64>>>,
}

pub fn run_cell(config: &StudyConfig, n: usize, method: Method) -> Result<CellEstimates> {
    let model = config.model.model()?;
    let template = config.model.template();
    let options = config.fit_options();
    let estimates = (0..config.replicates)
        .into_par_iter()
        .map(|rep| -> Result<Option<Vec<f64>>> {
            let series = replicate_series(config, &model, n, rep)?;
            Ok(fit(&series, &template, method, &options)
                .ok()
                .map(|f| f.theta_hat)
                .filter(|t| t.iter().all(|v| v.is_finite())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellEstimates {
        n,
        method,
        estimates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub method: Method,
    pub parameter: String,
    pub truth: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub bias_se: f64,
    pub sd_se: f64,
    pub rmse_se: f64,
    pub ok: usize,
    pub failures: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub cells: Vec<CellResult>,
}

impl StudyResult {
    pub fn cell(&self, n: usize, method: Method, parameter: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.method == method && c.parameter == parameter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
}

/// Bias, population SD and `RMSE = sqrt(bias² + SD²)`.
pub fn summarize(values: &[f64], truth: f64) -> Summary {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m).sqrt();
    let bias = mean - truth;
    Summary {
        bias,
        sd,
        rmse: (bias * bias + sd * sd).sqrt(),
    }
}

fn bootstrap_ses(values: &[f64], truth: f64, resamples: usize, seed: u64) -> (f64, f64, f64) {
    if resamples < 2 || values.len() < 2 {
        return (0.0, 0.0, 0.0);
    }
    let mut rng = rng::stream(seed, &[]);
    let mut draws = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; values.len()];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = values[rng.random_range(0..values.len())];
        }
        draws.push(summarize(&buf, truth));
    }
    let sd_of =
        |f: fn(&Summary) -> f64| summarize(&draws.iter().map(f).collect::<Vec<_>>(), 0.0).sd;
    (sd_of(|s| s.bias), sd_of(|s| s.sd), sd_of(|s| s.rmse))
}

fn method_key(method: Method) -> u64 {
    method
        .name()
        .bytes()
        .fold(0u64, |acc, b| rng::splitmix64(acc ^ b as u64))
}

pub fn aggregate(config: &StudyConfig, cell: &CellEstimates) -> Result<Vec<CellResult>> {
    let template = config.model.template();
    let names = template.param_names(false);
    let truth = ModelTemplate::theta_of(&config.model.model()?);
    let ok: Vec<&Vec<f64>> = cell.estimates.iter().flatten().collect();
    let failures = cell.estimates.len() - ok.len();
    let flagged = failures as f64 > FAILURE_FLAG_RATE * cell.estimates.len() as f64;
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<f64> = ok.iter().map(|t| t[j]).collect();
            let s = if values.is_empty() {
                Summary {
                    bias: f64::NAN,
                    sd: f64::NAN,
                    rmse: f64::NAN,
                }
            } else {
                summarize(&values, truth[j])
            };
            let seed = rng::derive_seed(
                config.seed,
                &[cell.n as u64, method_key(cell.method), j as u64],
            );
            let (bias_se, sd_se, rmse_se) =
                bootstrap_ses(&values, truth[j], config.bootstrap, seed);
            CellResult {
                n: cell.n,
                method: cell.method,
                parameter: name.clone(),
                truth: truth[j],
                bias: s.bias,
                sd: s.sd,
                rmse: s.rmse,
                bias_se,
                sd_se,
                rmse_se,
                ok: values.len(),
                failures,
                flagged,
            }
        })
        .collect())
}

pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    run_study_cached(config, None)
}

/// Like [`run_study`], reusing and writing per-cell estimates under `cache_dir`.
pub fn run_study_cached(config: &StudyConfig, cache_dir: Option<&Path>) -> Result<StudyResult> {
    config.validate()?;
    let key = config.cache_key();
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir)?;
    }
    let mut cells = Vec::new();
    for &n in &config.sample_sizes {
        for &method in &config.estimators {
            let estimates = load_or_run_cell(config, n, method, cache_dir, &key)?;
            cells.extend(aggregate(config, &estimates)?);
        }
    }
    Ok(StudyResult { cells })
}

/// Estimates of one cell, read from `cache_dir` when present and written there
/// after computing otherwise.
pub fn cell_estimates(
    config: &StudyConfig,
    n: usize,
    method: Method,
    cache_dir: Option<&Path>,
) -> Result<CellEstimates> {
    config.validate()?;
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir)?;
    }
    load_or_run_cell(config, n, method, cache_dir, &config.cache_key())
}

fn load_or_run_cell(
    config: &StudyConfig,
    n: usize,
    method: Method,
    cache_dir: Option<&Path>,
    key: &str,
) -> Result<CellEstimates> {
    let path = cache_dir.map(|d| d.join(format!("{key}-n{n}-{}.json", method.name())));
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        let cached = serde_json::from_str::<CellEstimates>(&fs::read_to_string(p)?)
            .ok()
            .filter(|c| c.n == n && c.method == method && c.estimates.len() == config.replicates);
        if let Some(c) = cached {
            return Ok(c);
        }
    }
    let c = run_cell(config, n, method)?;
    if let Some(p) = &path {
        let tmp = p.with_extension("json.tmp");
        fs::write(
            &tmp,
            serde_json::to_string(&c).expect("estimates serialize"),
        )?;
        fs::rename(&tmp, p)?;
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

pub fn emit_table(result: &StudyResult, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => emit_csv(result),
        TableFormat::Markdown => emit_markdown(result),
    }
}

fn emit_csv(result: &StudyResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in &result.cells {
        w.serialize(c).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn parse_csv(text: &str) -> Result<StudyResult> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let cells = r
        .deserialize()
        .collect::<std::result::Result<Vec<CellResult>, _>>()
        .map_err(|e| GinarError::Parse(e.to_string()))?;
    Ok(StudyResult { cells })
}

/// One block per method; rows are Bias, SD and RMSE for each `n`, columns are
/// the parameters.
fn emit_markdown(result: &StudyResult) -> String {
    let mut methods: Vec<Method> = Vec::new();
    let mut params: Vec<&str> = Vec::new();
    for c in &result.cells {
        if !methods.contains(&c.method) {
            methods.push(c.method);
        }
        if !params.contains(&c.parameter.as_str()) {
            params.push(&c.parameter);
        }
    }
    let mut out = String::new();
    for method in methods {
        let cells: Vec<&CellResult> = result.cells.iter().filter(|c| c.method == method).collect();
        let mut sizes: Vec<usize> = cells.iter().map(|c| c.n).collect();
        sizes.dedup();
        let _ = writeln!(out, "### {}\n", method.label());
        let _ = writeln!(out, "| n | | {} |", params.join(" | "));
        let _ = writeln!(out, "|---|---|{}", "---|".repeat(params.len()));
        for n in sizes {
            let rows: [Column; 3] = [("Bias", |c| c.bias), ("SD", |c| c.sd), ("RMSE", |c| c.rmse)];
            for (i, (label, get)) in rows.iter().enumerate() {
                let values: Vec<String> = params
                    .iter()
                    .map(|p| {
                        cells
                            .iter()
                            .find(|c| c.n == n && c.parameter == *p)
                            .map_or_else(|| "".into(), |c| format!("{:.3}", get(c)))
                    })
                    .collect();
                let n_col = if i == 0 { n.to_string() } else { String::new() };
                let _ = writeln!(out, "| {n_col} | {label} | {} |", values.join(" | "));
            }
        }
        let flagged: Vec<String> = cells
            .iter()
            .filter(|c| c.flagged)
            .map(|c| {
                format!(
                    "n={} ({} of {} fits failed)",
                    c.n,
                    c.failures,
                    c.failures + c.ok
                )
            })
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        if !flagged.is_empty() {
            let _ = writeln!(out, "\nFlagged: {}", flagged.join(", "));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config() -> StudyConfig {
        StudyConfig::from_toml(
            r#"
            seed = 7
            replicates = 8
            bootstrap = 50
            sample_sizes = [60, 120]
            estimators = ["yw", "cls"]

            [model]
            family = "po-inar"
            alphas = [0.5]
            mu = 1.0
            "#,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        assert_eq!(c.burnin, DEFAULT_BURNIN);
        c.replicates = 1;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.model.family = Family::GeomInar;
        c.estimators = vec![Method::Saddlepoint];
        assert!(matches!(c.validate(), Err(GinarError::Unsupported(_))));
        assert!(StudyConfig::from_toml("seed = 1\nbogus = 2").is_err());
        let c = small_config();
        assert_eq!(StudyConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rmse_identity_and_degenerate_cells() {
        let s = summarize(&[0.4, 0.6, 0.55, 0.3], 0.5);
        assert_abs_diff_eq!(
            s.rmse * s.rmse,
            s.bias * s.bias + s.sd * s.sd,
            epsilon = 1e-15
        );
        let s = summarize(&[0.47, 0.47], 0.5);
        assert_eq!(s.sd, 0.0);
        assert_abs_diff_eq!(s.bias, -0.03, epsilon = 1e-15);
    }

    #[test]
    fn csv_round_trip_and_markdown_layout() {
        let config = small_config();
        let result = run_study(&config).unwrap();
        assert_eq!(result.cells.len(), 2 * 2 * 2);
        let csv = emit_table(&result, TableFormat::Csv);
        assert_eq!(parse_csv(&csv).unwrap(), result);
        let md = emit_table(&result, TableFormat::Markdown);
        assert!(md.contains("### YW") && md.contains("### CLS"));
        assert!(md.contains("| n | | alpha1 | mu_eps |"));
        let yw = md.find("### YW").unwrap();
        let bias = md[yw..].find("| Bias |").unwrap();
        let sd = md[yw..].find("| SD |").unwrap();
        let rmse = md[yw..].find("| RMSE |").unwrap();
        assert!(bias < sd && sd < rmse);
    }

    #[test]
    fn data_do_not_depend_on_estimator_set() {
        let config = small_config();
        let mut more = config.clone();
        more.estimators = vec![Method::Cls];
        assert_eq!(
            run_cell(&config, 60, Method::Cls).unwrap(),
            run_cell(&more, 60, Method::Cls).unwrap()
        );
        assert_eq!(config.cache_key(), more.cache_key());
    }
}
