use ginar::estimation::{fit, Family, FitOptions, Method, ModelTemplate};
use ginar::forecast::{forecast_mc, forecast_mean, one_step_coverage, McOptions};
use ginar::inference::{
    bootstrap_covariance, cml_covariance, information_criteria, ljung_box, pearson_residuals,
    CmlCovarianceKind,
};
use ginar::model::GinarModel;
use ginar::rng;
use ginar::simstudy::{run_study, ModelConfig, StudyConfig};
use ginar::transition::{transition_prob_davies, QuadratureRule, TransitionMethod};
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Uniform};

fn po(alphas: Vec<f64>, mu: f64) -> GinarModel {
    GinarModel::po_inar(alphas, mu).unwrap()
}

fn simulate(model: &GinarModel, n: usize, seed: u64, rep: u64) -> Vec<u64> {
    model
        .simulate(n, 500, &mut rng::stream(seed, &[n as u64, rep]))
        .unwrap()
}

#[test]
fn observed_information_matches_simulation_sd() {
    let series = simulate(&po(vec![0.5], 1.0), 500, 1, 0);
    let options = FitOptions::default();
    let f = fit(&series, &Family::PoInar.template(1), Method::Cml, &options).unwrap();
    let cov = cml_covariance(
        &series,
        &f,
        CmlCovarianceKind::ObservedInformation,
        &options,
    )
    .unwrap();
    assert!(cov.matrix.iter().enumerate().all(|(j, row)| row[j] >= 0.0));
    let se = cov.std_errors()[0];
    assert!((se / 0.032 - 1.0).abs() <= 0.2, "se {se}");
}

#[test]
fn sandwich_agrees_with_observed_information() {
    let options = FitOptions::default();
    for (model, seed) in [
        (po(vec![0.5], 1.0), 2),
        (GinarModel::geom_inar(vec![0.4], 2.0).unwrap(), 3),
    ] {
        let series = simulate(&model, 2000, seed, 0);
        let f = fit(
            &series,
            &ModelTemplate::of_model(&model),
            Method::Cml,
            &options,
        )
        .unwrap();
        let obs = cml_covariance(
            &series,
            &f,
            CmlCovarianceKind::ObservedInformation,
            &options,
        )
        .unwrap();
        let sand = cml_covariance(&series, &f, CmlCovarianceKind::Sandwich, &options).unwrap();
        let k = obs.dim();
        for a in 0..k {
            for b in 0..k {
                let scale = (obs.matrix[a][a] * obs.matrix[b][b]).sqrt();
                let diff = (sand.matrix[a][b] - obs.matrix[a][b]).abs();
                assert!(
                    diff <= 0.3 * scale,
                    "{model:?} entry ({a},{b}): {:?} vs {:?}",
                    sand.matrix,
                    obs.matrix
                );
            }
        }
    }
}

#[test]
fn bootstrap_covariance_for_yule_walker() {
    let options = FitOptions::default();
    let template = Family::PoInar.template(1);
    let model = po(vec![0.5], 1.0);
    let series = simulate(&model, 500, 4, 0);
    let f = fit(&series, &template, Method::YuleWalker, &options).unwrap();
    let cov = bootstrap_covariance(&series, &f, 500, 77, &options).unwrap();
    let se = cov.std_errors()[0];
    assert!((se / 0.042 - 1.0).abs() <= 0.25, "se {se}");
    assert_eq!(
        cov,
        bootstrap_covariance(&series, &f, 500, 77, &options).unwrap()
    );

    let var_at = |n: usize| {
        let s = simulate(&model, n, 5, 0);
        let f = fit(&s, &template, Method::YuleWalker, &options).unwrap();
        bootstrap_covariance(&s, &f, 500, 78, &options)
            .unwrap()
            .matrix[0][0]
    };
    let ratio = var_at(200) / var_at(800);
    assert!((2.4..=5.6).contains(&ratio), "ratio {ratio}");
}

#[test]
fn bic_selects_the_true_order() {
    let model = po(vec![0.3, 0.2], 1.0);
    let options = FitOptions::default();
    let runs = 200;
    let mut hits = 0;
    for rep in 0..runs {
        let series = simulate(&model, 500, 6, rep);
        let best = (1..=3)
            .map(|p| {
                let f = fit(&series, &Family::PoInar.template(p), Method::Cml, &options).unwrap();
                (information_criteria(&f).unwrap().bic, p)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        hits += usize::from(best.1 == 2);
    }
    assert!(
        hits as f64 / runs as f64 > 0.6,
        "bic chose p=2 in {hits}/{runs} runs"
    );
}

#[test]
fn pearson_residuals_standardize() {
    let model = po(vec![0.5], 1.0);
    let series = simulate(&model, 10_000, 7, 0);
    let stats = |m: &GinarModel| {
        let r = pearson_residuals(m, &series).unwrap();
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    };
    let band = 4.0 / 10_000f64.sqrt();
    let (mean, var) = stats(&model);
    assert!(mean.abs() <= band, "mean {mean}");
    assert!((var - 1.0).abs() <= 0.1, "var {var}");
    assert_eq!(
        pearson_residuals(&model, &series).unwrap(),
        pearson_residuals(&model, &series).unwrap()
    );
    let (wrong, _) = stats(&po(vec![0.2], 1.0));
    assert!(wrong.abs() > band, "misspecified mean {wrong}");
}

#[test]
fn ljung_box_null_is_uniform() {
    let reps = 1000;
    let mut pvalues: Vec<f64> = (0..reps)
        .map(|rep| {
            let mut rng = rng::stream(8, &[rep]);
            let e: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let lb = ljung_box(&e, 20).unwrap();
            assert!(lb.statistic >= 0.0);
            lb.p_value
        })
        .collect();
    pvalues.sort_by(f64::total_cmp);
    let u = Uniform::new(0.0, 1.0).unwrap();
    let m = reps as f64;
    let ks = pvalues
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            (u.cdf(p) - i as f64 / m)
                .abs()
                .max(((i + 1) as f64 / m - u.cdf(p)).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.06, "ks {ks}");
}

fn total_variation(a: impl Fn(u64) -> f64, b: impl Fn(u64) -> f64, xmax: u64) -> f64 {
    0.5 * (0..=xmax).map(|x| (a(x) - b(x)).abs()).sum::<f64>()
}

#[test]
fn one_step_forecast_matches_transition_kernel() {
    let model = po(vec![0.5], 1.0);
    let opts = McOptions {
        replicates: 100_000,
        levels: vec![0.95],
        seed: 9,
        ..McOptions::default()
    };
    let f = forecast_mc(&model, &[4], 1, &opts).unwrap();
    let rule = QuadratureRule::default();
    let tv = total_variation(
        |x| f.pmf[0].get(&x).copied().unwrap_or(0.0),
        |x| transition_prob_davies(&model, x, &[4], &rule).unwrap(),
        40,
    );
    assert!(tv < 0.02, "tv {tv}");

    let iid = po(vec![0.0], 1.0);
    let f = forecast_mc(&iid, &[7], 1, &opts).unwrap();
    let innovation = iid.innovation();
    let tv = total_variation(
        |x| f.pmf[0].get(&x).copied().unwrap_or(0.0),
        |x| innovation.pmf(x),
        40,
    );
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn monte_carlo_means_follow_the_recursion() {
    let model = GinarModel::nb_inar(vec![0.4, 0.2], 1.5, 0.7).unwrap();
    let history = [9, 3];
    let opts = McOptions {
        replicates: 20_000,
        levels: vec![0.9],
        seed: 10,
        ..McOptions::default()
    };
    let f = forecast_mc(&model, &history, 6, &opts).unwrap();
    let exact = forecast_mean(&model, &history, 6).unwrap();
    for (k, &want) in exact.iter().enumerate() {
        let var: f64 = f.pmf[k]
            .iter()
            .map(|(&x, &p)| p * (x as f64 - f.mean[k]).powi(2))
            .sum();
        let se = (var / opts.replicates as f64).sqrt();
        assert!(
            (f.mean[k] - want).abs() <= 4.0 * se,
            "h={}: {} vs {}",
            k + 1,
            f.mean[k],
            want
        );
    }
}

#[test]
fn coverage_is_monotone_and_full_at_level_one() {
    let model = po(vec![0.5], 1.0);
    let series = simulate(&model, 200, 11, 0);
    let opts = McOptions {
        replicates: 2000,
        seed: 12,
        ..McOptions::default()
    };
    let levels = [0.5, 0.8, 0.9, 0.95, 1.0];
    let cov: Vec<f64> = levels
        .iter()
        .map(|&l| one_step_coverage(&model, &series, l, &opts).unwrap())
        .collect();
    assert!(cov.windows(2).all(|w| w[0] <= w[1]), "{cov:?}");
    assert_eq!(cov[4], 1.0);
}

#[test]
fn studies_are_reproducible() {
    let config = StudyConfig {
        model: ModelConfig {
            family: Family::NbInar,
            alphas: vec![0.4],
            mu: 2.0,
            r: Some(0.5),
        },
        sample_sizes: vec![80, 160],
        estimators: vec![Method::Cml, Method::Cls, Method::Whittle],
        replicates: 12,
        bootstrap: 30,
        seed: 13,
        burnin: 200,
        quad_nodes: 300,
        transition: TransitionMethod::Davies,
    };
    let a = run_study(&config).unwrap();
    assert_eq!(a, run_study(&config).unwrap());
    assert_eq!(a.cells.len(), 2 * 3 * 3);
}
