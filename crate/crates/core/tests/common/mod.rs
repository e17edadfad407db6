//! Property checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use ginar::estimation::{cml_score_hessian, Family, LikelihoodProblem, ModelTemplate};
use ginar::innovations::InnovationSpec;
use ginar::model::GinarModel;
use ginar::thinning::ThinningSpec;
use ginar::transition::{transition_chf, transition_pmf_conv, TransitionMethod, DEFAULT_NODES};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const CASES: u32 = 1000;

pub fn thinning_spec() -> impl Strategy<Value = ThinningSpec> {
    prop_oneof![
        Just(ThinningSpec::Binomial),
        Just(ThinningSpec::NegBinomial),
        (0.0..0.9f64).prop_map(|rho| ThinningSpec::RhoBinomial { rho }),
    ]
}

pub fn innovation() -> impl Strategy<Value = InnovationSpec> {
    prop_oneof![
        (0.05..8.0f64).prop_map(|mu| InnovationSpec::Poisson { mu }),
        (0.05..8.0f64, 0.01..3.0f64).prop_map(|(mu, r)| InnovationSpec::NegBinomial { mu, r }),
        (0.05..8.0f64).prop_map(|mu| InnovationSpec::Geometric { mu }),
    ]
}

/// Stationary coefficients of order 1..=max_p, each at least `floor`.
pub fn alphas(max_p: usize, floor: f64) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_p).prop_flat_map(move |p| {
        prop::collection::vec(0.0..1.0f64, p + 1).prop_map(move |w| {
            let total: f64 = w.iter().sum::<f64>() + 1e-9;
            let budget = 0.9 - floor * p as f64;
            w[..p].iter().map(|v| floor + budget * v / total).collect()
        })
    })
}

pub fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::PoInar),
        Just(Family::NbInar),
        Just(Family::GeomInar)
    ]
}

pub fn model_of(family: Family, alphas: Vec<f64>, mu: f64, r: f64) -> GinarModel {
    match family {
        Family::PoInar => GinarModel::po_inar(alphas, mu),
        Family::NbInar => GinarModel::nb_inar(alphas, mu, r),
        Family::GeomInar => GinarModel::geom_inar(alphas, mu),
    }
    .expect("strategy yields valid models")
}

fn upper_support(mean: f64, variance: f64) -> u64 {
    (mean + 60.0 * variance.sqrt() + 60.0).ceil() as u64
}

/// `α ⊙ 0 = 0` for every operator and `1 ⊙ x = x` for binomial thinning.
pub fn check_thinning_laws(
    spec: ThinningSpec,
    alpha: f64,
    x: u64,
    seed: u64,
) -> Result<(), TestCaseError> {
    let mut rng = ginar::rng::stream(seed, &[]);
    prop_assert_eq!(spec.thin(alpha, 0, &mut rng).unwrap(), 0);
    prop_assert_eq!(ThinningSpec::Binomial.thin(1.0, x, &mut rng).unwrap(), x);
    Ok(())
}

/// Innovation, counting and transition pmfs sum to one.
pub fn check_pmf_normalization(
    spec: ThinningSpec,
    innovation: InnovationSpec,
    alphas: &[f64],
    lags: &[u64],
) -> Result<(), TestCaseError> {
    let tol = 1e-8;
    let xmax = upper_support(innovation.mu(), innovation.variance());
    let total: f64 = innovation.pmf_row(xmax).iter().sum();
    prop_assert!(
        (total - 1.0).abs() <= tol,
        "innovation {:?}: {}",
        innovation,
        total
    );
    let a = alphas[0];
    let beta = spec.variance_coeff(a);
    let ymax = upper_support(a, beta);
    let total: f64 = (0..=ymax).map(|y| spec.counting_pmf(a, y).unwrap()).sum();
    prop_assert!(
        (total - 1.0).abs() <= tol,
        "counting {:?} α={}: {}",
        spec,
        a,
        total
    );
    let model = GinarModel::new(alphas.to_vec(), spec, innovation).unwrap();
    let mean = model.conditional_mean(lags).unwrap();
    let var = model.conditional_variance(lags).unwrap();
    let total: f64 = transition_pmf_conv(&model, lags, upper_support(mean, var))
        .unwrap()
        .iter()
        .sum();
    prop_assert!(
        (total - 1.0).abs() <= tol,
        "transition {:?} lags {:?}: {}",
        model,
        lags,
        total
    );
    Ok(())
}

/// `φ(0) = 1` and `|φ(u)| ≤ 1` for innovation, counting and transition chfs.
pub fn check_chf_bounds(
    spec: ThinningSpec,
    innovation: InnovationSpec,
    alphas: &[f64],
    lags: &[u64],
    u: f64,
) -> Result<(), TestCaseError> {
    let eps = 1e-12;
    prop_assert!((innovation.chf(0.0) - 1.0).norm() <= eps);
    prop_assert!(innovation.chf(u).norm() <= 1.0 + eps);
    prop_assert!((spec.counting_chf(alphas[0], 0.0) - 1.0).norm() <= eps);
    prop_assert!(spec.counting_chf(alphas[0], u).norm() <= 1.0 + eps);
    let model = GinarModel::new(alphas.to_vec(), spec, innovation).unwrap();
    prop_assert!((transition_chf(&model, 0.0, lags).unwrap() - 1.0).norm() <= eps);
    prop_assert!(transition_chf(&model, u, lags).unwrap().norm() <= 1.0 + eps);
    Ok(())
}

/// Score against an independent central difference of `ℓ` (different step),
/// and Hessian symmetry.
pub fn check_score_and_hessian(
    model: &GinarModel,
    n: usize,
    seed: u64,
    shift: f64,
) -> Result<(), TestCaseError> {
    let mut rng = ginar::rng::stream(seed, &[n as u64]);
    let series = model.simulate(n, 100, &mut rng).unwrap();
    if series.iter().all(|&x| x == 0) {
        return Ok(());
    }
    let template = ModelTemplate::of_model(model);
    let problem = LikelihoodProblem::new(
        &series,
        &template,
        None,
        TransitionMethod::Davies,
        DEFAULT_NODES,
    )
    .unwrap();
    // Evaluate away from the truth so the gradient is not near zero.
    let mut theta = ModelTemplate::theta_of(model);
    let p = template.p;
    for v in theta[p..].iter_mut() {
        *v *= 1.0 + shift;
    }
    let sh = cml_score_hessian(&problem, &theta).unwrap();
    for j in 0..theta.len() {
        let h = 1e-6 * theta[j].abs().max(1.0);
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[j] += h;
        down[j] -= h;
        let fd = (problem.loglik(&up).unwrap() - problem.loglik(&down).unwrap()) / (2.0 * h);
        let scale = fd.abs().max(1.0);
        prop_assert!(
            (sh.gradient[j] - fd).abs() <= 1e-5 * scale,
            "θ={:?} j={} score={} fd={}",
            theta,
            j,
            sh.gradient[j],
            fd
        );
    }
    for j in 0..theta.len() {
        for l in 0..theta.len() {
            prop_assert!((sh.hessian[j][l] - sh.hessian[l][j]).abs() <= 1e-8);
        }
    }
    Ok(())
}
