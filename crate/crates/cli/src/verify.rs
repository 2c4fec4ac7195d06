//! Randomized identity and bound suite.

use std::time::Instant;

use cval_core::estimation::{ms_error, optimal_estimator, self_estimation_tradeoff};
use cval_core::random::{haar_basis, haar_state_with_min_overlap, random_hermitian, random_operator};
use cval_core::statistics::{
    commutator_average, covariance, full_product_representation, mean_cval, product_average, statistical_deviation,
    variance, xi_weighted_mean,
};
use cval_core::uncertainty::{decompose_variance, kennard_robertson_bound, krs_check, schrodinger_bound};
use cval_core::{build_cval, eigenbasis, oracle, tolerance, JointEnsemble, Method, Reference, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::report::{CheckRecord, SuiteReport};

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Identity,
    Bound,
}

const MIN_OVERLAP: f64 = 1e-3;

const CHECKS: [(&str, Kind, f64); 18] = [
    ("expectation_real", Kind::Identity, tolerance::IDENTITY),
    ("expectation_imag", Kind::Identity, tolerance::IDENTITY),
    ("product_average", Kind::Identity, tolerance::IDENTITY),
    ("commutator_average", Kind::Identity, tolerance::IDENTITY),
    ("full_product", Kind::Identity, tolerance::IDENTITY),
    ("covariance", Kind::Identity, tolerance::IDENTITY),
    ("variance", Kind::Identity, tolerance::IDENTITY),
    ("statistical_deviation", Kind::Identity, tolerance::IDENTITY),
    ("basis_independence", Kind::Identity, 1e-9),
    ("variance_decomposition", Kind::Identity, tolerance::IDENTITY),
    ("eigenbasis_error_term", Kind::Identity, 1e-12),
    ("schrodinger_bound", Kind::Bound, tolerance::IDENTITY),
    ("kennard_robertson_bound", Kind::Bound, tolerance::IDENTITY),
    ("krs_check", Kind::Bound, tolerance::IDENTITY),
    ("krs_decomposition", Kind::Identity, tolerance::IDENTITY),
    ("estimation_tradeoff", Kind::Bound, tolerance::IDENTITY),
    ("optimal_estimation", Kind::Identity, tolerance::IDENTITY),
    ("estimator_bias", Kind::Identity, 1e-12),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|c| c.0)
}

struct Outcome {
    values: [f64; CHECKS.len()],
    masked: f64,
}

fn instance_rng(seed: u64, d: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((d as u64) << 32) | trial as u64);
    rng
}

fn run_instance(cfg: &RunConfig, d: usize, trial: usize) -> Result<Outcome> {
    let mut rng = instance_rng(cfg.seed, d, trial);
    let model = cfg.xi_model();
    let basis = haar_basis(d, &mut rng);
    let psi = haar_state_with_min_overlap(&basis, MIN_OVERLAP, &mut rng);
    let g = random_operator(d, &mut rng);
    let a = random_hermitian(d, &mut rng);
    let b = random_hermitian(d, &mut rng);
    let ens = JointEnsemble::new(&psi, &basis, &model)?;
    let fg = build_cval(&g, &psi, &basis, &model)?;
    let fa = build_cval(&a, &psi, &basis, &model)?;
    let fb = build_cval(&b, &psi, &basis, &model)?;
    let ex = Method::Exact;
    let (re, im) = oracle::expectation_parts(&g, &psi)?;

    let mut v = [0.0; CHECKS.len()];
    v[0] = (mean_cval(&ens, &fg, ex)?.value - re).abs();
    v[1] = (xi_weighted_mean(&ens, &fg, ex)?.value - im).abs();
    v[2] = (product_average(&ens, &fg, &fb, ex)?.value - oracle::symmetrized_product(&g, &b, &psi)?).abs();
    v[3] = (commutator_average(&ens, &fg, &fb, ex)?.value - oracle::commutator_form(&g, &b, &psi)?).abs();
    v[4] = (full_product_representation(&ens, &fg, &fb, ex)?.value - oracle::correlation(&g, &b, &psi)?).norm();
    v[5] = (covariance(&ens, &fa, &fb, ex)?.value - oracle::quantum_covariance(&a, &b, &psi)?).abs();
    let var_a = variance(&ens, &fa, ex)?.value;
    v[6] = (var_a - oracle::quantum_variance(&a, &psi)?).abs();
    v[7] = (statistical_deviation(&ens, &fa, &fb, ex)?.value - oracle::squared_deviation(&a, &b, &psi)?).abs();

    let other = loop {
        let c = haar_basis(d, &mut rng);
        if c.vectors().iter().all(|phi| phi.inner(&psi).norm() >= MIN_OVERLAP) {
            break c;
        }
    };
    let ens2 = JointEnsemble::new(&psi, &other, &model)?;
    let fa2 = build_cval(&a, &psi, &other, &model)?;
    v[8] = (variance(&ens2, &fa2, ex)?.value - var_a).abs();

    v[9] = decompose_variance(&a, &psi, &basis, &model)?.residual();
    let (eig_a, _) = eigenbasis(&a)?;
    v[10] = decompose_variance(&a, &psi, &eig_a, &model)?.err_sq;

    let mut slack = [f64::MAX; 2];
    for reference in [Reference::EigenbasisOfA, Reference::EigenbasisOfB] {
        slack[0] = slack[0].min(schrodinger_bound(&a, &b, &psi, &model, reference)?.slack);
        slack[1] = slack[1].min(kennard_robertson_bound(&a, &b, &psi, &model, reference)?.slack);
    }
    v[11] = slack[0];
    v[12] = slack[1];
    let krs = krs_check(&a, &b, &psi, &model)?;
    v[13] = krs.slack;
    v[14] = krs.decomposition_residual.unwrap_or(f64::NAN);
    v[15] = self_estimation_tradeoff(&a, &b, &psi, &model)?.bound.slack;

    let est = optimal_estimator(&a, &psi, &b, &model)?;
    let report = ms_error(&est, &a, &psi, &b, &model)?;
    v[16] = (report.ms_error - report.error_term).abs();
    v[17] = report.bias_coefficient.abs();

    Ok(Outcome {
        values: v,
        masked: ens.masked_weight(&[&fg, &fa, &fb]),
    })
}

/// Runs every check over `trials` instances per dimension. `fault` names a
/// check whose result is pushed past its threshold, for negative-control runs.
pub fn run(cfg: &RunConfig, fault: Option<&str>) -> Result<SuiteReport> {
    let start = Instant::now();
    let jobs: Vec<(usize, usize)> = cfg
        .dims
        .iter()
        .flat_map(|&d| (0..cfg.trials).map(move |t| (d, t)))
        .collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(d, t)| run_instance(cfg, d, t))
        .collect::<Result<_>>()?;

    let records = CHECKS
        .iter()
        .enumerate()
        .map(|(k, &(name, kind, threshold))| {
            let masked = outcomes.iter().map(|o| o.masked).fold(0.0, f64::max);
            let faulty = fault == Some(name);
            match kind {
                Kind::Identity => {
                    let mut worst = outcomes.iter().map(|o| o.values[k]).fold(0.0, f64::max);
                    if faulty {
                        worst += 1e3 * threshold;
                    }
                    CheckRecord::identity(name, outcomes.len(), worst, masked, threshold)
                }
                Kind::Bound => {
                    let mut worst = outcomes.iter().map(|o| o.values[k]).fold(f64::MAX, f64::min);
                    if faulty {
                        worst -= 1e3 * threshold;
                    }
                    CheckRecord::bound(name, outcomes.len(), worst, masked, threshold)
                }
            }
        })
        .collect();
    Ok(SuiteReport::new(cfg.clone(), records, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            dims: vec![2, 3, 5],
            trials: 8,
            ..RunConfig::default()
        }
    }

    #[test]
    fn small_suite_passes() {
        let r = run(&small(), None).unwrap();
        assert!(r.pass, "{}", r.table());
        assert_eq!(r.records.len(), CHECKS.len());
        assert!(r.records.iter().all(|c| c.instances == 24));
    }

    #[test]
    fn fault_hook_fails_the_named_check() {
        let r = run(&small(), Some("krs_check")).unwrap();
        assert!(!r.pass);
        let failed: Vec<_> = r.records.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        assert_eq!(failed, ["krs_check"]);
    }

    #[test]
    fn records_do_not_depend_on_thread_count() {
        let cfg = small();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run(&cfg, None)).unwrap();
        let b = four.install(|| run(&cfg, None)).unwrap();
        assert_eq!(a.records, b.records);
    }
}
