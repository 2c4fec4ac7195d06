//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then asserts.

mod common;

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::Instant;

use common::*;
use cval_core::contvar::{
    average_equality_check, build_gaussian, hamiltonian_field, momentum_field, position_momentum_krs, sign_changes,
    Grid,
};
use cval_core::estimation::{classical_limit_scan, conditional_bias, ms_error, optimal_estimator, self_estimation_tradeoff};
use cval_core::random::{haar_basis, haar_state, haar_state_with_min_overlap, haar_unitary, random_diagonal_in, random_hermitian, random_operator};
use cval_core::statistics::{
    commutator_average, covariance, full_product_representation, mean_cval, mixed_product_average, product_average,
    separable_xi_product, statistical_deviation, variance, xi_weighted_mean,
};
use cval_core::uncertainty::{
    decompose_variance, epistemic_restriction_check, kennard_robertson_bound, krs_check, schrodinger_bound,
};
use cval_core::{
    build_cval, cval_from_density, cval_mixed, density_matrix, eigenbasis, JointEnsemble, Method, MixedEnsemble,
    OperatorMatrix, OrthonormalBasis, Reference, StateVector, XiModel, C64,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const MIN_OVERLAP: f64 = 1e-3;

fn verdict(id: u32, title: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {}: {title} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn models(hbar: f64) -> [XiModel; 3] {
    [XiModel::binary(hbar), XiModel::uniform(hbar), XiModel::gaussian(hbar)]
}

fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = values.iter().cloned().fold(f64::MAX, f64::min);
    hi - lo
}

fn basis_with_min_overlap(psi: &StateVector, rng: &mut ChaCha8Rng) -> OrthonormalBasis {
    loop {
        let b = haar_basis(psi.dim(), rng);
        if b.vectors().iter().all(|v| v.inner(psi).norm() >= MIN_OVERLAP) {
            return b;
        }
    }
}

#[test]
fn criterion_01_expectation_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let models = models(0.7);
    let (mut err_re, mut err_im, mut masked) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..1000 {
        let d = 2 + i % 7;
        let model = &models[i % 3];
        let psi = haar_state(d, &mut rng);
        let basis = haar_basis(d, &mut rng);
        let op = if i % 2 == 0 { random_operator(d, &mut rng) } else { random_hermitian(d, &mut rng) };
        let ens = JointEnsemble::new(&psi, &basis, model).unwrap();
        let field = build_cval(&op, &psi, &basis, model).unwrap();
        let exact = expect(&mat(&op), &psi);
        let re = mean_cval(&ens, &field, Method::Exact).unwrap();
        let im = xi_weighted_mean(&ens, &field, Method::Exact).unwrap();
        err_re = err_re.max((re.value - exact.re).abs());
        err_im = err_im.max((im.value - exact.im).abs());
        masked = masked.max(re.masked_weight);
        if i % 3 == 0 {
            let re = mean_cval(&ens, &field, Method::Enumerated).unwrap();
            let im = xi_weighted_mean(&ens, &field, Method::Enumerated).unwrap();
            err_re = err_re.max((re.value - exact.re).abs());
            err_im = err_im.max((im.value - exact.im).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = err_re <= 1e-10 && err_im <= 1e-10 && secs < 10.0;
    verdict(
        1,
        "expectation identities",
        pass,
        format!("max re err {err_re:.2e}, max im err {err_im:.2e}, masked {masked:.1e}, {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_product_representations() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let models = models(1.3);
    let (mut e_prod, mut e_comm, mut e_full) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..1000 {
        let d = 2 + i % 7;
        let model = &models[i % 3];
        let basis = haar_basis(d, &mut rng);
        let psi = haar_state_with_min_overlap(&basis, MIN_OVERLAP, &mut rng);
        let (a, b) = match i % 4 {
            0 => (random_hermitian(d, &mut rng), random_hermitian(d, &mut rng)),
            1 => (random_operator(d, &mut rng), random_hermitian(d, &mut rng)),
            2 => (random_hermitian(d, &mut rng), random_operator(d, &mut rng)),
            _ => (random_operator(d, &mut rng), random_operator(d, &mut rng)),
        };
        let ens = JointEnsemble::new(&psi, &basis, model).unwrap();
        let fa = build_cval(&a, &psi, &basis, model).unwrap();
        let fb = build_cval(&b, &psi, &basis, model).unwrap();
        let prod = product_average(&ens, &fa, &fb, Method::Exact).unwrap().value;
        let comm = commutator_average(&ens, &fa, &fb, Method::Exact).unwrap().value;
        let full = full_product_representation(&ens, &fa, &fb, Method::Exact).unwrap().value;
        e_prod = e_prod.max((prod - sym(&a, &b, &psi)).abs());
        e_comm = e_comm.max((comm - antisym(&a, &b, &psi)).abs());
        e_full = e_full.max((full - corr(&a, &b, &psi)).norm());
    }
    let pass = e_prod <= 1e-10 && e_comm <= 1e-10 && e_full <= 1e-10;
    verdict(
        2,
        "product, commutator and full product representations",
        pass,
        format!("max errors {e_prod:.2e}, {e_comm:.2e}, {e_full:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_variance_covariance_deviation() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let models = models(1.0);
    let (mut err, mut worst_spread) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let d = 2 + i % 7;
        let model = &models[i % 3];
        let psi = haar_state(d, &mut rng);
        let a = random_hermitian(d, &mut rng);
        let b = random_hermitian(d, &mut rng);
        let oracle_cov = cov(&a, &b, &psi);
        let oracle_var = cov(&a, &a, &psi);
        let diff = a.sub(&b).unwrap();
        let oracle_dev = expect(&(mat(&diff) * mat(&diff)), &psi).re;
        let (mut covs, mut vars, mut devs) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..10 {
            let basis = basis_with_min_overlap(&psi, &mut rng);
            let ens = JointEnsemble::new(&psi, &basis, model).unwrap();
            let fa = build_cval(&a, &psi, &basis, model).unwrap();
            let fb = build_cval(&b, &psi, &basis, model).unwrap();
            covs.push(covariance(&ens, &fa, &fb, Method::Exact).unwrap().value);
            vars.push(variance(&ens, &fa, Method::Exact).unwrap().value);
            devs.push(statistical_deviation(&ens, &fa, &fb, Method::Exact).unwrap().value);
        }
        for (vals, oracle) in [(&covs, oracle_cov), (&vars, oracle_var), (&devs, oracle_dev)] {
            err = vals.iter().map(|v| (v - oracle).abs()).fold(err, f64::max);
            worst_spread = worst_spread.max(spread(vals));
        }
    }
    let pass = err <= 1e-10 && worst_spread <= 1e-9;
    verdict(
        3,
        "variance, covariance and deviation equalities",
        pass,
        format!("max error {err:.2e}, max basis spread {worst_spread:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_variance_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let models = models(0.9);
    let (mut residual, mut eig_err, mut total_err) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..1000 {
        let d = 2 + i % 7;
        let model = &models[i % 3];
        let psi = haar_state(d, &mut rng);
        let op = random_hermitian(d, &mut rng);
        let basis = haar_basis(d, &mut rng);
        let v = decompose_variance(&op, &psi, &basis, model).unwrap();
        residual = residual.max(v.residual());
        total_err = total_err.max((v.total - cov(&op, &op, &psi)).abs());
        let (eig, _) = eigenbasis(&op).unwrap();
        let e = decompose_variance(&op, &psi, &eig, model).unwrap();
        residual = residual.max(e.residual());
        eig_err = eig_err.max(e.err_sq);
    }
    let pass = residual <= 1e-10 && eig_err <= 1e-12 && total_err <= 1e-10;
    verdict(
        4,
        "variance decomposition",
        pass,
        format!("max residual {residual:.2e}, max eigenbasis error term {eig_err:.2e}, variance error {total_err:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let model = XiModel::binary(1.0);
    let (jx, jy, jz) = spin_one();
    let mut min_slack = f64::MAX;
    let mut decomposition = 0.0f64;
    for i in 0..1000 {
        let d = 2 + i % 2;
        let psi = haar_state(d, &mut rng);
        let (a, b) = match (d, (i / 2) % 3) {
            (2, 0) => (OperatorMatrix::pauli_x(), OperatorMatrix::pauli_y()),
            (2, 1) => (OperatorMatrix::pauli_x(), OperatorMatrix::pauli_z()),
            (3, 0) => (jx.clone(), jy.clone()),
            (3, 1) => (jx.clone(), jz.clone()),
            _ => (random_hermitian(d, &mut rng), random_hermitian(d, &mut rng)),
        };
        let mut reports = Vec::new();
        for reference in [Reference::EigenbasisOfA, Reference::EigenbasisOfB] {
            reports.push(schrodinger_bound(&a, &b, &psi, &model, reference).unwrap());
            reports.push(kennard_robertson_bound(&a, &b, &psi, &model, reference).unwrap());
        }
        let krs = krs_check(&a, &b, &psi, &model).unwrap();
        decomposition = decomposition.max(krs.decomposition_residual.unwrap());
        reports.push(krs);
        reports.push(self_estimation_tradeoff(&a, &b, &psi, &model).unwrap().bound);
        for r in reports {
            min_slack = min_slack.min(r.slack);
        }
    }
    let mut commuting_rhs = 0.0f64;
    for i in 0..200 {
        let d = 2 + i % 2;
        let basis = haar_basis(d, &mut rng);
        let a = random_diagonal_in(&basis, &mut rng).unwrap();
        let b = random_diagonal_in(&basis, &mut rng).unwrap();
        let psi = haar_state(d, &mut rng);
        let r = kennard_robertson_bound(&a, &b, &psi, &model, Reference::EigenbasisOfB).unwrap();
        commuting_rhs = commuting_rhs.max(r.rhs);
    }
    let pass = min_slack >= -1e-10 && commuting_rhs <= 1e-12 && decomposition <= 1e-10;
    verdict(
        5,
        "uncertainty bounds",
        pass,
        format!(
            "min slack {min_slack:.2e}, commuting rhs max {commuting_rhs:.2e}, krs split residual {decomposition:.2e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_epistemic_restriction() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut worst, mut worst_refined) = (0.0f64, 0.0f64);
    let (mut order_lo, mut order_hi) = (f64::MAX, f64::MIN);
    for i in 0..150 {
        let d = 2 + i % 15;
        let a = random_hermitian(d, &mut rng);
        let b = random_hermitian(d, &mut rng);
        let psi = haar_state(d, &mut rng);
        let r = epistemic_restriction_check(&a, &b, &psi, 1e-4, 1.0).unwrap();
        worst = worst.max(r.max_raw_residual());
        worst_refined = worst_refined.max(r.max_refined_residual());
        let coarse = epistemic_restriction_check(&a, &b, &psi, 1e-2, 1.0).unwrap();
        let fine = epistemic_restriction_check(&a, &b, &psi, 5e-3, 1.0).unwrap();
        for (c, f) in coarse.entries.iter().zip(&fine.entries) {
            // Entries already at rounding level carry no order information.
            if c.raw_residual < 1e-9 {
                continue;
            }
            let order = (c.raw_residual / f.raw_residual).log2();
            order_lo = order_lo.min(order);
            order_hi = order_hi.max(order);
        }
    }
    // The reported residual at the default step carries one Richardson refinement;
    // the order is measured on the plain central difference.
    let pass = worst_refined <= 1e-6 && order_lo >= 1.8 && order_hi <= 2.2;
    verdict(
        6,
        "epistemic restriction",
        pass,
        format!(
            "max residual {worst_refined:.2e} at step 1e-4 (plain central difference {worst:.2e}), central-difference order {order_lo:.3}..{order_hi:.3}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_estimation() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let models = models(1.0);
    let (mut opt_err, mut worst_gain, mut worst_bias, mut scan_err) = (0.0f64, f64::MIN, 0.0f64, 0.0f64);
    let scales = [1.0, 0.8, 0.5, 0.3, 0.1, 0.0];
    for i in 0..100 {
        let d = 2 + i % 5;
        let model = &models[i % 3];
        let a = random_hermitian(d, &mut rng);
        let b = random_hermitian(d, &mut rng);
        let psi = haar_state(d, &mut rng);
        let est = optimal_estimator(&a, &psi, &b, model).unwrap();
        let report = ms_error(&est, &a, &psi, &b, model).unwrap();
        let (eig_b, _) = eigenbasis(&b).unwrap();
        let err_sq = decompose_variance(&a, &psi, &eig_b, model).unwrap().err_sq;
        opt_err = opt_err.max((report.ms_error - err_sq).abs());
        for _ in 0..100 {
            let delta: Vec<f64> = (0..d).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
            let perturbed = est.with_estimates(est.estimates.iter().zip(&delta).map(|(e, x)| e + x).collect()).unwrap();
            let p = ms_error(&perturbed, &a, &psi, &b, model).unwrap();
            worst_gain = worst_gain.max(report.ms_error - p.ms_error);
        }
        let field = build_cval(&a, &psi, &eig_b, model).unwrap();
        for xi in [-3.0, -1.0, -0.25, 0.5, 1.0, 2.0] {
            worst_bias = worst_bias.max(conditional_bias(&field, xi).abs());
            worst_bias = worst_bias.max(report.bias_at(xi, 1.0).abs());
        }
        let scan = classical_limit_scan(&a, &psi, &b, model, &scales).unwrap();
        let base = scan.rows[0].ms_error;
        for row in &scan.rows {
            scan_err = scan_err.max((row.ms_error - row.s * row.s * base).abs());
        }
    }
    let pass = opt_err <= 1e-10 && worst_gain <= 1e-10 && worst_bias <= 1e-12 && scan_err <= 1e-12;
    verdict(
        7,
        "estimation",
        pass,
        format!(
            "optimal vs error term {opt_err:.2e}, best perturbation gain {worst_gain:.2e}, max bias {worst_bias:.2e}, scan error {scan_err:.2e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_gaussian_continuous_example() {
    let mut rel_h = 0.0f64;
    let mut zero_offset = 0.0f64;
    let mut zero_count_ok = true;
    let mut rel_avg = 0.0f64;
    let mut rel_krs = 0.0f64;
    for (sigma, mass, hbar) in [(1.0, 1.0, 1.0), (0.6, 2.5, 0.4)] {
        let grid = Grid::new(-10.0 * sigma, 10.0 * sigma, 4096).unwrap();
        let wf = build_gaussian(sigma, 0.0, 0.0, grid, hbar).unwrap();
        let model = XiModel::binary(hbar);
        let h = hamiltonian_field(&wf, mass);
        for j in (0..grid.points).filter(|&j| h.valid[j]) {
            let q = grid.q(j);
            let closed = -(hbar * hbar / (2.0 * mass)) * (-1.0 / (2.0 * sigma * sigma) + q * q / (4.0 * sigma.powi(4)));
            for xi in [-hbar, 0.0, hbar] {
                rel_h = rel_h.max((h.value(j, xi).unwrap() - closed).abs() / closed.abs());
            }
        }
        let zeros = sign_changes(&grid, &h.estimate, &h.valid);
        zero_count_ok &= zeros.len() == 2;
        for z in zeros {
            zero_offset = zero_offset.max((z.abs() - 2f64.sqrt() * sigma).abs() / grid.spacing());
        }
        let expected = hbar * hbar / (8.0 * mass * sigma * sigma);
        let avg = average_equality_check(&wf, mass, &model).unwrap();
        for v in [avg.h_cval, avg.kinetic_operator, avg.p_cval_sq] {
            rel_avg = rel_avg.max((v - expected).abs() / expected);
        }
        let krs = position_momentum_krs(&wf, &model).unwrap();
        let floor = hbar * hbar / 4.0;
        rel_krs = rel_krs.max((krs.bound.lhs - floor).abs() / floor).max((krs.bound.rhs - floor).abs() / floor);
        // The momentum c-value of a real Gaussian has no estimate part.
        let p = momentum_field(&wf);
        assert!((0..grid.points).filter(|&j| p.valid[j]).all(|j| p.estimate[j].abs() < 1e-12));
    }
    let pass = rel_h <= 1e-6 && zero_count_ok && zero_offset <= 1.0 && rel_avg <= 1e-6 && rel_krs <= 1e-6;
    verdict(
        8,
        "gaussian c-valued kinetic energy",
        pass,
        format!(
            "H~ max rel err {rel_h:.2e}, sign change offset {zero_offset:.3} cells, averages rel err {rel_avg:.2e}, KRS rel err {rel_krs:.2e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_monte_carlo_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let d = 3;
    let basis = haar_basis(d, &mut rng);
    let psi = haar_state_with_min_overlap(&basis, 0.05, &mut rng);
    let a = random_hermitian(d, &mut rng);
    let b = random_hermitian(d, &mut rng);
    let kinds = models(1.0);
    let n_samples = 100_000;
    let mut inside = 0;
    let repeats = 500;
    for r in 0..repeats {
        let model = kinds[r % 3].clone().with_seed(10_000 + r as u64);
        let ens = JointEnsemble::new(&psi, &basis, &model).unwrap();
        let fa = build_cval(&a, &psi, &basis, &model).unwrap();
        let fb = build_cval(&b, &psi, &basis, &model).unwrap();
        let mc = Method::MonteCarlo { samples: n_samples };
        let (est, exact) = match (r / 3) % 3 {
            0 => (mean_cval(&ens, &fa, mc).unwrap(), mean_cval(&ens, &fa, Method::Exact).unwrap()),
            1 => (
                product_average(&ens, &fa, &fb, mc).unwrap(),
                product_average(&ens, &fa, &fb, Method::Exact).unwrap(),
            ),
            _ => (covariance(&ens, &fa, &fb, mc).unwrap(), covariance(&ens, &fa, &fb, Method::Exact).unwrap()),
        };
        if (est.value - exact.value).abs() <= 4.0 * est.mc_stderr.unwrap() {
            inside += 1;
        }
    }
    let fraction = inside as f64 / repeats as f64;
    let mut worst_ratio_dev = 0.0f64;
    for r in 0..30 {
        let model = kinds[r % 3].clone().with_seed(50_000 + r as u64);
        let ens = JointEnsemble::new(&psi, &basis, &model).unwrap();
        let fa = build_cval(&a, &psi, &basis, &model).unwrap();
        let fb = build_cval(&b, &psi, &basis, &model).unwrap();
        let small = product_average(&ens, &fa, &fb, Method::MonteCarlo { samples: 10_000 }).unwrap();
        let large = product_average(&ens, &fa, &fb, Method::MonteCarlo { samples: 100_000 }).unwrap();
        let ratio = small.mc_stderr.unwrap() / large.mc_stderr.unwrap();
        worst_ratio_dev = worst_ratio_dev.max((ratio / 10f64.sqrt() - 1.0).abs());
    }
    let pass = fraction >= 0.99 && worst_ratio_dev <= 0.10;
    verdict(
        9,
        "monte carlo consistency",
        pass,
        format!("{inside}/{repeats} within 4 stderr, worst stderr scaling deviation {:.1}%", 100.0 * worst_ratio_dev),
    );
    assert!(pass);
}

#[test]
fn criterion_10_contextuality_witnesses() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let model = XiModel::binary(1.0);

    // Commuting A, B and C = AB: the pointwise product rule fails in a generic
    // basis while the averages agree, and holds in the joint eigenbasis.
    let joint = haar_basis(3, &mut rng);
    let a = random_diagonal_in(&joint, &mut rng).unwrap();
    let b = random_diagonal_in(&joint, &mut rng).unwrap();
    let ab = mat(&a) * mat(&b);
    let c = OperatorMatrix::hermitian((&ab + ab.adjoint()) * C64::new(0.5, 0.0)).unwrap();
    let generic = haar_basis(3, &mut rng);
    let psi = haar_state_with_min_overlap(&generic, MIN_OVERLAP, &mut rng);
    let pointwise_gap = |basis: &OrthonormalBasis| {
        let fa = build_cval(&a, &psi, basis, &model).unwrap();
        let fb = build_cval(&b, &psi, basis, &model).unwrap();
        let fc = build_cval(&c, &psi, basis, &model).unwrap();
        let mut gap = 0.0f64;
        for n in 0..3 {
            for xi in [-1.0, 1.0] {
                let lhs = fc.evaluate(n, xi).unwrap();
                let rhs = fa.evaluate(n, xi).unwrap() * fb.evaluate(n, xi).unwrap();
                gap = gap.max((lhs - rhs).abs());
            }
        }
        (gap, fa, fb, fc)
    };
    let (violation, fa, fb, fc) = pointwise_gap(&generic);
    let ens = JointEnsemble::new(&psi, &generic, &model).unwrap();
    let oracle_c = expect(&mat(&c), &psi).re;
    let avg_gap = (mean_cval(&ens, &fc, Method::Exact).unwrap().value - oracle_c)
        .abs()
        .max((product_average(&ens, &fa, &fb, Method::Exact).unwrap().value - oracle_c).abs());
    let (joint_gap, ..) = pointwise_gap(&joint);
    let product_rule_ok = violation > 1e-3 && avg_gap <= 1e-10 && joint_gap <= 1e-10;

    // Bell state with local sigma_x: splitting xi drops exactly the cross term.
    let bell = StateVector::from_reals(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).unwrap();
    let sx = OperatorMatrix::pauli_x();
    let (ax, bx) = (sx.kron(&OperatorMatrix::identity(2)), OperatorMatrix::identity(2).kron(&sx));
    let local = OrthonormalBasis::product(&OrthonormalBasis::qubit(0.4, 0.9), &OrthonormalBasis::qubit(1.1, -0.5));
    let split = separable_xi_product(&ax, &bx, &bell, (2, 2), &local, (&model, &model.clone().with_seed(7)), Method::Exact)
        .unwrap();
    let bell_oracle = sym(&ax, &bx, &bell);
    let split_residual = (split.global.value - split.separable.value - split.cross_term).abs();
    let separable_ok = split_residual <= 1e-10
        && split.cross_term.abs() > 1e-3
        && (split.global.value - bell_oracle).abs() <= 1e-10;

    // Two decompositions of one density matrix.
    let weights = vec![0.5, 0.3, 0.2];
    let states: Vec<StateVector> = (0..3).map(|_| haar_state(3, &mut rng)).collect();
    let first = MixedEnsemble::new(weights.clone(), states.clone()).unwrap();
    let u = haar_unitary(3, &mut rng);
    let mut second_states = Vec::new();
    let mut second_weights = Vec::new();
    for j in 0..3 {
        let mut v = DVector::<C64>::zeros(3);
        for (i, s) in states.iter().enumerate() {
            v += s.amplitudes() * (u[(j, i)] * weights[i].sqrt());
        }
        let w = v.norm_squared();
        second_weights.push(w);
        second_states.push(StateVector::normalized(v.iter().cloned().collect()).unwrap());
    }
    let second = MixedEnsemble::new(second_weights, second_states).unwrap();
    let rho_gap = cval_core::hilbert::max_abs(&(density_matrix(&first).entries() - density_matrix(&second).entries()));
    let basis = haar_basis(3, &mut rng);
    let op = random_operator(3, &mut rng);
    let m1 = cval_mixed(&op, &first, &basis, &model).unwrap();
    let m2 = cval_mixed(&op, &second, &basis, &model).unwrap();
    let direct = cval_from_density(&op, &density_matrix(&first), &basis, &model).unwrap();
    let mut field_gap = 0.0f64;
    for n in 0..3 {
        let scale = m1.field.re_part[n].abs().max(m1.field.im_part[n].abs()).max(1.0);
        for other in [&m2.field, &direct] {
            field_gap = field_gap.max((m1.field.re_part[n] - other.re_part[n]).abs() / scale);
            field_gap = field_gap.max((m1.field.im_part[n] - other.im_part[n]).abs() / scale);
        }
    }
    let mut component_gap = 0.0f64;
    for n in 0..3 {
        component_gap = component_gap.max((m1.components[0].re_part[n] - m2.components[0].re_part[n]).abs());
        component_gap = component_gap.max((m1.components[0].im_part[n] - m2.components[0].im_part[n]).abs());
    }
    let h1 = random_hermitian(3, &mut rng);
    let h2 = random_hermitian(3, &mut rng);
    let p1 = mixed_product_average(&first, &h1, &h2, &basis, &model, Method::Exact).unwrap().value;
    let p2 = mixed_product_average(&second, &h1, &h2, &basis, &model, Method::Exact).unwrap().value;
    let trace_oracle = trace_sym(density_matrix(&first).entries(), &h1, &h2);
    let mixed_gap = (p1 - trace_oracle).abs().max((p2 - trace_oracle).abs());
    let mixed_ok = rho_gap <= 1e-12 && field_gap <= 1e-10 && component_gap > 1e-3 && mixed_gap <= 1e-10;

    let pass = product_rule_ok && separable_ok && mixed_ok;
    verdict(
        10,
        "contextuality witnesses",
        pass,
        format!(
            "pointwise violation {violation:.3}, average gap {avg_gap:.1e}, joint-basis gap {joint_gap:.1e}; \
             separable residual {split_residual:.1e}, cross term {:.3}; mixed field gap {field_gap:.1e}, \
             component gap {component_gap:.3}, mixed product gap {mixed_gap:.1e}",
            split.cross_term
        ),
    );
    assert!(pass);
}
