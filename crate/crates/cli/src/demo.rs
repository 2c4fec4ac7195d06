//! Named worked examples. Each writes CSV data plus a summary and carries its
//! own assertions.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::PathBuf;

use cval_core::contvar::{
    average_equality_check, build_gaussian, build_plane_wave, grid_profile_csv, hamiltonian_field, momentum_field,
    position_momentum_krs, sign_changes, Grid, PlateauEnvelope,
};
use cval_core::random::haar_state;
use cval_core::statistics::separable_xi_product;
use cval_core::uncertainty::{bound_reports_csv, kennard_robertson_bound, krs_check, schrodinger_bound};
use cval_core::{
    cval_mixed, density_matrix, hilbert::max_abs, oracle, tolerance, BoundReport, CValField, Method, MixedEnsemble,
    OperatorMatrix, OrthonormalBasis, Reference, StateVector, C64,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::report::{write_artifact, write_report};

pub const NAMES: [&str; 5] = ["gaussian", "plane_wave", "qubit_krs", "bell_separable_xi", "mixed_context"];

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Assertion {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub demo: String,
    pub summary: Value,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<PathBuf>,
    pub pass: bool,
}

impl DemoReport {
    fn new(demo: &str, summary: Value, assertions: Vec<Assertion>, artifacts: Vec<PathBuf>) -> Self {
        let pass = assertions.iter().all(|a| a.pass);
        Self {
            demo: demo.into(),
            summary,
            assertions,
            artifacts,
            pass,
        }
    }

    pub fn text(&self) -> String {
        let mut out = format!("demo {}\n", self.demo);
        if let Value::Object(map) = &self.summary {
            for (k, v) in map {
                out.push_str(&format!("  {k}: {v}\n"));
            }
        }
        for a in &self.assertions {
            out.push_str(&format!(
                "  [{}] {} = {:.3e} (threshold {:.1e})\n",
                if a.pass { "PASS" } else { "FAIL" },
                a.name,
                a.value,
                a.threshold
            ));
        }
        for p in &self.artifacts {
            out.push_str(&format!("  wrote {}\n", p.display()));
        }
        out
    }

    fn csv(&self) -> String {
        let mut out = String::from("assertion,value,threshold,pass\n");
        for a in &self.assertions {
            out.push_str(&format!("{},{:e},{:e},{}\n", a.name, a.value, a.threshold, a.pass));
        }
        out
    }
}

type DemoResult = Result<DemoReport, Box<dyn std::error::Error>>;

pub fn run(name: &str, cfg: &RunConfig) -> DemoResult {
    let mut report = match name {
        "gaussian" => gaussian(cfg)?,
        "plane_wave" => plane_wave(cfg)?,
        "qubit_krs" => qubit_krs(cfg)?,
        "bell_separable_xi" => bell_separable_xi(cfg)?,
        "mixed_context" => mixed_context(cfg)?,
        other => return Err(format!("unknown demo {other:?}").into()),
    };
    let summary = write_report(cfg, &format!("{name}_summary"), &report, &report.csv())?;
    report.artifacts.push(summary);
    Ok(report)
}

fn gaussian(cfg: &RunConfig) -> DemoResult {
    let (sigma, mass, hbar) = (1.0, 1.0, cfg.hbar);
    let grid = cfg.grid()?;
    let wf = build_gaussian(sigma, 0.0, 0.0, grid, hbar)?;
    let model = cfg.xi_model();
    let h = hamiltonian_field(&wf, mass);
    let closed = |q: f64| -(hbar * hbar / (2.0 * mass)) * (-1.0 / (2.0 * sigma * sigma) + q * q / (4.0 * sigma.powi(4)));
    let mut csv = String::from("q,h_tilde,closed_form\n");
    let mut rel = 0.0f64;
    for j in (0..grid.points).filter(|&j| h.valid[j]) {
        let q = grid.q(j);
        rel = rel.max((h.estimate[j] - closed(q)).abs() / closed(q).abs());
        csv.push_str(&format!("{},{},{}\n", q, h.estimate[j], closed(q)));
    }
    let zeros = sign_changes(&grid, &h.estimate, &h.valid);
    let offset = zeros
        .iter()
        .map(|z| (z.abs() - 2f64.sqrt() * sigma).abs() / grid.spacing())
        .fold(0.0, f64::max);
    let avg = average_equality_check(&wf, mass, &model)?;
    let expected = hbar * hbar / (8.0 * mass * sigma * sigma);
    let krs = position_momentum_krs(&wf, &model)?;
    let floor = hbar * hbar / 4.0;
    let artifacts = vec![
        write_artifact(&cfg.output_dir, "gaussian_hamiltonian.csv", &csv)?,
        write_artifact(&cfg.output_dir, "gaussian_profile.csv", &grid_profile_csv(&wf, mass))?,
    ];
    let assertions = vec![
        Assertion::at_most("h_tilde_closed_form_rel_error", rel, tolerance::GRID),
        Assertion::at_most("sign_change_count_error", (zeros.len() as f64 - 2.0).abs(), 0.0),
        Assertion::at_most("sign_change_offset_cells", offset, 1.0),
        Assertion::at_most("mean_h_tilde_rel_error", (avg.h_cval - expected).abs() / expected, tolerance::GRID),
        Assertion::at_most(
            "kinetic_operator_rel_error",
            (avg.kinetic_operator - expected).abs() / expected,
            tolerance::GRID,
        ),
        Assertion::at_most("mean_p_tilde_sq_rel_error", (avg.p_cval_sq - expected).abs() / expected, tolerance::GRID),
        Assertion::at_most("position_momentum_krs_rel_error", (krs.bound.lhs - floor).abs() / floor, tolerance::GRID),
    ];
    let summary = json!({
        "sigma": sigma, "mass": mass, "hbar": hbar, "grid_points": grid.points,
        "sign_changes": zeros,
        "mean_h_tilde": avg.h_cval, "kinetic_operator": avg.kinetic_operator, "mean_p_tilde_sq_over_2m": avg.p_cval_sq,
        "expected": expected, "krs_lhs": krs.bound.lhs, "krs_rhs": krs.bound.rhs,
        "masked_weight": avg.masked_weight,
    });
    Ok(DemoReport::new("gaussian", summary, assertions, artifacts))
}

fn plane_wave(cfg: &RunConfig) -> DemoResult {
    let (p0, mass, hbar) = (1.0, 1.0, cfg.hbar);
    let envelope = PlateauEnvelope {
        half_width: 20.0,
        edge: 1.0,
    };
    let grid = Grid::new(-40.0, 40.0, 8192)?;
    let wf = build_plane_wave(p0, grid, envelope, hbar)?;
    let model = cfg.xi_model();
    let p = momentum_field(&wf);
    let h = hamiltonian_field(&wf, mass);
    let rho = wf.rho();
    let interior: Vec<usize> = (0..grid.points).filter(|&j| envelope.interior(grid.q(j))).collect();
    let peak = interior.iter().map(|&j| rho[j]).fold(0.0, f64::max);
    let (mut rho_dev, mut p_dev, mut h_dev) = (0.0f64, 0.0f64, 0.0f64);
    for &j in &interior {
        rho_dev = rho_dev.max((rho[j] - peak).abs() / peak);
        for xi in [-hbar, hbar] {
            p_dev = p_dev.max((p.value(j, xi)? - p0).abs());
            h_dev = h_dev.max((h.value(j, xi)? - p0 * p0 / (2.0 * mass)).abs());
        }
    }
    let krs = position_momentum_krs(&wf, &model)?;
    let artifacts = vec![write_artifact(&cfg.output_dir, "plane_wave_profile.csv", &grid_profile_csv(&wf, mass))?];
    let assertions = vec![
        Assertion::at_most("interior_density_rel_spread", rho_dev, tolerance::GRID),
        Assertion::at_most("interior_momentum_error", p_dev, tolerance::GRID),
        Assertion::at_most("interior_energy_error", h_dev, tolerance::GRID),
        Assertion::at_least("position_momentum_krs_slack", krs.bound.slack, -tolerance::GRID),
    ];
    let summary = json!({
        "p0": p0, "mass": mass, "hbar": hbar, "plateau_half_width": envelope.half_width, "edge": envelope.edge,
        "interior_points": interior.len(), "var_q": krs.var_q, "var_p_tilde": krs.var_p,
        "krs_lhs": krs.bound.lhs, "krs_rhs": krs.bound.rhs,
    });
    Ok(DemoReport::new("plane_wave", summary, assertions, artifacts))
}

fn qubit_krs(cfg: &RunConfig) -> DemoResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = cfg.xi_model();
    let (a, b) = (OperatorMatrix::pauli_x(), OperatorMatrix::pauli_y());
    let mut rows: Vec<(BoundReport, u64)> = Vec::new();
    for k in 0..100u64 {
        let psi = haar_state(2, &mut rng);
        rows.push((schrodinger_bound(&a, &b, &psi, &model, Reference::EigenbasisOfB)?, k));
        rows.push((kennard_robertson_bound(&a, &b, &psi, &model, Reference::EigenbasisOfB)?, k));
        rows.push((krs_check(&a, &b, &psi, &model)?, k));
    }
    let min_slack = rows.iter().map(|(r, _)| r.slack).fold(f64::MAX, f64::min);
    let split = rows
        .iter()
        .filter_map(|(r, _)| r.decomposition_residual)
        .fold(0.0, f64::max);
    let mut table = format!("{:<20} {:>10} {:>10} {:>10}\n", "kind", "lhs", "rhs", "slack");
    for (r, _) in rows.iter().take(9) {
        table.push_str(&format!("{:<20} {:>10.5} {:>10.5} {:>10.3e}\n", r.kind.name(), r.lhs, r.rhs, r.slack));
    }
    print!("{table}");
    let artifacts = vec![write_artifact(&cfg.output_dir, "qubit_krs.csv", &bound_reports_csv(&rows))?];
    let assertions = vec![
        Assertion::at_least("min_slack", min_slack, -tolerance::IDENTITY),
        Assertion::at_most("krs_split_residual", split, tolerance::IDENTITY),
    ];
    let summary = json!({"states": 100, "operators": "sigma_x, sigma_y", "reports": rows.len(), "min_slack": min_slack});
    Ok(DemoReport::new("qubit_krs", summary, assertions, artifacts))
}

fn bell_separable_xi(cfg: &RunConfig) -> DemoResult {
    let model = cfg.xi_model();
    let second = model.clone().with_seed(cfg.seed.wrapping_add(1));
    let bell = StateVector::from_reals(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2])?;
    let sx = OperatorMatrix::pauli_x();
    let a = sx.kron(&OperatorMatrix::identity(2));
    let b = OperatorMatrix::identity(2).kron(&sx);
    // Complex local bases, so the weak values carry imaginary parts.
    let basis = OrthonormalBasis::product(&OrthonormalBasis::qubit(0.4, 0.9), &OrthonormalBasis::qubit(1.1, -0.5));
    let exact = separable_xi_product(&a, &b, &bell, (2, 2), &basis, (&model, &second), Method::Exact)?;
    let mc = separable_xi_product(
        &a,
        &b,
        &bell,
        (2, 2),
        &basis,
        (&model, &second),
        Method::MonteCarlo { samples: cfg.samples },
    )?;
    let oracle_value = oracle::symmetrized_product(&a, &b, &bell)?;
    let residual = (exact.global.value - exact.separable.value - exact.cross_term).abs();
    let mc_se = mc.separable.mc_stderr.unwrap_or(f64::NAN);
    let csv = format!(
        "quantity,value,mc,stderr\nglobal,{},{},{}\nseparable,{},{},{}\ncross_term,{},,\noracle,{},,\n",
        exact.global.value,
        mc.global.value,
        mc.global.mc_stderr.unwrap_or(f64::NAN),
        exact.separable.value,
        mc.separable.value,
        mc_se,
        exact.cross_term,
        oracle_value
    );
    let artifacts = vec![write_artifact(&cfg.output_dir, "bell_separable_xi.csv", &csv)?];
    let assertions = vec![
        Assertion::at_most("global_vs_oracle", (exact.global.value - oracle_value).abs(), tolerance::IDENTITY),
        Assertion::at_most("difference_minus_cross_term", residual, tolerance::IDENTITY),
        Assertion::at_least("cross_term_magnitude", exact.cross_term.abs(), 1e-3),
        Assertion::at_most(
            "separable_mc_deviation_in_stderr",
            (mc.separable.value - exact.separable.value).abs() / mc_se,
            5.0,
        ),
    ];
    let summary = json!({
        "global_xi": exact.global.value, "separable_xi": exact.separable.value,
        "difference": exact.global.value - exact.separable.value, "cross_term": exact.cross_term,
        "oracle_sigma_x_sigma_x": oracle_value,
    });
    Ok(DemoReport::new("bell_separable_xi", summary, assertions, artifacts))
}

fn field_rows(label: &str, f: &CValField, out: &mut String) {
    for n in 0..f.dim() {
        out.push_str(&format!("{label},{n},{},{}\n", f.re_part[n], f.im_part[n]));
    }
}

fn field_gap(a: &CValField, b: &CValField) -> f64 {
    (0..a.dim())
        .map(|n| (a.re_part[n] - b.re_part[n]).abs().max((a.im_part[n] - b.im_part[n]).abs()))
        .fold(0.0, f64::max)
}

fn mixed_context(cfg: &RunConfig) -> DemoResult {
    let model = cfg.xi_model();
    let r = |x: f64| C64::new(x, 0.0);
    let z = [StateVector::basis_vector(2, 0)?, StateVector::basis_vector(2, 1)?];
    let x = [
        StateVector::new(vec![r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2)])?,
        StateVector::new(vec![r(FRAC_1_SQRT_2), r(-FRAC_1_SQRT_2)])?,
    ];
    let first = MixedEnsemble::new(vec![0.5, 0.5], z.to_vec())?;
    let second = MixedEnsemble::new(vec![0.5, 0.5], x.to_vec())?;
    let rho_gap = max_abs(&(density_matrix(&first).entries() - density_matrix(&second).entries()));
    let op = OperatorMatrix::pauli_x().add(&OperatorMatrix::pauli_y().scale(r(0.5)))?;
    let basis = OrthonormalBasis::qubit(0.3, 0.7);
    let m1 = cval_mixed(&op, &first, &basis, &model)?;
    let m2 = cval_mixed(&op, &second, &basis, &model)?;
    let mut csv = String::from("decomposition,n,re_part,im_part\n");
    field_rows("z_mixture", &m1.field, &mut csv);
    field_rows("x_mixture", &m2.field, &mut csv);
    for (mu, c) in m1.components.iter().enumerate() {
        field_rows(&format!("z_component_{mu}"), c, &mut csv);
    }
    for (mu, c) in m2.components.iter().enumerate() {
        field_rows(&format!("x_component_{mu}"), c, &mut csv);
    }
    let mixed_gap = field_gap(&m1.field, &m2.field);
    let component_gap = field_gap(&m1.components[0], &m2.components[0]);
    let artifacts = vec![write_artifact(&cfg.output_dir, "mixed_context.csv", &csv)?];
    let assertions = vec![
        Assertion::at_most("density_matrix_gap", rho_gap, 1e-15),
        Assertion::at_most("mixed_field_gap", mixed_gap, tolerance::IDENTITY),
        Assertion::at_least("component_field_gap", component_gap, 1e-3),
    ];
    let summary = json!({
        "density_matrix": "identity/2",
        "decompositions": ["{|0>, |1>}", "{|+>, |->}"],
        "mixed_re_part": m1.field.re_part, "mixed_im_part": m1.field.im_part,
        "component_gap": component_gap,
    });
    Ok(DemoReport::new("mixed_context", summary, assertions, artifacts))
}
