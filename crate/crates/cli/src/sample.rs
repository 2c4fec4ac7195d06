//! Monte Carlo estimates next to exact values.

use std::fmt::Write as _;

use cval_core::statistics::{commutator_average, covariance, mean_cval, product_average, variance, xi_weighted_mean};
use cval_core::{build_cval, EnsembleAverage, JointEnsemble, Method, OperatorMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::matrix;

#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub quantity: String,
    pub exact: f64,
    pub mc: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

pub struct SampleSpec<'a> {
    pub op: &'a str,
    pub op_b: Option<&'a str>,
    pub basis: &'a str,
    pub state: &'a str,
}

pub fn to_csv(rows: &[SampleRow]) -> String {
    let mut out = String::from("quantity,exact,mc,stderr,n_samples\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.quantity, r.exact, r.mc, r.stderr, r.n_samples);
    }
    out
}

fn row(name: &str, exact: EnsembleAverage<f64>, mc: EnsembleAverage<f64>, n: usize) -> SampleRow {
    SampleRow {
        quantity: name.into(),
        exact: exact.value,
        mc: mc.value,
        stderr: mc.mc_stderr.unwrap_or(f64::NAN),
        n_samples: n,
    }
}

pub fn run(cfg: &RunConfig, spec: &SampleSpec) -> Result<Vec<SampleRow>, Box<dyn std::error::Error>> {
    let a = matrix::operator(spec.op)?;
    let b: Option<OperatorMatrix> = spec.op_b.map(matrix::operator).transpose()?;
    let d = a.dim();
    if let Some(b) = &b {
        if b.dim() != d {
            return Err(format!("operators have dimensions {d} and {}", b.dim()).into());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let basis = matrix::basis(spec.basis, d, &mut rng)?;
    let psi = matrix::state(spec.state, d, &mut rng)?;
    let model = cfg.xi_model();
    let ens = JointEnsemble::new(&psi, &basis, &model)?;
    let fa = build_cval(&a, &psi, &basis, &model)?;
    let n = cfg.samples;
    let mc = Method::MonteCarlo { samples: n };
    let ex = Method::Exact;
    let mut rows = vec![
        row("mean", mean_cval(&ens, &fa, ex)?, mean_cval(&ens, &fa, mc)?, n),
        row("xi_weighted_mean", xi_weighted_mean(&ens, &fa, ex)?, xi_weighted_mean(&ens, &fa, mc)?, n),
    ];
    if fa.hermitian {
        rows.push(row("variance", variance(&ens, &fa, ex)?, variance(&ens, &fa, mc)?, n));
    }
    if let Some(b) = &b {
        let fb = build_cval(b, &psi, &basis, &model)?;
        rows.push(row("product_average", product_average(&ens, &fa, &fb, ex)?, product_average(&ens, &fa, &fb, mc)?, n));
        rows.push(row(
            "commutator_average",
            commutator_average(&ens, &fa, &fb, ex)?,
            commutator_average(&ens, &fa, &fb, mc)?,
            n,
        ));
        if fa.hermitian && fb.hermitian {
            rows.push(row("covariance", covariance(&ens, &fa, &fb, ex)?, covariance(&ens, &fa, &fb, mc)?, n));
        }
    }
    Ok(rows)
}
