//! Estimating `A` from the outcome `b_n` of a measurement of `B`.
//!
//! The estimator with least mean-squared error is the real part of the weak
//! value of `A` on the eigenbasis of `B`; the error term of the c-value is the
//! single-shot estimation error.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cval::CValField;
use crate::error::{Error, Result};
use crate::hilbert::{OperatorMatrix, StateVector};
use crate::statistics::Method;
use crate::tolerance;
use crate::uncertainty::{reference_frame, BoundKind, BoundReport, Reference};
use crate::xi::{XiModel, XiPoly};

/// An estimate `T(b_n)` of `A` for every outcome `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorField {
    pub estimates: Vec<f64>,
    pub valid_mask: Vec<bool>,
    pub basis_id: String,
    pub state_id: String,
}

impl EstimatorField {
    pub fn dim(&self) -> usize {
        self.estimates.len()
    }

    /// Same context with other estimates.
    pub fn with_estimates(&self, estimates: Vec<f64>) -> Result<Self> {
        if estimates.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: estimates.len(),
            });
        }
        Ok(Self {
            estimates,
            ..self.clone()
        })
    }

    /// Adds `delta` to the estimate at `n`.
    pub fn perturbed(&self, n: usize, delta: f64) -> Result<Self> {
        if n >= self.dim() {
            return Err(Error::IndexOutOfRange { index: n, dim: self.dim() });
        }
        let mut e = self.estimates.clone();
        e[n] += delta;
        self.with_estimates(e)
    }
}

/// `T(b_n) = A^w_R(b_n|psi)` over the eigenbasis of `B`.
pub fn optimal_estimator(
    a: &OperatorMatrix,
    psi: &StateVector,
    b: &OperatorMatrix,
    model: &XiModel,
) -> Result<EstimatorField> {
    let frame = reference_frame(a, b, psi, model, Reference::EigenbasisOfB)?;
    Ok(EstimatorField {
        estimates: frame.fa.re_part.clone(),
        valid_mask: frame.fa.valid_mask.clone(),
        basis_id: frame.fa.basis_id.clone(),
        state_id: frame.fa.state_id.clone(),
    })
}

/// `(xi/hbar) A^w_I(b_n|psi)`, the gap between the c-value and the optimal estimate.
pub fn single_shot_error(field: &CValField, n: usize, xi: f64) -> Result<f64> {
    field.evaluate(n, xi)?;
    Ok(xi / field.hbar * field.im_part[n])
}

/// `sum_n Pr(n) (xi/hbar) A^w_I(b_n|psi)` at a fixed `xi`.
pub fn conditional_bias(field: &CValField, xi: f64) -> f64 {
    (0..field.dim())
        .filter(|&n| field.valid_mask[n])
        .map(|n| field.born_weights[n] * xi / field.hbar * field.im_part[n])
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    /// `<(A~ - T)^2>` integrated directly over `(n, xi)`.
    pub ms_error: f64,
    /// `<(T - A^w_R)^2>`.
    pub estimator_term: f64,
    /// `<(xi/hbar)^2 (A^w_I)^2>`, the error of the optimal estimator.
    pub error_term: f64,
    /// `sum_n Pr(n) A^w_I`, so that the bias at fixed xi is `(xi/hbar)` times this.
    pub bias_coefficient: f64,
    /// Whether `ms_error` is within tolerance of `error_term`.
    pub optimal: bool,
    pub masked_weight: f64,
}

impl EstimationReport {
    pub fn decomposed(&self) -> f64 {
        self.estimator_term + self.error_term
    }

    pub fn bias_at(&self, xi: f64, hbar: f64) -> f64 {
        xi / hbar * self.bias_coefficient
    }
}

pub fn ms_error(
    estimator: &EstimatorField,
    a: &OperatorMatrix,
    psi: &StateVector,
    b: &OperatorMatrix,
    model: &XiModel,
) -> Result<EstimationReport> {
    let frame = reference_frame(a, b, psi, model, Reference::EigenbasisOfB)?;
    let fa = &frame.fa;
    if estimator.basis_id != fa.basis_id || estimator.state_id != fa.state_id {
        return Err(Error::ProvenanceMismatch(
            "estimator was built for a different state or reference basis".into(),
        ));
    }
    if estimator.dim() != fa.dim() {
        return Err(Error::DimensionMismatch {
            expected: fa.dim(),
            actual: estimator.dim(),
        });
    }
    let integrand: Vec<XiPoly> = (0..fa.dim())
        .map(|n| {
            if fa.valid_mask[n] {
                let e = fa.poly(n) - XiPoly::constant(estimator.estimates[n]);
                e * e
            } else {
                XiPoly::default()
            }
        })
        .collect();
    let direct = frame.ens.moments_of(&[integrand], Method::Exact)?.means[0];
    let valid = |n: &usize| fa.valid_mask[*n];
    let w = &fa.born_weights;
    let estimator_term = (0..fa.dim())
        .filter(valid)
        .map(|n| w[n] * (estimator.estimates[n] - fa.re_part[n]).powi(2))
        .sum();
    let error_term = (0..fa.dim()).filter(valid).map(|n| w[n] * fa.im_part[n].powi(2)).sum::<f64>()
        * model.moment(2)
        / (fa.hbar * fa.hbar);
    let bias_coefficient = (0..fa.dim()).filter(valid).map(|n| w[n] * fa.im_part[n]).sum();
    Ok(EstimationReport {
        ms_error: direct,
        estimator_term,
        error_term,
        bias_coefficient,
        optimal: direct - error_term <= tolerance::IDENTITY,
        masked_weight: frame.ens.masked_weight(&[fa]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    /// `lhs = E_A^2 E_{B_o}^2`, `rhs = (1/4)|<[A,B]>|^2`.
    pub bound: BoundReport,
    pub err_a: f64,
    /// MS error of estimating `B` by its mean `B_o = <B^w_R>`.
    pub err_b_o: f64,
    pub b_o: f64,
    /// `Delta_B^2` in the same basis; equals `err_b_o`.
    pub delta_b: f64,
}

/// Joint estimation of `A` (optimally, from `b_n`) and of `B` by the constant `B_o`.
pub fn self_estimation_tradeoff(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    psi: &StateVector,
    model: &XiModel,
) -> Result<TradeoffReport> {
    let frame = reference_frame(a, b, psi, model, Reference::EigenbasisOfB)?;
    let (fa, fb) = (&frame.fa, &frame.fb);
    let valid: Vec<usize> = (0..fb.dim()).filter(|&n| fa.valid_mask[n] && fb.valid_mask[n]).collect();
    let w = &fb.born_weights;
    let b_o: f64 = valid.iter().map(|&n| w[n] * fb.re_part[n]).sum();
    let err_b_o = valid.iter().map(|&n| w[n] * (fb.re_part[n] - b_o).powi(2)).sum();
    let scale = model.moment(2) / (fa.hbar * fa.hbar);
    let err_a = valid.iter().map(|&n| w[n] * fa.im_part[n].powi(2)).sum::<f64>() * scale;
    let mean_b: f64 = valid.iter().map(|&n| w[n] * fb.re_part[n]).sum();
    let delta_b = valid.iter().map(|&n| w[n] * (fb.re_part[n] - mean_b).powi(2)).sum();
    let mut bound = BoundReport::new(
        BoundKind::EstimationTradeoff,
        err_a * err_b_o,
        crate::oracle::kennard_robertson_rhs(a, b, psi)?,
    );
    bound.reference = Some(Reference::EigenbasisOfB);
    bound.masked_weight = frame.ens.masked_weight(&[fa, fb]);
    Ok(TradeoffReport {
        bound,
        err_a,
        err_b_o,
        b_o,
        delta_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub s: f64,
    pub ms_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalLimitScan {
    pub rows: Vec<ScanRow>,
    pub estimator: EstimatorField,
    /// Largest `|A~(n, xi) - T(b_n)|` over draws of xi at `s = 0`, when scanned.
    pub limit_deviation: Option<f64>,
}

impl ClassicalLimitScan {
    /// CSV with header `s,ms_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,ms_error\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{}", r.s, r.ms_error);
        }
        out
    }
}

/// MS error of the optimal estimator when the width of xi is scaled by `s`
/// while `hbar` in `xi/hbar` stays fixed.
pub fn classical_limit_scan(
    a: &OperatorMatrix,
    psi: &StateVector,
    b: &OperatorMatrix,
    model: &XiModel,
    scales: &[f64],
) -> Result<ClassicalLimitScan> {
    let estimator = optimal_estimator(a, psi, b, model)?;
    let mut rows = Vec::with_capacity(scales.len());
    let mut limit_deviation = None;
    for &s in scales {
        let scaled = model.rescaled(s)?;
        let report = ms_error(&estimator, a, psi, b, &scaled)?;
        rows.push(ScanRow {
            s,
            ms_error: report.ms_error,
        });
        if s == 0.0 {
            let frame = reference_frame(a, b, psi, &scaled, Reference::EigenbasisOfB)?;
            let mut sampler = scaled.sampler(0);
            let mut worst: f64 = 0.0;
            for n in (0..estimator.dim()).filter(|&n| estimator.valid_mask[n]) {
                for _ in 0..16 {
                    let v = frame.fa.evaluate(n, sampler.draw())?;
                    worst = worst.max((v - estimator.estimates[n]).abs());
                }
            }
            limit_deviation = Some(worst);
        }
    }
    Ok(ClassicalLimitScan {
        rows,
        estimator,
        limit_deviation,
    })
}
