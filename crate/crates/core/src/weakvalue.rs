//! Complex weak values with post-selection over a basis.
//!
//! Every weak value is computed twice: as the quotient `<phi|O|psi>/<phi|psi>`
//! and through the anticommutator/commutator brackets with the projector
//! `|phi><phi|`. The two routes must agree; disagreement is an error.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{anticommutator, commutator, expectation, OperatorMatrix, OrthonormalBasis, StateVector, C64};
use crate::tolerance;

/// Rounding budget of the bracket route, in units of machine epsilon times
/// `dim * |O|_F / |<phi|psi>|^2`.
const ROUTE_ROUNDING_ULPS: f64 = 64.0;

pub fn weak_value(op: &OperatorMatrix, psi: &StateVector, phi: &StateVector) -> Result<C64> {
    let overlap = phi.inner(psi);
    check_overlap(overlap)?;
    Ok(op.matrix_element(phi, psi)? / overlap)
}

fn check_overlap(overlap: C64) -> Result<()> {
    if overlap.norm() < tolerance::OVERLAP_CUTOFF {
        Err(Error::VanishingOverlap {
            overlap: overlap.norm(),
        })
    } else {
        Ok(())
    }
}

/// Real and imaginary parts through the bracket forms
/// `<psi|{P,O}|psi> / (2|<phi|psi>|^2)` and `<psi|[P,O]|psi> / (2i|<phi|psi>|^2)`.
pub fn weak_value_parts(op: &OperatorMatrix, psi: &StateVector, phi: &StateVector) -> Result<(f64, f64)> {
    let overlap = phi.inner(psi);
    check_overlap(overlap)?;
    let projector = OperatorMatrix::projector(phi);
    let denom = 2.0 * overlap.norm_sqr();
    let anti = expectation(&anticommutator(&projector, op)?, psi)?;
    let comm = expectation(&commutator(&projector, op)?, psi)?;
    let re = anti.re / denom;
    let im = (comm / C64::new(0.0, denom)).re;
    Ok((re, im))
}

fn route_tolerance(op: &OperatorMatrix, value: C64, overlap: f64) -> f64 {
    let rounding =
        ROUTE_ROUNDING_ULPS * f64::EPSILON * op.dim() as f64 * op.frobenius_norm() / (overlap * overlap);
    tolerance::IDENTITY * value.norm().max(1.0) + rounding
}

/// Weak values over a full post-selection basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakValueField {
    /// Quotient-route values; NaN where masked.
    pub values: Vec<C64>,
    /// Bracket-route `(re, im)`; NaN where masked.
    pub bracket_parts: Vec<(f64, f64)>,
    pub born_weights: Vec<f64>,
    pub valid_mask: Vec<bool>,
    pub hermitian: bool,
    pub operator_id: String,
    pub basis_id: String,
    pub state_id: String,
}

impl WeakValueField {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn masked_weight(&self) -> f64 {
        self.born_weights
            .iter()
            .zip(&self.valid_mask)
            .filter(|(_, &ok)| !ok)
            .map(|(w, _)| w)
            .sum()
    }

    /// Largest absolute difference between the quotient and bracket routes.
    pub fn max_route_discrepancy(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.bracket_parts)
            .zip(&self.valid_mask)
            .filter(|(_, &ok)| ok)
            .map(|((v, (re, im)), _)| (v.re - re).abs().max((v.im - im).abs()))
            .fold(0.0, f64::max)
    }

    /// `sum_n O^w(phi_n|psi) |<phi_n|psi>|^2` over unmasked entries.
    pub fn born_weighted_mean(&self) -> C64 {
        self.values
            .iter()
            .zip(&self.born_weights)
            .zip(&self.valid_mask)
            .filter(|(_, &ok)| ok)
            .map(|((v, w), _)| v * *w)
            .sum()
    }

    /// CSV with header `n,re,im,born_weight,masked`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,re,im,born_weight,masked\n");
        for n in 0..self.dim() {
            let v = self.values[n];
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                n, v.re, v.im, self.born_weights[n], !self.valid_mask[n]
            );
        }
        out
    }
}

pub fn weak_value_field(op: &OperatorMatrix, psi: &StateVector, basis: &OrthonormalBasis) -> Result<WeakValueField> {
    if op.dim() != psi.dim() || basis.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.dim(),
            actual: if op.dim() != psi.dim() { op.dim() } else { basis.dim() },
        });
    }
    let d = psi.dim();
    let mut values = Vec::with_capacity(d);
    let mut bracket_parts = Vec::with_capacity(d);
    let mut born_weights = Vec::with_capacity(d);
    let mut valid_mask = Vec::with_capacity(d);
    let o_psi = op.apply(psi)?;
    for (n, phi) in basis.vectors().iter().enumerate() {
        let overlap = phi.inner(psi);
        born_weights.push(overlap.norm_sqr());
        if overlap.norm() < tolerance::OVERLAP_CUTOFF {
            values.push(C64::new(f64::NAN, f64::NAN));
            bracket_parts.push((f64::NAN, f64::NAN));
            valid_mask.push(false);
            continue;
        }
        let quotient = phi.amplitudes().dotc(&o_psi) / overlap;
        let (re, im) = weak_value_parts(op, psi, phi)?;
        let tol = route_tolerance(op, quotient, overlap.norm());
        if (quotient.re - re).abs() > tol || (quotient.im - im).abs() > tol {
            return Err(Error::RouteDisagreement {
                index: n,
                quotient: quotient.to_string(),
                brackets: C64::new(re, im).to_string(),
            });
        }
        values.push(quotient);
        bracket_parts.push((re, im));
        valid_mask.push(true);
    }
    Ok(WeakValueField {
        values,
        bracket_parts,
        born_weights,
        valid_mask,
        hermitian: op.hermitian_hint(),
        operator_id: op.content_id(),
        basis_id: basis.content_id(),
        state_id: psi.content_id(),
    })
}

/// `Tr{P_phi O rho} / Tr{P_phi rho}` for a density matrix `rho`.
pub fn weak_value_mixed(op: &OperatorMatrix, rho: &OperatorMatrix, phi: &StateVector) -> Result<C64> {
    if op.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: op.dim(),
        });
    }
    let probability = rho.matrix_element(phi, phi)?.re;
    if probability < tolerance::OVERLAP_CUTOFF * tolerance::OVERLAP_CUTOFF {
        return Err(Error::VanishingPostSelection { probability });
    }
    let o_rho = op.mul(rho)?;
    Ok(o_rho.matrix_element(phi, phi)? / probability)
}
