//! Real-deterministic c-valued quantities `O~(phi_n, xi | psi) = O_R + (xi/hbar) O_I`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    born_probabilities, content_hash, density_matrix, MixedEnsemble, OperatorMatrix, OrthonormalBasis,
    StateVector, C64,
};
use crate::tolerance;
use crate::weakvalue::{weak_value_field, weak_value_mixed};
use crate::xi::{XiModel, XiPoly};

/// The c-valued field of one operator over one post-selection basis.
///
/// The field is the deterministic map `(n, xi) -> re_part[n] + (xi/hbar) im_part[n]`;
/// realizations of xi live in [`JointSample`]s, never here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CValField {
    pub re_part: Vec<f64>,
    pub im_part: Vec<f64>,
    pub hbar: f64,
    pub valid_mask: Vec<bool>,
    pub born_weights: Vec<f64>,
    pub hermitian: bool,
    pub operator_id: String,
    pub basis_id: String,
    pub state_id: String,
}

impl CValField {
    pub fn dim(&self) -> usize {
        self.re_part.len()
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n >= self.dim() {
            Err(Error::IndexOutOfRange { index: n, dim: self.dim() })
        } else if !self.valid_mask[n] {
            Err(Error::MaskedIndex(n))
        } else {
            Ok(())
        }
    }

    pub fn evaluate(&self, n: usize, xi: f64) -> Result<f64> {
        self.check_index(n)?;
        Ok(self.re_part[n] + xi / self.hbar * self.im_part[n])
    }

    /// The field at index `n` as a polynomial in xi. Masked entries give zero.
    pub fn poly(&self, n: usize) -> XiPoly {
        if self.valid_mask[n] {
            XiPoly::affine(self.re_part[n], self.im_part[n] / self.hbar)
        } else {
            XiPoly::default()
        }
    }

    /// Only the xi-independent part.
    pub fn estimate_poly(&self, n: usize) -> XiPoly {
        if self.valid_mask[n] {
            XiPoly::constant(self.re_part[n])
        } else {
            XiPoly::default()
        }
    }

    /// Only the xi-dependent error term.
    pub fn error_poly(&self, n: usize) -> XiPoly {
        if self.valid_mask[n] {
            XiPoly::affine(0.0, self.im_part[n] / self.hbar)
        } else {
            XiPoly::default()
        }
    }

    pub fn masked_weight(&self) -> f64 {
        self.born_weights
            .iter()
            .zip(&self.valid_mask)
            .filter(|(_, &ok)| !ok)
            .map(|(w, _)| w)
            .sum()
    }

    /// Same state and basis as `other`.
    pub fn check_same_context(&self, other: &CValField) -> Result<()> {
        if self.state_id != other.state_id || self.basis_id != other.basis_id {
            return Err(Error::ProvenanceMismatch(format!(
                "fields built on ({}, {}) and ({}, {})",
                self.state_id, self.basis_id, other.state_id, other.basis_id
            )));
        }
        if self.hbar != other.hbar {
            return Err(Error::ProvenanceMismatch("fields use different hbar".into()));
        }
        Ok(())
    }

    /// Pointwise sum, meaningful for fields sharing a context.
    pub fn sum(&self, other: &CValField) -> Result<CValField> {
        self.check_same_context(other)?;
        let valid: Vec<bool> = self.valid_mask.iter().zip(&other.valid_mask).map(|(a, b)| *a && *b).collect();
        Ok(CValField {
            re_part: self.re_part.iter().zip(&other.re_part).map(|(a, b)| a + b).collect(),
            im_part: self.im_part.iter().zip(&other.im_part).map(|(a, b)| a + b).collect(),
            hbar: self.hbar,
            valid_mask: valid,
            born_weights: self.born_weights.clone(),
            hermitian: self.hermitian && other.hermitian,
            operator_id: content_hash(&format!("{}+{}", self.operator_id, other.operator_id), []),
            basis_id: self.basis_id.clone(),
            state_id: self.state_id.clone(),
        })
    }

    /// CSV with header `n,re_part,im_part,born_weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,re_part,im_part,born_weight\n");
        for n in 0..self.dim() {
            let _ = writeln!(out, "{},{},{},{}", n, self.re_part[n], self.im_part[n], self.born_weights[n]);
        }
        out
    }
}

pub fn build_cval(
    op: &OperatorMatrix,
    psi: &StateVector,
    basis: &OrthonormalBasis,
    model: &XiModel,
) -> Result<CValField> {
    model.validate()?;
    let wv = weak_value_field(op, psi, basis)?;
    Ok(CValField {
        re_part: wv.values.iter().map(|v| v.re).collect(),
        im_part: wv.values.iter().map(|v| v.im).collect(),
        hbar: model.hbar,
        valid_mask: wv.valid_mask,
        born_weights: wv.born_weights,
        hermitian: wv.hermitian,
        operator_id: wv.operator_id,
        basis_id: wv.basis_id,
        state_id: wv.state_id,
    })
}

/// Recovers `O^w(phi_n|psi)` from the field values at `xi` and `-xi`.
pub fn recover_weak_value(field: &CValField, n: usize, xi: f64) -> Result<C64> {
    if xi == 0.0 || !xi.is_finite() {
        return Err(Error::ZeroXi);
    }
    let plus = field.evaluate(n, xi)?;
    let minus = field.evaluate(n, -xi)?;
    Ok(C64::new(0.5 * (plus + minus), field.hbar / (2.0 * xi) * (plus - minus)))
}

/// One realization `(phi_n, xi)` with its probability weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSample {
    pub n: usize,
    pub xi: f64,
    pub weight: f64,
}

/// Exhaustive weighted enumeration of `Pr(phi_n, xi | psi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEnumeration {
    pub samples: Vec<JointSample>,
    /// Born weight of masked basis elements, excluded from `samples`.
    pub masked_weight: f64,
}

impl JointEnumeration {
    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }
}

pub fn enumerate_joint(psi: &StateVector, basis: &OrthonormalBasis, model: &XiModel) -> Result<JointEnumeration> {
    let support = model.support().ok_or(Error::ContinuousSupport)?;
    let born = born_probabilities(basis, psi)?;
    let mut samples = Vec::new();
    let mut masked_weight = 0.0;
    for (n, &p) in born.iter().enumerate() {
        if p.sqrt() < tolerance::OVERLAP_CUTOFF {
            masked_weight += p;
            continue;
        }
        for &(xi, q) in &support {
            if q > 0.0 {
                samples.push(JointSample { n, xi, weight: p * q });
            }
        }
    }
    Ok(JointEnumeration { samples, masked_weight })
}

/// C-valued field of a mixed preparation together with its per-component fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedCVal {
    /// Posterior average `sum_mu O~(phi_n, xi|psi_mu) Pr(psi_mu|phi_n)`.
    pub field: CValField,
    pub components: Vec<CValField>,
    /// `posteriors[mu][n] = Pr(psi_mu | phi_n)`.
    pub posteriors: Vec<Vec<f64>>,
}

/// Averages the pure-state fields of an ensemble over `Pr(psi_mu | phi_n)`.
pub fn cval_mixed(
    op: &OperatorMatrix,
    ensemble: &MixedEnsemble,
    basis: &OrthonormalBasis,
    model: &XiModel,
) -> Result<MixedCVal> {
    let d = basis.dim();
    let rho = density_matrix(ensemble);
    let mut components = Vec::with_capacity(ensemble.states().len());
    let mut joint = Vec::with_capacity(ensemble.states().len());
    for (w, psi) in ensemble.components() {
        let born = born_probabilities(basis, psi)?;
        joint.push(born.iter().map(|p| w * p).collect::<Vec<f64>>());
        // Components with vanishing overlap are masked in their own field and
        // carry zero posterior weight.
        components.push(build_cval(op, psi, basis, model)?);
    }
    let post_selection: Vec<f64> = (0..d).map(|n| joint.iter().map(|j| j[n]).sum()).collect();
    let mut re_part = vec![0.0; d];
    let mut im_part = vec![0.0; d];
    let mut valid_mask = vec![true; d];
    let mut posteriors = vec![vec![0.0; d]; components.len()];
    for n in 0..d {
        if post_selection[n] < tolerance::OVERLAP_CUTOFF * tolerance::OVERLAP_CUTOFF {
            valid_mask[n] = false;
            re_part[n] = f64::NAN;
            im_part[n] = f64::NAN;
            continue;
        }
        for (mu, comp) in components.iter().enumerate() {
            let posterior = joint[mu][n] / post_selection[n];
            posteriors[mu][n] = posterior;
            if comp.valid_mask[n] {
                re_part[n] += posterior * comp.re_part[n];
                im_part[n] += posterior * comp.im_part[n];
            }
        }
    }
    let field = CValField {
        re_part,
        im_part,
        hbar: model.hbar,
        valid_mask,
        born_weights: post_selection,
        hermitian: op.hermitian_hint(),
        operator_id: op.content_id(),
        basis_id: basis.content_id(),
        state_id: rho.content_id(),
    };
    Ok(MixedCVal {
        field,
        components,
        posteriors,
    })
}

/// The same mixed-state field built directly from `Tr{P O rho} / Tr{P rho}`.
pub fn cval_from_density(
    op: &OperatorMatrix,
    rho: &OperatorMatrix,
    basis: &OrthonormalBasis,
    model: &XiModel,
) -> Result<CValField> {
    let d = basis.dim();
    let mut re_part = Vec::with_capacity(d);
    let mut im_part = Vec::with_capacity(d);
    let mut valid_mask = Vec::with_capacity(d);
    let mut born_weights = Vec::with_capacity(d);
    for phi in basis.vectors() {
        born_weights.push(rho.matrix_element(phi, phi)?.re);
        match weak_value_mixed(op, rho, phi) {
            Ok(w) => {
                re_part.push(w.re);
                im_part.push(w.im);
                valid_mask.push(true);
            }
            Err(Error::VanishingPostSelection { .. }) => {
                re_part.push(f64::NAN);
                im_part.push(f64::NAN);
                valid_mask.push(false);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(CValField {
        re_part,
        im_part,
        hbar: model.hbar,
        valid_mask,
        born_weights,
        hermitian: op.hermitian_hint(),
        operator_id: op.content_id(),
        basis_id: basis.content_id(),
        state_id: rho.content_id(),
    })
}
