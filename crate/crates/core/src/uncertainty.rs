//! Variance decomposition, Schrodinger / Kennard-Robertson / KRS bounds from
//! c-valued quantities, joint distributions of two c-values and the
//! epistemic-restriction identity.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cval::{build_cval, CValField};
use crate::error::{Error, Result};
use crate::hilbert::{eigenbasis, OperatorMatrix, OrthonormalBasis, StateVector, C64};
use crate::oracle;
use crate::statistics::{variance, JointEnsemble, Method};
use crate::weakvalue::weak_value_field;
use crate::xi::XiModel;

/// Default finite-difference step of the unitary-flow parameter, in units of hbar.
pub const DEFAULT_THETA_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    /// `sigma^2`, the variance of the c-valued quantity.
    pub total: f64,
    /// `Delta^2`, the Born variance of the real part of the weak value.
    pub delta_sq: f64,
    /// `E^2`, the mean square of the error term.
    pub err_sq: f64,
    pub basis_id: String,
    pub masked_weight: f64,
}

impl VarianceDecomposition {
    pub fn residual(&self) -> f64 {
        (self.total - self.delta_sq - self.err_sq).abs()
    }
}

fn require_hermitian(op: &OperatorMatrix) -> Result<()> {
    if op.hermitian_hint() {
        Ok(())
    } else {
        Err(Error::NotHermitian {
            deviation: op.hermiticity_deviation(),
        })
    }
}

/// `(Delta^2, E^2)` of a field over its own Born weights.
fn split(field: &CValField, model: &XiModel) -> (f64, f64) {
    let valid = |n: &usize| field.valid_mask[*n];
    let w = &field.born_weights;
    let mean: f64 = (0..field.dim()).filter(valid).map(|n| w[n] * field.re_part[n]).sum();
    let delta_sq = (0..field.dim())
        .filter(valid)
        .map(|n| w[n] * (field.re_part[n] - mean).powi(2))
        .sum();
    let scale = model.moment(2) / (field.hbar * field.hbar);
    let err_sq = (0..field.dim())
        .filter(valid)
        .map(|n| w[n] * field.im_part[n].powi(2))
        .sum::<f64>()
        * scale;
    (delta_sq, err_sq)
}

pub fn decompose_variance(
    op: &OperatorMatrix,
    psi: &StateVector,
    basis: &OrthonormalBasis,
    model: &XiModel,
) -> Result<VarianceDecomposition> {
    require_hermitian(op)?;
    let ens = JointEnsemble::new(psi, basis, model)?;
    let field = build_cval(op, psi, basis, model)?;
    let total = variance(&ens, &field, Method::Exact)?;
    let (delta_sq, err_sq) = split(&field, model);
    Ok(VarianceDecomposition {
        total: total.value,
        delta_sq,
        err_sq,
        basis_id: basis.content_id(),
        masked_weight: total.masked_weight,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Schrodinger,
    KennardRobertson,
    KrsFull,
    PositionMomentum,
    EstimationTradeoff,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Schrodinger => "schrodinger",
            BoundKind::KennardRobertson => "kennard_robertson",
            BoundKind::KrsFull => "krs_full",
            BoundKind::PositionMomentum => "position_momentum",
            BoundKind::EstimationTradeoff => "estimation_tradeoff",
        }
    }
}

/// Which operator's eigenbasis serves as the reference coordinate basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    EigenbasisOfA,
    EigenbasisOfB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub slack: f64,
    pub reference: Option<Reference>,
    /// For the full KRS check: `|sigma_A^2 sigma_B^2 - (E_A^2 Delta_B^2 + Delta_A^2 Delta_B^2)|`.
    pub decomposition_residual: Option<f64>,
    pub masked_weight: f64,
}

impl BoundReport {
    pub fn new(kind: BoundKind, lhs: f64, rhs: f64) -> Self {
        Self {
            kind,
            lhs,
            rhs,
            slack: lhs - rhs,
            reference: None,
            decomposition_residual: None,
            masked_weight: 0.0,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol
    }
}

/// CSV with header `kind,lhs,rhs,slack,seed`.
pub fn bound_reports_csv(rows: &[(BoundReport, u64)]) -> String {
    let mut out = String::from("kind,lhs,rhs,slack,seed\n");
    for (r, seed) in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.kind.name(), r.lhs, r.rhs, r.slack, seed);
    }
    out
}

/// Fields of `A` and `B` over the eigenbasis of the reference operator.
pub(crate) struct ReferenceFrame {
    pub fa: CValField,
    pub fb: CValField,
    pub ens: JointEnsemble,
}

pub(crate) fn reference_frame(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    psi: &StateVector,
    model: &XiModel,
    reference: Reference,
) -> Result<ReferenceFrame> {
    require_hermitian(a)?;
    require_hermitian(b)?;
    let (basis, _) = match reference {
        Reference::EigenbasisOfA => eigenbasis(a)?,
        Reference::EigenbasisOfB => eigenbasis(b)?,
    };
    Ok(ReferenceFrame {
        fa: build_cval(a, psi, &basis, model)?,
        fb: build_cval(b, psi, &basis, model)?,
        ens: JointEnsemble::new(psi, &basis, model)?,
    })
}

impl ReferenceFrame {
    fn masked_weight(&self) -> f64 {
        self.ens.masked_weight(&[&self.fa, &self.fb])
    }
}

/// `Delta_A^2 Delta_B^2 >= |(1/2)<{A,B}> - <A><B>|^2` in the reference basis.
pub fn schrodinger_bound(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    psi: &StateVector,
    model: &XiModel,
    reference: Reference,
) -> Result<BoundReport> {
    let frame = reference_frame(a, b, psi, model, reference)?;
    let (delta_a, _) = split(&frame.fa, model);
    let (delta_b, _) = split(&frame.fb, model);
    let mut r = BoundReport::new(BoundKind::Schrodinger, delta_a * delta_b, oracle::schrodinger_rhs(a, b, psi)?);
    r.reference = Some(reference);
    r.masked_weight = frame.masked_weight();
    Ok(r)
}

/// `E_A^2 Delta_B^2 >= (1/4)|<[A,B]>|^2` in the eigenbasis of `B`, or
/// `Delta_A^2 E_B^2` with the roles interchanged in the eigenbasis of `A`.
pub fn kennard_robertson_bound(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    psi: &StateVector,
    model: &XiModel,
    reference: Reference,
) -> Result<BoundReport> {
    let frame = reference_frame(a, b, psi, model, reference)?;
    let (delta_a, err_a) = split(&frame.fa, model);
    let (delta_b, err_b) = split(&frame.fb, model);
    let lhs = match reference {
        Reference::EigenbasisOfB => err_a * delta_b,
        Reference::EigenbasisOfA => delta_a * err_b,
    };
    let mut r = BoundReport::new(BoundKind::KennardRobertson, lhs, oracle::kennard_robertson_rhs(a, b, psi)?);
    r.reference = Some(reference);
    r.masked_weight = frame.masked_weight();
    Ok(r)
}

/// `sigma_A^2 sigma_B^2 >= (1/4)|<[A,B]>|^2 + |(1/2)<{A,B}> - <A><B>|^2` with
/// c-valued variances, plus the intermediate split in the eigenbasis of `B`.
pub fn krs_check(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector, model: &XiModel) -> Result<BoundReport> {
    let frame = reference_frame(a, b, psi, model, Reference::EigenbasisOfB)?;
    let var_a = variance(&frame.ens, &frame.fa, Method::Exact)?.value;
    let var_b = variance(&frame.ens, &frame.fb, Method::Exact)?.value;
    let (delta_a, err_a) = split(&frame.fa, model);
    let (delta_b, _) = split(&frame.fb, model);
    let lhs = var_a * var_b;
    let rhs = oracle::kennard_robertson_rhs(a, b, psi)? + oracle::schrodinger_rhs(a, b, psi)?;
    let mut r = BoundReport::new(BoundKind::KrsFull, lhs, rhs);
    r.reference = Some(Reference::EigenbasisOfB);
    r.decomposition_residual = Some((lhs - (err_a * delta_b + delta_a * delta_b)).abs());
    r.masked_weight = frame.masked_weight();
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub a: f64,
    pub b: f64,
    pub weight: f64,
}

/// Rectangular binning of a joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    pub bins: (usize, usize),
}

/// Point masses `Pr(n) chi(xi)` at `(A~(n, xi), B~(n, xi))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointHistogram {
    pub points: Vec<JointPoint>,
    pub masked_weight: f64,
}

impl JointHistogram {
    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    pub fn marginal_means(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((0.0, 0.0), |(ma, mb), p| (ma + p.weight * p.a, mb + p.weight * p.b))
    }

    pub fn mixed_moment(&self) -> f64 {
        self.points.iter().map(|p| p.weight * p.a * p.b).sum()
    }

    /// Counts per bin, `[a_bin][b_bin]`; points outside the ranges are dropped.
    pub fn binned(&self, spec: &BinSpec) -> Vec<Vec<f64>> {
        let (na, nb) = spec.bins;
        let mut grid = vec![vec![0.0; nb]; na];
        let locate = |x: f64, (lo, hi): (f64, f64), n: usize| -> Option<usize> {
            if x < lo || x > hi || n == 0 {
                return None;
            }
            Some((((x - lo) / (hi - lo)) * n as f64).floor().min(n as f64 - 1.0) as usize)
        };
        for p in &self.points {
            if let (Some(i), Some(j)) = (locate(p.a, spec.a_range, na), locate(p.b, spec.b_range, nb)) {
                grid[i][j] += p.weight;
            }
        }
        grid
    }

    /// CSV with header `a,b,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,b,weight\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.a, p.b, p.weight);
        }
        out
    }
}

/// Exact joint distribution of two c-values for a finite-support xi model.
/// Coincident support points are merged.
pub fn joint_distribution(ens: &JointEnsemble, fa: &CValField, fb: &CValField) -> Result<JointHistogram> {
    ens.check(fa)?;
    ens.check(fb)?;
    fa.check_same_context(fb)?;
    let support = ens.model().support().ok_or(Error::ContinuousSupport)?;
    let mut points: Vec<JointPoint> = Vec::new();
    for n in (0..fa.dim()).filter(|&n| fa.valid_mask[n] && fb.valid_mask[n]) {
        for &(xi, q) in &support {
            let p = JointPoint {
                a: fa.evaluate(n, xi)?,
                b: fb.evaluate(n, xi)?,
                weight: ens.born()[n] * q,
            };
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
            match points.iter_mut().find(|o| close(o.a, p.a) && close(o.b, p.b)) {
                Some(o) => o.weight += p.weight,
                None => points.push(p),
            }
        }
    }
    Ok(JointHistogram {
        points,
        masked_weight: ens.masked_weight(&[fa, fb]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpistemicEntry {
    pub n: usize,
    /// `A^w_I(b_n|psi)`.
    pub weak_imag: f64,
    /// `(hbar/2) P_n'(0) / P_n(0)` from one central difference.
    pub raw_estimate: f64,
    /// The same after one Richardson step (steps `h` and `h/2`).
    pub refined_estimate: f64,
    pub raw_residual: f64,
    pub refined_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpistemicReport {
    pub theta_step: f64,
    pub entries: Vec<EpistemicEntry>,
    pub masked: Vec<usize>,
    pub masked_weight: f64,
}

impl EpistemicReport {
    pub fn max_raw_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.raw_residual).fold(0.0, f64::max)
    }

    pub fn max_refined_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.refined_residual).fold(0.0, f64::max)
    }
}

/// Compares `A^w_I(b_n|psi)` with `(hbar/2) d/dtheta ln |<b_n|exp(-i A theta/hbar)|psi>|^2`
/// at `theta = 0`, over the eigenbasis of `B`.
pub fn epistemic_restriction_check(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    psi: &StateVector,
    theta_step: f64,
    hbar: f64,
) -> Result<EpistemicReport> {
    require_hermitian(a)?;
    require_hermitian(b)?;
    if !(theta_step.is_finite() && theta_step > 0.0) {
        return Err(Error::InvalidScale(theta_step));
    }
    let (basis, _) = eigenbasis(b)?;
    let field = weak_value_field(a, psi, &basis)?;
    let (a_basis, a_values) = eigenbasis(a)?;
    let coeffs: Vec<C64> = a_basis.vectors().iter().map(|v| v.inner(psi)).collect();
    let d = psi.dim();
    // overlaps[n][k] = <b_n|a_k>
    let overlaps: Vec<Vec<C64>> = basis
        .vectors()
        .iter()
        .map(|bn| a_basis.vectors().iter().map(|ak| bn.inner(ak)).collect())
        .collect();
    let prob = |n: usize, theta: f64| -> f64 {
        (0..d)
            .map(|k| overlaps[n][k] * C64::from_polar(1.0, -a_values[k] * theta / hbar) * coeffs[k])
            .sum::<C64>()
            .norm_sqr()
    };
    let mut entries = Vec::new();
    let mut masked = Vec::new();
    let mut masked_weight = 0.0;
    for n in 0..d {
        if !field.valid_mask[n] {
            masked.push(n);
            masked_weight += field.born_weights[n];
            continue;
        }
        let p0 = prob(n, 0.0);
        let central = |h: f64| (prob(n, h) - prob(n, -h)) / (2.0 * h);
        let d1 = central(theta_step);
        let d2 = central(0.5 * theta_step);
        let refined = (4.0 * d2 - d1) / 3.0;
        let weak_imag = field.values[n].im;
        let raw_estimate = 0.5 * hbar * d1 / p0;
        let refined_estimate = 0.5 * hbar * refined / p0;
        entries.push(EpistemicEntry {
            n,
            weak_imag,
            raw_estimate,
            refined_estimate,
            raw_residual: (weak_imag - raw_estimate).abs(),
            refined_residual: (weak_imag - refined_estimate).abs(),
        });
    }
    Ok(EpistemicReport {
        theta_step,
        entries,
        masked,
        masked_weight,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub label: String,
    pub err_a: f64,
    pub err_b: f64,
    pub masked_weight: f64,
}

/// Error terms of `A` and `B` over candidate reference bases, against the
/// Kennard-Robertson right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub kr_rhs: f64,
    pub entries: Vec<WitnessEntry>,
}

impl WitnessReport {
    /// Whether some candidate basis makes both error terms vanish.
    pub fn common_basis_found(&self, tol: f64) -> bool {
        self.entries.iter().any(|e| e.err_a <= tol && e.err_b <= tol)
    }

    /// A basis with both error terms vanishing forces the commutator term to vanish.
    pub fn consistent(&self, tol: f64) -> bool {
        !self.common_basis_found(tol) || self.kr_rhs <= tol
    }
}

/// Candidate bases: eigenbases of `A`, of `B`, and of `A + mix B` (a shared
/// eigenbasis when the pair commutes and `A + mix B` is non-degenerate).
pub fn common_basis_witness(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    psi: &StateVector,
    model: &XiModel,
    mix: f64,
) -> Result<WitnessReport> {
    require_hermitian(a)?;
    require_hermitian(b)?;
    let combo = OperatorMatrix::hermitian(a.add(&b.scale(C64::new(mix, 0.0)))?.entries().clone())?;
    let mut entries = Vec::new();
    for (label, op) in [("eigenbasis_a", a), ("eigenbasis_b", b), ("eigenbasis_a_plus_mix_b", &combo)] {
        let (basis, _) = eigenbasis(op)?;
        let fa = build_cval(a, psi, &basis, model)?;
        let fb = build_cval(b, psi, &basis, model)?;
        let masked_weight = (0..basis.dim())
            .filter(|&n| !fa.valid_mask[n] || !fb.valid_mask[n])
            .map(|n| fa.born_weights[n])
            .sum();
        entries.push(WitnessEntry {
            label: label.to_string(),
            err_a: split(&fa, model).1,
            err_b: split(&fb, model).1,
            masked_weight,
        });
    }
    Ok(WitnessReport {
        kr_rhs: oracle::kennard_robertson_rhs(a, b, psi)?,
        entries,
    })
}
