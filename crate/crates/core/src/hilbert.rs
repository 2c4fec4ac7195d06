//! Finite-dimensional Hilbert-space primitives.
//!
//! Inner products are conjugate-linear in the first slot, `<a|b> = sum conj(a_i) b_i`.
//! Commutator and anticommutator brackets follow the dagger convention
//! `[A,B] = AB - B^dagger A^dagger` and `{A,B} = AB + B^dagger A^dagger`, which
//! reduce to the textbook brackets for Hermitian arguments.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tolerance;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Short stable content hash of a sequence of reals.
pub fn content_hash<I: IntoIterator<Item = f64>>(tag: &str, values: I) -> String {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    for v in values {
        hasher.update(v.to_bits().to_le_bytes());
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct StateVector {
    amps: DVector<C64>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    dim: usize,
    amplitudes: Vec<C64>,
}

impl TryFrom<StateRepr> for StateVector {
    type Error = Error;

    fn try_from(repr: StateRepr) -> Result<Self> {
        if repr.amplitudes.len() != repr.dim {
            return Err(Error::DimensionMismatch {
                expected: repr.dim,
                actual: repr.amplitudes.len(),
            });
        }
        StateVector::new(repr.amplitudes)
    }
}

impl From<StateVector> for StateRepr {
    fn from(s: StateVector) -> Self {
        StateRepr {
            dim: s.dim(),
            amplitudes: s.amps.iter().copied().collect(),
        }
    }
}

impl StateVector {
    /// Wraps amplitudes that are already normalized within `tolerance::NORM`.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        Self::from_dvector(v)
    }

    pub fn from_dvector(v: DVector<C64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::DimensionTooSmall(v.len()));
        }
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > tolerance::NORM {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps: v })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm });
        }
        Self::from_dvector(v.unscale(norm))
    }

    pub fn from_reals(amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|k>`.
    pub fn basis_vector(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::IndexOutOfRange { index: k, dim });
        }
        let mut v = DVector::from_element(dim, ZERO);
        v[k] = ONE;
        Self::from_dvector(v)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn with_global_phase(&self, theta: f64) -> StateVector {
        Self {
            amps: &self.amps * C64::from_polar(1.0, theta),
        }
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        Self {
            amps: self.amps.kronecker(&other.amps),
        }
    }

    pub fn content_id(&self) -> String {
        content_hash("state", self.amps.iter().flat_map(|c| [c.re, c.im]))
    }
}

/// Square complex matrix with an optional Hermiticity guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct OperatorMatrix {
    entries: DMatrix<C64>,
    hermitian: bool,
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    dim: usize,
    hermitian: bool,
    /// Row-major.
    entries: Vec<Vec<C64>>,
}

impl TryFrom<OperatorRepr> for OperatorMatrix {
    type Error = Error;

    fn try_from(repr: OperatorRepr) -> Result<Self> {
        if repr.entries.len() != repr.dim {
            return Err(Error::DimensionMismatch {
                expected: repr.dim,
                actual: repr.entries.len(),
            });
        }
        for row in &repr.entries {
            if row.len() != repr.dim {
                return Err(Error::DimensionMismatch {
                    expected: repr.dim,
                    actual: row.len(),
                });
            }
        }
        let m = DMatrix::from_fn(repr.dim, repr.dim, |i, j| repr.entries[i][j]);
        if repr.hermitian {
            OperatorMatrix::hermitian(m)
        } else {
            OperatorMatrix::general(m)
        }
    }
}

impl From<OperatorMatrix> for OperatorRepr {
    fn from(op: OperatorMatrix) -> Self {
        let d = op.dim();
        OperatorRepr {
            dim: d,
            hermitian: op.hermitian,
            entries: (0..d)
                .map(|i| (0..d).map(|j| op.entries[(i, j)]).collect())
                .collect(),
        }
    }
}

impl OperatorMatrix {
    /// General (not necessarily Hermitian) operator.
    pub fn general(entries: DMatrix<C64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        if entries.nrows() < 2 {
            return Err(Error::DimensionTooSmall(entries.nrows()));
        }
        Ok(Self {
            entries,
            hermitian: false,
        })
    }

    /// Operator flagged Hermitian; fails when `max|A - A^dagger| > tolerance::HERM`.
    pub fn hermitian(entries: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::general(entries)?;
        let deviation = op.hermiticity_deviation();
        if deviation > tolerance::HERM {
            return Err(Error::NotHermitian { deviation });
        }
        op.hermitian = true;
        Ok(op)
    }

    /// Flags the operator Hermitian when it passes the numerical check.
    pub fn auto(entries: DMatrix<C64>) -> Result<Self> {
        let op = Self::general(entries)?;
        if op.hermiticity_deviation() <= tolerance::HERM {
            Ok(Self {
                hermitian: true,
                ..op
            })
        } else {
            Ok(op)
        }
    }

    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        Self::auto(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.len();
        let flat: Vec<C64> = rows
            .iter()
            .flat_map(|r| r.iter().map(|&x| C64::new(x, 0.0)))
            .collect();
        Self::from_row_slice(d, &flat)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
            hermitian: true,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
            hermitian: true,
        }
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("static Pauli matrix")
    }

    pub fn pauli_y() -> Self {
        Self::from_row_slice(2, &[ZERO, -I, I, ZERO]).expect("static Pauli matrix")
    }

    pub fn pauli_z() -> Self {
        Self::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).expect("static Pauli matrix")
    }

    /// `|ket><bra|`.
    pub fn outer(ket: &StateVector, bra: &StateVector) -> Self {
        let entries = ket.amplitudes() * bra.amplitudes().adjoint();
        Self::auto(entries).expect("outer product of equal-dimension states")
    }

    /// Projector `|phi><phi|`.
    pub fn projector(phi: &StateVector) -> Self {
        let mut op = Self::outer(phi, phi);
        op.hermitian = true;
        op
    }

    /// Diagonal operator with real entries.
    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        Self {
            entries: DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    C64::new(values[i], 0.0)
                } else {
                    ZERO
                }
            }),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.adjoint()))
    }

    pub fn dagger(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
            hermitian: self.hermitian,
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::auto(&self.entries * c).expect("scaling keeps shape")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Self::auto(&self.entries + &other.entries)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Self::auto(&self.entries - &other.entries)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Self::auto(&self.entries * &other.entries)
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            entries: self.entries.kronecker(&other.entries),
            hermitian: self.hermitian && other.hermitian,
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<DVector<C64>> {
        check_dims(self.dim(), psi.dim())?;
        Ok(&self.entries * psi.amplitudes())
    }

    /// `<bra|A|ket>`.
    pub fn matrix_element(&self, bra: &StateVector, ket: &StateVector) -> Result<C64> {
        check_dims(self.dim(), bra.dim())?;
        Ok(bra.amplitudes().dotc(&self.apply(ket)?))
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn content_id(&self) -> String {
        let d = self.dim();
        content_hash(
            "operator",
            (0..d).flat_map(|i| {
                (0..d).flat_map(move |j| {
                    let c = self.entries[(i, j)];
                    [c.re, c.im]
                })
            }),
        )
    }
}

/// Largest entrywise modulus.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// Complete orthonormal set of states, the post-selection context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisRepr", into = "BasisRepr")]
pub struct OrthonormalBasis {
    vectors: Vec<StateVector>,
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    dim: usize,
    vectors: Vec<StateVector>,
}

impl TryFrom<BasisRepr> for OrthonormalBasis {
    type Error = Error;

    fn try_from(repr: BasisRepr) -> Result<Self> {
        check_dims(repr.dim, repr.vectors.len())?;
        OrthonormalBasis::new(repr.vectors)
    }
}

impl From<OrthonormalBasis> for BasisRepr {
    fn from(b: OrthonormalBasis) -> Self {
        BasisRepr {
            dim: b.dim(),
            vectors: b.vectors,
        }
    }
}

impl OrthonormalBasis {
    pub fn new(vectors: Vec<StateVector>) -> Result<Self> {
        let d = vectors.first().map(|v| v.dim()).unwrap_or(0);
        check_dims(d, vectors.len())?;
        for v in &vectors {
            check_dims(d, v.dim())?;
        }
        let basis = Self { vectors };
        let deviation = basis.orthonormality_deviation();
        if deviation > tolerance::ORTHO {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(basis)
    }

    /// Columns of a unitary matrix.
    pub fn from_columns(m: &DMatrix<C64>) -> Result<Self> {
        let vectors = m
            .column_iter()
            .map(|c| StateVector::from_dvector(c.into_owned()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vectors)
    }

    pub fn computational(dim: usize) -> Self {
        Self {
            vectors: (0..dim)
                .map(|k| StateVector::basis_vector(dim, k).expect("k < dim"))
                .collect(),
        }
    }

    /// Qubit basis `{cos t|0> + e^{i phi} sin t|1>, -e^{-i phi} sin t|0> + cos t|1>}`.
    pub fn qubit(t: f64, phi: f64) -> Self {
        let e = C64::from_polar(1.0, phi);
        let (c, s) = (C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0));
        Self {
            vectors: vec![
                StateVector::new(vec![c, e * s]).expect("unit vector"),
                StateVector::new(vec![-e.conj() * s, c]).expect("unit vector"),
            ],
        }
    }

    /// Product basis `{|a_i> (x) |b_j>}` in row-major order of `(i, j)`.
    pub fn product(a: &OrthonormalBasis, b: &OrthonormalBasis) -> Self {
        Self {
            vectors: a
                .vectors
                .iter()
                .flat_map(|va| b.vectors.iter().map(move |vb| va.tensor(vb)))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn vector(&self, n: usize) -> &StateVector {
        &self.vectors[n]
    }

    /// Matrix whose columns are the basis vectors.
    pub fn as_matrix(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.vectors[j].amplitudes()[i])
    }

    /// Larger of the Gram-matrix and completeness-relation deviations.
    pub fn orthonormality_deviation(&self) -> f64 {
        let u = self.as_matrix();
        let id = DMatrix::<C64>::identity(self.dim(), self.dim());
        let gram = max_abs(&(u.adjoint() * &u - &id));
        let completeness = max_abs(&(&u * u.adjoint() - &id));
        gram.max(completeness)
    }

    pub fn content_id(&self) -> String {
        content_hash(
            "basis",
            self.vectors
                .iter()
                .flat_map(|v| v.amplitudes().iter().flat_map(|c| [c.re, c.im])),
        )
    }
}

/// Reduced Planck constant in action units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanckConfig {
    hbar: f64,
}

impl PlanckConfig {
    pub fn new(hbar: f64) -> Result<Self> {
        if hbar.is_finite() && hbar > 0.0 {
            Ok(Self { hbar })
        } else {
            Err(Error::InvalidXiModel(format!("hbar must be positive, got {hbar}")))
        }
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }
}

impl Default for PlanckConfig {
    fn default() -> Self {
        Self { hbar: 1.0 }
    }
}

/// Probabilistic mixture of pure states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedEnsemble {
    weights: Vec<f64>,
    states: Vec<StateVector>,
}

impl MixedEnsemble {
    pub fn new(weights: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::InvalidEnsemble(format!(
                "{} weights for {} states",
                weights.len(),
                states.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidEnsemble("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > tolerance::NORM {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}")));
        }
        let d = states[0].dim();
        for s in &states {
            check_dims(d, s.dim())?;
        }
        Ok(Self { weights, states })
    }

    pub fn pure(state: StateVector) -> Self {
        Self {
            weights: vec![1.0],
            states: vec![state],
        }
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, &StateVector)> {
        self.weights.iter().copied().zip(self.states.iter())
    }
}

/// Born-rule probabilities `|<phi_n|psi>|^2`.
pub fn born_probabilities(basis: &OrthonormalBasis, psi: &StateVector) -> Result<Vec<f64>> {
    check_dims(basis.dim(), psi.dim())?;
    Ok(basis
        .vectors()
        .iter()
        .map(|phi| phi.inner(psi).norm_sqr())
        .collect())
}

/// `<psi|op|psi>`.
pub fn expectation(op: &OperatorMatrix, psi: &StateVector) -> Result<C64> {
    op.matrix_element(psi, psi)
}

/// `AB - B^dagger A^dagger`.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    check_dims(a.dim(), b.dim())?;
    let ab = &a.entries * &b.entries;
    let ba_dag = b.entries.adjoint() * a.entries.adjoint();
    OperatorMatrix::auto(ab - ba_dag)
}

/// `AB + B^dagger A^dagger`.
pub fn anticommutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    check_dims(a.dim(), b.dim())?;
    let ab = &a.entries * &b.entries;
    let ba_dag = b.entries.adjoint() * a.entries.adjoint();
    OperatorMatrix::auto(ab + ba_dag)
}

/// Orthonormal eigenbasis of a Hermitian operator, eigenvalues ascending.
///
/// Inside a degenerate cluster the basis is rebuilt from the cluster projector
/// applied to computational basis vectors (greedy by residual norm), so the
/// result does not depend on the solver's arbitrary rotation of the eigenspace.
/// Each vector's first non-negligible component is made real and positive.
pub fn eigenbasis(op: &OperatorMatrix) -> Result<(OrthonormalBasis, Vec<f64>)> {
    let deviation = op.hermiticity_deviation();
    if !op.hermitian_hint() || deviation > tolerance::HERM {
        return Err(Error::NotHermitian { deviation });
    }
    let d = op.dim();
    // Symmetrize so tiny anti-Hermitian noise does not reach the solver.
    let sym = (&op.entries + op.entries.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut values = Vec::with_capacity(d);
    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(d);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d
            && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]]
                < tolerance::DEGENERACY_GAP
        {
            end += 1;
        }
        let cluster: Vec<DVector<C64>> = order[start..end]
            .iter()
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect();
        let mean =
            order[start..end].iter().map(|&k| eig.eigenvalues[k]).sum::<f64>() / (end - start) as f64;
        let vectors = if cluster.len() == 1 {
            cluster
        } else {
            canonical_cluster_basis(&cluster, d)
        };
        for v in vectors {
            values.push(if end - start == 1 { eig.eigenvalues[order[start]] } else { mean });
            columns.push(fix_phase(v));
        }
        start = end;
    }

    let states = columns
        .into_iter()
        .map(|c| {
            let n = c.norm();
            StateVector::from_dvector(c.unscale(n))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((OrthonormalBasis::new(states)?, values))
}

fn canonical_cluster_basis(cluster: &[DVector<C64>], d: usize) -> Vec<DVector<C64>> {
    let k = cluster.len();
    let project = |v: &DVector<C64>| -> DVector<C64> {
        let mut out = DVector::from_element(d, ZERO);
        for c in cluster {
            out += c * c.dotc(v);
        }
        out
    };
    let mut chosen: Vec<DVector<C64>> = Vec::with_capacity(k);
    let mut used = vec![false; d];
    while chosen.len() < k {
        let mut best: Option<(usize, DVector<C64>, f64)> = None;
        for i in (0..d).filter(|&i| !used[i]) {
            let mut e = DVector::from_element(d, ZERO);
            e[i] = ONE;
            let mut r = project(&e);
            // Two Gram-Schmidt passes for stability.
            for _ in 0..2 {
                for q in &chosen {
                    let overlap = q.dotc(&r);
                    r -= q * overlap;
                }
            }
            let n = r.norm();
            if best.as_ref().is_none_or(|(_, _, bn)| n > *bn + 1e-12) {
                best = Some((i, r, n));
            }
        }
        let (i, r, n) = best.expect("cluster dimension never exceeds d");
        used[i] = true;
        chosen.push(r.unscale(n));
    }
    chosen
}

fn fix_phase(v: DVector<C64>) -> DVector<C64> {
    let scale = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    match v.iter().find(|c| c.norm() > 1e-8 * scale) {
        Some(c) => {
            let phase = c.conj() / c.norm();
            v * phase
        }
        None => v,
    }
}

/// `sum_mu Pr(psi_mu) |psi_mu><psi_mu|`.
pub fn density_matrix(ens: &MixedEnsemble) -> OperatorMatrix {
    let d = ens.dim();
    let mut rho = DMatrix::<C64>::zeros(d, d);
    for (w, s) in ens.components() {
        rho += s.amplitudes() * s.amplitudes().adjoint() * C64::new(w, 0.0);
    }
    OperatorMatrix::hermitian((&rho + rho.adjoint()) * C64::new(0.5, 0.0))
        .expect("symmetrized mixture is Hermitian")
}

/// Unitary `exp(-i A theta / hbar)` for Hermitian `A`.
pub fn unitary_flow(generator: &OperatorMatrix, theta: f64, hbar: f64) -> Result<DMatrix<C64>> {
    let (basis, values) = eigenbasis(generator)?;
    let v = basis.as_matrix();
    let d = generator.dim();
    let phases = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::from_polar(1.0, -values[i] * theta / hbar)
        } else {
            ZERO
        }
    });
    Ok(&v * phases * v.adjoint())
}
