//! Real-deterministic c-valued representation of quantum observables.
//!
//! An operator `O`, a pure state `psi` and an orthonormal post-selection basis
//! `{phi_n}` define the weak values `O^w(phi_n|psi)`. Attaching a real hidden
//! variable `xi` with mean zero and variance `hbar^2` gives the c-valued field
//! `O~(n, xi) = Re O^w + (xi/hbar) Im O^w`, whose averages over
//! `Pr(n, xi) = |<phi_n|psi>|^2 chi(xi)` reproduce quantum expectation values,
//! correlations and uncertainty relations.

pub mod contvar;
pub mod cval;
pub mod error;
pub mod estimation;
pub mod hilbert;
pub mod oracle;
pub mod random;
pub mod statistics;
pub mod tolerance;
pub mod uncertainty;
pub mod weakvalue;
pub mod xi;

pub use contvar::{
    average_equality_check, build_chirped_gaussian, build_gaussian, build_plane_wave, cval_hamiltonian_free,
    cval_momentum, position_momentum_krs, AverageEquality, Grid, GridCVal, GridWavefunction, PlateauEnvelope,
};
pub use cval::{build_cval, cval_from_density, cval_mixed, enumerate_joint, recover_weak_value, CValField, JointSample};
pub use error::{Error, Result};
pub use estimation::{EstimationReport, EstimatorField};
pub use hilbert::{
    anticommutator, born_probabilities, commutator, density_matrix, eigenbasis, expectation, MixedEnsemble,
    OperatorMatrix, OrthonormalBasis, PlanckConfig, StateVector, C64,
};
pub use statistics::{EnsembleAverage, JointEnsemble, Method, VerificationRecord};
pub use uncertainty::{BoundKind, BoundReport, Reference, VarianceDecomposition};
pub use weakvalue::{weak_value, weak_value_field, weak_value_parts, WeakValueField};
pub use xi::{XiKind, XiModel, XiPoly};
