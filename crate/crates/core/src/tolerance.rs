//! Numerical tolerances shared by every module.
//!
//! All identity checks in the crate are expressed against these constants so
//! the acceptance suite, the CLI and the unit tests agree on what "exact" means.

/// Normalization of states and ensemble weights.
pub const NORM: f64 = 1e-10;

/// Orthonormality and completeness of bases.
pub const ORTHO: f64 = 1e-10;

/// Hermiticity of operators and reality of Hermitian expectation values.
pub const HERM: f64 = 1e-10;

/// Eigendecomposition reconstruction, relative to the matrix norm.
pub const EIG: f64 = 1e-9;

/// Algebraic identities between c-value averages and matrix expressions.
pub const IDENTITY: f64 = 1e-10;

/// Amplitude cutoff below which a post-selection overlap is masked.
pub const OVERLAP_CUTOFF: f64 = 1e-8;

/// Gap under which eigenvalues are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Relative accuracy of grid (continuous-variable) identities.
pub const GRID: f64 = 1e-6;

/// Density cutoff, relative to the peak density, for pointwise grid c-values.
pub const RHO_CUTOFF: f64 = 1e-10;

/// Largest allowed edge-to-peak density ratio of a grid wavefunction.
pub const BOUNDARY_DENSITY: f64 = 1e-12;

/// Minimum post-selection amplitude for states drawn for bound checks.
pub const BOUND_MIN_OVERLAP: f64 = 1e-3;
