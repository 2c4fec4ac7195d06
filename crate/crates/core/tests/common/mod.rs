//! Matrix oracles written directly against nalgebra, independent of the crate's
//! own helpers.

#![allow(dead_code)]

use cval_core::{OperatorMatrix, StateVector, C64};
use nalgebra::{DMatrix, DVector};

pub fn ket(psi: &StateVector) -> DVector<C64> {
    psi.amplitudes().clone()
}

pub fn mat(op: &OperatorMatrix) -> DMatrix<C64> {
    op.entries().clone()
}

/// `<psi|M|psi>`.
pub fn expect(m: &DMatrix<C64>, psi: &StateVector) -> C64 {
    let v = ket(psi);
    (v.adjoint() * m * &v)[(0, 0)]
}

/// `<psi|A^dagger B|psi>`.
pub fn corr(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> C64 {
    expect(&(mat(a).adjoint() * mat(b)), psi)
}

/// `<psi|(A^dagger B + B^dagger A)/2|psi>`, real.
pub fn sym(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> f64 {
    let (a, b) = (mat(a), mat(b));
    let m = (a.adjoint() * &b + b.adjoint() * &a) * C64::new(0.5, 0.0);
    expect(&m, psi).re
}

/// `(1/2i)<psi|(A^dagger B - B^dagger A)|psi>`, real.
pub fn antisym(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> f64 {
    let (a, b) = (mat(a), mat(b));
    let m = a.adjoint() * &b - b.adjoint() * &a;
    (expect(&m, psi) / C64::new(0.0, 2.0)).re
}

pub fn cov(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> f64 {
    sym(a, b, psi) - expect(&mat(a), psi).re * expect(&mat(b), psi).re
}

/// `(1/4)|<[A,B]>|^2` for Hermitian `A`, `B`.
pub fn kr_rhs(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> f64 {
    let (a, b) = (mat(a), mat(b));
    0.25 * expect(&(&a * &b - &b * &a), psi).norm_sqr()
}

pub fn trace_sym(rho: &DMatrix<C64>, a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
    let (a, b) = (mat(a), mat(b));
    let m = (a.adjoint() * &b + b.adjoint() * &a) * C64::new(0.5, 0.0);
    (rho * m).trace().re
}

/// Spin-1 matrices `(J_x, J_y, J_z)`.
pub fn spin_one() -> (OperatorMatrix, OperatorMatrix, OperatorMatrix) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| C64::new(re, im);
    let jx = DMatrix::from_row_slice(3, 3, &[c(0., 0.), c(s, 0.), c(0., 0.), c(s, 0.), c(0., 0.), c(s, 0.), c(0., 0.), c(s, 0.), c(0., 0.)]);
    let jy = DMatrix::from_row_slice(
        3,
        3,
        &[c(0., 0.), c(0., -s), c(0., 0.), c(0., s), c(0., 0.), c(0., -s), c(0., 0.), c(0., s), c(0., 0.)],
    );
    let jz = OperatorMatrix::diagonal(&[1.0, 0.0, -1.0]);
    (OperatorMatrix::hermitian(jx).unwrap(), OperatorMatrix::hermitian(jy).unwrap(), jz)
}
