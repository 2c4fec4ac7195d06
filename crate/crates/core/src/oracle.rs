//! Direct matrix evaluations of the quantum-side quantities that the c-valued
//! ensemble averages reproduce.

use crate::error::Result;
use crate::hilbert::{expectation, OperatorMatrix, StateVector, C64};

/// `(Re <psi|O|psi>, Im <psi|O|psi>)`.
pub fn expectation_parts(op: &OperatorMatrix, psi: &StateVector) -> Result<(f64, f64)> {
    let e = expectation(op, psi)?;
    Ok((e.re, e.im))
}

/// `<psi|A^dagger B|psi>`.
pub fn correlation(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> Result<C64> {
    expectation(&a.dagger().mul(b)?, psi)
}

/// `<psi|(A^dagger B + B^dagger A)/2|psi>`, real by construction.
pub fn symmetrized_product(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> Result<f64> {
    let m = a.dagger().mul(b)?.add(&b.dagger().mul(a)?)?;
    Ok(0.5 * expectation(&m, psi)?.re)
}

/// `(1/2i) <psi|(A^dagger B - B^dagger A)|psi>`, real by construction.
pub fn commutator_form(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> Result<f64> {
    let m = a.dagger().mul(b)?.sub(&b.dagger().mul(a)?)?;
    Ok((expectation(&m, psi)? / C64::new(0.0, 2.0)).re)
}

/// `(1/2)<{A,B}> - <A><B>` for Hermitian operators.
pub fn quantum_covariance(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> Result<f64> {
    let ab = a.mul(b)?;
    let ba = b.mul(a)?;
    let anti = expectation(&ab.add(&ba)?, psi)?.re * 0.5;
    Ok(anti - expectation(a, psi)?.re * expectation(b, psi)?.re)
}

pub fn quantum_variance(a: &OperatorMatrix, psi: &StateVector) -> Result<f64> {
    quantum_covariance(a, a, psi)
}

/// `<psi|(A - B)^2|psi>`.
pub fn squared_deviation(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> Result<f64> {
    let d = a.sub(b)?;
    Ok(expectation(&d.mul(&d)?, psi)?.re)
}

/// Squared covariance term of the Schrodinger bound.
pub fn schrodinger_rhs(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> Result<f64> {
    Ok(quantum_covariance(a, b, psi)?.powi(2))
}

/// `(1/4)|<psi|AB - BA|psi>|^2`.
pub fn kennard_robertson_rhs(a: &OperatorMatrix, b: &OperatorMatrix, psi: &StateVector) -> Result<f64> {
    let c = a.mul(b)?.sub(&b.mul(a)?)?;
    Ok(0.25 * expectation(&c, psi)?.norm_sqr())
}

/// `Tr{rho (A^dagger B + B^dagger A)/2}`.
pub fn mixed_symmetrized_product(rho: &OperatorMatrix, a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    let m = a.dagger().mul(b)?.add(&b.dagger().mul(a)?)?;
    Ok(0.5 * rho.mul(&m)?.trace().re)
}
