//! Seeded generators for random test instances.
//!
//! Haar-random states are normalized i.i.d. standard complex Gaussian vectors;
//! Haar-random bases are the columns of the Q factor of a complex Ginibre matrix
//! with the phases of R's diagonal divided out.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::hilbert::{OperatorMatrix, OrthonormalBasis, StateVector, C64};

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn ginibre<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |_, _| gaussian_c64(rng))
}

pub fn haar_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> StateVector {
    loop {
        let amps: Vec<C64> = (0..d).map(|_| gaussian_c64(rng)).collect();
        if let Ok(s) = StateVector::normalized(amps) {
            return s;
        }
    }
}

/// Haar state whose overlaps with every basis vector are at least `min_overlap`
/// in amplitude.
pub fn haar_state_with_min_overlap<R: Rng + ?Sized>(
    basis: &OrthonormalBasis,
    min_overlap: f64,
    rng: &mut R,
) -> StateVector {
    loop {
        let s = haar_state(basis.dim(), rng);
        if basis.vectors().iter().all(|phi| phi.inner(&s).norm() >= min_overlap) {
            return s;
        }
    }
}

pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let qr = ginibre(d, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

pub fn haar_basis<R: Rng + ?Sized>(d: usize, rng: &mut R) -> OrthonormalBasis {
    loop {
        if let Ok(b) = OrthonormalBasis::from_columns(&haar_unitary(d, rng)) {
            return b;
        }
    }
}

/// GUE-distributed Hermitian matrix, `(G + G^dagger) / 2`.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> OperatorMatrix {
    let g = ginibre(d, rng);
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    OperatorMatrix::hermitian(h).expect("symmetrized matrix is Hermitian")
}

/// Complex Ginibre matrix, generically non-Hermitian.
pub fn random_operator<R: Rng + ?Sized>(d: usize, rng: &mut R) -> OperatorMatrix {
    OperatorMatrix::general(ginibre(d, rng)).expect("square matrix")
}

/// Hermitian matrix diagonal in `basis` with random real spectrum.
pub fn random_diagonal_in<R: Rng + ?Sized>(
    basis: &OrthonormalBasis,
    rng: &mut R,
) -> Result<OperatorMatrix> {
    let d = basis.dim();
    let u = basis.as_matrix();
    let diag = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new(rng.sample::<f64, _>(StandardNormal), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let m = &u * diag * u.adjoint();
    OperatorMatrix::hermitian((&m + m.adjoint()) * C64::new(0.5, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_objects_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 2..=8 {
            let b = haar_basis(d, &mut rng);
            assert!(b.orthonormality_deviation() < tolerance::ORTHO);
            let h = random_hermitian(d, &mut rng);
            assert!(h.hermitian_hint());
            let s = haar_state_with_min_overlap(&b, 1e-3, &mut rng);
            assert!(b.vectors().iter().all(|v| v.inner(&s).norm() >= 1e-3));
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = haar_state(5, &mut ChaCha8Rng::seed_from_u64(3));
        let b = haar_state(5, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
