//! Ensemble averages over `Pr(n, xi) = |<phi_n|psi>|^2 chi(xi)`.
//!
//! Every integrand used here is, for each basis index, a polynomial of degree at
//! most four in xi. Exact averages therefore need only the raw moments of the
//! xi model; enumerated averages sum over finite support; Monte Carlo averages
//! draw `(n, xi)` pairs in fixed chunks, each chunk on its own ChaCha8 substream,
//! and reduce the chunk sums in chunk order so results do not depend on the
//! number of worker threads.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cval::{build_cval, CValField};
use crate::error::{Error, Result};
use crate::hilbert::{born_probabilities, eigenbasis, MixedEnsemble, OperatorMatrix, OrthonormalBasis, StateVector, C64};
use crate::tolerance;
use crate::xi::{XiModel, XiPoly, MAX_DEGREE};

/// Draws per Monte Carlo chunk; chunk `k` uses substream `k` of the model seed.
pub const MC_CHUNK: usize = 4096;

/// Substream offset for the second, independent xi of a separable model.
const SECOND_XI_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Analytic integration over xi through its moments.
    Exact,
    /// Weighted sum over the finite support of xi.
    Enumerated,
    MonteCarlo { samples: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Enumerated => "enumerated",
            Method::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleAverage<T> {
    pub value: T,
    pub method: Method,
    /// Present exactly when `method` is Monte Carlo.
    pub mc_stderr: Option<T>,
    /// Born weight of basis elements excluded by overlap masking.
    pub masked_weight: f64,
}

/// Means of several integrands on shared draws, with the covariance of the means
/// when sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub means: Vec<f64>,
    pub mean_covariance: Option<Vec<Vec<f64>>>,
}

impl Moments {
    fn stderr(&self, i: usize) -> Option<f64> {
        self.mean_covariance.as_ref().map(|c| c[i][i].max(0.0).sqrt())
    }

    /// Standard error of `sum_i g_i mean_i` by the delta method.
    fn linear_stderr(&self, gradient: &[f64]) -> Option<f64> {
        self.mean_covariance.as_ref().map(|c| {
            let mut v = 0.0;
            for (i, gi) in gradient.iter().enumerate() {
                for (j, gj) in gradient.iter().enumerate() {
                    v += gi * gj * c[i][j];
                }
            }
            v.max(0.0).sqrt()
        })
    }
}

/// The joint distribution of `(n, xi)` for one state, basis and xi model.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEnsemble {
    born: Vec<f64>,
    model: XiModel,
    moments: [f64; MAX_DEGREE + 1],
    state_id: String,
    basis_id: String,
}

impl JointEnsemble {
    pub fn new(psi: &StateVector, basis: &OrthonormalBasis, model: &XiModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            born: born_probabilities(basis, psi)?,
            model: model.clone(),
            moments: model.moments(),
            state_id: psi.content_id(),
            basis_id: basis.content_id(),
        })
    }

    /// Ensemble over the post-selection weights carried by a field, e.g. a
    /// mixed-state field whose weights are `Tr{P_n rho}`.
    pub fn from_field(field: &CValField, model: &XiModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            born: field.born_weights.clone(),
            model: model.clone(),
            moments: model.moments(),
            state_id: field.state_id.clone(),
            basis_id: field.basis_id.clone(),
        })
    }

    pub fn born(&self) -> &[f64] {
        &self.born
    }

    pub fn model(&self) -> &XiModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.born.len()
    }

    pub fn state_id(&self) -> &str {
        &self.state_id
    }

    pub fn basis_id(&self) -> &str {
        &self.basis_id
    }

    pub fn check(&self, field: &CValField) -> Result<()> {
        if field.state_id != self.state_id || field.basis_id != self.basis_id {
            return Err(Error::ProvenanceMismatch(format!(
                "field built on state {} / basis {}, ensemble on {} / {}",
                field.state_id, field.basis_id, self.state_id, self.basis_id
            )));
        }
        if field.hbar != self.model.hbar {
            return Err(Error::ProvenanceMismatch(format!(
                "field hbar {} differs from model hbar {}",
                field.hbar, self.model.hbar
            )));
        }
        if field.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: field.dim(),
            });
        }
        Ok(())
    }

    /// Born weight of indices masked in any of `fields`.
    pub fn masked_weight(&self, fields: &[&CValField]) -> f64 {
        (0..self.dim())
            .filter(|&n| fields.iter().any(|f| !f.valid_mask[n]))
            .map(|n| self.born[n])
            .sum()
    }

    /// Averages of several per-index integrands, all evaluated on the same draws.
    pub fn moments_of(&self, integrands: &[Vec<XiPoly>], method: Method) -> Result<Moments> {
        for integrand in integrands {
            if integrand.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    actual: integrand.len(),
                });
            }
        }
        match method {
            Method::Exact => Ok(Moments {
                means: integrands
                    .iter()
                    .map(|polys| polys.iter().zip(&self.born).map(|(p, w)| w * p.expect(&self.moments)).sum())
                    .collect(),
                mean_covariance: None,
            }),
            Method::Enumerated => {
                let support = self.model.support().ok_or(Error::ContinuousSupport)?;
                let means = integrands
                    .iter()
                    .map(|polys| {
                        polys
                            .iter()
                            .zip(&self.born)
                            .map(|(p, w)| w * support.iter().map(|(xi, q)| q * p.eval(*xi)).sum::<f64>())
                            .sum()
                    })
                    .collect();
                Ok(Moments {
                    means,
                    mean_covariance: None,
                })
            }
            Method::MonteCarlo { samples } => self.monte_carlo(integrands, samples),
        }
    }

    fn monte_carlo(&self, integrands: &[Vec<XiPoly>], samples: usize) -> Result<Moments> {
        if samples < 2 {
            return Err(Error::InvalidXiModel("Monte Carlo needs at least 2 samples".into()));
        }
        let index = WeightedIndex::new(&self.born)
            .map_err(|e| Error::InvalidEnsemble(format!("Born weights: {e}")))?;
        let m = integrands.len();
        let chunks = samples.div_ceil(MC_CHUNK);
        let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let len = MC_CHUNK.min(samples - k * MC_CHUNK);
                let mut sampler = self.model.sampler(k as u64);
                let mut sum = vec![0.0; m];
                let mut cross = vec![0.0; m * m];
                let mut vals = vec![0.0; m];
                for _ in 0..len {
                    let n = index.sample(sampler.rng_mut());
                    let xi = sampler.draw();
                    for (v, polys) in vals.iter_mut().zip(integrands) {
                        *v = polys[n].eval(xi);
                    }
                    for i in 0..m {
                        sum[i] += vals[i];
                        for j in 0..m {
                            cross[i * m + j] += vals[i] * vals[j];
                        }
                    }
                }
                (sum, cross)
            })
            .collect();
        Ok(reduce_moments(partials, m, samples))
    }

    fn average(&self, integrand: Vec<XiPoly>, masked_weight: f64, method: Method) -> Result<EnsembleAverage<f64>> {
        let moments = self.moments_of(&[integrand], method)?;
        Ok(EnsembleAverage {
            value: moments.means[0],
            method,
            mc_stderr: moments.stderr(0),
            masked_weight,
        })
    }
}

fn reduce_moments(partials: Vec<(Vec<f64>, Vec<f64>)>, m: usize, samples: usize) -> Moments {
    let mut sum = vec![0.0; m];
    let mut cross = vec![0.0; m * m];
    for (s, c) in partials {
        for i in 0..m {
            sum[i] += s[i];
        }
        for i in 0..m * m {
            cross[i] += c[i];
        }
    }
    let n = samples as f64;
    let means: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let cov = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (cross[i * m + j] / n - means[i] * means[j]) * n / (n - 1.0) / n)
                .collect()
        })
        .collect();
    Moments {
        means,
        mean_covariance: Some(cov),
    }
}

fn polys(field: &CValField) -> Vec<XiPoly> {
    (0..field.dim()).map(|n| field.poly(n)).collect()
}

fn require_hermitian(field: &CValField) -> Result<()> {
    if field.hermitian {
        Ok(())
    } else {
        Err(Error::NotHermitian { deviation: f64::NAN })
    }
}

/// `<O~>`, which reproduces `Re <psi|O|psi>`.
pub fn mean_cval(ens: &JointEnsemble, field: &CValField, method: Method) -> Result<EnsembleAverage<f64>> {
    ens.check(field)?;
    ens.average(polys(field), ens.masked_weight(&[field]), method)
}

/// `<(xi/hbar) O~>`, which reproduces `Im <psi|O|psi>`.
pub fn xi_weighted_mean(ens: &JointEnsemble, field: &CValField, method: Method) -> Result<EnsembleAverage<f64>> {
    ens.check(field)?;
    let x = XiPoly::xi_over(field.hbar);
    ens.average(
        (0..field.dim()).map(|n| x * field.poly(n)).collect(),
        ens.masked_weight(&[field]),
        method,
    )
}

/// `<psi|O|psi>` recombined from the two averages above.
pub fn complex_mean(ens: &JointEnsemble, field: &CValField, method: Method) -> Result<EnsembleAverage<C64>> {
    ens.check(field)?;
    let x = XiPoly::xi_over(field.hbar);
    let re = polys(field);
    let im = (0..field.dim()).map(|n| x * field.poly(n)).collect();
    let m = ens.moments_of(&[re, im], method)?;
    Ok(EnsembleAverage {
        value: C64::new(m.means[0], m.means[1]),
        method,
        mc_stderr: m.stderr(0).zip(m.stderr(1)).map(|(a, b)| C64::new(a, b)),
        masked_weight: ens.masked_weight(&[field]),
    })
}

fn check_pair(ens: &JointEnsemble, a: &CValField, b: &CValField) -> Result<()> {
    ens.check(a)?;
    ens.check(b)?;
    a.check_same_context(b)
}

/// `<A~ B~>`, which reproduces `<psi|(A^dagger B + B^dagger A)/2|psi>`.
pub fn product_average(
    ens: &JointEnsemble,
    a: &CValField,
    b: &CValField,
    method: Method,
) -> Result<EnsembleAverage<f64>> {
    check_pair(ens, a, b)?;
    ens.average(
        (0..a.dim()).map(|n| a.poly(n) * b.poly(n)).collect(),
        ens.masked_weight(&[a, b]),
        method,
    )
}

fn flipped_product(a: &CValField, b: &CValField) -> Vec<XiPoly> {
    let x = XiPoly::xi_over(a.hbar);
    (0..a.dim()).map(|n| x * a.poly(n).reflect() * b.poly(n)).collect()
}

/// `<(xi/hbar) A~(n,-xi) B~(n,xi)>`, which reproduces
/// `(1/2i)<psi|(A^dagger B - B^dagger A)|psi>` when the third moment of xi vanishes.
pub fn commutator_average(
    ens: &JointEnsemble,
    a: &CValField,
    b: &CValField,
    method: Method,
) -> Result<EnsembleAverage<f64>> {
    check_pair(ens, a, b)?;
    ens.model.require_vanishing_third_moment()?;
    ens.average(flipped_product(a, b), ens.masked_weight(&[a, b]), method)
}

/// `<psi|A^dagger B|psi>` as product average plus `i` times commutator average.
pub fn full_product_representation(
    ens: &JointEnsemble,
    a: &CValField,
    b: &CValField,
    method: Method,
) -> Result<EnsembleAverage<C64>> {
    check_pair(ens, a, b)?;
    ens.model.require_vanishing_third_moment()?;
    let prod = (0..a.dim()).map(|n| a.poly(n) * b.poly(n)).collect();
    let m = ens.moments_of(&[prod, flipped_product(a, b)], method)?;
    Ok(EnsembleAverage {
        value: C64::new(m.means[0], m.means[1]),
        method,
        mc_stderr: m.stderr(0).zip(m.stderr(1)).map(|(a, b)| C64::new(a, b)),
        masked_weight: ens.masked_weight(&[a, b]),
    })
}

/// `sum_n A^w(phi_n|psi)^* B^w(phi_n|psi) |<phi_n|psi>|^2` directly from the fields.
pub fn weak_value_correlation(a: &CValField, b: &CValField) -> Result<C64> {
    a.check_same_context(b)?;
    Ok((0..a.dim())
        .filter(|&n| a.valid_mask[n] && b.valid_mask[n])
        .map(|n| {
            let wa = C64::new(a.re_part[n], a.im_part[n]);
            let wb = C64::new(b.re_part[n], b.im_part[n]);
            wa.conj() * wb * a.born_weights[n]
        })
        .sum())
}

/// `<A~B~> - <A~><B~>` for Hermitian operators.
pub fn covariance(ens: &JointEnsemble, a: &CValField, b: &CValField, method: Method) -> Result<EnsembleAverage<f64>> {
    check_pair(ens, a, b)?;
    require_hermitian(a)?;
    require_hermitian(b)?;
    let prod = (0..a.dim()).map(|n| a.poly(n) * b.poly(n)).collect();
    let m = ens.moments_of(&[prod, polys(a), polys(b)], method)?;
    let (ab, ma, mb) = (m.means[0], m.means[1], m.means[2]);
    Ok(EnsembleAverage {
        value: ab - ma * mb,
        method,
        mc_stderr: m.linear_stderr(&[1.0, -mb, -ma]),
        masked_weight: ens.masked_weight(&[a, b]),
    })
}

pub fn variance(ens: &JointEnsemble, field: &CValField, method: Method) -> Result<EnsembleAverage<f64>> {
    covariance(ens, field, field, method)
}

/// `<(A~ - B~)^2>`, which reproduces `<psi|(A - B)^2|psi>`.
pub fn statistical_deviation(
    ens: &JointEnsemble,
    a: &CValField,
    b: &CValField,
    method: Method,
) -> Result<EnsembleAverage<f64>> {
    check_pair(ens, a, b)?;
    require_hermitian(a)?;
    require_hermitian(b)?;
    ens.average(
        (0..a.dim())
            .map(|n| {
                let d = a.poly(n) - b.poly(n);
                d * d
            })
            .collect(),
        ens.masked_weight(&[a, b]),
        method,
    )
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `<A~ B~ + f(c_n)>` over the eigenbasis of `C`, where `f` has the given
/// coefficients in increasing degree.
pub fn equivalence_theorem(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    f: &[f64],
    c: &OperatorMatrix,
    psi: &StateVector,
    model: &XiModel,
    method: Method,
) -> Result<EnsembleAverage<f64>> {
    if !c.hermitian_hint() {
        return Err(Error::NotHermitian {
            deviation: c.hermiticity_deviation(),
        });
    }
    let (basis, eigenvalues) = eigenbasis(c)?;
    let ens = JointEnsemble::new(psi, &basis, model)?;
    let fa = build_cval(a, psi, &basis, model)?;
    let fb = build_cval(b, psi, &basis, model)?;
    // f(c_n) is well defined even where the weak values are masked.
    let integrand = (0..basis.dim())
        .map(|n| fa.poly(n) * fb.poly(n) + XiPoly::constant(horner(f, eigenvalues[n])))
        .collect();
    ens.average(integrand, ens.masked_weight(&[&fa, &fb]), method)
}

/// Separable versus global xi for a product of local operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableProduct {
    /// `<A~(n, xi_A) B~(n, xi_B)>` with independent `xi_A`, `xi_B`.
    pub separable: EnsembleAverage<f64>,
    /// `<A~(n, xi) B~(n, xi)>` with one shared xi.
    pub global: EnsembleAverage<f64>,
    /// `sum_n A_I B_I Pr(n)` scaled by `<xi^2>/hbar^2`: the term lost when xi is split.
    pub cross_term: f64,
}

fn local_factor(op: &OperatorMatrix, da: usize, db: usize, left: bool) -> Result<OperatorMatrix> {
    let m = op.entries();
    let (d_keep, d_trace) = if left { (da, db) } else { (db, da) };
    let index = |keep: usize, traced: usize| if left { keep * db + traced } else { traced * db + keep };
    let factor = nalgebra::DMatrix::from_fn(d_keep, d_keep, |i, j| {
        (0..d_trace).map(|k| m[(index(i, k), index(j, k))]).sum::<C64>() / d_trace as f64
    });
    let local = OperatorMatrix::general(factor)?;
    let rebuilt = if left {
        local.kron(&OperatorMatrix::identity(db))
    } else {
        OperatorMatrix::identity(da).kron(&local)
    };
    let residual = crate::hilbert::max_abs(&(m - rebuilt.entries()));
    if residual > tolerance::IDENTITY * op.frobenius_norm().max(1.0) {
        return Err(Error::NotLocalOperator { residual });
    }
    Ok(local)
}

/// Compares the shared-xi product average of `A = a (x) 1` and `B = 1 (x) b` with
/// the one obtained when each subsystem carries its own independent xi.
pub fn separable_xi_product(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    psi: &StateVector,
    dims: (usize, usize),
    basis: &OrthonormalBasis,
    models: (&XiModel, &XiModel),
    method: Method,
) -> Result<SeparableProduct> {
    let (da, db) = dims;
    if da * db != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.dim(),
            actual: da * db,
        });
    }
    local_factor(a, da, db, true)?;
    local_factor(b, da, db, false)?;
    let (model_a, model_b) = models;
    if model_a.hbar != model_b.hbar {
        return Err(Error::InvalidXiModel("subsystem models must share hbar".into()));
    }
    let ens = JointEnsemble::new(psi, basis, model_a)?;
    let fa = build_cval(a, psi, basis, model_a)?;
    let fb = build_cval(b, psi, basis, model_b)?;
    let global = product_average(&ens, &fa, &fb, method)?;
    let masked_weight = ens.masked_weight(&[&fa, &fb]);
    let hbar = model_a.hbar;

    let (value, mc_stderr) = match method {
        Method::Exact => {
            let (m1a, m1b) = (model_a.moment(1) / hbar, model_b.moment(1) / hbar);
            let v = (0..fa.dim())
                .filter(|&n| fa.valid_mask[n] && fb.valid_mask[n])
                .map(|n| {
                    let (ar, ai, br, bi) = (fa.re_part[n], fa.im_part[n], fb.re_part[n], fb.im_part[n]);
                    ens.born[n] * (ar * br + m1a * ai * br + m1b * ar * bi + m1a * m1b * ai * bi)
                })
                .sum();
            (v, None)
        }
        Method::Enumerated => {
            let sa = model_a.support().ok_or(Error::ContinuousSupport)?;
            let sb = model_b.support().ok_or(Error::ContinuousSupport)?;
            let mut v = 0.0;
            for n in (0..fa.dim()).filter(|&n| fa.valid_mask[n] && fb.valid_mask[n]) {
                for &(xa, pa) in &sa {
                    for &(xb, pb) in &sb {
                        v += ens.born[n] * pa * pb * fa.evaluate(n, xa)? * fb.evaluate(n, xb)?;
                    }
                }
            }
            (v, None)
        }
        Method::MonteCarlo { samples } => {
            if samples < 2 {
                return Err(Error::InvalidXiModel("Monte Carlo needs at least 2 samples".into()));
            }
            let index = WeightedIndex::new(&ens.born)
                .map_err(|e| Error::InvalidEnsemble(format!("Born weights: {e}")))?;
            let pa: Vec<XiPoly> = polys(&fa);
            let pb: Vec<XiPoly> = polys(&fb);
            let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..samples.div_ceil(MC_CHUNK))
                .into_par_iter()
                .map(|k| {
                    let len = MC_CHUNK.min(samples - k * MC_CHUNK);
                    let mut sa = model_a.sampler(k as u64);
                    let mut sb = model_b.sampler(SECOND_XI_STREAM + k as u64);
                    let (mut s, mut s2) = (0.0, 0.0);
                    for _ in 0..len {
                        let n = index.sample(sa.rng_mut());
                        let v = pa[n].eval(sa.draw()) * pb[n].eval(sb.draw());
                        s += v;
                        s2 += v * v;
                    }
                    (vec![s], vec![s2])
                })
                .collect();
            let m = reduce_moments(partials, 1, samples);
            (m.means[0], m.stderr(0))
        }
    };
    let m2 = model_a.moment(2) / (hbar * hbar);
    let cross_term = (0..fa.dim())
        .filter(|&n| fa.valid_mask[n] && fb.valid_mask[n])
        .map(|n| ens.born[n] * fa.im_part[n] * fb.im_part[n] * m2)
        .sum();
    Ok(SeparableProduct {
        separable: EnsembleAverage {
            value,
            method,
            mc_stderr,
            masked_weight,
        },
        global,
        cross_term,
    })
}

/// `sum_mu Pr(psi_mu) <A~ B~>_mu`, which reproduces `Tr{rho (A^dagger B + B^dagger A)/2}`.
pub fn mixed_product_average(
    ensemble: &MixedEnsemble,
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    basis: &OrthonormalBasis,
    model: &XiModel,
    method: Method,
) -> Result<EnsembleAverage<f64>> {
    let mut value = 0.0;
    let mut var = 0.0;
    let mut masked_weight = 0.0;
    for (mu, (w, psi)) in ensemble.components().enumerate() {
        let component_model = model.clone().with_seed(model.seed.wrapping_add(mu as u64));
        let ens = JointEnsemble::new(psi, basis, &component_model)?;
        let fa = build_cval(a, psi, basis, &component_model)?;
        let fb = build_cval(b, psi, basis, &component_model)?;
        let avg = product_average(&ens, &fa, &fb, method)?;
        value += w * avg.value;
        masked_weight += w * avg.masked_weight;
        if let Some(se) = avg.mc_stderr {
            var += w * w * se * se;
        }
    }
    Ok(EnsembleAverage {
        value,
        method,
        mc_stderr: matches!(method, Method::MonteCarlo { .. }).then(|| var.sqrt()),
        masked_weight,
    })
}

/// Machine-readable record of one identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub operation: String,
    /// Content hashes of the inputs, keyed by role.
    pub inputs: BTreeMap<String, String>,
    pub method: Method,
    /// One component for real quantities, `[re, im]` for complex ones.
    pub value: Vec<f64>,
    pub oracle: Vec<f64>,
    pub mc_stderr: Option<Vec<f64>>,
    pub abs_error: f64,
    pub masked_weight: f64,
}

impl VerificationRecord {
    pub fn real(
        operation: &str,
        inputs: BTreeMap<String, String>,
        avg: &EnsembleAverage<f64>,
        oracle: f64,
    ) -> Self {
        Self {
            operation: operation.to_string(),
            inputs,
            method: avg.method,
            value: vec![avg.value],
            oracle: vec![oracle],
            mc_stderr: avg.mc_stderr.map(|s| vec![s]),
            abs_error: (avg.value - oracle).abs(),
            masked_weight: avg.masked_weight,
        }
    }

    pub fn complex(
        operation: &str,
        inputs: BTreeMap<String, String>,
        avg: &EnsembleAverage<C64>,
        oracle: C64,
    ) -> Self {
        Self {
            operation: operation.to_string(),
            inputs,
            method: avg.method,
            value: vec![avg.value.re, avg.value.im],
            oracle: vec![oracle.re, oracle.im],
            mc_stderr: avg.mc_stderr.map(|s| vec![s.re, s.im]),
            abs_error: (avg.value - oracle).norm(),
            masked_weight: avg.masked_weight,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Input hashes of a field for a verification record.
pub fn field_inputs(fields: &[(&str, &CValField)]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for (role, f) in fields {
        out.insert(format!("{role}.operator"), f.operator_id.clone());
        out.insert("state".to_string(), f.state_id.clone());
        out.insert("basis".to_string(), f.basis_id.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_abs_diff_eq;

    fn plus() -> StateVector {
        StateVector::from_reals(&[1.0, 1.0]).unwrap()
    }

    fn setup(op: &OperatorMatrix, psi: &StateVector, basis: &OrthonormalBasis) -> (JointEnsemble, CValField) {
        let model = XiModel::binary(1.0);
        (
            JointEnsemble::new(psi, basis, &model).unwrap(),
            build_cval(op, psi, basis, &model).unwrap(),
        )
    }

    fn tilted_basis() -> OrthonormalBasis {
        tilted(std::f64::consts::PI / 8.0)
    }

    fn tilted(t: f64) -> OrthonormalBasis {
        OrthonormalBasis::new(vec![
            StateVector::from_reals(&[t.cos(), t.sin()]).unwrap(),
            StateVector::from_reals(&[-t.sin(), t.cos()]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn mean_of_identity_is_one() {
        let (ens, f) = setup(&OperatorMatrix::identity(2), &plus(), &tilted_basis());
        assert_abs_diff_eq!(mean_cval(&ens, &f, Method::Exact).unwrap().value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma_z_mean_vanishes_in_plus() {
        let (ens, f) = setup(&OperatorMatrix::pauli_z(), &plus(), &tilted_basis());
        let avg = mean_cval(&ens, &f, Method::Enumerated).unwrap();
        assert_abs_diff_eq!(avg.value, 0.0, epsilon = 1e-14);
        assert!(avg.mc_stderr.is_none());
    }

    #[test]
    fn lowering_operator_on_plus() {
        let sigma = OperatorMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let (ens, f) = setup(&sigma, &plus(), &tilted_basis());
        assert_abs_diff_eq!(mean_cval(&ens, &f, Method::Exact).unwrap().value, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(xi_weighted_mean(&ens, &f, Method::Exact).unwrap().value, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn imaginary_expectation_is_recovered() {
        let op = OperatorMatrix::general(nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 1.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        ))
        .unwrap();
        let psi = StateVector::basis_vector(2, 0).unwrap();
        let (ens, f) = setup(&op, &psi, &tilted_basis());
        assert_abs_diff_eq!(xi_weighted_mean(&ens, &f, Method::Exact).unwrap().value, 1.0, epsilon = 1e-14);
        let c = complex_mean(&ens, &f, Method::Enumerated).unwrap().value;
        assert_abs_diff_eq!(c.re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.im, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn commutator_of_sigma_x_sigma_y_on_zero() {
        let psi = StateVector::basis_vector(2, 0).unwrap();
        let basis = tilted_basis();
        let (ens, fx) = setup(&OperatorMatrix::pauli_x(), &psi, &basis);
        let (_, fy) = setup(&OperatorMatrix::pauli_y(), &psi, &basis);
        let c = commutator_average(&ens, &fx, &fy, Method::Exact).unwrap();
        assert_abs_diff_eq!(c.value, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(
            commutator_average(&ens, &fx, &fx, Method::Exact).unwrap().value,
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn skewed_xi_is_rejected_for_commutators() {
        let r = std::f64::consts::SQRT_2;
        let model = XiModel::custom_discrete(vec![-1.0 / r, r], vec![2.0 / 3.0, 1.0 / 3.0], 1.0).unwrap();
        let basis = tilted_basis();
        let ens = JointEnsemble::new(&plus(), &basis, &model).unwrap();
        let f = build_cval(&OperatorMatrix::pauli_y(), &plus(), &basis, &model).unwrap();
        assert!(matches!(
            commutator_average(&ens, &f, &f, Method::Exact),
            Err(Error::ThirdMomentViolation(_))
        ));
        // Means only use the first two moments.
        assert_abs_diff_eq!(mean_cval(&ens, &f, Method::Enumerated).unwrap().value, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn bell_state_product_of_local_sigma_z() {
        let bell = StateVector::from_reals(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let za = OperatorMatrix::pauli_z().kron(&OperatorMatrix::identity(2));
        let zb = OperatorMatrix::identity(2).kron(&OperatorMatrix::pauli_z());
        let basis = OrthonormalBasis::product(&tilted_basis(), &tilted(std::f64::consts::PI / 5.0));
        let (ens, fa) = setup(&za, &bell, &basis);
        let (_, fb) = setup(&zb, &bell, &basis);
        assert_abs_diff_eq!(product_average(&ens, &fa, &fb, Method::Exact).unwrap().value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn provenance_is_checked() {
        let (ens, _) = setup(&OperatorMatrix::pauli_z(), &plus(), &tilted_basis());
        let (_, other) = setup(&OperatorMatrix::pauli_z(), &plus(), &OrthonormalBasis::computational(2));
        assert!(matches!(mean_cval(&ens, &other, Method::Exact), Err(Error::ProvenanceMismatch(_))));
    }

    #[test]
    fn variance_and_covariance_of_paulis() {
        let zero = StateVector::basis_vector(2, 0).unwrap();
        let basis = tilted_basis();
        let (ens, fx) = setup(&OperatorMatrix::pauli_x(), &zero, &basis);
        let (_, fz) = setup(&OperatorMatrix::pauli_z(), &zero, &basis);
        assert_abs_diff_eq!(covariance(&ens, &fx, &fz, Method::Exact).unwrap().value, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(variance(&ens, &fz, Method::Exact).unwrap().value, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(variance(&ens, &fx, Method::Exact).unwrap().value, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(
            statistical_deviation(&ens, &fx, &fz, Method::Enumerated).unwrap().value,
            2.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn non_hermitian_variance_is_rejected() {
        let op = OperatorMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let (ens, f) = setup(&op, &plus(), &tilted_basis());
        assert!(matches!(variance(&ens, &f, Method::Exact), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn equivalence_theorem_with_square_of_c() {
        let psi = StateVector::from_reals(&[0.3, 0.9]).unwrap();
        let (x, z) = (OperatorMatrix::pauli_x(), OperatorMatrix::pauli_z());
        let v = equivalence_theorem(&x, &x, &[0.0, 0.0, 1.0], &z, &psi, &XiModel::binary(1.0), Method::Exact).unwrap();
        // sigma_x^2 + sigma_z^2 = 2.
        assert_abs_diff_eq!(v.value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn bell_state_separable_xi_loses_cross_term() {
        let bell = StateVector::from_reals(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let xa = OperatorMatrix::pauli_x().kron(&OperatorMatrix::identity(2));
        let xb = OperatorMatrix::identity(2).kron(&OperatorMatrix::pauli_x());
        let basis = OrthonormalBasis::product(&OrthonormalBasis::qubit(0.4, 0.3), &OrthonormalBasis::qubit(0.9, -1.1));
        let model = XiModel::binary(1.0);
        let r = separable_xi_product(&xa, &xb, &bell, (2, 2), &basis, (&model, &model), Method::Enumerated).unwrap();
        let exact = oracle::correlation(&xa, &xb, &bell).unwrap().re;
        assert_abs_diff_eq!(r.global.value, exact, epsilon = 1e-12);
        assert_abs_diff_eq!(r.global.value - r.separable.value, r.cross_term, epsilon = 1e-12);
        assert!(r.cross_term.abs() > 0.1);
    }

    #[test]
    fn non_local_operator_is_rejected() {
        let bell = StateVector::from_reals(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let xx = OperatorMatrix::pauli_x().kron(&OperatorMatrix::pauli_x());
        let model = XiModel::binary(1.0);
        let r = separable_xi_product(
            &xx,
            &xx,
            &bell,
            (2, 2),
            &OrthonormalBasis::computational(4),
            (&model, &model),
            Method::Exact,
        );
        assert!(matches!(r, Err(Error::NotLocalOperator { .. })));
    }

    #[test]
    fn monte_carlo_is_reproducible_and_carries_stderr() {
        let psi = StateVector::from_reals(&[0.6, 0.8]).unwrap();
        let model = XiModel::gaussian(1.0).with_seed(5);
        let basis = tilted_basis();
        let ens = JointEnsemble::new(&psi, &basis, &model).unwrap();
        let f = build_cval(&OperatorMatrix::pauli_y(), &psi, &basis, &model).unwrap();
        let method = Method::MonteCarlo { samples: 10_000 };
        let a = variance(&ens, &f, method).unwrap();
        let b = variance(&ens, &f, method).unwrap();
        assert_eq!(a, b);
        let exact = variance(&ens, &f, Method::Exact).unwrap().value;
        assert!((a.value - exact).abs() < 5.0 * a.mc_stderr.unwrap());
    }

    #[test]
    fn monte_carlo_does_not_depend_on_thread_count() {
        let psi = StateVector::from_reals(&[0.6, 0.8]).unwrap();
        let model = XiModel::binary(1.0).with_seed(9);
        let basis = tilted_basis();
        let ens = JointEnsemble::new(&psi, &basis, &model).unwrap();
        let f = build_cval(&OperatorMatrix::pauli_x(), &psi, &basis, &model).unwrap();
        let method = Method::MonteCarlo { samples: 50_000 };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| mean_cval(&ens, &f, method).unwrap());
        let b = mean_cval(&ens, &f, method).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn verification_record_json() {
        let (ens, f) = setup(&OperatorMatrix::pauli_z(), &plus(), &tilted_basis());
        let avg = mean_cval(&ens, &f, Method::Exact).unwrap();
        let rec = VerificationRecord::real("mean_cval", field_inputs(&[("op", &f)]), &avg, 0.0);
        let json: serde_json::Value = serde_json::from_str(&rec.to_json()).unwrap();
        assert_eq!(json["method"], "exact");
        assert!(json["abs_error"].as_f64().unwrap() < 1e-14);
        assert_eq!(json["inputs"]["state"], plus().content_id());
    }

    #[test]
    fn mixed_product_matches_trace() {
        let e = MixedEnsemble::new(
            vec![0.5, 0.5],
            vec![StateVector::basis_vector(2, 0).unwrap(), StateVector::basis_vector(2, 1).unwrap()],
        )
        .unwrap();
        let (x, y) = (OperatorMatrix::pauli_x(), OperatorMatrix::pauli_y());
        let v = mixed_product_average(&e, &x, &x, &tilted_basis(), &XiModel::binary(1.0), Method::Exact).unwrap();
        assert_abs_diff_eq!(v.value, 1.0, epsilon = 1e-12);
        let w = mixed_product_average(&e, &x, &y, &tilted_basis(), &XiModel::binary(1.0), Method::Exact).unwrap();
        assert_abs_diff_eq!(w.value, 0.0, epsilon = 1e-12);
    }
}
