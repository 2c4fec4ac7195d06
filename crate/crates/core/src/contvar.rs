//! One-dimensional wavefunctions on a uniform grid and their c-valued momentum
//! and free-particle energy in the position basis.
//!
//! Writing `psi = exp(R + iS/hbar)`, the position-basis weak values are
//!
//! ```text
//! p^w = S' - i hbar R'
//! H^w = S'^2/2m - (hbar^2/2m)(R'' + R'^2) - i (hbar/2m)(2 R' S' + S'')
//! ```
//!
//! so that `p~ = S' - (xi/2) rho'/rho` and
//! `H~ = S'^2/2m - (hbar^2/2m) (sqrt rho)''/sqrt rho - (xi/2 rho)(rho S'/m)'`.
//! The c-values use second-order central differences of `R = ln|psi|` and of
//! the unwrapped phase; the operator-side oracle applies `p` spectrally.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::C64;
use crate::tolerance;
use crate::uncertainty::{BoundKind, BoundReport};
use crate::xi::XiModel;

/// Minimum grid points per Gaussian width.
pub const MIN_POINTS_PER_SIGMA: f64 = 32.0;
/// Minimum half-extent of the grid around a Gaussian centre, in widths.
pub const MIN_EXTENT_SIGMAS: f64 = 8.0;
/// Plateau-envelope edge widths kept between the interior and the plateau edge.
pub const INTERIOR_EDGE_WIDTHS: f64 = 8.0;

/// Uniform grid `q_j = q_min + j dq`, `j = 0..points`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(q_min: f64, q_max: f64, points: usize) -> Result<Self> {
        if !(q_min.is_finite() && q_max.is_finite() && q_max > q_min) {
            return Err(Error::InvalidGrid(format!("empty extent [{q_min}, {q_max}]")));
        }
        if points < 8 {
            return Err(Error::InvalidGrid(format!("{points} points is too few")));
        }
        Ok(Self { q_min, q_max, points })
    }

    pub fn spacing(&self) -> f64 {
        (self.q_max - self.q_min) / (self.points - 1) as f64
    }

    pub fn q(&self, j: usize) -> f64 {
        self.q_min + j as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.q(j)).collect()
    }

    /// Same extent with `points` samples.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        Self::new(self.q_min, self.q_max, points)
    }
}

/// Normalized wavefunction samples on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWavefunction {
    pub grid: Grid,
    pub amplitudes: Vec<C64>,
    pub hbar: f64,
}

impl GridWavefunction {
    /// Normalizes `sum |psi|^2 dq = 1` and checks that the density vanishes at
    /// both ends of the grid.
    pub fn new(grid: Grid, amplitudes: Vec<C64>, hbar: f64) -> Result<Self> {
        if amplitudes.len() != grid.points {
            return Err(Error::DimensionMismatch {
                expected: grid.points,
                actual: amplitudes.len(),
            });
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidXiModel(format!("hbar must be positive, got {hbar}")));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.spacing();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm });
        }
        let scale = 1.0 / norm.sqrt();
        let wf = Self {
            grid,
            amplitudes: amplitudes.into_iter().map(|a| a * scale).collect(),
            hbar,
        };
        let ratio = wf.boundary_ratio();
        if ratio > tolerance::BOUNDARY_DENSITY {
            return Err(Error::BoundaryLeakage { ratio });
        }
        Ok(wf)
    }

    pub fn rho(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.rho().iter().sum::<f64>() * self.grid.spacing()
    }

    /// Larger end-point density relative to the peak density.
    pub fn boundary_ratio(&self) -> f64 {
        let rho = self.rho();
        let peak = rho.iter().cloned().fold(0.0, f64::max);
        rho[0].max(rho[rho.len() - 1]) / peak
    }

    /// `S = hbar * arg psi`, unwrapped along the grid.
    pub fn phase(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.amplitudes.len());
        let mut offset = 0.0;
        let mut prev: Option<f64> = None;
        for a in &self.amplitudes {
            let raw = a.arg();
            if let Some(p) = prev {
                let mut jump = raw + offset - p;
                while jump > PI {
                    offset -= 2.0 * PI;
                    jump -= 2.0 * PI;
                }
                while jump < -PI {
                    offset += 2.0 * PI;
                    jump += 2.0 * PI;
                }
            }
            let unwrapped = raw + offset;
            prev = Some(unwrapped);
            out.push(unwrapped);
        }
        out.into_iter().map(|s| self.hbar * s).collect()
    }

    /// Points that are not grid end points and whose density is at least the
    /// cutoff fraction of the peak.
    pub fn valid_mask(&self) -> Vec<bool> {
        let rho = self.rho();
        let peak = rho.iter().cloned().fold(0.0, f64::max);
        let n = rho.len();
        (0..n)
            .map(|j| {
                j > 0
                    && j + 1 < n
                    && rho[j] >= tolerance::RHO_CUTOFF * peak
                    && rho[j - 1] > 0.0
                    && rho[j + 1] > 0.0
            })
            .collect()
    }

    /// `sum rho dq` over masked points.
    pub fn masked_weight(&self) -> f64 {
        let dq = self.grid.spacing();
        self.rho()
            .iter()
            .zip(self.valid_mask())
            .filter(|(_, ok)| !ok)
            .map(|(r, _)| r * dq)
            .sum()
    }

    pub fn mean_position(&self) -> f64 {
        let dq = self.grid.spacing();
        self.rho().iter().enumerate().map(|(j, r)| r * self.grid.q(j) * dq).sum()
    }

    pub fn position_variance(&self) -> f64 {
        let dq = self.grid.spacing();
        let mean = self.mean_position();
        self.rho()
            .iter()
            .enumerate()
            .map(|(j, r)| r * (self.grid.q(j) - mean).powi(2) * dq)
            .sum()
    }

    fn derivatives(&self) -> Derivatives {
        let dq = self.grid.spacing();
        let r: Vec<f64> = self.amplitudes.iter().map(|a| a.norm().ln()).collect();
        let s = self.phase();
        let valid = self.valid_mask();
        let n = r.len();
        let mut d = Derivatives {
            r1: vec![f64::NAN; n],
            r2: vec![f64::NAN; n],
            s1: vec![f64::NAN; n],
            s2: vec![f64::NAN; n],
            valid,
        };
        for j in (0..n).filter(|&j| d.valid[j]) {
            d.r1[j] = (r[j + 1] - r[j - 1]) / (2.0 * dq);
            d.r2[j] = (r[j + 1] - 2.0 * r[j] + r[j - 1]) / (dq * dq);
            d.s1[j] = (s[j + 1] - s[j - 1]) / (2.0 * dq);
            d.s2[j] = (s[j + 1] - 2.0 * s[j] + s[j - 1]) / (dq * dq);
        }
        d
    }

    /// `psi-hat` on the FFT frequency grid together with wavenumbers.
    fn spectrum(&self) -> (Vec<C64>, Vec<f64>) {
        let n = self.grid.points;
        let mut buf = self.amplitudes.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let dk = 2.0 * PI / (n as f64 * self.grid.spacing());
        let k = (0..n)
            .map(|j| if j < n.div_ceil(2) { j as f64 } else { j as f64 - n as f64 } * dk)
            .collect();
        (buf, k)
    }

    /// `<p>` and `<p^2>` with `p` applied in Fourier space.
    pub fn spectral_momentum_moments(&self) -> (f64, f64) {
        let (hat, k) = self.spectrum();
        let total: f64 = hat.iter().map(|h| h.norm_sqr()).sum();
        let p1: f64 = hat.iter().zip(&k).map(|(h, k)| h.norm_sqr() * self.hbar * k).sum();
        let p2: f64 = hat.iter().zip(&k).map(|(h, k)| h.norm_sqr() * (self.hbar * k).powi(2)).sum();
        (p1 / total, p2 / total)
    }

    /// `(1/2)<{q, p}> = Re <psi|q p|psi>` with `p` applied in Fourier space.
    pub fn spectral_symmetrized_qp(&self) -> f64 {
        let n = self.grid.points;
        let (mut hat, k) = self.spectrum();
        for (h, k) in hat.iter_mut().zip(&k) {
            *h *= self.hbar * k;
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut hat);
        let dq = self.grid.spacing();
        let value: C64 = (0..n)
            .map(|j| self.amplitudes[j].conj() * self.grid.q(j) * hat[j] / n as f64)
            .sum();
        value.re * dq
    }
}

struct Derivatives {
    r1: Vec<f64>,
    r2: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    valid: Vec<bool>,
}

/// C-valued quantity on a grid: `value(j, xi) = estimate[j] + (xi/hbar) error_coefficient[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCVal {
    pub estimate: Vec<f64>,
    pub error_coefficient: Vec<f64>,
    pub valid: Vec<bool>,
    pub hbar: f64,
}

impl GridCVal {
    pub fn value(&self, j: usize, xi: f64) -> Result<f64> {
        if j >= self.valid.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                dim: self.valid.len(),
            });
        }
        if !self.valid[j] {
            return Err(Error::MaskedGridPoint(j));
        }
        Ok(self.estimate[j] + xi / self.hbar * self.error_coefficient[j])
    }

    /// `<f>` and `<f^2>` over `rho dq` and the xi model (exact in the moments).
    pub fn moments(&self, wf: &GridWavefunction, model: &XiModel) -> (f64, f64) {
        let dq = wf.grid.spacing();
        let (m1, m2) = (model.moment(1) / self.hbar, model.moment(2) / (self.hbar * self.hbar));
        let rho = wf.rho();
        let mut first = 0.0;
        let mut second = 0.0;
        for j in (0..rho.len()).filter(|&j| self.valid[j]) {
            let (e, c) = (self.estimate[j], self.error_coefficient[j]);
            first += rho[j] * dq * (e + m1 * c);
            second += rho[j] * dq * (e * e + 2.0 * m1 * e * c + m2 * c * c);
        }
        (first, second)
    }
}

/// Field of `p~ = S' - (xi/2) rho'/rho`.
pub fn momentum_field(wf: &GridWavefunction) -> GridCVal {
    let d = wf.derivatives();
    GridCVal {
        estimate: d.s1.clone(),
        error_coefficient: d.r1.iter().map(|r| -wf.hbar * r).collect(),
        valid: d.valid,
        hbar: wf.hbar,
    }
}

/// Field of the free-particle `H~` for mass `mass`.
pub fn hamiltonian_field(wf: &GridWavefunction, mass: f64) -> GridCVal {
    let d = wf.derivatives();
    let h = wf.hbar;
    let n = d.valid.len();
    let estimate = (0..n)
        .map(|j| d.s1[j] * d.s1[j] / (2.0 * mass) - h * h / (2.0 * mass) * (d.r2[j] + d.r1[j] * d.r1[j]))
        .collect();
    let error_coefficient = (0..n)
        .map(|j| -h / (2.0 * mass) * (2.0 * d.r1[j] * d.s1[j] + d.s2[j]))
        .collect();
    GridCVal {
        estimate,
        error_coefficient,
        valid: d.valid,
        hbar: h,
    }
}

pub fn cval_momentum(wf: &GridWavefunction, j: usize, xi: f64) -> Result<f64> {
    momentum_field(wf).value(j, xi)
}

pub fn cval_hamiltonian_free(wf: &GridWavefunction, j: usize, xi: f64, mass: f64) -> Result<f64> {
    hamiltonian_field(wf, mass).value(j, xi)
}

fn check_gaussian_grid(sigma: f64, q0: f64, grid: &Grid) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidGrid(format!("width {sigma} must be positive")));
    }
    let per_sigma = sigma / grid.spacing();
    if per_sigma < MIN_POINTS_PER_SIGMA {
        return Err(Error::InvalidGrid(format!(
            "{per_sigma:.1} points per width, need {MIN_POINTS_PER_SIGMA}"
        )));
    }
    if q0 - grid.q_min < MIN_EXTENT_SIGMAS * sigma || grid.q_max - q0 < MIN_EXTENT_SIGMAS * sigma {
        return Err(Error::InvalidGrid(format!(
            "grid must extend {MIN_EXTENT_SIGMAS} widths on each side of the centre"
        )));
    }
    Ok(())
}

fn check_phase_resolution(max_wavenumber: f64, grid: &Grid) -> Result<()> {
    if max_wavenumber * grid.spacing() > PI / 4.0 {
        return Err(Error::InvalidGrid(format!(
            "phase advances {:.3} rad per cell; refine the grid",
            max_wavenumber * grid.spacing()
        )));
    }
    Ok(())
}

/// `psi(q) ~ exp(-(q - q0)^2 / 4 sigma^2 + i p0 q / hbar)`.
pub fn build_gaussian(sigma: f64, q0: f64, p0: f64, grid: Grid, hbar: f64) -> Result<GridWavefunction> {
    build_chirped_gaussian(sigma, q0, p0, 0.0, grid, hbar)
}

/// Gaussian with phase `S = p0 q + chirp (q - q0)^2 / 2`.
pub fn build_chirped_gaussian(
    sigma: f64,
    q0: f64,
    p0: f64,
    chirp: f64,
    grid: Grid,
    hbar: f64,
) -> Result<GridWavefunction> {
    check_gaussian_grid(sigma, q0, &grid)?;
    let reach = (grid.q_max - q0).abs().max((q0 - grid.q_min).abs());
    check_phase_resolution((p0.abs() + chirp.abs() * reach) / hbar, &grid)?;
    let amps = grid
        .coords()
        .into_iter()
        .map(|q| {
            let x = q - q0;
            let s = p0 * q + 0.5 * chirp * x * x;
            C64::from_polar((-x * x / (4.0 * sigma * sigma)).exp(), s / hbar)
        })
        .collect();
    GridWavefunction::new(grid, amps, hbar)
}

/// Flat-topped envelope `(1/2)[tanh((q + L)/w) - tanh((q - L)/w)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauEnvelope {
    pub half_width: f64,
    pub edge: f64,
}

impl PlateauEnvelope {
    pub fn eval(&self, q: f64) -> f64 {
        0.5 * (((q + self.half_width) / self.edge).tanh() - ((q - self.half_width) / self.edge).tanh())
    }

    /// Points at least [`INTERIOR_EDGE_WIDTHS`] edge widths inside the plateau.
    pub fn interior(&self, q: f64) -> bool {
        q.abs() <= self.half_width - INTERIOR_EDGE_WIDTHS * self.edge
    }
}

/// `psi(q) ~ envelope(q) exp(i p0 q / hbar)`.
pub fn build_plane_wave(p0: f64, grid: Grid, envelope: PlateauEnvelope, hbar: f64) -> Result<GridWavefunction> {
    if !(envelope.edge > 0.0 && envelope.half_width > INTERIOR_EDGE_WIDTHS * envelope.edge) {
        return Err(Error::InvalidGrid("plateau narrower than its edges".into()));
    }
    if envelope.edge / grid.spacing() < MIN_POINTS_PER_SIGMA / 4.0 {
        return Err(Error::InvalidGrid("envelope edge is under-resolved".into()));
    }
    check_phase_resolution(p0.abs() / hbar, &grid)?;
    let amps = grid
        .coords()
        .into_iter()
        .map(|q| C64::from_polar(envelope.eval(q), p0 * q / hbar))
        .collect();
    GridWavefunction::new(grid, amps, hbar)
}

/// The three kinetic-energy averages and the supporting checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageEquality {
    /// `<H~>`.
    pub h_cval: f64,
    /// `<psi|p^2|psi>/2m` with `p` applied spectrally.
    pub kinetic_operator: f64,
    /// `<p~^2>/2m`.
    pub p_cval_sq: f64,
    /// `<p~>` against the spectral `<psi|p|psi>`.
    pub p_cval_mean: f64,
    pub p_operator_mean: f64,
    /// Largest `|(1/4)(rho'/rho)^2 + (sqrt rho)''/sqrt rho - (1/2) rho''/rho|` with
    /// direct differences of `rho` and `sqrt rho`.
    pub identity_residual_max: f64,
    /// The same residual averaged over `rho dq`.
    pub identity_residual_mean: f64,
    pub masked_weight: f64,
}

impl AverageEquality {
    /// Largest relative spread among the three kinetic-energy values.
    pub fn relative_spread(&self) -> f64 {
        let v = [self.h_cval, self.kinetic_operator, self.p_cval_sq];
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        (hi - lo) / self.kinetic_operator.abs()
    }
}

/// Pointwise residual of `(1/4)(rho'/rho)^2 = -(sqrt rho)''/sqrt rho + (1/2) rho''/rho`.
pub fn density_identity_residuals(wf: &GridWavefunction) -> Vec<Option<f64>> {
    let dq = wf.grid.spacing();
    let rho = wf.rho();
    let root: Vec<f64> = rho.iter().map(|r| r.sqrt()).collect();
    wf.valid_mask()
        .into_iter()
        .enumerate()
        .map(|(j, ok)| {
            ok.then(|| {
                let d1 = (rho[j + 1] - rho[j - 1]) / (2.0 * dq) / rho[j];
                let d2 = (rho[j + 1] - 2.0 * rho[j] + rho[j - 1]) / (dq * dq) / rho[j];
                let q2 = (root[j + 1] - 2.0 * root[j] + root[j - 1]) / (dq * dq) / root[j];
                (0.25 * d1 * d1 + q2 - 0.5 * d2).abs()
            })
        })
        .collect()
}

pub fn average_equality_check(wf: &GridWavefunction, mass: f64, model: &XiModel) -> Result<AverageEquality> {
    let ratio = wf.boundary_ratio();
    if ratio > tolerance::BOUNDARY_DENSITY {
        return Err(Error::BoundaryLeakage { ratio });
    }
    if model.hbar != wf.hbar {
        return Err(Error::ProvenanceMismatch("xi model and wavefunction use different hbar".into()));
    }
    let p = momentum_field(wf);
    let h = hamiltonian_field(wf, mass);
    let (h_mean, _) = h.moments(wf, model);
    let (p_mean, p_sq) = p.moments(wf, model);
    let (p_op, p2_op) = wf.spectral_momentum_moments();
    let dq = wf.grid.spacing();
    let rho = wf.rho();
    let residuals = density_identity_residuals(wf);
    let identity_residual_max = residuals.iter().flatten().cloned().fold(0.0, f64::max);
    let identity_residual_mean = residuals
        .iter()
        .enumerate()
        .filter_map(|(j, r)| r.map(|r| r * rho[j] * dq))
        .sum();
    Ok(AverageEquality {
        h_cval: h_mean,
        kinetic_operator: p2_op / (2.0 * mass),
        p_cval_sq: p_sq / (2.0 * mass),
        p_cval_mean: p_mean,
        p_operator_mean: p_op,
        identity_residual_max,
        identity_residual_mean,
        masked_weight: wf.masked_weight(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionMomentumReport {
    /// `lhs = sigma_q^2 sigma_p~^2`, `rhs = cov^2 + hbar^2/4` with the spectral covariance.
    pub bound: BoundReport,
    pub var_q: f64,
    pub var_p: f64,
    /// `<q p~> - <q><p~>` over the grid ensemble.
    pub covariance_cval: f64,
    /// `(1/2)<{q,p}> - <q><p>` with `p` applied spectrally.
    pub covariance_operator: f64,
}

pub fn position_momentum_krs(wf: &GridWavefunction, model: &XiModel) -> Result<PositionMomentumReport> {
    let ratio = wf.boundary_ratio();
    if ratio > tolerance::BOUNDARY_DENSITY {
        return Err(Error::BoundaryLeakage { ratio });
    }
    let p = momentum_field(wf);
    let dq = wf.grid.spacing();
    let rho = wf.rho();
    let (p_mean, p_sq) = p.moments(wf, model);
    let var_p = p_sq - p_mean * p_mean;
    let q_mean = wf.mean_position();
    let var_q = wf.position_variance();
    let m1 = model.moment(1) / p.hbar;
    let qp: f64 = (0..rho.len())
        .filter(|&j| p.valid[j])
        .map(|j| rho[j] * dq * wf.grid.q(j) * (p.estimate[j] + m1 * p.error_coefficient[j]))
        .sum();
    let covariance_cval = qp - q_mean * p_mean;
    let (p_op, _) = wf.spectral_momentum_moments();
    let covariance_operator = wf.spectral_symmetrized_qp() - q_mean * p_op;
    let mut bound = BoundReport::new(
        BoundKind::PositionMomentum,
        var_q * var_p,
        covariance_operator.powi(2) + 0.25 * wf.hbar * wf.hbar,
    );
    bound.masked_weight = wf.masked_weight();
    Ok(PositionMomentumReport {
        bound,
        var_q,
        var_p,
        covariance_cval,
        covariance_operator,
    })
}

/// Positions where consecutive valid samples of `f(j)` change sign, by linear interpolation.
pub fn sign_changes(grid: &Grid, values: &[f64], valid: &[bool]) -> Vec<f64> {
    let idx: Vec<usize> = (0..values.len()).filter(|&j| valid[j]).collect();
    idx.windows(2)
        .filter(|w| w[1] == w[0] + 1 && values[w[0]].signum() != values[w[1]].signum())
        .map(|w| {
            let (a, b) = (values[w[0]], values[w[1]]);
            let (qa, qb) = (grid.q(w[0]), grid.q(w[1]));
            qa + (qb - qa) * a / (a - b)
        })
        .collect()
}

/// CSV of `q,rho,S,p_plus,p_minus,h_plus,h_minus` over valid points, with the
/// c-values at `xi = +hbar` and `xi = -hbar`.
pub fn grid_profile_csv(wf: &GridWavefunction, mass: f64) -> String {
    let p = momentum_field(wf);
    let h = hamiltonian_field(wf, mass);
    let rho = wf.rho();
    let s = wf.phase();
    let mut out = String::from("q,rho,S,p_plus,p_minus,h_plus,h_minus\n");
    for j in (0..rho.len()).filter(|&j| p.valid[j]) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            wf.grid.q(j),
            rho[j],
            s[j],
            p.estimate[j] + p.error_coefficient[j],
            p.estimate[j] - p.error_coefficient[j],
            h.estimate[j] + h.error_coefficient[j],
            h.estimate[j] - h.error_coefficient[j],
        );
    }
    out
}
