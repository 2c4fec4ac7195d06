//! The global random variable xi: its distribution, moments and sampler.
//!
//! Every ensemble average in this crate is an average of a polynomial in xi
//! of degree at most four, so a model is fully characterized, for exact
//! purposes, by its first four moments.

use std::ops::{Add, Mul, Neg, Sub};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

/// Highest power of xi tracked by [`XiPoly`].
pub const MAX_DEGREE: usize = 4;

/// Shape of the xi distribution before scaling by `hbar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiKind {
    /// `+hbar` or `-hbar` with probability one half each.
    Binary,
    /// Uniform on `[-sqrt(3) hbar, sqrt(3) hbar]`.
    Uniform,
    /// Normal with mean zero and standard deviation `hbar`.
    Gaussian,
    /// Finite support in action units.
    CustomDiscrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

impl XiKind {
    pub fn name(&self) -> &'static str {
        match self {
            XiKind::Binary => "binary",
            XiKind::Uniform => "uniform",
            XiKind::Gaussian => "gaussian",
            XiKind::CustomDiscrete { .. } => "custom_discrete",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "binary" => Ok(XiKind::Binary),
            "uniform" => Ok(XiKind::Uniform),
            "gaussian" => Ok(XiKind::Gaussian),
            other => Err(Error::InvalidXiModel(format!("unknown xi kind '{other}'"))),
        }
    }
}

/// Distribution of xi together with the sampler seed.
///
/// `scale` multiplies the width of the distribution while `hbar` stays the
/// constant used in `xi / hbar`; away from the classical-limit scan it is 1 and
/// the variance equals `hbar^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiModel {
    pub kind: XiKind,
    pub hbar: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn unit_scale() -> f64 {
    1.0
}

impl XiModel {
    pub fn new(kind: XiKind, hbar: f64, seed: u64) -> Result<Self> {
        let model = Self {
            kind,
            hbar,
            scale: 1.0,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn binary(hbar: f64) -> Self {
        Self::new(XiKind::Binary, hbar, 0).expect("binary model with positive hbar")
    }

    pub fn uniform(hbar: f64) -> Self {
        Self::new(XiKind::Uniform, hbar, 0).expect("uniform model with positive hbar")
    }

    pub fn gaussian(hbar: f64) -> Self {
        Self::new(XiKind::Gaussian, hbar, 0).expect("gaussian model with positive hbar")
    }

    pub fn custom_discrete(values: Vec<f64>, probabilities: Vec<f64>, hbar: f64) -> Result<Self> {
        Self::new(XiKind::CustomDiscrete { values, probabilities }, hbar, 0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same shape with the width multiplied by `s` in `[0, 1]`; `hbar` is unchanged.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && (0.0..=1.0).contains(&s)) {
            return Err(Error::InvalidScale(s));
        }
        Ok(Self {
            scale: self.scale * s,
            ..self.clone()
        })
    }

    /// Checks mean zero and variance `(scale * hbar)^2`.
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::InvalidXiModel(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(Error::InvalidXiModel(format!("invalid scale {}", self.scale)));
        }
        if let XiKind::CustomDiscrete { values, probabilities } = &self.kind {
            if values.is_empty() || values.len() != probabilities.len() {
                return Err(Error::InvalidXiModel("support and probabilities differ in length".into()));
            }
            if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                || values.iter().any(|v| !v.is_finite())
            {
                return Err(Error::InvalidXiModel("non-finite or negative entries".into()));
            }
            let total: f64 = probabilities.iter().sum();
            if (total - 1.0).abs() > tolerance::NORM {
                return Err(Error::InvalidXiModel(format!("probabilities sum to {total}")));
            }
        }
        let width = self.scale * self.hbar;
        let mean = self.moment(1);
        let variance = self.moment(2);
        if mean.abs() > tolerance::IDENTITY * self.hbar.max(1.0) {
            return Err(Error::InvalidXiModel(format!("mean {mean} is not zero")));
        }
        if (variance - width * width).abs() > tolerance::IDENTITY * (self.hbar * self.hbar).max(1.0) {
            return Err(Error::InvalidXiModel(format!(
                "variance {variance} differs from {}",
                width * width
            )));
        }
        Ok(())
    }

    /// Raw moment `E[xi^k]` for `k <= 4`.
    pub fn moment(&self, k: usize) -> f64 {
        assert!(k <= MAX_DEGREE, "moments above {MAX_DEGREE} are not tracked");
        let w = self.scale * self.hbar;
        match &self.kind {
            XiKind::Binary => {
                if k % 2 == 1 {
                    0.0
                } else {
                    w.powi(k as i32)
                }
            }
            XiKind::Uniform => {
                // a = sqrt(3) w, E[xi^k] = a^k / (k + 1) for even k.
                if k % 2 == 1 {
                    0.0
                } else {
                    (3f64.sqrt() * w).powi(k as i32) / (k as f64 + 1.0)
                }
            }
            XiKind::Gaussian => match k {
                0 => 1.0,
                2 => w * w,
                4 => 3.0 * w.powi(4),
                _ => 0.0,
            },
            XiKind::CustomDiscrete { values, probabilities } => values
                .iter()
                .zip(probabilities)
                .map(|(v, p)| p * (self.scale * v).powi(k as i32))
                .sum(),
        }
    }

    pub fn moments(&self) -> [f64; MAX_DEGREE + 1] {
        std::array::from_fn(|k| self.moment(k))
    }

    pub fn third_moment(&self) -> f64 {
        self.moment(3)
    }

    /// Fails unless the third moment vanishes (relative to `hbar^3`).
    pub fn require_vanishing_third_moment(&self) -> Result<()> {
        let m3 = self.third_moment();
        if m3.abs() > tolerance::IDENTITY * self.hbar.powi(3).max(1.0) {
            Err(Error::ThirdMomentViolation(m3))
        } else {
            Ok(())
        }
    }

    /// `(value, probability)` pairs for finite-support models.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        let w = self.scale * self.hbar;
        match &self.kind {
            XiKind::Binary => Some(vec![(w, 0.5), (-w, 0.5)]),
            XiKind::CustomDiscrete { values, probabilities } => Some(
                values
                    .iter()
                    .zip(probabilities)
                    .map(|(v, p)| (self.scale * v, *p))
                    .collect(),
            ),
            XiKind::Uniform | XiKind::Gaussian => None,
        }
    }

    /// Sampler on substream `stream` of the model seed.
    pub fn sampler(&self, stream: u64) -> XiSampler {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        XiSampler::new(self, rng)
    }
}

/// Draws i.i.d. xi values.
pub struct XiSampler {
    kind: SamplerKind,
    width: f64,
    rng: ChaCha8Rng,
}

enum SamplerKind {
    Binary,
    Uniform,
    Gaussian,
    Discrete(Vec<f64>, WeightedIndex<f64>),
}

impl XiSampler {
    fn new(model: &XiModel, rng: ChaCha8Rng) -> Self {
        let kind = match &model.kind {
            XiKind::Binary => SamplerKind::Binary,
            XiKind::Uniform => SamplerKind::Uniform,
            XiKind::Gaussian => SamplerKind::Gaussian,
            XiKind::CustomDiscrete { values, probabilities } => SamplerKind::Discrete(
                values.iter().map(|v| v * model.scale).collect(),
                WeightedIndex::new(probabilities).expect("validated probabilities"),
            ),
        };
        Self {
            kind,
            width: model.scale * model.hbar,
            rng,
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn draw(&mut self) -> f64 {
        match &self.kind {
            SamplerKind::Binary => {
                if self.rng.random::<bool>() {
                    self.width
                } else {
                    -self.width
                }
            }
            SamplerKind::Uniform => {
                let a = 3f64.sqrt() * self.width;
                self.rng.random_range(-a..=a)
            }
            SamplerKind::Gaussian => self.width * self.rng.sample::<f64, _>(StandardNormal),
            SamplerKind::Discrete(values, index) => values[index.sample(&mut self.rng)],
        }
    }
}

/// `count` i.i.d. draws from the model, reproducible for a fixed seed.
pub fn sample_xi(model: &XiModel, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidXiModel("sample count must be at least 1".into()));
    }
    model.validate()?;
    let mut sampler = model.sampler(0);
    Ok((0..count).map(|_| sampler.draw()).collect())
}

/// Real polynomial in xi, `sum_k c[k] xi^k`, degree at most [`MAX_DEGREE`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct XiPoly(pub [f64; MAX_DEGREE + 1]);

impl XiPoly {
    pub fn constant(c: f64) -> Self {
        let mut p = [0.0; MAX_DEGREE + 1];
        p[0] = c;
        Self(p)
    }

    /// `c0 + c1 xi`.
    pub fn affine(c0: f64, c1: f64) -> Self {
        let mut p = [0.0; MAX_DEGREE + 1];
        p[0] = c0;
        p[1] = c1;
        Self(p)
    }

    /// `xi / hbar`.
    pub fn xi_over(hbar: f64) -> Self {
        Self::affine(0.0, 1.0 / hbar)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * xi + c)
    }

    /// `p(-xi)`.
    pub fn reflect(&self) -> Self {
        let mut out = self.0;
        for (k, c) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *c = -*c;
            }
        }
        Self(out)
    }

    /// `E[p(xi)]` given raw moments.
    pub fn expect(&self, moments: &[f64; MAX_DEGREE + 1]) -> f64 {
        self.0.iter().zip(moments).map(|(c, m)| c * m).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|c| c * s))
    }
}

impl Add for XiPoly {
    type Output = XiPoly;
    fn add(self, rhs: XiPoly) -> XiPoly {
        Self(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for XiPoly {
    type Output = XiPoly;
    fn sub(self, rhs: XiPoly) -> XiPoly {
        Self(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for XiPoly {
    type Output = XiPoly;
    fn neg(self) -> XiPoly {
        self.scale(-1.0)
    }
}

impl Mul for XiPoly {
    type Output = XiPoly;
    fn mul(self, rhs: XiPoly) -> XiPoly {
        assert!(
            self.degree() + rhs.degree() <= MAX_DEGREE,
            "product exceeds degree {MAX_DEGREE}"
        );
        let mut out = [0.0; MAX_DEGREE + 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                if i + j <= MAX_DEGREE {
                    out[i + j] += a * b;
                }
            }
        }
        Self(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn binary_draws_are_plus_minus_hbar() {
        let model = XiModel::binary(0.7).with_seed(11);
        let xs = sample_xi(&model, 1000).unwrap();
        assert!(xs.iter().all(|&x| x == 0.7 || x == -0.7));
    }

    #[test]
    fn binary_mean_within_clt_bound() {
        let model = XiModel::binary(1.0).with_seed(5);
        let n = 1_000_000;
        let xs = sample_xi(&model, n).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let model = XiModel::gaussian(1.0).with_seed(99);
        assert_eq!(sample_xi(&model, 64).unwrap(), sample_xi(&model, 64).unwrap());
        let other = model.clone().with_seed(100);
        assert_ne!(sample_xi(&model, 64).unwrap(), sample_xi(&other, 64).unwrap());
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(sample_xi(&XiModel::binary(1.0), 0).is_err());
    }

    #[test]
    fn analytic_moments() {
        for model in [XiModel::binary(2.0), XiModel::uniform(2.0), XiModel::gaussian(2.0)] {
            assert_eq!(model.moment(0), 1.0);
            assert_abs_diff_eq!(model.moment(1), 0.0);
            assert_abs_diff_eq!(model.moment(2), 4.0, epsilon = 1e-12);
            assert_abs_diff_eq!(model.moment(3), 0.0);
        }
        assert_abs_diff_eq!(XiModel::uniform(1.0).moment(4), 9.0 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(XiModel::gaussian(1.0).moment(4), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn custom_discrete_validation() {
        // Skewed three-point law with mean 0, variance 1, nonzero third moment.
        let r = std::f64::consts::SQRT_2;
        let m = XiModel::custom_discrete(vec![-1.0 / r, r], vec![2.0 / 3.0, 1.0 / 3.0], 1.0).unwrap();
        assert!(m.require_vanishing_third_moment().is_err());
        assert!(XiModel::custom_discrete(vec![1.0, 2.0], vec![0.5, 0.5], 1.0).is_err());
        assert!(XiModel::custom_discrete(vec![1.0, -1.0], vec![0.5, 0.4], 1.0).is_err());
    }

    #[test]
    fn rescaling_scales_moments() {
        let m = XiModel::binary(1.5).rescaled(0.5).unwrap();
        assert_abs_diff_eq!(m.moment(2), 0.75f64.powi(2), epsilon = 1e-15);
        assert!(XiModel::binary(1.0).rescaled(1.5).is_err());
        assert!(XiModel::binary(1.0).rescaled(-0.1).is_err());
    }

    #[test]
    fn poly_algebra() {
        let p = XiPoly::affine(1.0, 2.0);
        let q = XiPoly::affine(-1.0, 3.0);
        let r = p * q;
        assert_eq!(r.0, [-1.0, 1.0, 6.0, 0.0, 0.0]);
        assert_eq!(r.eval(2.0), -1.0 + 2.0 + 24.0);
        assert_eq!(r.reflect().eval(2.0), r.eval(-2.0));
        assert_eq!(r.degree(), 2);
    }
}
