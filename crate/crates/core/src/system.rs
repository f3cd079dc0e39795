//! Constellations, quantizers and the Nakagami-m channel, plus energy and
//! SNR bookkeeping.
//!
//! Amplitudes and boundaries are stored raw. Rescaling to unit energy is
//! always an explicit call ([`Constellation::unit_energy`]).

use crate::error::{invalid, Error, Result};
use crate::specfun::{gamma_reg_pair, upper_gamma_reg};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

fn strictly_increasing_positive(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite() && *x > 0.0) && xs.windows(2).all(|w| w[0] < w[1])
}

/// Symmetric M-PAM constellation `{±ρ_0, …, ±ρ_{M/2-1}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstellation")]
pub struct Constellation {
    amplitudes: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstellation {
    amplitudes: Vec<f64>,
}

impl TryFrom<RawConstellation> for Constellation {
    type Error = Error;
    fn try_from(raw: RawConstellation) -> Result<Self> {
        Constellation::new(raw.amplitudes)
    }
}

impl Constellation {
    /// Builds from the positive half; `M = 2 * amplitudes.len()` must be a
    /// power of two and at least 4.
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        let half = amplitudes.len();
        if half < 2 || !half.is_power_of_two() {
            return Err(invalid(
                "constellation",
                format!("M = {} must be a power of two >= 4", 2 * half),
            ));
        }
        if !strictly_increasing_positive(&amplitudes) {
            return Err(invalid(
                "constellation",
                "amplitudes must be positive and strictly increasing",
            ));
        }
        Ok(Self { amplitudes })
    }

    /// Equidistant `{±(2i+1)·scale}`.
    pub fn equidistant(order: usize, scale: f64) -> Result<Self> {
        Self::new((0..order / 2).map(|i| (2 * i + 1) as f64 * scale).collect())
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Number of symbols `M`.
    pub fn order(&self) -> usize {
        2 * self.amplitudes.len()
    }

    /// `M / 2`.
    pub fn half(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitude(&self, i: usize) -> Result<f64> {
        self.amplitudes
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.half(),
            })
    }

    pub fn symbol_energy(&self) -> f64 {
        symbol_energy(self)
    }

    /// Rescaled copy with `Σ ρ_i² = 1` (so `E_s = 2/M`).
    pub fn unit_energy(&self) -> Self {
        let norm = self.amplitudes.iter().map(|r| r * r).sum::<f64>().sqrt();
        Self {
            amplitudes: self.amplitudes.iter().map(|r| r / norm).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.amplitudes.iter().map(|r| r * factor).collect())
    }

    /// Smallest ratio `ρ_{i+1}/ρ_i` between adjacent amplitudes.
    pub fn min_adjacent_ratio(&self) -> f64 {
        self.amplitudes
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// `E_s = (2/M) Σ ρ_i²`.
pub fn symbol_energy(c: &Constellation) -> f64 {
    2.0 * c.amplitudes.iter().map(|r| r * r).sum::<f64>() / c.order() as f64
}

/// Geometric constellation with amplitudes `C ρ^{M/2-i}` and `C² Σ_{i=1}^{M/2} ρ^{2i} = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricConstellation {
    pub rho: f64,
    pub order: usize,
}

impl GeometricConstellation {
    pub fn new(rho: f64, order: usize) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(invalid("geometric constellation", format!("rho = {rho} not in (0,1)")));
        }
        if order < 4 || !order.is_power_of_two() {
            return Err(invalid(
                "geometric constellation",
                format!("M = {order} must be a power of two >= 4"),
            ));
        }
        Ok(Self { rho, order })
    }

    /// Normalizing constant `C`.
    pub fn normalizer(&self) -> f64 {
        let s: f64 = (1..=self.order / 2)
            .map(|i| self.rho.powi(2 * i as i32))
            .sum();
        1.0 / s.sqrt()
    }

    pub fn materialize(&self) -> Constellation {
        let c = self.normalizer();
        let half = self.order / 2;
        let amplitudes = (0..half)
            .map(|i| c * self.rho.powi((half - i) as i32))
            .collect();
        Constellation { amplitudes }
    }
}

/// Symmetric b-bit quantizer with positive boundaries `q_1 < … < q_K`,
/// `K = 2^{b-1} - 1`, and implicit `q_0 = 0`, `q_{K+1} = ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuantizer")]
pub struct Quantizer {
    boundaries: Vec<f64>,
    bits: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantizer {
    boundaries: Vec<f64>,
    bits: u32,
}

impl TryFrom<RawQuantizer> for Quantizer {
    type Error = Error;
    fn try_from(raw: RawQuantizer) -> Result<Self> {
        Quantizer::new(raw.boundaries, raw.bits)
    }
}

/// `K = 2^{b-1} - 1`.
pub fn boundary_count(bits: u32) -> usize {
    (1usize << (bits - 1)) - 1
}

impl Quantizer {
    pub fn new(boundaries: Vec<f64>, bits: u32) -> Result<Self> {
        if !(2..=24).contains(&bits) {
            return Err(invalid("quantizer", format!("bits = {bits} must be in [2, 24]")));
        }
        let k = boundary_count(bits);
        if boundaries.len() != k {
            return Err(invalid(
                "quantizer",
                format!("{bits}-bit quantizer needs {k} boundaries, got {}", boundaries.len()),
            ));
        }
        if !strictly_increasing_positive(&boundaries) {
            return Err(invalid(
                "quantizer",
                "boundaries must be positive and strictly increasing",
            ));
        }
        Ok(Self { boundaries, bits })
    }

    /// Boundaries `q_y = q_1 / ratio^{y-1}` (constant adjacent ratio `q_{y-1}/q_y = ratio`).
    pub fn geometric(q1: f64, ratio: f64, bits: u32) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(invalid("quantizer", format!("ratio {ratio} not in (0,1)")));
        }
        let k = boundary_count(bits);
        Self::new((0..k).map(|y| q1 / ratio.powi(y as i32)).collect(), bits)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of finite positive boundaries `K`.
    pub fn k(&self) -> usize {
        self.boundaries.len()
    }

    /// `q_y` for `y ∈ [0, K+1]`, with `q_0 = 0` and `q_{K+1} = ∞`.
    pub fn edge(&self, y: usize) -> f64 {
        match y {
            0 => 0.0,
            y if y <= self.k() => self.boundaries[y - 1],
            _ => f64::INFINITY,
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.boundaries.iter().map(|q| q * factor).collect(), self.bits)
    }

    /// Adjacent ratios `q_{y-1}/q_y` for `y = 2..K`.
    pub fn adjacent_ratios(&self) -> Vec<f64> {
        self.boundaries.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

/// Uniform quantizer `q_y = y · step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformQuantizer {
    pub step: f64,
    pub bits: u32,
}

impl UniformQuantizer {
    pub fn materialize(&self) -> Result<Quantizer> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("uniform quantizer", format!("step {} must be positive", self.step)));
        }
        let k = boundary_count(self.bits.max(1));
        Quantizer::new((1..=k).map(|y| y as f64 * self.step).collect(), self.bits)
    }
}

/// Nakagami-m fading `|h|` with spread `Ω` and additive noise variance `σ²`.
///
/// `Z = |h|²` is Gamma distributed with shape `m` and scale `Ω/m`. The
/// in-phase noise sample has variance `σ²/2`. `sigma2 = 0` denotes the
/// noiseless regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel")]
pub struct ChannelModel {
    pub m: f64,
    pub omega: f64,
    pub sigma2: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    m: f64,
    omega: f64,
    sigma2: f64,
}

impl TryFrom<RawChannel> for ChannelModel {
    type Error = Error;
    fn try_from(raw: RawChannel) -> Result<Self> {
        ChannelModel::new(raw.m, raw.omega, raw.sigma2)
    }
}

impl ChannelModel {
    pub fn new(m: f64, omega: f64, sigma2: f64) -> Result<Self> {
        if !(m >= 0.5 && m.is_finite()) {
            return Err(invalid("channel", format!("shape m = {m} must be >= 1/2")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("channel", format!("spread omega = {omega} must be positive")));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(invalid("channel", format!("noise variance {sigma2} must be >= 0")));
        }
        Ok(Self { m, omega, sigma2 })
    }

    pub fn noiseless(m: f64, omega: f64) -> Result<Self> {
        Self::new(m, omega, 0.0)
    }

    /// Channel whose noise gives `E_s/σ² = snr` for constellation `c`.
    pub fn at_snr(m: f64, omega: f64, c: &Constellation, snr: f64) -> Result<Self> {
        if !(snr > 0.0) {
            return Err(invalid("channel", format!("snr {snr} must be positive")));
        }
        Self::new(m, omega, symbol_energy(c) / snr)
    }

    pub fn at_snr_db(m: f64, omega: f64, c: &Constellation, snr_db: f64) -> Result<Self> {
        Self::at_snr(m, omega, c, db_to_linear(snr_db))
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.m, self.omega, sigma2)
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma2 == 0.0
    }

    /// `Some(m)` when the shape is a positive integer.
    pub fn integer_m(&self) -> Option<u32> {
        (self.m.fract() == 0.0 && self.m >= 1.0 && self.m <= 1e6).then_some(self.m as u32)
    }

    /// `P(Z < z)`.
    pub fn z_cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        gamma_reg_pair(self.m, self.m * z / self.omega)
            .map(|(p, _)| p)
            .unwrap_or(1.0)
    }

    /// `P(Z > z)`.
    pub fn z_sf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        upper_gamma_reg(self.m, self.m * z / self.omega).unwrap_or(0.0)
    }

    /// `P(lo < Z < hi)`, differencing whichever tail keeps precision.
    pub fn z_mass(&self, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        if lo >= self.omega {
            (self.z_sf(lo) - self.z_sf(hi)).max(0.0)
        } else {
            (self.z_cdf(hi) - self.z_cdf(lo)).max(0.0)
        }
    }

    /// Density of `Z = |h|²`.
    pub fn z_pdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return if self.m < 1.0 { f64::INFINITY } else if self.m == 1.0 { 1.0 / self.omega } else { 0.0 };
        }
        let ln = self.m * (self.m / self.omega).ln() + (self.m - 1.0) * z.ln()
            - self.m * z / self.omega
            - crate::specfun::ln_gamma(self.m);
        ln.exp()
    }

    /// Density of the amplitude `|h|` (Nakagami-m).
    pub fn amplitude_pdf(&self, t: f64) -> f64 {
        let m = self.m;
        let power = 2.0 * m - 1.0;
        if t <= 0.0 && power > 0.0 {
            return 0.0;
        }
        let t_term = if power == 0.0 { 0.0 } else { power * t.ln() };
        let ln = std::f64::consts::LN_2 + m * (m / self.omega).ln() + t_term
            - m * t * t / self.omega
            - crate::specfun::ln_gamma(m);
        ln.exp()
    }

    /// Gamma sampler for `Z`.
    pub fn sampler(&self) -> FadingSampler {
        FadingSampler {
            gamma: Gamma::new(self.m, self.omega / self.m).expect("validated channel"),
        }
    }
}

/// Draws fading amplitudes `|h| = √Z`.
#[derive(Debug, Clone, Copy)]
pub struct FadingSampler {
    gamma: Gamma<f64>,
}

impl FadingSampler {
    pub fn amplitude<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.gamma.sample(rng).sqrt()
    }

    pub fn power<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.gamma.sample(rng)
    }
}

/// One draw of `|h|` from the channel.
pub fn sample_fading<R: Rng + ?Sized>(ch: &ChannelModel, rng: &mut R) -> f64 {
    ch.sampler().amplitude(rng)
}

/// Linear and dB forms of an SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr {
    pub linear: f64,
    pub db: f64,
}

/// `SNR = E_s / σ²`.
pub fn snr_of(c: &Constellation, ch: &ChannelModel) -> Snr {
    let linear = symbol_energy(c) / ch.sigma2;
    Snr {
        linear,
        db: linear_to_db(linear),
    }
}

/// Noise variance giving `snr_db` for symbol energy `es`.
pub fn sigma2_for_snr_db(es: f64, snr_db: f64) -> f64 {
    es / db_to_linear(snr_db)
}

/// Per-symbol SNR in the normalization `2 ρ_i² SNR / E_s²`.
///
/// This equals the likelihood gain [`symbol_gain`] only when `E_s = 1`;
/// the SEP engines use [`symbol_gain`].
pub fn per_symbol_snr(c: &Constellation, i: usize, snr: f64) -> Result<f64> {
    let rho = c.amplitude(i)?;
    let es = symbol_energy(c);
    Ok(2.0 * rho * rho * snr / (es * es))
}

/// Gain `2 ρ_i² / σ² = 2 ρ_i² SNR / E_s` multiplying `z` in the likelihood
/// `Q(-√2 q/σ + √(gain · z))` for `r = |h| ρ_i + w`, `w ~ N(0, σ²/2)`.
pub fn symbol_gain(c: &Constellation, i: usize, snr: f64) -> Result<f64> {
    let rho = c.amplitude(i)?;
    Ok(2.0 * rho * rho * snr / symbol_energy(c))
}
