//! Symbol error probability engines.
//!
//! Received sample on the in-phase branch: `r = |h| x + w`, `w ~ N(0, σ²/2)`,
//! `|h|² = Z ~ Gamma(m, Ω/m)`. Given `Z = z` and `x = ρ_i`, output `y > 0`
//! has probability
//!
//! ```text
//! Q(-√2 q_y/σ + √(b_i z)) - Q(-√2 q_{y-1}/σ + √(b_i z)),   b_i = 2ρ_i²/σ²
//! ```
//!
//! and the closed form integrates each term against the Gamma density over
//! the ML decision region with [`h_function`].

use crate::detector::{decision_region, interval_probability, noiseless_region, DecisionRegion};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Integral};
use crate::specfun::{f_integral, gamma_reg_pair, ln_gamma, ln_lower_gamma_reg_ln, ln_upper_gamma_reg_ln, q_func};
use crate::system::{symbol_energy, ChannelModel, Constellation, GeometricConstellation, Quantizer};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

/// Slack allowed when clamping a computed probability into `[0, 1]`.
pub const PROBABILITY_SLACK: f64 = 1e-12;

const QUAD_ABS_TOL: f64 = 1e-13;
const QUAD_MAX_SEGMENTS: usize = 4000;
const TAIL_MASS: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SepMethod {
    ClosedForm,
    Quadrature,
    Noiseless,
    BoundUpper,
    BoundLower,
    Aqnm,
}

impl SepMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SepMethod::ClosedForm => "closed_form",
            SepMethod::Quadrature => "quadrature",
            SepMethod::Noiseless => "noiseless",
            SepMethod::BoundUpper => "bound_upper",
            SepMethod::BoundLower => "bound_lower",
            SepMethod::Aqnm => "aqnm",
        }
    }
}

/// A probability with the engine that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SepResult {
    pub value: f64,
    pub method: SepMethod,
    pub abs_error_est: f64,
}

impl SepResult {
    fn checked(value: f64, method: SepMethod, abs_error_est: f64) -> Result<Self> {
        let value = clamp_probability(value)?;
        Ok(Self {
            value,
            method,
            abs_error_est: abs_error_est.max(0.0),
        })
    }
}

/// Clamps into `[0, 1]` when within [`PROBABILITY_SLACK`], errors otherwise.
pub fn clamp_probability(value: f64) -> Result<f64> {
    if !(value >= -PROBABILITY_SLACK && value <= 1.0 + PROBABILITY_SLACK) {
        return Err(Error::ProbabilityRange { value });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Neumaier-compensated sum, accumulated in descending magnitude.
fn compensated_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut sum = 0.0;
    let mut comp = 0.0;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

fn ln_factorial(n: u32) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn gamma_sf(m: f64, omega: f64, z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    gamma_reg_pair(m, m * z / omega).map(|(_, q)| q).unwrap_or(0.0)
}

fn h_preconditions(b: f64, c: f64, z_lo: f64, z_hi: f64) -> Result<()> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("H: gain b = {b} must be finite and >= 0")));
    }
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("H: offset c = {c} must be >= 0")));
    }
    if !(z_lo >= 0.0 && z_lo <= z_hi) || z_lo.is_infinite() {
        return Err(Error::Domain(format!("H: need 0 <= z_lo <= z_hi, got [{z_lo}, {z_hi}]")));
    }
    Ok(())
}

/// `H_{m,Ω}(b, c, z_lo, z_hi) = ∫_{z_lo}^{z_hi} Q(-c + √(b z)) f_Z(z) dz` as a
/// finite series, valid for integer `m >= 1`.
///
/// `c = ∞` returns the Gamma mass of the interval; `b = 0` returns
/// `Q(-c)` times that mass.
pub fn h_function(m: u32, omega: f64, b: f64, c: f64, z_lo: f64, z_hi: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("H: closed form needs integer m >= 1".into()));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("H: spread {omega} must be positive")));
    }
    h_preconditions(b, c, z_lo, z_hi)?;
    if z_lo == z_hi {
        return Ok(0.0);
    }
    let mf = m as f64;
    let ch = ChannelModel { m: mf, omega, sigma2: 0.0 };
    if c.is_infinite() {
        return Ok(ch.z_mass(z_lo, z_hi));
    }
    if b == 0.0 {
        return Ok(q_func(-c) * ch.z_mass(z_lo, z_hi));
    }

    let boundary_lo = q_func(-c + (b * z_lo).sqrt()) * gamma_sf(mf, omega, z_lo);
    let boundary_hi = if z_hi.is_infinite() {
        0.0
    } else {
        q_func(-c + (b * z_hi).sqrt()) * gamma_sf(mf, omega, z_hi)
    };

    let k = mf / (omega * b);
    let a = 2.0 * k + 1.0;
    let sqrt_a = a.sqrt();
    let u = |z: f64| {
        if z.is_infinite() {
            f64::INFINITY
        } else {
            (-c + a * (b * z).sqrt()) / sqrt_a
        }
    };
    let (u_hi, u_lo) = (u(z_hi), u(z_lo));
    let ln_sqrt_2pi = 0.5 * (2.0 * PI).ln();

    let mut terms = vec![boundary_lo, -boundary_hi];
    if c == 0.0 {
        // single sum over l = 2r
        let ratio = mf / (omega * b + 2.0 * mf);
        let root = (omega * b / (omega * b + 2.0 * mf)).sqrt();
        for r in 0..m {
            let f = f_integral(u_hi, u_lo, 2 * r);
            let t = ratio.powi(r as i32) * root * f / ((2.0 * PI).sqrt() * ln_factorial(r).exp());
            terms.push(-t);
        }
    } else {
        let ln_pref = -0.5 * c * c * (2.0 * k / a);
        let ln_k = k.ln();
        let ln_c = c.ln();
        let ln_a = a.ln();
        for r in 0..m {
            for l in 0..=2 * r {
                let f = f_integral(u_hi, u_lo, l);
                if f == 0.0 {
                    continue;
                }
                let ln_mag = r as f64 * ln_k + ln_binomial(2 * r, l) + ln_pref
                    + (2 * r - l) as f64 * ln_c
                    - ln_sqrt_2pi
                    - ln_factorial(r)
                    - (2.0 * r as f64 - 0.5 * (l as f64 - 1.0)) * ln_a
                    + f.abs().ln();
                terms.push(-f.signum() * ln_mag.exp());
            }
        }
    }
    Ok(compensated_sum(terms))
}

/// Value and absolute error estimate of a numerical integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadValue {
    pub value: f64,
    pub abs_error: f64,
}

/// Upper amplitude where the remaining Gamma tail mass drops below `TAIL_MASS`.
fn amplitude_cutoff(ch: &ChannelModel) -> f64 {
    let mut t = (ch.omega).sqrt().max(1e-300);
    while ch.z_sf(t * t) > TAIL_MASS {
        t *= 1.5;
    }
    t
}

fn finish(integral: Integral, tail: f64) -> Result<QuadValue> {
    let abs_error = integral.abs_error + tail;
    if !integral.converged {
        return Err(Error::Quadrature {
            value: integral.value,
            abs_error,
        });
    }
    Ok(QuadValue {
        value: integral.value,
        abs_error,
    })
}

/// Integrates `g(t) f_{|h|}(t)` over amplitudes `t ∈ (√z_lo, √z_hi)`.
fn integrate_over_amplitude<G: Fn(f64) -> f64>(
    ch: &ChannelModel,
    g: G,
    z_lo: f64,
    z_hi: f64,
    breaks: &[f64],
) -> Result<QuadValue> {
    let t_lo = z_lo.sqrt();
    let cutoff = amplitude_cutoff(ch);
    let (t_hi, tail) = if z_hi.sqrt() > cutoff {
        (cutoff, ch.z_sf(cutoff * cutoff))
    } else {
        (z_hi.sqrt(), 0.0)
    };
    if !(t_hi > t_lo) {
        return Ok(QuadValue { value: 0.0, abs_error: tail });
    }
    // the Nakagami density peaks near √Ω and has width ~ √(Ω/m)
    let mut pts: Vec<f64> = breaks.to_vec();
    let scale = ch.omega.sqrt();
    pts.extend([0.25 * scale, scale, 2.0 * scale]);
    let integral = integrate(
        |t| g(t) * ch.amplitude_pdf(t),
        t_lo,
        t_hi,
        &pts,
        QUAD_ABS_TOL,
        0.0,
        QUAD_MAX_SEGMENTS,
    );
    finish(integral, tail)
}

/// Numerical `H_{m,Ω}` for any real `m >= 1/2`.
pub fn h_function_quad(m: f64, omega: f64, b: f64, c: f64, z_lo: f64, z_hi: f64) -> Result<QuadValue> {
    h_preconditions(b, c, z_lo, z_hi)?;
    let ch = ChannelModel::new(m, omega, 0.0)?;
    if z_lo == z_hi {
        return Ok(QuadValue { value: 0.0, abs_error: 0.0 });
    }
    let sb = b.sqrt();
    let breaks = if sb > 0.0 && c.is_finite() { vec![c / sb] } else { vec![] };
    integrate_over_amplitude(
        &ch,
        |t| if c.is_infinite() { 1.0 } else { q_func(-c + sb * t) },
        z_lo,
        z_hi,
        &breaks,
    )
}

fn noisy_channel(ch: &ChannelModel) -> Result<f64> {
    if !(ch.sigma2 > 0.0) {
        return Err(Error::Domain(
            "noisy SEP engines need sigma2 > 0; use sep_noiseless for sigma2 = 0".into(),
        ));
    }
    Ok(ch.sigma2.sqrt())
}

fn nonempty_regions(c: &Constellation, q: &Quantizer) -> Result<Vec<DecisionRegion>> {
    let mut out = Vec::with_capacity((q.k() + 1) * c.half());
    for y in 1..=q.k() + 1 {
        for i in 0..c.half() {
            let d = decision_region(c, q, y, i)?;
            if !d.is_empty() {
                out.push(d);
            }
        }
    }
    Ok(out)
}

/// Exact SEP from the finite-series `H` (integer `m`, `σ² > 0`).
pub fn sep_closed_form(c: &Constellation, q: &Quantizer, ch: &ChannelModel) -> Result<SepResult> {
    let sigma = noisy_channel(ch)?;
    let m = ch.integer_m().ok_or_else(|| {
        Error::Domain(format!("closed form needs integer m, got {}; use sep_quadrature", ch.m))
    })?;
    let offset = |y: usize| SQRT_2 * q.edge(y) / sigma;
    let mut terms = Vec::new();
    for d in nonempty_regions(c, q)? {
        let rho = c.amplitudes()[d.i];
        let gain = 2.0 * rho * rho / ch.sigma2;
        let upper = h_function(m, ch.omega, gain, offset(d.y), d.lower, d.upper)?;
        let lower = h_function(m, ch.omega, gain, offset(d.y - 1), d.lower, d.upper)?;
        terms.push(upper);
        terms.push(-lower);
    }
    let scale = 2.0 / c.order() as f64;
    let abs_sum: f64 = terms.iter().map(|t| t.abs()).sum();
    let correct = compensated_sum(terms);
    let value = 1.0 - scale * correct;
    let err = 64.0 * f64::EPSILON * (1.0 + scale * abs_sum);
    SepResult::checked(value, SepMethod::ClosedForm, err)
}

/// SEP by adaptive quadrature of the likelihood over each decision region
/// (any `m >= 1/2`, `σ² > 0`).
pub fn sep_quadrature(c: &Constellation, q: &Quantizer, ch: &ChannelModel) -> Result<SepResult> {
    let sigma = noisy_channel(ch)?;
    let std = sigma / SQRT_2;
    let mut total = 0.0;
    let mut err = 0.0;
    for d in nonempty_regions(c, q)? {
        let rho = c.amplitudes()[d.i];
        let (lo, hi) = (q.edge(d.y - 1), q.edge(d.y));
        let breaks = [lo / rho, hi / rho];
        let v = integrate_over_amplitude(
            ch,
            |t| interval_probability(lo, hi, t * rho, std),
            d.lower,
            d.upper,
            &breaks,
        )?;
        total += v.value;
        err += v.abs_error;
    }
    let scale = 2.0 / c.order() as f64;
    SepResult::checked(1.0 - scale * total, SepMethod::Quadrature, scale * err + 1e-15)
}

/// Probability that symbol `ρ_i` is misdetected when `σ² = 0`: the Gamma mass
/// of the complement of its correct-detection regions.
fn noiseless_symbol_error(c: &Constellation, q: &Quantizer, ch: &ChannelModel, i: usize) -> Result<f64> {
    let mut regions = Vec::new();
    for y in 1..=q.k() + 1 {
        let r = noiseless_region(c, q, y, i)?;
        if !r.is_empty() {
            regions.push((r.lower, r.upper));
        }
    }
    regions.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut err = 0.0;
    let mut pos = 0.0;
    for (lo, hi) in regions {
        err += ch.z_mass(pos, lo);
        pos = pos.max(hi);
    }
    err += ch.z_mass(pos, f64::INFINITY);
    Ok(err)
}

/// Error floor `P_{e,∞}` at `σ² = 0` (any `m >= 1/2`). The channel's `sigma2` is ignored.
pub fn sep_noiseless(c: &Constellation, q: &Quantizer, ch: &ChannelModel) -> Result<SepResult> {
    let mut total = 0.0;
    for i in 0..c.half() {
        total += noiseless_symbol_error(c, q, ch, i)?;
    }
    SepResult::checked(2.0 / c.order() as f64 * total, SepMethod::Noiseless, 1e-15)
}

/// `f_L <= P*_{e,∞} <= f_U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorBounds {
    pub lower: SepResult,
    pub upper: SepResult,
    /// Whether all adjacent boundary ratios equal `min ρ_{i+1}/ρ_i` (within 1e-9),
    /// the assumption under which `f_U` bounds the floor.
    pub ratio_assumption: bool,
}

/// Floor bounds sharing the bracket `P(Z < q_1²/ρ_1²) + P(Z > q_K²/ρ_{M/2-2}²)`.
pub fn floor_bounds(c: &Constellation, q: &Quantizer, ch: &ChannelModel) -> Result<FloorBounds> {
    let rho = c.amplitudes();
    let m_order = c.order() as f64;
    let qk = q.edge(q.k());
    let bracket = ch.z_cdf((q.edge(1) / rho[1]).powi(2)) + ch.z_sf((qk / rho[c.half() - 2]).powi(2));
    let r = c.min_adjacent_ratio();
    let ratio_assumption = q
        .boundaries()
        .windows(2)
        .all(|w| ((w[1] / w[0]) / r - 1.0).abs() < 1e-9);
    Ok(FloorBounds {
        lower: SepResult::checked(2.0 / m_order * bracket, SepMethod::BoundLower, 1e-15)?,
        upper: SepResult::checked((m_order / 4.0 - 0.5) * bracket, SepMethod::BoundUpper, 1e-15)?,
        ratio_assumption,
    })
}

/// Quantizer family used with a geometric constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizerKind {
    /// Boundaries `q_y = q_1 / ρ^{y-1}`.
    Nonuniform,
    /// Boundaries `q_y = y Δ`.
    Uniform,
}

fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Natural log of the geometric-constellation floor bound; see [`floor_geometric`].
pub fn ln_floor_geometric(
    cg: &GeometricConstellation,
    q1: f64,
    ch: &ChannelModel,
    bits: u32,
    kind: QuantizerKind,
) -> Result<f64> {
    let order = cg.order;
    if !(q1 > 0.0) {
        return Err(Error::Domain(format!("q1 = {q1} must be positive")));
    }
    let two_b = 2f64.powi(bits as i32);
    let ln_rho = cg.rho.ln();
    let ln_c2 = 2.0 * cg.normalizer().ln();
    let ln_scale = (ch.m / ch.omega).ln() + 2.0 * q1.ln() - ln_c2;
    let (x_low, x_high) = match kind {
        QuantizerKind::Nonuniform => {
            if !(two_b > order as f64 - 2.0) {
                return Err(Error::Regime(format!(
                    "non-uniform floor bound needs 2^b > M - 2 (b = {bits}, M = {order})"
                )));
            }
            (ln_scale - (order as f64 - 2.0) * ln_rho, ln_scale - two_b * ln_rho)
        }
        QuantizerKind::Uniform => {
            if order != 4 || bits < 2 {
                return Err(Error::Regime(format!(
                    "uniform floor bound needs M = 4 and b > 1 (b = {bits}, M = {order})"
                )));
            }
            let k = crate::system::boundary_count(bits) as f64;
            (ln_scale - (order as f64 - 2.0) * ln_rho, ln_scale + 2.0 * k.ln() - 4.0 * ln_rho)
        }
    };
    let low = ln_lower_gamma_reg_ln(ch.m, x_low)?;
    let high = ln_upper_gamma_reg_ln(ch.m, x_high)?;
    Ok((order as f64 / 4.0 - 0.5).ln() + ln_add(low, high))
}

/// Upper bound on the noiseless floor for `X_g(ρ)`:
/// `(M/4 - 1/2)[γ(m, (m/Ω) q_1²/(C²ρ^{M-2})) + Γ(m, (m/Ω) q_1²/(C²ρ^{2^b}))]/Γ(m)`
/// for geometric-ratio boundaries, or the uniform analogue with `q1 = Δ`
/// (top argument `(m/Ω) K²Δ²/(C²ρ⁴)`, `M = 4` only).
pub fn floor_geometric(
    cg: &GeometricConstellation,
    q1: f64,
    ch: &ChannelModel,
    bits: u32,
    kind: QuantizerKind,
) -> Result<f64> {
    ln_floor_geometric(cg, q1, ch, bits, kind).map(f64::exp)
}

/// Multi-antenna version: the single-antenna bound raised to `N_r`.
pub fn floor_geometric_simo(
    cg: &GeometricConstellation,
    q1: f64,
    ch: &ChannelModel,
    bits: u32,
    antennas: u32,
) -> Result<f64> {
    ln_floor_geometric(cg, q1, ch, bits, QuantizerKind::Nonuniform).map(|l| (antennas as f64 * l).exp())
}

/// Additive-quantization-noise-model baseline
/// `(M-1)/M (1 - √(SINR/(E_s + SINR)))`, `SINR = α E_s/(σ² + (1-α) E_s)`.
pub fn sep_aqnm(c: &Constellation, snr: f64, alpha: f64) -> Result<SepResult> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("distortion factor {alpha} not in (0, 1]")));
    }
    if !(snr > 0.0) {
        return Err(Error::Domain(format!("snr {snr} must be positive")));
    }
    let es = symbol_energy(c);
    let sigma2 = es / snr;
    let sinr = alpha * es / (sigma2 + (1.0 - alpha) * es);
    let m = c.order() as f64;
    let value = if sinr.is_infinite() {
        0.0
    } else {
        (m - 1.0) / m * (1.0 - (sinr / (es + sinr)).sqrt())
    };
    SepResult::checked(value, SepMethod::Aqnm, 1e-15)
}
