//! High-SNR and high-resolution asymptotics: decay exponents (DVO), their
//! empirical log-log fits, the resolution exponent `D_Q`, optimal error floors
//! and the constellation/quantizer schedules that make the floor vanish.

use crate::error::{Error, Result};
use crate::montecarlo::{simulate, SimEstimate, SimSpec};
use crate::optimizer::{golden_section, optimize_from, DesignProblem, DesignResult, DesignVariables};
use crate::sep::{ln_floor_geometric, sep_noiseless, QuantizerKind};
use crate::specfun::{ln_lower_gamma_reg_ln, ln_upper_gamma_reg_ln};
use crate::system::{boundary_count, ChannelModel, Constellation, GeometricConstellation, Quantizer, UniformQuantizer};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// SEP values below this are excluded from slope fits.
pub const FIT_FLOOR: f64 = 1e-12;
/// Monte Carlo points with fewer errors are excluded from slope fits.
pub const MIN_FIT_ERRORS: u64 = 100;

/// Theoretical decay exponent with optimal quantizer and constellation:
/// `m N_r (2^b - M + 2) / 2^b` (non-uniform) or `m/2` (uniform, `M = 4`, single antenna).
pub fn dvo_theory(m: Ratio<i64>, bits: u32, order: usize, kind: QuantizerKind, antennas: u32) -> Result<Ratio<i64>> {
    if m <= Ratio::from_integer(0) {
        return Err(Error::Domain(format!("shape m = {m} must be positive")));
    }
    if antennas == 0 {
        return Err(Error::Domain("antennas must be >= 1".into()));
    }
    if !(2..=62).contains(&bits) {
        return Err(Error::Domain(format!("bits = {bits} must be in [2, 62]")));
    }
    let two_b = 1i64 << bits;
    let order = order as i64;
    match kind {
        QuantizerKind::Nonuniform => {
            if two_b <= order - 2 {
                return Err(Error::Regime(format!("need 2^b > M - 2 (b = {bits}, M = {order})")));
            }
            Ok(m * Ratio::from_integer(antennas as i64) * Ratio::new(two_b - order + 2, two_b))
        }
        QuantizerKind::Uniform => {
            if order != 4 {
                return Err(Error::Regime(format!("uniform exponent is derived for M = 4, got M = {order}")));
            }
            if antennas != 1 {
                return Err(Error::Regime("uniform exponent is derived for a single antenna".into()));
            }
            Ok(m / 2)
        }
    }
}

/// Converts a shape parameter to a rational (exact for halves and integers).
pub fn shape_ratio(m: f64) -> Result<Ratio<i64>> {
    Ratio::approximate_float(m).ok_or_else(|| Error::Domain(format!("shape {m} not representable")))
}

/// Least-squares fit of `-log10 P` against `log10 SNR`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvoEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Ordinary least squares `y = a + s x`; returns `(s, a, r²)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let s = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (s, my - s * mx, r2)
}

/// Slope of `-log10 sep` vs `log10 snr` over `window = (lo_db, hi_db)` (inclusive).
/// Points below [`FIT_FLOOR`] are dropped; at least 4 must remain.
pub fn dvo_fit(curve: &[(f64, f64)], window: (f64, f64)) -> Result<DvoEstimate> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(db, p)| *db >= window.0 - 1e-9 && *db <= window.1 + 1e-9 && *p >= FIT_FLOOR && p.is_finite())
        .map(|&(db, p)| (db / 10.0, -p.log10()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientPoints {
            needed: 4,
            have: pts.len(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (slope, intercept, r2) = least_squares(&xs, &ys);
    Ok(DvoEstimate {
        slope,
        intercept,
        r2,
        window,
        points: xs.len(),
    })
}

/// [`dvo_fit`] on simulated points, dropping those with fewer than
/// [`MIN_FIT_ERRORS`] errors.
pub fn dvo_fit_simulated(estimates: &[SimEstimate], window: (f64, f64)) -> Result<DvoEstimate> {
    let curve: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| e.errors >= MIN_FIT_ERRORS)
        .filter_map(|e| e.snr_db.map(|db| (db, e.sep_hat)))
        .collect();
    dvo_fit(&curve, window)
}

/// Configuration of a decay-exponent experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvoExperiment {
    pub m: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    pub bits: u32,
    pub order: usize,
    pub kind: QuantizerKind,
    #[serde(default = "default_antennas")]
    pub antennas: u32,
    pub snr_db: Vec<f64>,
    pub window: (f64, f64),
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo budget per point (multi-antenna experiments).
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Optimize the constellation with the quantizer; otherwise the
    /// equidistant constellation is kept and only the quantizer moves.
    #[serde(default = "default_joint")]
    pub joint: bool,
}

fn default_joint() -> bool {
    true
}

fn default_omega() -> f64 {
    1.0
}

fn default_antennas() -> u32 {
    1
}

fn default_starts() -> usize {
    16
}

fn default_trials() -> u64 {
    10_000_000
}

/// One point of a DVO curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvoPoint {
    pub snr_db: f64,
    pub sep: f64,
    /// `closed_form`, `quadrature` or `monte_carlo`.
    pub method: String,
    /// Simulated error count (Monte Carlo points only).
    #[serde(default)]
    pub errors: Option<u64>,
    pub design: DesignResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvoReport {
    pub estimate: DvoEstimate,
    pub theory: f64,
    /// Exact theoretical value as `p/q`.
    pub theory_exact: String,
    pub curve: Vec<DvoPoint>,
}

/// Initial design `X_g(ρ)` with boundaries `q_1/ρ^{y-1}` and `q_1 = √(C² ρ^a)`,
/// `a` midway through its admissible interval.
fn schedule_start(order: usize, bits: u32, kind: QuantizerKind) -> Result<DesignResult> {
    let eq = Constellation::equidistant(order, 1.0)?;
    let rho = eq.amplitudes()[0] / eq.amplitudes()[1];
    let g = GeometricConstellation::new(rho, order)?;
    let c2 = g.normalizer().powi(2);
    let q = match kind {
        QuantizerKind::Nonuniform => {
            let a = 0.5 * ((order as f64 - 2.0) + 2f64.powi(bits as i32));
            Quantizer::geometric((c2 * rho.powf(a)).sqrt(), rho, bits)?
        }
        QuantizerKind::Uniform => {
            let a = 0.5 * ((order as f64 - 2.0) + 4.0);
            UniformQuantizer {
                step: (c2 * rho.powf(a)).sqrt(),
                bits,
            }
            .materialize()?
        }
    };
    Ok(DesignResult {
        quantizer: q,
        constellation: g.materialize(),
        sep: f64::NAN,
        method: crate::sep::SepMethod::ClosedForm,
        starts_used: 0,
        converged: false,
        params: vec![],
    })
}

/// Jointly optimizes the design at each SNR (ascending, each point warm-started
/// from the previous optimum), evaluates SEP exactly (single antenna) or by
/// simulation of the single-antenna-optimal design (multiple antennas), and
/// fits the decay exponent.
pub fn dvo_experiment(exp: &DvoExperiment) -> Result<DvoReport> {
    let theory = dvo_theory(shape_ratio(exp.m)?, exp.bits, exp.order, exp.kind, exp.antennas)?;
    let mut grid = exp.snr_db.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let variables = match (exp.kind, exp.joint) {
        (QuantizerKind::Nonuniform, true) => DesignVariables::JointNonuniform,
        (QuantizerKind::Uniform, true) => DesignVariables::JointUniform,
        (QuantizerKind::Nonuniform, false) => DesignVariables::QuantizerOnly,
        (QuantizerKind::Uniform, false) => DesignVariables::UniformStepOnly,
    };
    let channel = ChannelModel::noiseless(exp.m, exp.omega)?;
    let mut warm = if exp.joint {
        Some(schedule_start(exp.order, exp.bits, exp.kind)?)
    } else {
        None
    };
    let mut curve = Vec::with_capacity(grid.len());
    for (k, &db) in grid.iter().enumerate() {
        let problem = DesignProblem::new(channel, Some(db), exp.order, exp.bits, variables)
            .with_starts(exp.starts)
            .with_seed(exp.seed.wrapping_add(k as u64));
        let design = optimize_from(&problem, warm.as_ref())?;
        let (sep, method, errors) = if exp.antennas == 1 {
            (design.sep, design.method.as_str().to_string(), None)
        } else {
            let ch = problem.channel_for(&design.constellation)?;
            let spec = SimSpec {
                target_errors: None,
                ..SimSpec::new(
                    design.constellation.clone(),
                    design.quantizer.clone(),
                    ch,
                    vec![db],
                    exp.trials,
                )
                .with_seed(exp.seed)
                .with_antennas(exp.antennas as usize)
            };
            let est = simulate(&spec)?[0];
            (est.sep_hat, "monte_carlo".to_string(), Some(est.errors))
        };
        warm = Some(design.clone());
        curve.push(DvoPoint {
            snr_db: db,
            sep,
            method,
            errors,
            design,
        });
    }
    let fit_points: Vec<(f64, f64)> = curve
        .iter()
        .filter(|p| p.errors.is_none_or(|e| e >= MIN_FIT_ERRORS))
        .map(|p| (p.snr_db, p.sep))
        .collect();
    let estimate = dvo_fit(&fit_points, exp.window)?;
    Ok(DvoReport {
        estimate,
        theory: *theory.numer() as f64 / *theory.denom() as f64,
        theory_exact: format!("{}/{}", theory.numer(), theory.denom()),
        curve,
    })
}

/// Least-squares slope of `-log2 P_{e,∞}(b)` against `b`, with the successive
/// slopes used to diagnose super-linear (double-exponential) decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqEstimate {
    pub slope: f64,
    pub r2: f64,
    pub bits: Vec<u32>,
    /// `-log2 P` at each resolution.
    pub neg_log2: Vec<f64>,
    /// Differences of `-log2 P` between consecutive resolutions.
    pub successive: Vec<f64>,
    /// Successive slopes strictly increasing: no finite `D_Q`.
    pub diverging: bool,
}

/// `D_Q` fit from a function returning `ln P_{e,∞}(b)` (log domain, since the
/// non-uniform floors underflow double precision).
pub fn dq_metric<F: Fn(u32) -> Result<f64>>(ln_floor: F, bits: std::ops::RangeInclusive<u32>) -> Result<DqEstimate> {
    let bits: Vec<u32> = bits.collect();
    if bits.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            have: bits.len(),
        });
    }
    let neg_log2 = bits
        .iter()
        .map(|&b| ln_floor(b).map(|l| -l / std::f64::consts::LN_2))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
    let (slope, _, r2) = least_squares(&xs, &neg_log2);
    let successive: Vec<f64> = neg_log2.windows(2).map(|w| w[1] - w[0]).collect();
    let diverging = successive.len() >= 2 && successive.windows(2).all(|w| w[1] > w[0]);
    Ok(DqEstimate {
        slope,
        r2,
        bits,
        neg_log2,
        successive,
        diverging,
    })
}

/// Minimizer of a floor over one scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorOptimum {
    /// `q_1` (non-uniform) or `Δ` (uniform).
    pub scale: f64,
    pub ln_floor: f64,
}

/// Minimizes `g(ln s)` by a log-spaced scan followed by golden section.
fn minimize_log_scale<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64) -> FloorOptimum {
    const SCAN: usize = 400;
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / SCAN as f64;
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for k in 0..=SCAN {
        let v = g(a + k as f64 * step);
        if v < best_v {
            best = k;
            best_v = v;
        }
    }
    let left = a + (best.max(1) - 1) as f64 * step;
    let right = a + (best + 1).min(SCAN) as f64 * step;
    let (x, v) = golden_section(&g, left, right, 1e-12);
    let (x, v) = if v <= best_v { (x, v) } else { (a + best as f64 * step, best_v) };
    FloorOptimum {
        scale: x.exp(),
        ln_floor: v,
    }
}

/// Smallest noiseless floor of `c` with a uniform quantizer `q_y = yΔ`.
pub fn optimal_uniform_floor(c: &Constellation, ch: &ChannelModel, bits: u32) -> Result<FloorOptimum> {
    let top = c.amplitudes()[c.half() - 1];
    let k = boundary_count(bits) as f64;
    let sd = ch.omega.sqrt();
    let g = |ls: f64| {
        UniformQuantizer { step: ls.exp(), bits }
            .materialize()
            .and_then(|q| sep_noiseless(c, &q, ch))
            .map(|r| r.value.max(f64::MIN_POSITIVE).ln())
            .unwrap_or(f64::INFINITY)
    };
    let opt = minimize_log_scale(g, 1e-3 * sd * top / k, 20.0 * sd * top / k);
    if !opt.ln_floor.is_finite() {
        return Err(Error::Domain("uniform floor minimization failed".into()));
    }
    Ok(opt)
}

/// `ln` of the floor upper bound `(M/4 - 1/2)[P(Z < q_1²/ρ_1²) + P(Z > q_K²/ρ²_{M/2-2})]`
/// for boundaries `q_y = q_1 r^{1-y}` with `r = min ρ_{i}/ρ_{i+1}`. Exact for `M = 4`.
pub fn ln_geometric_boundary_floor(c: &Constellation, ch: &ChannelModel, bits: u32, q1: f64) -> Result<f64> {
    let rho = c.amplitudes();
    let r = 1.0 / c.min_adjacent_ratio();
    let k = boundary_count(bits);
    let ln_qk = q1.ln() - (k as f64 - 1.0) * r.ln();
    let ln_scale = (ch.m / ch.omega).ln();
    let low = ln_lower_gamma_reg_ln(ch.m, ln_scale + 2.0 * (q1.ln() - rho[1].ln()))?;
    let high = ln_upper_gamma_reg_ln(ch.m, ln_scale + 2.0 * (ln_qk - rho[c.half() - 2].ln()))?;
    let (hi, lo) = if low >= high { (low, high) } else { (high, low) };
    let sum = if hi == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    };
    Ok((c.order() as f64 / 4.0 - 0.5).ln() + sum)
}

/// Minimizes [`ln_geometric_boundary_floor`] over `q_1`.
pub fn optimal_nonuniform_floor(c: &Constellation, ch: &ChannelModel, bits: u32) -> Result<FloorOptimum> {
    let rho = c.amplitudes();
    let r = 1.0 / c.min_adjacent_ratio();
    let k = boundary_count(bits) as f64;
    let sd = ch.omega.sqrt();
    // the optimum balances both tails: q_1 between ρ_1 r^{K-1} and ρ_1
    let lo = 1e-3 * sd * rho[0] * r.powf(k - 1.0);
    let hi = 10.0 * sd * rho[c.half() - 1];
    let g = |lq: f64| ln_geometric_boundary_floor(c, ch, bits, lq.exp()).unwrap_or(f64::INFINITY);
    let opt = minimize_log_scale(g, lo, hi);
    if !opt.ln_floor.is_finite() {
        return Err(Error::Domain("non-uniform floor minimization failed".into()));
    }
    Ok(opt)
}

/// Floor bound along `q_1(ρ) = √(C² ρ^a)` (non-uniform, `a ∈ (M-2, 2^b)`) or
/// `Δ(ρ) = √(C² ρ^a)` (uniform, `M = 4`, `a ∈ (M-2, 4)`), for each `ρ` in `rhos`.
pub fn floor_schedule(
    rhos: &[f64],
    a: f64,
    bits: u32,
    order: usize,
    ch: &ChannelModel,
    kind: QuantizerKind,
) -> Result<Vec<(f64, f64)>> {
    let lower = order as f64 - 2.0;
    let upper = match kind {
        QuantizerKind::Nonuniform => 2f64.powi(bits as i32),
        QuantizerKind::Uniform => 4.0,
    };
    if !(a > lower && a < upper) {
        return Err(Error::Regime(format!("exponent a = {a} must lie in ({lower}, {upper})")));
    }
    rhos.iter()
        .map(|&rho| {
            let g = GeometricConstellation::new(rho, order)?;
            let c2 = g.normalizer().powi(2);
            let q1 = (c2 * rho.powf(a)).sqrt();
            Ok((rho, ln_floor_geometric(&g, q1, ch, bits, kind)?.exp()))
        })
        .collect()
}
