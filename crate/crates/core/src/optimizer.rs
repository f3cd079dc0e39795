//! Minimum-SEP design of quantizer boundaries and constellations.
//!
//! Multi-start Nelder-Mead over an unconstrained parameterization:
//! boundaries `q_1 = e^{θ_1}`, `q_y = q_{y-1}(1 + e^{θ_y})`; constellation
//! `ρ_0 = 1`, `ρ_i = ρ_{i-1}(1 + e^{φ_i})`, rescaled to `Σ ρ_i² = 1` when the
//! energy constraint is on.

use crate::error::{Error, Result};
use crate::sep::{sep_closed_form, sep_noiseless, sep_quadrature, SepMethod, SepResult};
use crate::system::{
    boundary_count, db_to_linear, symbol_energy, ChannelModel, Constellation, GeometricConstellation, Quantizer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop once every vertex lies within this max-norm distance of the best one.
    pub diameter_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            diameter_tol: 1e-9,
            initial_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with the dimension-adaptive Nelder-Mead coefficients.
/// Non-finite objective values are treated as `+∞`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadOutcome {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        return NelderMeadOutcome {
            x: vec![],
            value: eval(x0),
            iterations: 0,
            converged: true,
        };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for j in 0..n {
        let mut v = x0.to_vec();
        v[j] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        // order vertices; stable on ties so the result is deterministic
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / nf)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(alpha * beta);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = along(alpha * gamma);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(-gamma);
            let v = eval(&x);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for k in 1..=n {
            let best = simplex[0].clone();
            for (v, b) in simplex[k].iter_mut().zip(&best) {
                *v = b + delta * (*v - b);
            }
            values[k] = eval(&simplex[k]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    NelderMeadOutcome {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// Nelder-Mead restarted from its best vertex with a fresh simplex until a
/// restart no longer improves the value by more than `1e-12` (absolute, on the
/// objective) or `max_restarts` is reached. Restarts escape the premature
/// collapses that kinks in the objective cause.
pub fn nelder_mead_restarts<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
    max_restarts: usize,
) -> NelderMeadOutcome {
    let mut best = nelder_mead(&f, x0, opts);
    for _ in 0..max_restarts {
        let next = nelder_mead(&f, &best.x, opts);
        let gain = best.value - next.value;
        let iterations = best.iterations + next.iterations;
        if next.value <= best.value {
            best = NelderMeadOutcome { iterations, ..next };
        } else {
            best.iterations = iterations;
        }
        if !(gain > 1e-12) {
            break;
        }
    }
    best
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (hi - lo).abs() > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Which quantities the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignVariables {
    /// All `K` boundaries, constellation fixed.
    QuantizerOnly,
    /// Uniform step `Δ` (`q_y = yΔ`), constellation fixed.
    UniformStepOnly,
    /// Boundaries and constellation shape.
    JointNonuniform,
    /// Uniform step and constellation shape.
    JointUniform,
    /// `(ρ, q_1)` for the geometric constellation with boundaries `q_1/ρ^{y-1}`.
    GeometricNoiseless,
}

/// A design task. The noise level is `E_s/σ² = 10^{snr_db/10}` for every
/// candidate when `snr_db` is set; otherwise `channel.sigma2` is used as is
/// (`0` selects the noiseless floor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignProblem {
    pub channel: ChannelModel,
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub order: usize,
    pub bits: u32,
    pub variables: DesignVariables,
    /// Fixed constellation, or the joint-design start. Defaults to `{±1, ±3, …}`.
    #[serde(default)]
    pub constellation: Option<Constellation>,
    /// Keep `Σ ρ_i² = 1` for joint designs.
    #[serde(default = "default_true")]
    pub unit_energy: bool,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_true() -> bool {
    true
}

fn default_starts() -> usize {
    16
}

fn default_max_iterations() -> usize {
    2000
}

impl DesignProblem {
    pub fn new(channel: ChannelModel, snr_db: Option<f64>, order: usize, bits: u32, variables: DesignVariables) -> Self {
        Self {
            channel,
            snr_db,
            order,
            bits,
            variables,
            constellation: None,
            unit_energy: true,
            starts: default_starts(),
            seed: 0,
            max_iterations: default_max_iterations(),
        }
    }

    pub fn with_constellation(mut self, c: Constellation) -> Self {
        self.constellation = Some(c);
        self
    }

    pub fn with_starts(mut self, starts: usize) -> Self {
        self.starts = starts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn is_joint(&self) -> bool {
        matches!(
            self.variables,
            DesignVariables::JointNonuniform | DesignVariables::JointUniform
        )
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db.is_none() && self.channel.sigma2 == 0.0
    }

    fn validate(&self) -> Result<()> {
        if self.order < 4 || !self.order.is_power_of_two() {
            return Err(Error::Domain(format!("M = {} must be a power of two >= 4", self.order)));
        }
        if !(2..=24).contains(&self.bits) {
            return Err(Error::Domain(format!("bits = {} must be in [2, 24]", self.bits)));
        }
        if self.starts == 0 {
            return Err(Error::Domain("need at least one start".into()));
        }
        if let Some(c) = &self.constellation {
            if c.order() != self.order {
                return Err(Error::Domain(format!(
                    "constellation has M = {}, problem has M = {}",
                    c.order(),
                    self.order
                )));
            }
        }
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(Error::Domain(format!("snr_db {s} must be finite")));
            }
        }
        if self.variables == DesignVariables::GeometricNoiseless && !self.is_noiseless() {
            return Err(Error::Domain("geometric (rho, q1) design is defined for the noiseless floor".into()));
        }
        Ok(())
    }

    fn base_constellation(&self) -> Result<Constellation> {
        let c = match &self.constellation {
            Some(c) => c.clone(),
            None => Constellation::equidistant(self.order, 1.0)?,
        };
        Ok(if self.is_joint() && self.unit_energy { c.unit_energy() } else { c })
    }

    /// Channel for a candidate constellation.
    pub fn channel_for(&self, c: &Constellation) -> Result<ChannelModel> {
        match self.snr_db {
            Some(db) => ChannelModel::at_snr(self.channel.m, self.channel.omega, c, db_to_linear(db)),
            None => Ok(self.channel),
        }
    }

    /// SEP of a design under this problem's channel, using the exact engine that applies.
    pub fn evaluate(&self, c: &Constellation, q: &Quantizer) -> Result<SepResult> {
        let ch = self.channel_for(c)?;
        if ch.sigma2 == 0.0 {
            sep_noiseless(c, q, &ch)
        } else if ch.integer_m().is_some() {
            sep_closed_form(c, q, &ch)
        } else {
            sep_quadrature(c, q, &ch)
        }
    }
}

/// Optimized design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub quantizer: Quantizer,
    pub constellation: Constellation,
    pub sep: f64,
    pub method: SepMethod,
    pub starts_used: usize,
    pub converged: bool,
    /// Unconstrained parameters of the optimum, usable as a warm start.
    pub params: Vec<f64>,
}

/// Inverse of the increment map `d = e^θ`.
fn ln_increment(d: f64) -> f64 {
    d.max(1e-300).ln()
}

/// Decodes and encodes unconstrained parameter vectors for a problem.
struct Codec {
    variables: DesignVariables,
    order: usize,
    bits: u32,
    k: usize,
    unit_energy: bool,
    fixed: Constellation,
}

impl Codec {
    fn new(p: &DesignProblem) -> Result<Self> {
        Ok(Self {
            variables: p.variables,
            order: p.order,
            bits: p.bits,
            k: boundary_count(p.bits),
            unit_energy: p.unit_energy,
            fixed: p.base_constellation()?,
        })
    }

    fn shape_len(&self) -> usize {
        self.order / 2 - 1
    }

    fn dimension(&self) -> usize {
        match self.variables {
            DesignVariables::QuantizerOnly => self.k,
            DesignVariables::UniformStepOnly => 1,
            DesignVariables::JointNonuniform => self.k + self.shape_len(),
            DesignVariables::JointUniform => 1 + self.shape_len(),
            DesignVariables::GeometricNoiseless => 2,
        }
    }

    fn boundaries(theta: &[f64]) -> Vec<f64> {
        let mut q = Vec::with_capacity(theta.len());
        let mut cur = 0.0;
        for (y, t) in theta.iter().enumerate() {
            cur = if y == 0 { t.exp() } else { cur * (1.0 + t.exp()) };
            q.push(cur);
        }
        q
    }

    fn encode_boundaries(q: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(q.len());
        for (y, &v) in q.iter().enumerate() {
            out.push(if y == 0 { v.ln() } else { ln_increment(v / q[y - 1] - 1.0) });
        }
        out
    }

    fn shape(&self, phi: &[f64]) -> Result<Constellation> {
        let mut rho = vec![1.0];
        for p in phi {
            let last = *rho.last().unwrap_or(&1.0);
            rho.push(last * (1.0 + p.exp()));
        }
        let c = Constellation::new(rho)?;
        Ok(if self.unit_energy { c.unit_energy() } else { c })
    }

    fn encode_shape(c: &Constellation) -> Vec<f64> {
        c.amplitudes().windows(2).map(|w| ln_increment(w[1] / w[0] - 1.0)).collect()
    }

    fn decode(&self, x: &[f64]) -> Result<(Constellation, Quantizer)> {
        match self.variables {
            DesignVariables::QuantizerOnly => Ok((self.fixed.clone(), Quantizer::new(Self::boundaries(x), self.bits)?)),
            DesignVariables::UniformStepOnly => Ok((self.fixed.clone(), uniform(x[0].exp(), self.bits)?)),
            DesignVariables::JointNonuniform => {
                let c = self.shape(&x[self.k..])?;
                Ok((c, Quantizer::new(Self::boundaries(&x[..self.k]), self.bits)?))
            }
            DesignVariables::JointUniform => {
                let c = self.shape(&x[1..])?;
                Ok((c, uniform(x[0].exp(), self.bits)?))
            }
            DesignVariables::GeometricNoiseless => {
                let rho = 1.0 / (1.0 + (-x[0]).exp());
                let g = GeometricConstellation::new(rho, self.order)?;
                Ok((g.materialize(), Quantizer::geometric(x[1].exp(), rho, self.bits)?))
            }
        }
    }

    fn encode(&self, c: &Constellation, q: &Quantizer) -> Vec<f64> {
        let qs = q.boundaries();
        match self.variables {
            DesignVariables::QuantizerOnly => Self::encode_boundaries(qs),
            DesignVariables::UniformStepOnly => vec![qs[0].ln()],
            DesignVariables::JointNonuniform => {
                let mut v = Self::encode_boundaries(qs);
                v.extend(Self::encode_shape(c));
                v
            }
            DesignVariables::JointUniform => {
                let mut v = vec![qs[0].ln()];
                v.extend(Self::encode_shape(c));
                v
            }
            DesignVariables::GeometricNoiseless => {
                let a = c.amplitudes();
                let rho = a[0] / a[1];
                vec![(rho / (1.0 - rho)).ln(), qs[0].ln()]
            }
        }
    }
}

fn uniform(step: f64, bits: u32) -> Result<Quantizer> {
    crate::system::UniformQuantizer { step, bits }.materialize()
}

/// Rows per Latin-hypercube block. Start `s` is row `s % LHS_BLOCK` of block
/// `s / LHS_BLOCK`, so start points do not depend on the total start count.
const LHS_BLOCK: usize = 16;

/// Latin-hypercube start points over boundary positions in
/// `[0.1, 3] √(Ω E_s)` and adjacent amplitude increments in `[0.2, 5]`.
fn start_points(p: &DesignProblem, codec: &Codec) -> Vec<Vec<f64>> {
    let n_starts = p.starts;
    let dim = codec.dimension();
    let blocks = n_starts.div_ceil(LHS_BLOCK);
    // columns[block][coordinate][row]
    let columns: Vec<Vec<Vec<f64>>> = (0..blocks)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(b as u64);
            (0..dim)
                .map(|_| {
                    let mut perm: Vec<usize> = (0..LHS_BLOCK).collect();
                    for i in (1..LHS_BLOCK).rev() {
                        let j = rng.random_range(0..=i);
                        perm.swap(i, j);
                    }
                    perm.iter()
                        .map(|&s| (s as f64 + rng.random::<f64>()) / LHS_BLOCK as f64)
                        .collect()
                })
                .collect()
        })
        .collect();
    let es = symbol_energy(&codec.fixed);
    let scale = (p.channel.omega * es).sqrt();
    let lerp = |u: f64, lo: f64, hi: f64| lo + u * (hi - lo);
    let log_lerp = |u: f64, lo: f64, hi: f64| (lo.ln() + u * (hi.ln() - lo.ln())).exp();
    let boundaries = |us: &[f64]| {
        let mut q: Vec<f64> = us.iter().map(|&u| lerp(u, 0.1, 3.0) * scale).collect();
        q.sort_by(f64::total_cmp);
        for y in 1..q.len() {
            if q[y] <= q[y - 1] {
                q[y] = q[y - 1] * (1.0 + 1e-6);
            }
        }
        Codec::encode_boundaries(&q)
    };
    let shape = |us: &[f64]| us.iter().map(|&u| log_lerp(u, 0.2, 5.0).ln()).collect::<Vec<_>>();
    let k = codec.k;
    (0..n_starts)
        .map(|s| {
            let block = &columns[s / LHS_BLOCK];
            let u: Vec<f64> = block.iter().map(|col| col[s % LHS_BLOCK]).collect();
            match codec.variables {
                DesignVariables::QuantizerOnly => boundaries(&u),
                DesignVariables::UniformStepOnly => vec![(lerp(u[0], 0.1, 3.0) * scale / k.max(1) as f64).ln()],
                DesignVariables::JointNonuniform => {
                    let mut v = boundaries(&u[..k]);
                    v.extend(shape(&u[k..]));
                    v
                }
                DesignVariables::JointUniform => {
                    let mut v = vec![(lerp(u[0], 0.1, 3.0) * scale / k.max(1) as f64).ln()];
                    v.extend(shape(&u[1..]));
                    v
                }
                DesignVariables::GeometricNoiseless => {
                    let rho: f64 = lerp(u[0], 0.05, 0.95);
                    vec![(rho / (1.0 - rho)).ln(), (lerp(u[1], 0.1, 3.0) * scale).ln()]
                }
            }
        })
        .collect()
}

/// Objective in the unconstrained space: `ln P_e`, `+∞` on invalid points.
fn objective(p: &DesignProblem, codec: &Codec, x: &[f64]) -> f64 {
    if x.iter().any(|v| !v.is_finite() || v.abs() > 700.0) {
        return f64::INFINITY;
    }
    match codec.decode(x).and_then(|(c, q)| p.evaluate(&c, &q)) {
        Ok(r) => r.value.max(1e-300).ln(),
        Err(_) => f64::INFINITY,
    }
}

const MAX_RESTARTS: usize = 20;

/// Multi-start minimization of SEP. Deterministic for a given seed and
/// independent of the worker count.
pub fn optimize(p: &DesignProblem) -> Result<DesignResult> {
    optimize_from(p, None)
}

/// As [`optimize`], with an optional warm start that replaces the first start point.
pub fn optimize_from(p: &DesignProblem, warm: Option<&DesignResult>) -> Result<DesignResult> {
    p.validate()?;
    let codec = Codec::new(p)?;
    let mut starts = start_points(p, &codec);
    if let Some(w) = warm {
        let x = if w.params.len() == codec.dimension() {
            w.params.clone()
        } else {
            codec.encode(&w.constellation, &w.quantizer)
        };
        starts[0] = x;
    }
    let opts = NelderMeadOptions {
        max_iterations: p.max_iterations,
        ..NelderMeadOptions::default()
    };
    let outcomes: Vec<(usize, NelderMeadOutcome)> = starts
        .par_iter()
        .enumerate()
        .map(|(s, x0)| (s, nelder_mead_restarts(|x| objective(p, &codec, x), x0, &opts, MAX_RESTARTS)))
        .collect();
    let (_, best) = outcomes
        .into_iter()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .ok_or_else(|| Error::Domain("no starts".into()))?;
    if !best.value.is_finite() {
        return Err(Error::Domain("optimizer found no feasible design".into()));
    }
    let (constellation, quantizer) = codec.decode(&best.x)?;
    let r = p.evaluate(&constellation, &quantizer)?;
    Ok(DesignResult {
        quantizer,
        constellation,
        sep: r.value,
        method: r.method,
        starts_used: p.starts,
        converged: best.converged,
        params: best.x,
    })
}

/// Adjacent boundary ratios `q_{y-1}/q_y` compared with a target ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioDiagnostics {
    pub target: f64,
    pub ratios: Vec<f64>,
    /// `max |r/target - 1|` over adjacent pairs (0 when there is no pair).
    pub max_rel_deviation: f64,
}

impl RatioDiagnostics {
    pub fn within(&self, rel_tol: f64) -> bool {
        self.max_rel_deviation <= rel_tol
    }
}

/// Checks the noiseless-optimality condition `q*_{y-1}/q*_y = ρ`.
pub fn check_ratio_condition(q: &Quantizer, target: f64) -> RatioDiagnostics {
    let ratios = q.adjacent_ratios();
    let max_rel_deviation = ratios
        .iter()
        .map(|r| (r / target - 1.0).abs())
        .fold(0.0, f64::max);
    RatioDiagnostics {
        target,
        ratios,
        max_rel_deviation,
    }
}

/// `f_0(ρ) = (σ²/ρ^B)^C + ρ^A`.
pub fn two_term_objective(a: f64, b: f64, c: f64, sigma: f64, rho: f64) -> f64 {
    (sigma * sigma / rho.powf(b)).powf(c) + rho.powf(a)
}

/// Minimizer `ρ*(σ) = (BC/A)^{1/(A+BC)} (σ²)^{C/(A+BC)}` of [`two_term_objective`].
pub fn rho_star(a: f64, b: f64, c: f64, sigma: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && c > 0.0 && sigma > 0.0) {
        return Err(Error::Domain(format!(
            "rho_star needs A, B, C, sigma > 0 (got {a}, {b}, {c}, {sigma})"
        )));
    }
    if !(c < a + b * c) {
        return Err(Error::Regime(format!("need C < A + BC (A = {a}, B = {b}, C = {c})")));
    }
    let d = a + b * c;
    Ok((b * c / a).powf(1.0 / d) * (sigma * sigma).powf(c / d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = nelder_mead(
            f,
            &[-1.2, 1.0],
            &NelderMeadOptions {
                max_iterations: 5000,
                ..Default::default()
            },
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_reports_budget_exhaustion() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let out = nelder_mead(
            f,
            &[3.0; 5],
            &NelderMeadOptions {
                max_iterations: 10,
                ..Default::default()
            },
        );
        assert!(!out.converged);
        assert_eq!(out.iterations, 10);
    }

    #[test]
    fn golden_section_parabola() {
        let (x, v) = golden_section(|x| (x - 0.3).powi(2) + 1.0, -2.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-6 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rho_star_values() {
        assert!((rho_star(1.0, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(rho_star(1.0, 0.5, 4.0, 1.0).is_err());
        assert!(rho_star(0.0, 1.0, 1.0, 1.0).is_err());
        // first-order condition of the two-term objective
        let (a, b, c, s) = (2.0, 2.0, 1.0, 0.01);
        let r = rho_star(a, b, c, s).unwrap();
        let h = 1e-6 * r;
        let d = (two_term_objective(a, b, c, s, r + h) - two_term_objective(a, b, c, s, r - h)) / (2.0 * h);
        assert!(d.abs() < 1e-6 * two_term_objective(a, b, c, s, r) / r);
    }

    #[test]
    fn ratio_diagnostics() {
        let q = Quantizer::geometric(0.2, 0.4, 3).unwrap();
        assert!(check_ratio_condition(&q, 0.4).max_rel_deviation < 1e-14);
        let bad = Quantizer::new(vec![0.2, 0.5, 1.5], 3).unwrap();
        assert!(!check_ratio_condition(&bad, 0.4).within(0.01));
        let two = Quantizer::new(vec![1.0], 2).unwrap();
        assert!(check_ratio_condition(&two, 0.4).within(0.0));
    }

    #[test]
    fn codec_round_trip() {
        let ch = ChannelModel::noiseless(1.0, 1.0).unwrap();
        let p = DesignProblem::new(ch, Some(10.0), 8, 3, DesignVariables::JointNonuniform);
        let codec = Codec::new(&p).unwrap();
        let x = vec![-0.5, 0.1, 0.7, -0.2, 0.3, 0.0];
        let (c, q) = codec.decode(&x).unwrap();
        assert!((c.amplitudes().iter().map(|r| r * r).sum::<f64>() - 1.0).abs() < 1e-12);
        let back = codec.encode(&c, &q);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn design_problem_rejects_bad_input() {
        let ch = ChannelModel::noiseless(1.0, 1.0).unwrap();
        let p = DesignProblem::new(ch, None, 6, 2, DesignVariables::QuantizerOnly);
        assert!(optimize(&p).is_err());
        let p = DesignProblem::new(ch, Some(10.0), 4, 2, DesignVariables::GeometricNoiseless);
        assert!(optimize(&p).is_err());
    }

    #[test]
    fn design_problem_json_round_trip() {
        let ch = ChannelModel::new(2.0, 1.0, 0.0).unwrap();
        let p = DesignProblem::new(ch, Some(20.0), 4, 3, DesignVariables::JointUniform).with_seed(7);
        let s = serde_json::to_string(&p).unwrap();
        let back: DesignProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        assert!(serde_json::from_str::<DesignProblem>(&s.replace("\"bits\"", "\"bitz\"")).is_err());
    }
}
