//! ML decision rules for quantized observations.
//!
//! With the fading amplitude known, the likelihood of ADC output `y` given
//! symbol `x` is a Gaussian-smoothed indicator of the region `(q_{y-1}, q_y)`
//! centred on `|h|x`. It is symmetric and unimodal around the region
//! midpoint, so ML reduces to picking the symbol nearest the midpoint.

use crate::error::{Error, Result};
use crate::specfun::q_func;
use crate::system::{ChannelModel, Constellation, Quantizer};

/// Per-factor floor on log-likelihoods (smallest normal `exp` argument).
pub const LOG_LIKELIHOOD_FLOOR: f64 = -745.0;

/// A signed constellation point `±ρ_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub index: usize,
    pub negative: bool,
}

impl Symbol {
    pub fn positive(index: usize) -> Self {
        Self { index, negative: false }
    }

    pub fn negative(index: usize) -> Self {
        Self { index, negative: true }
    }

    pub fn value(&self, c: &Constellation) -> f64 {
        let a = c.amplitudes()[self.index];
        if self.negative {
            -a
        } else {
            a
        }
    }

    /// Position in the enumeration used by [`all_symbols`].
    pub fn ordinal(&self, half: usize) -> usize {
        self.index + if self.negative { half } else { 0 }
    }
}

/// All `M` symbols: positive half first, then negative half.
pub fn all_symbols(c: &Constellation) -> impl Iterator<Item = Symbol> + '_ {
    let half = c.half();
    (0..half)
        .map(Symbol::positive)
        .chain((0..half).map(Symbol::negative))
}

/// ADC output index for input `r`.
///
/// Positive side regions are `[q_{y-1}, q_y)`, so `r = 0` maps to `+1`.
/// Negative side regions are `[-q_y, -q_{y-1})`.
pub fn quantize(q: &Quantizer, r: f64) -> i32 {
    let b = q.boundaries();
    if r >= 0.0 {
        1 + b.partition_point(|&x| x <= r) as i32
    } else {
        let a = -r;
        -(1 + b.partition_point(|&x| x < a) as i32)
    }
}

/// Real interval `(lo, hi)` covered by signed output `y`.
pub fn output_interval(q: &Quantizer, y: i32) -> (f64, f64) {
    let u = y.unsigned_abs() as usize;
    if y > 0 {
        (q.edge(u - 1), q.edge(u))
    } else {
        (-q.edge(u), -q.edge(u - 1))
    }
}

fn check_output(q: &Quantizer, y: i32) -> Result<usize> {
    let u = y.unsigned_abs() as usize;
    if u == 0 || u > q.k() + 1 {
        return Err(Error::Domain(format!(
            "ADC output {y} outside ±[1, {}]",
            q.k() + 1
        )));
    }
    Ok(u)
}

/// `P(lo < mean + N(0, std²) < hi)` computed without cancellation in either tail.
pub fn interval_probability(lo: f64, hi: f64, mean: f64, std: f64) -> f64 {
    let zl = (lo - mean) / std;
    let zh = (hi - mean) / std;
    let p = if zl >= 0.0 {
        q_func(zl) - q_func(zh)
    } else if zh <= 0.0 {
        q_func(-zh) - q_func(-zl)
    } else {
        1.0 - q_func(zh) - q_func(-zl)
    };
    p.max(0.0)
}

/// Midpoint ML rule: the symbol (sign-matched to `y`) whose faded amplitude is
/// closest to the midpoint of the output region. The saturation output
/// `|y| = K+1` selects the largest amplitude. Ties go to the lower index.
pub fn ml_detect_midpoint(c: &Constellation, q: &Quantizer, h_mag: f64, y: i32) -> Result<Symbol> {
    if !(h_mag > 0.0) {
        return Err(Error::Domain(format!("fading amplitude {h_mag} must be positive")));
    }
    let u = check_output(q, y)?;
    let index = if u == q.k() + 1 {
        c.half() - 1
    } else {
        let mid = 0.5 * (q.edge(u - 1) + q.edge(u));
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &rho) in c.amplitudes().iter().enumerate() {
            let d = (mid - h_mag * rho).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    };
    Ok(Symbol { index, negative: y < 0 })
}

/// Interval of `z = |h|²` on which symbol `ρ_i` is chosen for output `y > 0`.
/// Empty regions have `lower == upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRegion {
    pub lower: f64,
    pub upper: f64,
    pub y: usize,
    pub i: usize,
}

impl DecisionRegion {
    fn empty(y: usize, i: usize) -> Self {
        Self { lower: 0.0, upper: 0.0, y, i }
    }

    pub fn is_empty(&self) -> bool {
        !(self.upper > self.lower)
    }

    pub fn contains(&self, z: f64) -> bool {
        z > self.lower && z < self.upper
    }

    /// Gamma probability of the region under the channel's fading law.
    pub fn mass(&self, ch: &ChannelModel) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            ch.z_mass(self.lower, self.upper)
        }
    }
}

fn check_indices(c: &Constellation, q: &Quantizer, y: usize, i: usize) -> Result<()> {
    if y == 0 || y > q.k() + 1 {
        return Err(Error::IndexOutOfRange { index: y, len: q.k() + 2 });
    }
    if i >= c.half() {
        return Err(Error::IndexOutOfRange { index: i, len: c.half() });
    }
    Ok(())
}

/// Decision region `D_{y,i}` for `y ∈ [1, K+1]`.
pub fn decision_region(c: &Constellation, q: &Quantizer, y: usize, i: usize) -> Result<DecisionRegion> {
    check_indices(c, q, y, i)?;
    let top = c.half() - 1;
    if y == q.k() + 1 {
        return Ok(if i == top {
            DecisionRegion { lower: 0.0, upper: f64::INFINITY, y, i }
        } else {
            DecisionRegion::empty(y, i)
        });
    }
    let rho = c.amplitudes();
    let sum_q = q.edge(y - 1) + q.edge(y);
    let lower = if i == top {
        0.0
    } else {
        (sum_q / (rho[i] + rho[i + 1])).powi(2)
    };
    let upper = if i == 0 {
        f64::INFINITY
    } else {
        (sum_q / (rho[i] + rho[i - 1])).powi(2)
    };
    Ok(DecisionRegion { lower, upper, y, i })
}

/// Noiseless correct-detection region `D_{y,i} ∩ A_{y,i}` where
/// `A_{y,i} = (q_{y-1}²/ρ_i², q_y²/ρ_i²)` is the set of `z` placing `|h|ρ_i` in region `y`.
pub fn noiseless_region(c: &Constellation, q: &Quantizer, y: usize, i: usize) -> Result<DecisionRegion> {
    let d = decision_region(c, q, y, i)?;
    if d.is_empty() {
        return Ok(d);
    }
    let rho = c.amplitudes()[i];
    let a_lo = (q.edge(y - 1) / rho).powi(2);
    let a_hi = (q.edge(y) / rho).powi(2);
    let lower = d.lower.max(a_lo);
    let upper = d.upper.min(a_hi);
    Ok(if upper > lower {
        DecisionRegion { lower, upper, y, i }
    } else {
        DecisionRegion::empty(y, i)
    })
}

/// Multi-antenna ML: argmax over all `M` symbols of `Π_n P(y_n | |h_n| x)`,
/// evaluated as a sum of floored log-likelihoods. Ties go to the lower
/// ordinal (positive half first).
pub fn ml_detect_simo(
    c: &Constellation,
    q: &Quantizer,
    h: &[f64],
    y: &[i32],
    sigma2: f64,
) -> Result<Symbol> {
    if h.len() != y.len() || h.is_empty() {
        return Err(Error::Domain(format!(
            "need equal nonzero numbers of gains and outputs, got {} and {}",
            h.len(),
            y.len()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("noise variance {sigma2} must be positive")));
    }
    let intervals = y
        .iter()
        .map(|&yn| check_output(q, yn).map(|_| output_interval(q, yn)))
        .collect::<Result<Vec<_>>>()?;
    let std = (0.5 * sigma2).sqrt();
    let mut best = Symbol::positive(0);
    let mut best_ll = f64::NEG_INFINITY;
    for s in all_symbols(c) {
        let x = s.value(c);
        let ll: f64 = h
            .iter()
            .zip(&intervals)
            .map(|(&hn, &(lo, hi))| {
                interval_probability(lo, hi, hn * x, std)
                    .ln()
                    .max(LOG_LIKELIHOOD_FLOOR)
            })
            .sum();
        if ll > best_ll {
            best_ll = ll;
            best = s;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Constellation, Quantizer) {
        (
            Constellation::new(vec![1.0, 3.0]).unwrap(),
            Quantizer::new(vec![2.0], 2).unwrap(),
        )
    }

    #[test]
    fn quantize_regions() {
        let q = Quantizer::new(vec![1.0], 2).unwrap();
        assert_eq!(quantize(&q, 0.5), 1);
        assert_eq!(quantize(&q, 2.0), 2);
        assert_eq!(quantize(&q, -0.5), -1);
        assert_eq!(quantize(&q, -2.0), -2);
        // boundaries belong to the upper region
        assert_eq!(quantize(&q, 0.0), 1);
        assert_eq!(quantize(&q, 1.0), 2);
        assert_eq!(quantize(&q, -1.0), -1);
    }

    #[test]
    fn midpoint_rule_examples() {
        let (c, q) = setup();
        assert_eq!(ml_detect_midpoint(&c, &q, 1.0, 1).unwrap(), Symbol::positive(0));
        assert_eq!(ml_detect_midpoint(&c, &q, 1.0, 2).unwrap(), Symbol::positive(1));
        assert_eq!(ml_detect_midpoint(&c, &q, 0.4, 2).unwrap(), Symbol::positive(1));
        assert_eq!(ml_detect_midpoint(&c, &q, 1.0, -1).unwrap(), Symbol::negative(0));
        assert!(ml_detect_midpoint(&c, &q, 1.0, 3).is_err());
        assert!(ml_detect_midpoint(&c, &q, 0.0, 1).is_err());
    }

    #[test]
    fn midpoint_tie_goes_low() {
        // midpoint 1.0 equidistant from 0.5 and 1.5
        let c = Constellation::new(vec![0.5, 1.5]).unwrap();
        let q = Quantizer::new(vec![2.0], 2).unwrap();
        assert_eq!(ml_detect_midpoint(&c, &q, 1.0, 1).unwrap(), Symbol::positive(0));
    }

    #[test]
    fn region_examples() {
        let (c, q) = setup();
        let r = decision_region(&c, &q, 1, 1).unwrap();
        assert_eq!((r.lower, r.upper), (0.0, 0.25));
        let r0 = decision_region(&c, &q, 1, 0).unwrap();
        assert_eq!((r0.lower, r0.upper), (0.25, f64::INFINITY));
        assert!(decision_region(&c, &q, 2, 0).unwrap().is_empty());
        let top = decision_region(&c, &q, 2, 1).unwrap();
        assert_eq!((top.lower, top.upper), (0.0, f64::INFINITY));
        assert!(decision_region(&c, &q, 3, 0).is_err());
        assert!(decision_region(&c, &q, 1, 2).is_err());
    }

    #[test]
    fn noiseless_region_middle_symbol_formula() {
        let c = Constellation::new(vec![1.0, 2.5, 4.0, 7.0]).unwrap();
        let q = Quantizer::new(vec![0.8, 2.0, 3.3], 3).unwrap();
        for y in 1..=3usize {
            for i in 1..=2usize {
                let r = noiseless_region(&c, &q, y, i).unwrap();
                let p = c.amplitudes();
                let s = q.edge(y - 1) + q.edge(y);
                let lo = f64::max(s / (p[i] + p[i + 1]), q.edge(y - 1) / p[i]).powi(2);
                let hi = f64::min(s / (p[i] + p[i - 1]), q.edge(y) / p[i]).powi(2);
                if hi > lo {
                    assert_eq!((r.lower, r.upper), (lo, hi));
                } else {
                    assert!(r.is_empty());
                }
                let d = decision_region(&c, &q, y, i).unwrap();
                assert!(r.is_empty() || (r.lower >= d.lower && r.upper <= d.upper));
            }
        }
    }

    #[test]
    fn noiseless_region_nonempty_example() {
        let c = Constellation::new(vec![1.0, 3.0]).unwrap();
        let q = Quantizer::new(vec![1.5722], 2).unwrap();
        let r = noiseless_region(&c, &q, 1, 0).unwrap();
        assert!(!r.is_empty());
        assert!((r.lower - (1.5722f64 / 4.0).powi(2)).abs() < 1e-15);
        assert!((r.upper - 1.5722f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn simo_single_antenna_matches_midpoint() {
        let (c, q) = setup();
        for &h in &[0.2, 0.5, 1.0, 1.7, 3.0] {
            for y in [-2, -1, 1, 2] {
                let a = ml_detect_midpoint(&c, &q, h, y).unwrap();
                let b = ml_detect_simo(&c, &q, &[h], &[y], 0.3).unwrap();
                assert_eq!(a, b, "h={h} y={y}");
            }
        }
        assert!(ml_detect_simo(&c, &q, &[1.0, 2.0], &[1], 1.0).is_err());
        assert!(ml_detect_simo(&c, &q, &[1.0], &[1], 0.0).is_err());
    }

    #[test]
    fn interval_probability_tails() {
        let p = interval_probability(10.0, f64::INFINITY, 0.0, 1.0);
        assert!((p - q_func(10.0)).abs() < 1e-30);
        let p = interval_probability(f64::NEG_INFINITY, -10.0, 0.0, 1.0);
        assert!((p - q_func(10.0)).abs() < 1e-30);
        assert!((interval_probability(-1.0, 1.0, 0.0, 1.0) - 0.682689492137086).abs() < 1e-14);
    }
}
