//! Lloyd-Max scalar quantizer for a unit Gaussian and the additive
//! quantization noise model factor `α = 1 - D(b)`.

use crate::error::{Error, Result};
use crate::specfun::q_func;
use std::f64::consts::PI;

/// Optimal quantizer for `N(0, 1)` with `2^b` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydMax {
    /// Interior thresholds, ascending (`2^b - 1` of them).
    pub thresholds: Vec<f64>,
    /// Reconstruction levels, ascending.
    pub levels: Vec<f64>,
    /// Mean squared error for a unit-variance input.
    pub distortion: f64,
    pub iterations: usize,
}

fn phi(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }
}

fn cell_mass(a: f64, b: f64) -> f64 {
    // Φ(b) - Φ(a) via the complementary form for accuracy in the tails
    q_func(a) - q_func(b)
}

fn x_phi(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x * phi(x)
    }
}

/// Designs the `2^bits`-level Lloyd-Max quantizer by fixed-point iteration.
pub fn lloyd_max(bits: u32) -> Result<LloydMax> {
    if !(1..=8).contains(&bits) {
        return Err(Error::Domain(format!("Lloyd-Max design supports 1..=8 bits, got {bits}")));
    }
    let n = 1usize << bits;
    // start from uniform levels over ±3
    let mut levels: Vec<f64> = (0..n)
        .map(|j| -3.0 + 6.0 * (j as f64 + 0.5) / n as f64)
        .collect();
    let mut thresholds = vec![0.0; n - 1];
    let mut iterations = 0;
    for it in 0..200_000 {
        iterations = it + 1;
        for j in 0..n - 1 {
            thresholds[j] = 0.5 * (levels[j] + levels[j + 1]);
        }
        let mut shift: f64 = 0.0;
        for j in 0..n {
            let a = if j == 0 { f64::NEG_INFINITY } else { thresholds[j - 1] };
            let b = if j == n - 1 { f64::INFINITY } else { thresholds[j] };
            let c = (phi(a) - phi(b)) / cell_mass(a, b);
            shift = shift.max((c - levels[j]).abs());
            levels[j] = c;
        }
        if shift < 1e-15 {
            break;
        }
    }
    let mut distortion = 0.0;
    for j in 0..n {
        let a = if j == 0 { f64::NEG_INFINITY } else { thresholds[j - 1] };
        let b = if j == n - 1 { f64::INFINITY } else { thresholds[j] };
        let y = levels[j];
        let p = cell_mass(a, b);
        distortion += p * (1.0 + y * y) - 2.0 * y * (phi(a) - phi(b)) + x_phi(a) - x_phi(b);
    }
    Ok(LloydMax {
        thresholds,
        levels,
        distortion,
        iterations,
    })
}

/// `α = 1 - D(b)` with `D` the Lloyd-Max Gaussian distortion.
pub fn aqnm_alpha(bits: u32) -> Result<f64> {
    Ok(1.0 - lloyd_max(bits)?.distortion)
}
