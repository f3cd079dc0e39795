//! Scalar special functions: Gaussian tail, regularized incomplete gamma,
//! double factorial and the truncated Gaussian moment integral.
//!
//! Every function here is pure. Infinite endpoints are passed as
//! `f64::INFINITY` / `f64::NEG_INFINITY` and handled by explicit branches.

use crate::error::{Error, Result};
use std::f64::consts::{PI, SQRT_2};

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Natural log of `Q(x)`, finite for all finite `x`.
///
/// Uses the continued fraction of the Mills ratio once `erfc` would underflow.
pub fn ln_q_func(x: f64) -> f64 {
    if x < 30.0 {
        return q_func(x).ln();
    }
    // Q(x) = phi(x) / (x + 1/(x + 2/(x + 3/(x + ...))))
    let mut cf = x;
    for k in (1..=60).rev() {
        cf = x + k as f64 / cf;
    }
    -0.5 * x * x - 0.5 * (2.0 * PI).ln() - cf.ln()
}

/// Log-gamma for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn check_shape(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("gamma shape must be positive, got {m}")))
    }
}

fn check_arg(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "incomplete gamma argument must be nonnegative, got {x}"
        )))
    }
}

/// ln of the series `sum x^n / (m (m+1) ... (m+n))`, used for `x < m + 1`.
fn ln_lower_series(m: f64, x: f64) -> f64 {
    let mut ap = m;
    let mut del = 1.0 / m;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum.ln() - x + m * x.ln() - ln_gamma(m)
}

/// ln of the Lentz continued fraction for the upper tail, used for `x >= m + 1`.
fn ln_upper_cf(m: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - m;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - m);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h.ln() - x + m * x.ln() - ln_gamma(m)
}

/// Both regularized incomplete gammas `(P(m,x), Q(m,x))`; they sum to one.
pub fn gamma_reg_pair(m: f64, x: f64) -> Result<(f64, f64)> {
    check_shape(m)?;
    check_arg(x)?;
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    if x < m + 1.0 {
        let p = ln_lower_series(m, x).exp().min(1.0);
        Ok((p, 1.0 - p))
    } else {
        let q = ln_upper_cf(m, x).exp().min(1.0);
        Ok((1.0 - q, q))
    }
}

/// Regularized upper incomplete gamma `Γ(m,x)/Γ(m)` with integrand `t^{m-1} e^{-t}`.
pub fn upper_gamma_reg(m: f64, x: f64) -> Result<f64> {
    gamma_reg_pair(m, x).map(|(_, q)| q)
}

/// Regularized lower incomplete gamma `γ(m,x)/Γ(m)`.
pub fn lower_gamma_reg(m: f64, x: f64) -> Result<f64> {
    gamma_reg_pair(m, x).map(|(p, _)| p)
}

/// `ln P(m,x)`, accurate where `P` underflows.
pub fn ln_lower_gamma_reg(m: f64, x: f64) -> Result<f64> {
    check_shape(m)?;
    check_arg(x)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < m + 1.0 {
        Ok(ln_lower_series(m, x))
    } else {
        Ok((-ln_upper_cf(m, x).exp()).ln_1p())
    }
}

/// `ln Q(m,x)`, accurate where `Q` underflows.
pub fn ln_upper_gamma_reg(m: f64, x: f64) -> Result<f64> {
    check_shape(m)?;
    check_arg(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    if x < m + 1.0 {
        Ok((-ln_lower_series(m, x).exp()).ln_1p())
    } else {
        Ok(ln_upper_cf(m, x))
    }
}

/// `ln P(m, e^{ln_x})` for arguments whose exponential under- or overflows.
pub fn ln_lower_gamma_reg_ln(m: f64, ln_x: f64) -> Result<f64> {
    check_shape(m)?;
    if ln_x.is_nan() {
        return Err(Error::Domain("incomplete gamma: NaN argument".into()));
    }
    if ln_x < -700.0 {
        // P(m, x) = x^m e^{-x} / Γ(m+1) (1 + O(x))
        return Ok(m * ln_x - ln_gamma(m + 1.0));
    }
    if ln_x > 700.0 {
        return Ok(0.0);
    }
    ln_lower_gamma_reg(m, ln_x.exp())
}

/// `ln Q(m, e^{ln_x})` for arguments whose exponential under- or overflows.
pub fn ln_upper_gamma_reg_ln(m: f64, ln_x: f64) -> Result<f64> {
    check_shape(m)?;
    if ln_x.is_nan() {
        return Err(Error::Domain("incomplete gamma: NaN argument".into()));
    }
    if ln_x < -700.0 {
        return Ok(-(m * ln_x - ln_gamma(m + 1.0)).exp());
    }
    if ln_x > 700.0 {
        return Ok(f64::NEG_INFINITY);
    }
    ln_upper_gamma_reg(m, ln_x.exp())
}

/// `n!!` with `(-1)!! = 0!! = 1`.
pub fn double_factorial(n: i64) -> Result<u64> {
    if n < -1 {
        return Err(Error::Domain(format!(
            "double factorial undefined for {n}"
        )));
    }
    let mut acc: u64 = 1;
    let mut k = n;
    while k > 1 {
        acc = acc
            .checked_mul(k as u64)
            .ok_or_else(|| Error::Domain(format!("{n}!! overflows u64")))?;
        k -= 2;
    }
    Ok(acc)
}

/// Antiderivative-like term `G(u)` such that `F(a,b,l) = G(a) - G(b)`.
fn f_integral_term(u: f64, l: u32) -> f64 {
    let s = 0.5 * (l as f64 + 1.0);
    let even = l % 2 == 0;
    // For odd l the sign power is even and equals one everywhere (including 0).
    let sign = if even {
        if u < 0.0 {
            -1.0
        } else {
            1.0
        }
    } else {
        1.0
    };
    let constant = if even {
        (PI / 2.0).sqrt() * double_factorial(l as i64 - 1).unwrap_or(1) as f64
    } else {
        0.0
    };
    let tail = if u.is_infinite() {
        0.0
    } else {
        // Γ(s, u²/2) 2^{(l-1)/2}, unnormalized
        let q = upper_gamma_reg(s, 0.5 * u * u).unwrap_or(0.0);
        q * (ln_gamma(s) + 0.5 * (l as f64 - 1.0) * std::f64::consts::LN_2).exp()
    };
    -sign * (tail - constant)
}

/// Truncated Gaussian moment `F(a,b,l) = ∫_b^a u^l e^{-u²/2} du`.
///
/// Either endpoint may be infinite. Antisymmetric in `(a, b)`.
pub fn f_integral(a: f64, b: f64, l: u32) -> f64 {
    if a == b {
        return 0.0;
    }
    f_integral_term(a, l) - f_integral_term(b, l)
}
