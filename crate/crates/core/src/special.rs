//! Gamma-function family on the positive real axis.
//!
//! `ln Γ`, digamma and trigamma are evaluated by shifting the argument up with
//! the usual recurrences until it exceeds [`ASYMPTOTIC_THRESHOLD`] and then
//! summing the Stirling / Bernoulli asymptotic series. Only positive arguments
//! are supported; there is no reflection formula.

use crate::error::{Error, Result};

const ASYMPTOTIC_THRESHOLD: f64 = 10.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("x", format!("must be a finite positive real, got {x}")))
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(lgamma(x))
}

/// Digamma `Ψ(x) = Γ'(x)/Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(psi(x))
}

/// Trigamma `Ψ'(x)` for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(psi1(x))
}

/// `ln n!`. Exact for `n <= 20` (the factorial fits in a `u64`).
pub fn ln_factorial(n: u64) -> f64 {
    if n <= 20 {
        let fact: u64 = (1..=n).product();
        (fact as f64).ln()
    } else {
        lgamma(n as f64 + 1.0)
    }
}

/// `ln B(a, b)` for `a, b > 0`.
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    check_positive(a)?;
    check_positive(b)?;
    Ok(lbeta(a, b))
}

// Unchecked kernels. Callers guarantee `x > 0`.

pub(crate) fn lgamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut z = x;
    let mut shift = 1.0;
    while z < ASYMPTOTIC_THRESHOLD {
        shift *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // B_{2k} / (2k (2k-1)) for k = 1..8
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2
                                        * (1.0 / 1188.0
                                            + inv2
                                                * (-691.0 / 360_360.0
                                                    + inv2 * (1.0 / 156.0 + inv2 * (-3617.0 / 122_400.0))))))));
    let stirling = (z - 0.5) * z.ln() - z + HALF_LN_2PI + series;
    if shift == 1.0 {
        stirling
    } else {
        stirling - shift.ln()
    }
}

pub(crate) fn psi(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut z = x;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_THRESHOLD {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    // B_{2k} / (2k) for k = 1..8
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32_760.0 - inv2 * (1.0 / 12.0 - inv2 * 3617.0 / 8160.0)))))));
    acc + z.ln() - 0.5 / z - series
}

pub(crate) fn psi1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut z = x;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_THRESHOLD {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // 1/z + 1/(2z^2) + sum_k B_{2k} / z^{2k+1}
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0
                        - inv2
                            * (1.0 / 42.0
                                - inv2
                                    * (1.0 / 30.0
                                        - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0 - inv2 * 7.0 / 6.0))))));
    acc + series
}

pub(crate) fn lbeta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}
