use crate::error::{Error, Result};
use crate::numerics::stable_sum;
use crate::special::ln_factorial;

pub(crate) fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be > 0, got {v}")))
    }
}

pub(crate) fn negative(field: &str, v: f64) -> Result<()> {
    if v < 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be < 0, got {v}")))
    }
}

pub(crate) fn greater(field: &str, v: f64, bound: f64) -> Result<()> {
    if v > bound && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be > {bound}, got {v}")))
    }
}

pub(crate) fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be finite, got {v}")))
    }
}

pub(crate) fn open_unit(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must lie in (0, 1), got {v}")))
    }
}

pub(crate) fn closed_unit(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must lie in [0, 1], got {v}")))
    }
}

pub(crate) fn indexed(field: &str, i: usize) -> String {
    format!("{field}[{i}]")
}

pub(crate) fn is_count(x: f64) -> bool {
    x >= 0.0 && x.fract() == 0.0 && x.is_finite()
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
pub(crate) fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `σ(t)(1 - σ(t))` without cancellation.
pub(crate) fn logistic_variance(t: f64) -> f64 {
    let e = (-t.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

pub(crate) fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// `Σ_x Poisson(x; λ) g(x)`, truncated once the mass terms are negligible
/// beyond the mode.
pub(crate) fn poisson_expectation<G: Fn(u64) -> f64>(lambda: f64, g: G) -> f64 {
    let ln_lambda = lambda.ln();
    let mut terms = Vec::new();
    let mut x = 0u64;
    loop {
        let ln_mass = x as f64 * ln_lambda - lambda - ln_factorial(x);
        let mass = ln_mass.exp();
        let gx = g(x);
        terms.push(if mass == 0.0 { 0.0 } else { mass * gx });
        if x as f64 > lambda + 10.0 && mass < 1e-18 && (mass * gx).abs() < 1e-18 {
            break;
        }
        x += 1;
    }
    stable_sum(terms)
}

/// `Σ_{x=0}^n Binomial(x; n, p) g(x)`.
pub(crate) fn binomial_expectation<G: Fn(u64) -> f64>(n: u64, p: f64, g: G) -> f64 {
    let ln_n = ln_factorial(n);
    stable_sum((0..=n).map(|x| {
        let ln_mass = ln_n - ln_factorial(x) - ln_factorial(n - x)
            + if x == 0 { 0.0 } else { x as f64 * p.ln() }
            + if x == n { 0.0 } else { (n - x) as f64 * (-p).ln_1p() };
        ln_mass.exp() * g(x)
    }))
}

pub(crate) fn mean_by<F: Fn(&[f64]) -> f64>(samples: &[Vec<f64>], f: F) -> f64 {
    stable_sum(samples.iter().map(|x| f(x))) / samples.len() as f64
}

pub(crate) fn require_samples(samples: &[Vec<f64>], min: usize) -> Result<()> {
    if samples.len() < min {
        Err(Error::InsufficientData(format!(
            "need at least {min} observations, got {}",
            samples.len()
        )))
    } else {
        Ok(())
    }
}
