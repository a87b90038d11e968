//! Invariant checks run by `expfam validate`: normalization, conversion round
//! trips, the Legendre identity, `∇F` against finite differences and the
//! closed-form KL against the Bregman divergence.

use expfam::catalog::{default_source, kl_closed_form, random_source};
use expfam::divergences::{bregman, Generator};
use expfam::family::verify_normalization;
use expfam::numerics::{finite_diff_gradient, RngSeed};
use expfam::{Error, Family, ParamVector};

use crate::CliError;

/// One measured invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub family: String,
    pub point: usize,
    pub name: &'static str,
    /// `None` when the check does not apply (reported as skipped).
    pub residual: Option<f64>,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.residual.is_none_or(|r| r <= self.tol)
    }

    pub fn line(&self) -> String {
        match self.residual {
            Some(r) => format!(
                "{:<28} point {} {:<16} residual {:.3e} tol {:.0e} {}",
                self.family,
                self.point,
                self.name,
                r,
                self.tol,
                if self.passed() { "PASS" } else { "FAIL" }
            ),
            None => format!("{:<28} point {} {:<16} skipped", self.family, self.point, self.name),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max)
}

/// Runs every check at `p`, using `q` as the second argument of the KL check.
pub fn check_point(p: &ParamVector, q: &ParamVector, point: usize) -> Result<Vec<Check>, CliError> {
    let fam = p.family();
    let family = fam.to_string();
    let check = |name, residual, tol| Check {
        family: family.clone(),
        point,
        name,
        residual,
        tol,
    };
    let mut out = Vec::new();

    let norm = match verify_normalization(p, 1e-6) {
        Ok(n) => Some((n.integral - 1.0).abs()),
        Err(Error::Unsupported { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    out.push(check("normalization", norm, 1e-6));

    let source = p.to_source()?;
    let theta = p.to_natural()?;
    let eta = theta.to_expectation()?;
    let back = eta.to_natural()?.to_source()?;
    let tol = if fam.has_closed_conjugate() { 1e-8 } else { 1e-7 };
    out.push(check("round trip", Some(max_rel(back.values(), source.values())), tol));

    let t = theta.values();
    let f = fam.log_normalizer(t);
    let legendre = fam
        .conjugate(eta.values())
        .map(|g| (f + g - t.iter().zip(eta.values()).map(|(a, b)| a * b).sum::<f64>()).abs() / (1.0 + f.abs()));
    out.push(check("legendre", legendre, 1e-8));

    let fd = finite_diff_gradient(|x| fam.log_normalizer(x), t, 1e-5);
    out.push(check("gradient", Some(max_rel(&fd, eta.values())), 1e-4));

    let closed = kl_closed_form(p, q)?;
    let breg = bregman(Generator::LogNormalizer, q, p)?;
    out.push(check("kl vs bregman", Some(rel(closed, breg)), 1e-9));
    Ok(out)
}

/// Default point plus two seeded random points, or the supplied point alone.
pub fn run(family: &Family, given: Option<&ParamVector>) -> Result<Vec<Check>, CliError> {
    let mut rng = RngSeed(0).rng();
    let mut points = Vec::new();
    match given {
        Some(p) => points.push(p.clone()),
        None => {
            points.push(ParamVector::source(*family, default_source(family))?);
            for _ in 0..2 {
                points.push(ParamVector::source(*family, random_source(family, &mut rng))?);
            }
        }
    }
    let mut checks = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let q = ParamVector::source(*family, random_source(family, &mut rng))?;
        checks.extend(check_point(p, &q, i)?);
    }
    Ok(checks)
}
