//! The family catalog: every concrete family with its canonical decomposition,
//! conversions, sampler, closed-form KL divergence and maximum-likelihood
//! formula.
//!
//! Canonical identifiers (used by the CLI and the JSON files):
//! `univariate_gaussian`, `gaussian_fixed_variance`, `multivariate_gaussian`,
//! `isotropic_gaussian`, `poisson`, `centered_laplacian`, `bernoulli`,
//! `binomial`, `multinomial`, `rayleigh`, `gamma`, `beta`,
//! `inverse_gaussian`, `dirichlet`.

mod digamma_families;
mod discrete;
mod gaussian;
mod positive;
mod util;

use std::fmt;
use std::ops::Deref;

use rand::Rng;

pub use digamma_families::{Beta, Dirichlet, Gamma};
pub use discrete::{Bernoulli, Binomial, Multinomial, Poisson};
pub use gaussian::{GaussianFixedVariance, IsotropicGaussian, MultivariateGaussian, UnivariateGaussian};
pub use positive::{CenteredLaplacian, InverseGaussian, Rayleigh};

use crate::error::{Error, Result};
use crate::family::{check_len, ExponentialFamily, Observation, ParamVector, Space};
use crate::numerics::{RngSeed, SeededRng};

/// Every catalog family, with its fixed hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    UnivariateGaussian,
    GaussianFixedVariance(GaussianFixedVariance),
    MultivariateGaussian(MultivariateGaussian),
    IsotropicGaussian(IsotropicGaussian),
    Poisson,
    CenteredLaplacian,
    Bernoulli,
    Binomial(Binomial),
    Multinomial(Multinomial),
    Rayleigh,
    Gamma,
    Beta,
    InverseGaussian,
    Dirichlet(Dirichlet),
}

impl Deref for Family {
    type Target = dyn ExponentialFamily;

    fn deref(&self) -> &Self::Target {
        match self {
            Family::UnivariateGaussian => &UnivariateGaussian,
            Family::GaussianFixedVariance(f) => f,
            Family::MultivariateGaussian(f) => f,
            Family::IsotropicGaussian(f) => f,
            Family::Poisson => &Poisson,
            Family::CenteredLaplacian => &CenteredLaplacian,
            Family::Bernoulli => &Bernoulli,
            Family::Binomial(f) => f,
            Family::Multinomial(f) => f,
            Family::Rayleigh => &Rayleigh,
            Family::Gamma => &Gamma,
            Family::Beta => &Beta,
            Family::InverseGaussian => &InverseGaussian,
            Family::Dirichlet(f) => f,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        let hyper = self.hyperparams();
        if !hyper.is_empty() {
            let parts: Vec<String> = hyper.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", parts.join(", "))?;
        }
        Ok(())
    }
}

/// Fixed hyperparameters supplied alongside a family name. Missing values fall
/// back to the catalog defaults (`sigma2 = 1`, `d = 2`, `n = 10`, `k = 3`).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Hyperparams {
    pub sigma2: Option<f64>,
    pub d: Option<usize>,
    pub n: Option<u64>,
    pub k: Option<usize>,
}

pub const FAMILY_NAMES: [&str; 14] = [
    "univariate_gaussian",
    "gaussian_fixed_variance",
    "multivariate_gaussian",
    "isotropic_gaussian",
    "poisson",
    "centered_laplacian",
    "bernoulli",
    "binomial",
    "multinomial",
    "rayleigh",
    "gamma",
    "beta",
    "inverse_gaussian",
    "dirichlet",
];

impl Family {
    pub fn gaussian_fixed_variance(sigma2: f64) -> Result<Family> {
        util::positive("sigma2", sigma2)?;
        Ok(Family::GaussianFixedVariance(GaussianFixedVariance { sigma2 }))
    }

    pub fn multivariate_gaussian(d: usize) -> Result<Family> {
        if d == 0 {
            return Err(Error::domain("d", "dimension must be at least 1"));
        }
        Ok(Family::MultivariateGaussian(MultivariateGaussian { d }))
    }

    pub fn isotropic_gaussian(d: usize) -> Result<Family> {
        if d == 0 {
            return Err(Error::domain("d", "dimension must be at least 1"));
        }
        Ok(Family::IsotropicGaussian(IsotropicGaussian { d }))
    }

    pub fn binomial(n: u64) -> Result<Family> {
        if n == 0 {
            return Err(Error::domain("n", "trial count must be at least 1"));
        }
        Ok(Family::Binomial(Binomial { n }))
    }

    pub fn multinomial(n: u64, k: usize) -> Result<Family> {
        if n == 0 {
            return Err(Error::domain("n", "trial count must be at least 1"));
        }
        if k < 2 {
            return Err(Error::domain("k", "need at least 2 categories"));
        }
        Ok(Family::Multinomial(Multinomial { n, k }))
    }

    pub fn dirichlet(k: usize) -> Result<Family> {
        if k < 2 {
            return Err(Error::domain("k", "need at least 2 components"));
        }
        Ok(Family::Dirichlet(Dirichlet { k }))
    }

    /// Looks a family up by canonical name.
    pub fn from_name(name: &str, hyper: &Hyperparams) -> Result<Family> {
        match name {
            "univariate_gaussian" => Ok(Family::UnivariateGaussian),
            "gaussian_fixed_variance" => Family::gaussian_fixed_variance(hyper.sigma2.unwrap_or(1.0)),
            "multivariate_gaussian" => Family::multivariate_gaussian(hyper.d.unwrap_or(2)),
            "isotropic_gaussian" => Family::isotropic_gaussian(hyper.d.unwrap_or(2)),
            "poisson" => Ok(Family::Poisson),
            "centered_laplacian" => Ok(Family::CenteredLaplacian),
            "bernoulli" => Ok(Family::Bernoulli),
            "binomial" => Family::binomial(hyper.n.unwrap_or(10)),
            "multinomial" => Family::multinomial(hyper.n.unwrap_or(10), hyper.k.unwrap_or(3)),
            "rayleigh" => Ok(Family::Rayleigh),
            "gamma" => Ok(Family::Gamma),
            "beta" => Ok(Family::Beta),
            "inverse_gaussian" => Ok(Family::InverseGaussian),
            "dirichlet" => Family::dirichlet(hyper.k.unwrap_or(3)),
            other => Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }

    /// Length of a parameter vector in `space`.
    pub fn param_len(&self, space: Space) -> usize {
        match space {
            Space::Source => self.fields(Space::Source).iter().map(|f| f.shape.len()).sum(),
            Space::Natural | Space::Expectation => self.order(),
        }
    }

    /// True for the Gaussian entries, whose observation space coincides with
    /// the mean space.
    pub fn is_gaussian(&self) -> bool {
        matches!(
            self,
            Family::UnivariateGaussian
                | Family::GaussianFixedVariance(_)
                | Family::MultivariateGaussian(_)
                | Family::IsotropicGaussian(_)
        )
    }
}

/// One catalog row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub family: Family,
    pub closed_form_kl: bool,
    pub closed_form_mle: bool,
}

/// All 14 families with default hyperparameters.
pub fn list_families() -> Vec<CatalogEntry> {
    FAMILY_NAMES
        .iter()
        .map(|name| {
            let family = Family::from_name(name, &Hyperparams::default()).expect("catalog default");
            CatalogEntry {
                family,
                closed_form_kl: true,
                closed_form_mle: !matches!(family, Family::Dirichlet(_)),
            }
        })
        .collect()
}

/// Catalog entry by name, with default hyperparameters.
pub fn lookup(name: &str) -> Result<CatalogEntry> {
    list_families()
        .into_iter()
        .find(|e| e.family.name() == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown family `{name}`")))
}

/// `n` i.i.d. draws at source parameters `source` (boundary probabilities
/// allowed as limits).
pub fn sample(family: &Family, source: &[f64], n: usize, seed: RngSeed) -> Result<Vec<Observation>> {
    let mut rng = seed.rng();
    sample_with(family, source, n, &mut rng)
}

pub(crate) fn sample_with(family: &Family, source: &[f64], n: usize, rng: &mut SeededRng) -> Result<Vec<Observation>> {
    check_len(source, family.param_len(Space::Source))?;
    family.check_source_closed(source)?;
    Ok((0..n).map(|_| family.sample(source, rng)).collect())
}

/// Closed-form `KL(P || Q)` from the family's table row (with the corrected
/// Gamma, Beta and Dirichlet rows).
pub fn kl_closed_form(p: &ParamVector, q: &ParamVector) -> Result<f64> {
    same_family(p, q)?;
    let (sp, sq) = (p.to_source()?, q.to_source()?);
    Ok(p.family().kl_closed_form(sp.values(), sq.values()))
}

/// Maximum-likelihood source parameters from the family's closed-form (or
/// implicit-equation) estimator.
pub fn mle_closed_form(family: &Family, samples: &[Observation]) -> Result<ParamVector> {
    for x in samples {
        check_len(x, family.obs_dim())?;
        family.check_observation(x)?;
    }
    let source = family.mle_closed_form(samples)?;
    ParamVector::source(*family, source).map_err(|e| match e {
        Error::Domain { field, reason } => Error::DegenerateData(format!("estimate {field} {reason}")),
        other => other,
    })
}

pub(crate) fn same_family(p: &ParamVector, q: &ParamVector) -> Result<()> {
    if p.family() == q.family() {
        Ok(())
    } else {
        Err(Error::FamilyMismatch {
            left: p.family().to_string(),
            right: q.family().to_string(),
        })
    }
}

/// A representative in-domain source parameter vector.
pub fn default_source(family: &Family) -> Vec<f64> {
    match family {
        Family::UnivariateGaussian => vec![0.0, 1.0],
        Family::GaussianFixedVariance(_) => vec![0.0],
        Family::MultivariateGaussian(m) => {
            let d = m.d;
            let mut v = vec![0.0; d];
            for i in 0..d {
                for j in 0..d {
                    v.push(if i == j { 1.0 } else { 0.3f64.powi((i as i32 - j as i32).abs()) });
                }
            }
            v
        }
        Family::IsotropicGaussian(m) => vec![0.0; m.d],
        Family::Poisson => vec![4.0],
        Family::CenteredLaplacian => vec![1.0],
        Family::Bernoulli => vec![0.3],
        Family::Binomial(_) => vec![0.3],
        Family::Multinomial(m) => vec![1.0 / m.k as f64; m.k],
        Family::Rayleigh => vec![1.0],
        Family::Gamma => vec![1.0, 2.0],
        Family::Beta => vec![2.0, 3.0],
        Family::InverseGaussian => vec![1.0, 2.0],
        Family::Dirichlet(d) => (0..d.k).map(|i| 1.5 + 0.5 * i as f64).collect(),
    }
}

/// Random in-domain source parameters over moderate ranges, for property
/// checks.
pub fn random_source(family: &Family, rng: &mut SeededRng) -> Vec<f64> {
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    match family {
        Family::UnivariateGaussian => vec![u(-3.0, 3.0), u(0.2, 4.0)],
        Family::GaussianFixedVariance(_) => vec![u(-3.0, 3.0)],
        Family::MultivariateGaussian(m) => {
            let d = m.d;
            let mu: Vec<f64> = (0..d).map(|_| u(-2.0, 2.0)).collect();
            // Σ = A Aᵀ + 0.5 I
            let a: Vec<f64> = (0..d * d).map(|_| u(-1.0, 1.0)).collect();
            let mut v = mu;
            for i in 0..d {
                for j in 0..d {
                    let mut s = if i == j { 0.5 } else { 0.0 };
                    for l in 0..d {
                        s += a[i * d + l] * a[j * d + l];
                    }
                    v.push(s);
                }
            }
            v
        }
        Family::IsotropicGaussian(m) => (0..m.d).map(|_| u(-3.0, 3.0)).collect(),
        Family::Poisson => vec![u(0.5, 10.0)],
        Family::CenteredLaplacian => vec![u(0.3, 3.0)],
        Family::Bernoulli | Family::Binomial(_) => vec![u(0.1, 0.9)],
        Family::Multinomial(m) => {
            let raw: Vec<f64> = (0..m.k).map(|_| u(0.2, 1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|r| r / total).collect()
        }
        Family::Rayleigh => vec![u(0.3, 4.0)],
        Family::Gamma => vec![u(0.5, 3.0), u(0.8, 6.0)],
        Family::Beta => vec![u(1.0, 6.0), u(1.0, 6.0)],
        Family::InverseGaussian => vec![u(0.5, 3.0), u(0.8, 6.0)],
        Family::Dirichlet(d) => (0..d.k).map(|_| u(1.0, 5.0)).collect(),
    }
}
