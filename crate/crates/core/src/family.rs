//! Generic exponential-family machinery.
//!
//! A family is described by its canonical decomposition
//! `log p(x; θ) = <t(x), θ> - F(θ) + k(x)`. Concrete families implement
//! [`ExponentialFamily`]; everything here (conversions between the source,
//! natural and expectation parameterizations, the Legendre conjugate, Fisher
//! information, normalization checks) is written once against that trait.
//!
//! Matrix-valued parameters are stored flattened row-major and paired with the
//! trace inner product `<X, Y> = Tr(XY)`, which for symmetric matrices is the
//! plain dot product of the flattened entries.

use std::fmt;

use nalgebra::DMatrix;

use crate::catalog::Family;
use crate::error::{Error, Result};
use crate::numerics::{adaptive_quadrature, dot, stable_sum, QuadratureSpec, SeededRng};

/// One of the three coordinate systems of a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    /// Traditional parameters (λ), e.g. `(μ, σ²)`.
    Source,
    /// Natural parameters θ.
    Natural,
    /// Expectation parameters η = E[t(X)] = ∇F(θ).
    Expectation,
}

impl Space {
    pub const ALL: [Space; 3] = [Space::Source, Space::Natural, Space::Expectation];

    pub fn as_str(self) -> &'static str {
        match self {
            Space::Source => "source",
            Space::Natural => "natural",
            Space::Expectation => "expectation",
        }
    }

    pub fn parse(s: &str) -> Option<Space> {
        match s {
            "source" => Some(Space::Source),
            "natural" => Some(Space::Natural),
            "expectation" => Some(Space::Expectation),
            _ => None,
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sample space of a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    RealLine,
    RealVectors,
    PositiveReals,
    UnitInterval,
    NonNegativeIntegers,
    /// `{0, ..., n}`.
    BoundedIntegers,
    /// Count vectors summing to `n`.
    CountVectors,
    /// Interior of the probability simplex.
    Simplex,
}

/// Shape of a named parameter field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    /// Square `d x d` matrix, stored row-major.
    Matrix(usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Matrix(d) => d * d,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

/// Named block of a parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    pub name: &'static str,
    pub shape: Shape,
}

impl Field {
    pub const fn scalar(name: &'static str) -> Field {
        Field {
            name,
            shape: Shape::Scalar,
        }
    }
    pub const fn vector(name: &'static str, len: usize) -> Field {
        Field {
            name,
            shape: Shape::Vector(len),
        }
    }
    pub const fn matrix(name: &'static str, dim: usize) -> Field {
        Field {
            name,
            shape: Shape::Matrix(dim),
        }
    }
}

/// A point of the sample space. Count observations are stored as reals.
pub type Observation = Vec<f64>;

/// Canonical decomposition of one exponential family.
///
/// Methods taking raw slices assume the arguments already passed the matching
/// `check_*` method; the validated entry points are the free functions of this
/// module and [`ParamVector`].
pub trait ExponentialFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    /// Dimension of the natural (and expectation) parameter vector.
    fn order(&self) -> usize;
    fn support(&self) -> Support;
    fn carrier_is_zero(&self) -> bool;
    fn has_closed_conjugate(&self) -> bool;
    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
    fn fields(&self, space: Space) -> Vec<Field>;

    fn check_observation(&self, x: &[f64]) -> Result<()>;
    fn check_source(&self, source: &[f64]) -> Result<()>;
    fn check_natural(&self, theta: &[f64]) -> Result<()>;
    fn check_expectation(&self, eta: &[f64]) -> Result<()>;
    /// Source check used by samplers; may admit boundary values whose limit
    /// distribution is well defined (e.g. a Bernoulli with `p = 1`).
    fn check_source_closed(&self, source: &[f64]) -> Result<()> {
        self.check_source(source)
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64>;
    fn carrier(&self, x: &[f64]) -> f64;
    fn log_normalizer(&self, theta: &[f64]) -> f64;
    fn grad_log_normalizer(&self, theta: &[f64]) -> Vec<f64>;
    /// Analytic Hessian of `F`, when derived.
    fn hessian_log_normalizer(&self, _theta: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
    /// Closed-form Legendre conjugate `G(η)`, when available.
    fn conjugate(&self, _eta: &[f64]) -> Option<f64> {
        None
    }
    /// `∇G(η) = (∇F)^{-1}(η)`.
    fn grad_conjugate(&self, eta: &[f64]) -> Result<Vec<f64>>;

    fn source_to_natural(&self, source: &[f64]) -> Vec<f64>;
    fn natural_to_source(&self, theta: &[f64]) -> Vec<f64>;
    fn source_to_expectation(&self, source: &[f64]) -> Vec<f64> {
        self.grad_log_normalizer(&self.source_to_natural(source))
    }
    fn expectation_to_source(&self, eta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.natural_to_source(&self.grad_conjugate(eta)?))
    }

    /// One draw at the given source parameters.
    fn sample(&self, source: &[f64], rng: &mut SeededRng) -> Vec<f64>;

    /// Closed-form `KL(P || Q)` from source parameters.
    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64;
    /// Closed-form (or card-equation) maximum-likelihood source parameters.
    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>>;

    /// `E_θ[k(X)]` by closed form or exact summation, if available.
    fn expected_carrier(&self, theta: &[f64]) -> Option<f64> {
        if self.carrier_is_zero() {
            Some(0.0)
        } else {
            let _ = theta;
            None
        }
    }
    /// `E_θ[exp(s k(X))]` by closed form or exact summation, if available.
    fn carrier_exp_moment(&self, theta: &[f64], s: f64) -> Option<f64> {
        if self.carrier_is_zero() {
            Some(1.0)
        } else {
            let _ = (theta, s);
            None
        }
    }
}

pub(crate) fn check_len(values: &[f64], expected: usize) -> Result<()> {
    if values.len() == expected {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            got: values.len(),
        })
    }
}

/// Parameter vector tagged with its family and coordinate system.
///
/// Construction validates the length and the (open) domain of the tagged
/// space, so every `ParamVector` in circulation is a valid family member.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    family: Family,
    space: Space,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(family: Family, space: Space, values: Vec<f64>) -> Result<Self> {
        let expected = family.param_len(space);
        check_len(&values, expected)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(space.as_str(), "parameters must be finite"));
        }
        match space {
            Space::Source => family.check_source(&values)?,
            Space::Natural => family.check_natural(&values)?,
            Space::Expectation => family.check_expectation(&values)?,
        }
        Ok(ParamVector { family, space, values })
    }

    pub fn source(family: Family, values: Vec<f64>) -> Result<Self> {
        Self::new(family, Space::Source, values)
    }

    pub fn natural(family: Family, values: Vec<f64>) -> Result<Self> {
        Self::new(family, Space::Natural, values)
    }

    pub fn expectation(family: Family, values: Vec<f64>) -> Result<Self> {
        Self::new(family, Space::Expectation, values)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Converts to `target` using the card formulas, `∇F` or `∇G`.
    pub fn convert(&self, target: Space) -> Result<ParamVector> {
        if target == self.space {
            return Ok(self.clone());
        }
        let fam = &self.family;
        let v = &self.values;
        let values = match (self.space, target) {
            (Space::Source, Space::Natural) => fam.source_to_natural(v),
            (Space::Natural, Space::Source) => fam.natural_to_source(v),
            (Space::Source, Space::Expectation) => fam.source_to_expectation(v),
            (Space::Expectation, Space::Source) => fam.expectation_to_source(v)?,
            (Space::Natural, Space::Expectation) => fam.grad_log_normalizer(v),
            (Space::Expectation, Space::Natural) => fam.grad_conjugate(v)?,
            _ => unreachable!(),
        };
        ParamVector::new(self.family, target, values).map_err(|e| match e {
            Error::Domain { field, reason } => Error::Numerical(format!(
                "{} -> {} conversion left the {target} domain ({field}: {reason})",
                self.space, target
            )),
            other => other,
        })
    }

    pub fn to_natural(&self) -> Result<ParamVector> {
        self.convert(Space::Natural)
    }

    pub fn to_expectation(&self) -> Result<ParamVector> {
        self.convert(Space::Expectation)
    }

    pub fn to_source(&self) -> Result<ParamVector> {
        self.convert(Space::Source)
    }
}

/// Validated `t(x)`.
pub fn sufficient_statistic(family: &Family, x: &[f64]) -> Result<Vec<f64>> {
    check_len(x, family.obs_dim())?;
    family.check_observation(x)?;
    Ok(family.sufficient_statistic(x))
}

/// Validated carrier `k(x)`.
pub fn carrier_measure(family: &Family, x: &[f64]) -> Result<f64> {
    check_len(x, family.obs_dim())?;
    family.check_observation(x)?;
    Ok(family.carrier(x))
}

/// `F(θ)`; `params` may be in any space.
pub fn log_normalizer(params: &ParamVector) -> Result<f64> {
    let theta = params.to_natural()?;
    Ok(params.family.log_normalizer(theta.values()))
}

/// `η = ∇F(θ)`.
pub fn grad_log_normalizer(params: &ParamVector) -> Result<ParamVector> {
    params.to_natural()?.to_expectation()
}

/// Legendre conjugate `G(η) = <θ*, η> - F(θ*)`, closed form when the family
/// has one, otherwise through `θ* = ∇G(η)`.
pub fn conjugate(params: &ParamVector) -> Result<f64> {
    let eta = params.to_expectation()?;
    let fam = params.family;
    if let Some(g) = fam.conjugate(eta.values()) {
        return Ok(g);
    }
    let theta = fam.grad_conjugate(eta.values())?;
    Ok(dot(&theta, eta.values()) - fam.log_normalizer(&theta))
}

/// `θ = ∇G(η)`.
pub fn grad_conjugate(params: &ParamVector) -> Result<ParamVector> {
    params.to_expectation()?.to_natural()
}

/// `log p(x; θ) = <t(x), θ> - F(θ) + k(x)`.
pub fn log_density(x: &[f64], params: &ParamVector) -> Result<f64> {
    let fam = params.family;
    check_len(x, fam.obs_dim())?;
    fam.check_observation(x)?;
    let theta = params.to_natural()?;
    Ok(log_density_unchecked(&fam, x, theta.values()))
}

pub(crate) fn log_density_unchecked(fam: &Family, x: &[f64], theta: &[f64]) -> f64 {
    dot(&fam.sufficient_statistic(x), theta) - fam.log_normalizer(theta) + fam.carrier(x)
}

/// Per-coordinate finite-difference step `1e-5 (1 + |θ_i|)`.
pub(crate) fn fd_step(v: f64) -> f64 {
    1e-5 * (1.0 + v.abs())
}

/// Hessian of `F` by central differences of `∇F`, symmetrized.
pub(crate) fn fd_hessian(fam: &Family, theta: &[f64]) -> DMatrix<f64> {
    let d = theta.len();
    let mut h = DMatrix::zeros(d, d);
    let mut probe = theta.to_vec();
    for j in 0..d {
        let step = fd_step(theta[j]);
        probe[j] = theta[j] + step;
        let up = fam.grad_log_normalizer(&probe);
        probe[j] = theta[j] - step;
        let down = fam.grad_log_normalizer(&probe);
        probe[j] = theta[j];
        for i in 0..d {
            h[(i, j)] = (up[i] - down[i]) / (2.0 * step);
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Fisher information `I(θ) = ∇²F(θ)`, analytic where derived and otherwise by
/// central differences of `∇F`.
pub fn fisher_information_natural(params: &ParamVector) -> Result<DMatrix<f64>> {
    let theta = params.to_natural()?;
    Ok(hessian(&params.family, theta.values()))
}

pub(crate) fn hessian(fam: &Family, theta: &[f64]) -> DMatrix<f64> {
    fam.hessian_log_normalizer(theta)
        .unwrap_or_else(|| fd_hessian(fam, theta))
}

/// Fisher information after a change of parameters with Jacobian
/// `J = dθ/dλ`: `Jᵀ I(θ) J`.
pub fn reparameterized_fisher(params: &ParamVector, jacobian: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let info = fisher_information_natural(params)?;
    if !jacobian.is_square() || jacobian.nrows() != info.nrows() {
        return Err(Error::InvalidArgument(format!(
            "jacobian must be {0}x{0}, got {1}x{2}",
            info.nrows(),
            jacobian.nrows(),
            jacobian.ncols()
        )));
    }
    let det = jacobian.clone().lu().determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::InvalidArgument("jacobian is singular".into()));
    }
    Ok(jacobian.transpose() * info * jacobian)
}

/// Cumulant generating function `κ_θ(u) = F(θ + u) - F(θ)`; the moment
/// generating function is its exponential.
pub fn cumulant_generating(params: &ParamVector, u: &[f64]) -> Result<f64> {
    let theta = params.to_natural()?;
    let fam = params.family;
    check_len(u, fam.order())?;
    let shifted: Vec<f64> = theta.values().iter().zip(u).map(|(a, b)| a + b).collect();
    fam.check_natural(&shifted)
        .map_err(|e| Error::domain("theta + u", e.to_string()))?;
    Ok(fam.log_normalizer(&shifted) - fam.log_normalizer(theta.values()))
}

/// Outcome of [`verify_normalization`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub normalized: bool,
    pub integral: f64,
}

/// Integrates (or sums) the density over the support and compares with 1.
pub fn verify_normalization(params: &ParamVector, tol: f64) -> Result<Normalization> {
    let theta = params.to_natural()?;
    let fam = params.family;
    let th = theta.values().to_vec();
    let integral = integrate_over_support(&fam, |x| log_density_unchecked(&fam, x, &th).exp(), tol * 1e-2)?;
    Ok(Normalization {
        normalized: (integral - 1.0).abs() < tol,
        integral,
    })
}

/// Integrates `f` against the base measure of the family (Lebesgue measure for
/// continuous supports, counting measure for discrete ones).
///
/// Continuous supports are handled up to two effective dimensions (a
/// 3-component simplex counts as two); countably infinite supports are summed
/// until the terms fall below `1e-16` of the partial sum.
pub fn integrate_over_support<G: Fn(&[f64]) -> f64>(fam: &Family, f: G, tol: f64) -> Result<f64> {
    let tol = tol.max(1e-14);
    let unsupported = |reason: &str| Error::Unsupported {
        family: fam.name(),
        reason: reason.to_string(),
    };
    let quad1 = |lo: f64, hi: f64, g: &dyn Fn(f64) -> f64| {
        adaptive_quadrature(g, &QuadratureSpec::new(lo, hi).tolerances(tol, tol))
    };
    match fam.support() {
        Support::RealLine => quad1(f64::NEG_INFINITY, f64::INFINITY, &|x| f(&[x])),
        Support::PositiveReals => quad1(0.0, f64::INFINITY, &|x| f(&[x])),
        Support::UnitInterval => quad1(0.0, 1.0, &|x| f(&[x])),
        Support::RealVectors => match fam.obs_dim() {
            1 => quad1(f64::NEG_INFINITY, f64::INFINITY, &|x| f(&[x])),
            2 => {
                let inner_tol = tol * 1e-2;
                let outer = |x: f64| {
                    adaptive_quadrature(
                        |y| f(&[x, y]),
                        &QuadratureSpec::new(f64::NEG_INFINITY, f64::INFINITY).tolerances(inner_tol, inner_tol),
                    )
                    .unwrap_or(f64::NAN)
                };
                quad1(f64::NEG_INFINITY, f64::INFINITY, &outer)
            }
            _ => Err(unsupported("quadrature is limited to two dimensions")),
        },
        Support::Simplex => match fam.obs_dim() {
            2 => quad1(0.0, 1.0, &|x| f(&[x, 1.0 - x])),
            3 => {
                let inner_tol = tol * 1e-2;
                let outer = |x: f64| {
                    adaptive_quadrature(
                        |y| f(&[x, y, (1.0 - x - y).max(0.0)]),
                        &QuadratureSpec::new(0.0, 1.0 - x).tolerances(inner_tol, inner_tol),
                    )
                    .unwrap_or(f64::NAN)
                };
                quad1(0.0, 1.0, &outer)
            }
            _ => Err(unsupported("simplex quadrature is limited to three components")),
        },
        Support::NonNegativeIntegers => {
            let mut terms = Vec::new();
            let mut partial = 0.0f64;
            let mut quiet = 0;
            for n in 0..10_000_000u64 {
                let term = f(&[n as f64]);
                terms.push(term);
                partial += term;
                if n > 10 && term.abs() <= 1e-16 * partial.abs() {
                    quiet += 1;
                    if quiet >= 10 {
                        return Ok(stable_sum(terms));
                    }
                } else {
                    quiet = 0;
                }
            }
            Err(Error::Numerical("series did not reach its tail cutoff".into()))
        }
        Support::BoundedIntegers => {
            let n = fam
                .hyperparams()
                .iter()
                .find(|(k, _)| *k == "n")
                .map(|(_, v)| *v as u64)
                .unwrap_or(1);
            Ok(stable_sum((0..=n).map(|x| f(&[x as f64]))))
        }
        Support::CountVectors => {
            let n = fam
                .hyperparams()
                .iter()
                .find(|(k, _)| *k == "n")
                .map(|(_, v)| *v as u64)
                .unwrap_or(1);
            let k = fam.obs_dim();
            let mut terms = Vec::new();
            for_each_composition(n, k, &mut |counts| {
                let x: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
                terms.push(f(&x));
            });
            Ok(stable_sum(terms))
        }
    }
}

/// Calls `visit` on every vector of `k` non-negative integers summing to `n`.
pub(crate) fn for_each_composition(n: u64, k: usize, visit: &mut dyn FnMut(&[u64])) {
    fn recurse(remaining: u64, slot: usize, counts: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
        let k = counts.len();
        if slot == k - 1 {
            counts[slot] = remaining;
            visit(counts);
            return;
        }
        for c in 0..=remaining {
            counts[slot] = c;
            recurse(remaining - c, slot + 1, counts, visit);
        }
    }
    if k == 0 {
        return;
    }
    let mut counts = vec![0u64; k];
    recurse(n, 0, &mut counts, visit);
}
