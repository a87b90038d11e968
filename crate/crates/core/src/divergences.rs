//! Bregman divergences and the statistical distances and entropies that reduce
//! to them for members of one exponential family.
//!
//! Every distance here is a function of the log-normalizer `F` alone, except
//! the entropies, which also need an expectation of the carrier `k(x)`. That
//! expectation is taken in closed form (or by exact summation) where the family
//! provides one and by seeded Monte Carlo otherwise; entropies therefore come
//! back as an [`Estimate`] whose `std_error` is zero when exact.

use nalgebra::SymmetricEigen;

use crate::catalog::{same_family, Family};
use crate::error::{Error, Result};
use crate::family::{hessian, ParamVector};
use crate::numerics::{dot, monte_carlo_expectation, Estimate, RngSeed, SeededRng};

/// Default Monte-Carlo budget for carrier expectations.
pub const DEFAULT_MC_DRAWS: usize = 100_000;

/// Monte-Carlo settings for carrier expectations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub draws: usize,
    pub seed: RngSeed,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            draws: DEFAULT_MC_DRAWS,
            seed: RngSeed(0),
        }
    }
}

/// Which convex generator a Bregman divergence is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// `F` on natural parameters.
    LogNormalizer,
    /// `G = F*` on expectation parameters.
    Conjugate,
}

fn exact(value: f64) -> Estimate {
    Estimate {
        mean: value,
        std_error: 0.0,
    }
}

/// `B_F(θ₁ || θ₂) = F(θ₁) - F(θ₂) - <θ₁ - θ₂, ∇F(θ₂)>`.
pub(crate) fn bregman_natural(fam: &Family, t1: &[f64], t2: &[f64]) -> f64 {
    let grad = fam.grad_log_normalizer(t2);
    let diff: Vec<f64> = t1.iter().zip(t2).map(|(a, b)| a - b).collect();
    fam.log_normalizer(t1) - fam.log_normalizer(t2) - dot(&diff, &grad)
}

/// `G(η)` and `∇G(η)`.
pub(crate) fn conjugate_with_gradient(fam: &Family, eta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let theta = fam.grad_conjugate(eta)?;
    let g = match fam.conjugate(eta) {
        Some(g) => g,
        None => dot(&theta, eta) - fam.log_normalizer(&theta),
    };
    Ok((g, theta))
}

/// `B_G(η₁ || η₂) = G(η₁) - G(η₂) - <η₁ - η₂, ∇G(η₂)>`.
pub(crate) fn bregman_expectation(fam: &Family, e1: &[f64], e2: &[f64]) -> Result<f64> {
    let (g1, _) = conjugate_with_gradient(fam, e1)?;
    let (g2, theta2) = conjugate_with_gradient(fam, e2)?;
    let diff: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a - b).collect();
    Ok(g1 - g2 - dot(&diff, &theta2))
}

/// Bregman divergence between two members of one family, on `F` (natural
/// coordinates) or on `G` (expectation coordinates). The arguments may be in
/// any space.
pub fn bregman(generator: Generator, p: &ParamVector, q: &ParamVector) -> Result<f64> {
    same_family(p, q)?;
    let fam = p.family();
    match generator {
        Generator::LogNormalizer => {
            let (t1, t2) = (p.to_natural()?, q.to_natural()?);
            Ok(bregman_natural(&fam, t1.values(), t2.values()))
        }
        Generator::Conjugate => {
            let (e1, e2) = (p.to_expectation()?, q.to_expectation()?);
            bregman_expectation(&fam, e1.values(), e2.values())
        }
    }
}

/// `KL(p || q) = B_F(θ_q || θ_p)`.
pub fn kl(p: &ParamVector, q: &ParamVector) -> Result<f64> {
    same_family(p, q)?;
    let (tp, tq) = (p.to_natural()?, q.to_natural()?);
    Ok(bregman_natural(&p.family(), tq.values(), tp.values()))
}

/// `α F(θ) + (1-α) F(θ') - F(αθ + (1-α)θ')` for any real `α`, provided the
/// combination stays in the natural domain.
fn jensen_gap(fam: &Family, alpha: f64, t: &[f64], t2: &[f64]) -> Result<f64> {
    let mix: Vec<f64> = t.iter().zip(t2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
    fam.check_natural(&mix).map_err(|e| {
        Error::domain(
            "alpha",
            format!("α-combination of natural parameters leaves the domain at α = {alpha} ({e})"),
        )
    })?;
    Ok(alpha * fam.log_normalizer(t) + (1.0 - alpha) * fam.log_normalizer(t2) - fam.log_normalizer(&mix))
}

fn naturals(p: &ParamVector, q: &ParamVector) -> Result<(Vec<f64>, Vec<f64>)> {
    same_family(p, q)?;
    Ok((p.to_natural()?.into_values(), q.to_natural()?.into_values()))
}

/// Skew Jensen divergence `J_{F,α}(θ : θ')` for `α ∈ (0, 1)`.
pub fn skew_jensen(alpha: f64, p: &ParamVector, q: &ParamVector) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let (t, t2) = naturals(p, q)?;
    jensen_gap(&p.family(), alpha, &t, &t2)
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha != 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("alpha", format!("must be positive and different from 1, got {alpha}")))
    }
}

/// Rényi divergence `J_{F,α}(θ : θ') / (1 - α)`. Orders above 1 are accepted
/// while `αθ + (1-α)θ'` stays in the natural domain.
pub fn renyi_divergence(alpha: f64, p: &ParamVector, q: &ParamVector) -> Result<f64> {
    check_order(alpha)?;
    let (t, t2) = naturals(p, q)?;
    Ok(jensen_gap(&p.family(), alpha, &t, &t2)? / (1.0 - alpha))
}

/// Tsallis divergence `(e^{-J_{F,α}(θ : θ')} - 1) / (α - 1)`.
pub fn tsallis_divergence(alpha: f64, p: &ParamVector, q: &ParamVector) -> Result<f64> {
    check_order(alpha)?;
    let (t, t2) = naturals(p, q)?;
    let j = jensen_gap(&p.family(), alpha, &t, &t2)?;
    Ok((-j).exp_m1() / (alpha - 1.0))
}

/// Bhattacharyya coefficient `∫√(pq) = e^{-J_{F,½}(θ : θ')}`.
pub fn bhattacharyya_coefficient(p: &ParamVector, q: &ParamVector) -> Result<f64> {
    Ok((-skew_jensen(0.5, p, q)?).exp())
}

/// Hellinger distance `√(1 - BC)`.
pub fn hellinger(p: &ParamVector, q: &ParamVector) -> Result<f64> {
    let bc = bhattacharyya_coefficient(p, q)?;
    Ok((1.0 - bc).max(0.0).sqrt())
}

/// Draws from the family member with natural parameters `theta`.
fn sampler(fam: Family, theta: &[f64]) -> impl Fn(&mut SeededRng) -> Vec<f64> + Sync {
    let source = fam.natural_to_source(theta);
    move |rng: &mut SeededRng| fam.sample(&source, rng)
}

/// `E_θ[k(X)]`, exact where the family allows.
pub(crate) fn expected_carrier(fam: &Family, theta: &[f64], mc: &McOptions) -> Result<Estimate> {
    if let Some(v) = fam.expected_carrier(theta) {
        return Ok(exact(v));
    }
    monte_carlo_expectation(sampler(*fam, theta), |x: &Vec<f64>| fam.carrier(x), mc.draws, mc.seed)
}

/// `ln E_θ[exp(s k(X))]`, exact where the family allows.
fn log_carrier_moment(fam: &Family, theta: &[f64], s: f64, mc: &McOptions) -> Result<Estimate> {
    if let Some(v) = fam.carrier_exp_moment(theta, s) {
        return Ok(exact(v.ln()));
    }
    let est = monte_carlo_expectation(sampler(*fam, theta), |x: &Vec<f64>| (s * fam.carrier(x)).exp(), mc.draws, mc.seed)?;
    if est.mean <= 0.0 {
        return Err(Error::Numerical("carrier moment estimate is not positive".into()));
    }
    Ok(Estimate {
        mean: est.mean.ln(),
        std_error: est.std_error / est.mean,
    })
}

/// Shannon entropy `F(θ) - <θ, ∇F(θ)> - E_θ[k(X)]`.
pub fn shannon_entropy(p: &ParamVector, mc: &McOptions) -> Result<Estimate> {
    let theta = p.to_natural()?;
    let fam = p.family();
    let t = theta.values();
    let carrier = expected_carrier(&fam, t, mc)?;
    let value = fam.log_normalizer(t) - dot(t, &fam.grad_log_normalizer(t)) - carrier.mean;
    Ok(Estimate {
        mean: value,
        std_error: carrier.std_error,
    })
}

/// Cross entropy `F(θ') - <θ', ∇F(θ)> - E_θ[k(X)]` of `q` relative to `p`.
pub fn cross_entropy(p: &ParamVector, q: &ParamVector, mc: &McOptions) -> Result<Estimate> {
    let (t, t2) = naturals(p, q)?;
    let fam = p.family();
    let carrier = expected_carrier(&fam, &t, mc)?;
    let value = fam.log_normalizer(&t2) - dot(&t2, &fam.grad_log_normalizer(&t)) - carrier.mean;
    Ok(Estimate {
        mean: value,
        std_error: carrier.std_error,
    })
}

/// `ln ∫ p^α = F(αθ) - αF(θ) + ln E_{αθ}[e^{(α-1)k(X)}]`.
fn log_power_integral(alpha: f64, p: &ParamVector, mc: &McOptions) -> Result<Estimate> {
    check_order(alpha)?;
    let theta = p.to_natural()?;
    let fam = p.family();
    let t = theta.values();
    let scaled: Vec<f64> = t.iter().map(|v| alpha * v).collect();
    fam.check_natural(&scaled)
        .map_err(|e| Error::domain("alpha", format!("αθ leaves the natural domain at α = {alpha} ({e})")))?;
    let moment = if fam.carrier_is_zero() {
        exact(0.0)
    } else {
        log_carrier_moment(&fam, &scaled, alpha - 1.0, mc)?
    };
    Ok(Estimate {
        mean: fam.log_normalizer(&scaled) - alpha * fam.log_normalizer(t) + moment.mean,
        std_error: moment.std_error,
    })
}

/// Rényi entropy `ln(∫ p^α) / (1 - α)`.
pub fn renyi_entropy(alpha: f64, p: &ParamVector, mc: &McOptions) -> Result<Estimate> {
    let l = log_power_integral(alpha, p, mc)?;
    let scale = (1.0 - alpha).abs();
    Ok(Estimate {
        mean: l.mean / (1.0 - alpha),
        std_error: l.std_error / scale,
    })
}

/// Tsallis entropy `(1 - ∫ p^α) / (α - 1)`.
pub fn tsallis_entropy(alpha: f64, p: &ParamVector, mc: &McOptions) -> Result<Estimate> {
    let l = log_power_integral(alpha, p, mc)?;
    let integral = l.mean.exp();
    Ok(Estimate {
        mean: -l.mean.exp_m1() / (alpha - 1.0),
        std_error: integral * l.std_error / (alpha - 1.0).abs(),
    })
}

/// Unnormalized Jeffreys prior `√det ∇²F(θ)`.
///
/// For the multivariate Gaussian the natural matrix block is stored with all
/// `d²` entries, so the Hessian is singular along antisymmetric directions;
/// the pseudo-determinant (product of the non-negligible eigenvalues) is used.
pub fn jeffreys_prior_unnormalized(p: &ParamVector) -> Result<f64> {
    let theta = p.to_natural()?;
    let fam = p.family();
    let h = hessian(&fam, theta.values());
    let det = if matches!(fam, Family::MultivariateGaussian(_)) {
        let eig = SymmetricEigen::new(h).eigenvalues;
        let top = eig.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        eig.iter().filter(|v| v.abs() > 1e-8 * top).product::<f64>()
    } else {
        h.determinant()
    };
    Ok(det.max(0.0).sqrt())
}
