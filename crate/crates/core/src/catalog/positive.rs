use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, InverseGaussian as InverseGaussianDist};

use super::util::{mean_by, negative, positive, require_samples};
use crate::error::{Error, Result};
use crate::family::{ExponentialFamily, Field, Space, Support};
use crate::numerics::SeededRng;
use crate::special::lgamma;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn positive_observation(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::support(name, format!("observation must be > 0, got {x}")))
    }
}

fn scalar_fields(space: Space, source: &'static str) -> Vec<Field> {
    match space {
        Space::Source => vec![Field::scalar(source)],
        Space::Natural => vec![Field::scalar("theta")],
        Space::Expectation => vec![Field::scalar("eta")],
    }
}

/// Zero-mean Laplace with scale σ: `θ = -1/σ`, `t(x) = |x|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteredLaplacian;

impl ExponentialFamily for CenteredLaplacian {
    fn name(&self) -> &'static str {
        "centered_laplacian"
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        1
    }
    fn support(&self) -> Support {
        Support::RealLine
    }
    fn carrier_is_zero(&self) -> bool {
        true
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        scalar_fields(space, "sigma")
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        if x[0].is_finite() {
            Ok(())
        } else {
            Err(Error::support(self.name(), format!("observation must be finite, got {}", x[0])))
        }
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        positive("sigma", s[0])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        negative("theta", t[0])
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        positive("eta", e[0])
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0].abs()]
    }
    fn carrier(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        (-2.0 / t[0]).ln()
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        vec![-1.0 / t[0]]
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 1.0 / (t[0] * t[0])))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        Some(-e[0].ln() - 1.0 - std::f64::consts::LN_2)
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-1.0 / e[0]])
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![-1.0 / s[0]]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![-1.0 / t[0]]
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0]]
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![e[0]])
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        let magnitude: f64 = Exp::new(1.0 / s[0]).expect("validated scale").sample(rng);
        vec![if rng.random::<bool>() { magnitude } else { -magnitude }]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        (q[0] / p[0]).ln() + p[0] / q[0] - 1.0
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        let scale = mean_by(samples, |x| x[0].abs());
        if scale <= 0.0 {
            return Err(Error::DegenerateData("all observations are zero".into()));
        }
        Ok(vec![scale])
    }
}

/// Rayleigh with source parameter σ²: `θ = -1/(2σ²)`, `t(x) = x²`,
/// `k(x) = ln x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rayleigh;

impl ExponentialFamily for Rayleigh {
    fn name(&self) -> &'static str {
        "rayleigh"
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        1
    }
    fn support(&self) -> Support {
        Support::PositiveReals
    }
    fn carrier_is_zero(&self) -> bool {
        false
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        scalar_fields(space, "sigma2")
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        positive_observation(self.name(), x[0])
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        positive("sigma2", s[0])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        negative("theta", t[0])
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        positive("eta", e[0])
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0]]
    }
    fn carrier(&self, x: &[f64]) -> f64 {
        x[0].ln()
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        -(-2.0 * t[0]).ln()
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        vec![-1.0 / t[0]]
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 1.0 / (t[0] * t[0])))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        Some(-e[0].ln() + std::f64::consts::LN_2 - 1.0)
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-1.0 / e[0]])
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![-0.5 / s[0]]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![-0.5 / t[0]]
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        vec![2.0 * s[0]]
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.5 * e[0]])
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        let u: f64 = rng.random();
        vec![(-2.0 * s[0] * (1.0 - u).ln()).sqrt()]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        (q[0] / p[0]).ln() + p[0] / q[0] - 1.0
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        Ok(vec![0.5 * mean_by(samples, |x| x[0] * x[0])])
    }

    fn expected_carrier(&self, t: &[f64]) -> Option<f64> {
        let sigma2 = -0.5 / t[0];
        Some(0.5 * (2.0 * sigma2).ln() - 0.5 * EULER_GAMMA)
    }
    fn carrier_exp_moment(&self, t: &[f64], s: f64) -> Option<f64> {
        // E[x^s] = (2σ²)^{s/2} Γ(1 + s/2)
        if s <= -2.0 {
            return None;
        }
        let sigma2 = -0.5 / t[0];
        Some((0.5 * s * (2.0 * sigma2).ln() + lgamma(1.0 + 0.5 * s)).exp())
    }
}

/// Inverse Gaussian IG(μ, λ): `θ = (λ/(2μ²), λ/2)`, `t(x) = (-x, -1/x)`,
/// `k(x) = -1.5 ln x`, `η = (-μ, -(1/μ + 1/λ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGaussian;

impl ExponentialFamily for InverseGaussian {
    fn name(&self) -> &'static str {
        "inverse_gaussian"
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        2
    }
    fn support(&self) -> Support {
        Support::PositiveReals
    }
    fn carrier_is_zero(&self) -> bool {
        false
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        match space {
            Space::Source => vec![Field::scalar("mu"), Field::scalar("lambda")],
            Space::Natural => vec![Field::scalar("theta1"), Field::scalar("theta2")],
            Space::Expectation => vec![Field::scalar("eta1"), Field::scalar("eta2")],
        }
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        positive_observation(self.name(), x[0])
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        positive("mu", s[0])?;
        positive("lambda", s[1])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        positive("theta1", t[0])?;
        positive("theta2", t[1])
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        negative("eta1", e[0])?;
        if e[1] < 1.0 / e[0] {
            Ok(())
        } else {
            Err(Error::domain("eta2", format!("must be < 1/eta1 = {}, got {}", 1.0 / e[0], e[1])))
        }
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![-x[0], -1.0 / x[0]]
    }
    fn carrier(&self, x: &[f64]) -> f64 {
        -1.5 * x[0].ln()
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        -2.0 * (t[0] * t[1]).sqrt() - 0.5 * t[1].ln() + 0.5 * std::f64::consts::PI.ln()
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        vec![-(t[1] / t[0]).sqrt(), -(t[0] / t[1]).sqrt() - 0.5 / t[1]]
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        let (a, b) = (t[0], t[1]);
        let off = -0.5 / (a * b).sqrt();
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[
                0.5 * b.sqrt() * a.powf(-1.5),
                off,
                off,
                0.5 * a.sqrt() * b.powf(-1.5) + 0.5 / (b * b),
            ],
        ))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        let lambda = 1.0 / (1.0 / e[0] - e[1]);
        Some(-0.5 + 0.5 * (lambda / (2.0 * std::f64::consts::PI)).ln())
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        let s = self.expectation_to_source(e)?;
        Ok(self.source_to_natural(&s))
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![s[1] / (2.0 * s[0] * s[0]), 0.5 * s[1]]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![(t[1] / t[0]).sqrt(), 2.0 * t[1]]
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        vec![-s[0], -(1.0 / s[0] + 1.0 / s[1])]
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-e[0], 1.0 / (1.0 / e[0] - e[1])])
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        let dist = InverseGaussianDist::new(s[0], s[1]).expect("validated parameters");
        vec![dist.sample(rng)]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        let (mp, lp) = (p[0], p[1]);
        let (mq, lq) = (q[0], q[1]);
        0.5 * (lp / lq).ln() - 0.5 + lq / (2.0 * lp) + lq * (mp - mq).powi(2) / (2.0 * mq * mq * mp)
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 2)?;
        let mu = mean_by(samples, |x| x[0]);
        let inv_lambda = mean_by(samples, |x| 1.0 / x[0] - 1.0 / mu);
        if inv_lambda <= 0.0 {
            return Err(Error::DegenerateData("all observations are identical".into()));
        }
        Ok(vec![mu, 1.0 / inv_lambda])
    }

    fn expected_carrier(&self, _t: &[f64]) -> Option<f64> {
        None
    }
    fn carrier_exp_moment(&self, _t: &[f64], _s: f64) -> Option<f64> {
        None
    }
}
