use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::util::{finite, indexed, mean_by, positive, require_samples};
use crate::error::{Error, Result};
use crate::family::{ExponentialFamily, Field, Space, Support};
use crate::numerics::{stable_sum, SeededRng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn std_normal(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

fn check_reals(field: &str, v: &[f64]) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        finite(&indexed(field, i), x)?;
    }
    Ok(())
}

/// `N(μ, σ²)` with source `(μ, σ²)`, `θ = (μ/σ², -1/(2σ²))`, `t(x) = (x, x²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateGaussian;

impl ExponentialFamily for UnivariateGaussian {
    fn name(&self) -> &'static str {
        "univariate_gaussian"
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        2
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
        match space {
            Space::Source => vec![Field::scalar("mu"), Field::scalar("sigma2")],
            Space::Natural => vec![Field::scalar("theta1"), Field::scalar("theta2")],
            Space::Expectation => vec![Field::scalar("eta1"), Field::scalar("eta2")],
        }
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        if x[0].is_finite() {
            Ok(())
        } else {
            Err(Error::support(self.name(), format!("observation must be finite, got {}", x[0])))
        }
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        finite("mu", s[0])?;
        positive("sigma2", s[1])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        finite("theta1", t[0])?;
        if t[1] < 0.0 {
            Ok(())
        } else {
            Err(Error::domain("theta2", format!("must be < 0, got {}", t[1])))
        }
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        finite("eta1", e[0])?;
        if e[1] - e[0] * e[0] > 0.0 {
            Ok(())
        } else {
            Err(Error::domain("eta2", format!("must exceed eta1^2 = {}, got {}", e[0] * e[0], e[1])))
        }
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0], x[0] * x[0]]
    }
    fn carrier(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        -t[0] * t[0] / (4.0 * t[1]) + 0.5 * (-PI / t[1]).ln()
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        let mean = -t[0] / (2.0 * t[1]);
        vec![mean, -1.0 / (2.0 * t[1]) + mean * mean]
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        let (a, b) = (t[0], t[1]);
        let off = a / (2.0 * b * b);
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[-1.0 / (2.0 * b), off, off, 1.0 / (2.0 * b * b) - a * a / (2.0 * b * b * b)],
        ))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        let var = e[1] - e[0] * e[0];
        Some(-0.5 * var.ln() - 0.5 * (LN_2PI + 1.0))
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        let var = e[1] - e[0] * e[0];
        Ok(vec![e[0] / var, -0.5 / var])
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0] / s[1], -0.5 / s[1]]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![-t[0] / (2.0 * t[1]), -0.5 / t[1]]
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0], s[0] * s[0] + s[1]]
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![e[0], e[1] - e[0] * e[0]])
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        vec![s[0] + s[1].sqrt() * std_normal(rng)]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        let d = p[0] - q[0];
        0.5 * ((q[1] / p[1]).ln() + (p[1] + d * d) / q[1] - 1.0)
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        let mean = mean_by(samples, |x| x[0]);
        let var = mean_by(samples, |x| (x[0] - mean).powi(2));
        if var <= 0.0 {
            return Err(Error::DegenerateData("all observations are identical".into()));
        }
        Ok(vec![mean, var])
    }
}

/// `N(μ, σ²)` with `σ²` fixed: `θ = μ/σ²`, `t(x) = x`, `k(x) = -x²/(2σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFixedVariance {
    pub sigma2: f64,
}

impl ExponentialFamily for GaussianFixedVariance {
    fn name(&self) -> &'static str {
        "gaussian_fixed_variance"
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
        false
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("sigma2", self.sigma2)]
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        match space {
            Space::Source => vec![Field::scalar("mu")],
            Space::Natural => vec![Field::scalar("theta")],
            Space::Expectation => vec![Field::scalar("eta")],
        }
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        UnivariateGaussian.check_observation(x)
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        finite("mu", s[0])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        finite("theta", t[0])
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        finite("eta", e[0])
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }
    fn carrier(&self, x: &[f64]) -> f64 {
        -x[0] * x[0] / (2.0 * self.sigma2)
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        0.5 * (self.sigma2 * t[0] * t[0] + (2.0 * PI * self.sigma2).ln())
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        vec![self.sigma2 * t[0]]
    }
    fn hessian_log_normalizer(&self, _t: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, self.sigma2))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        Some(e[0] * e[0] / (2.0 * self.sigma2) - 0.5 * (2.0 * PI * self.sigma2).ln())
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![e[0] / self.sigma2])
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0] / self.sigma2]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![t[0] * self.sigma2]
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0]]
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![e[0]])
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        vec![s[0] + self.sigma2.sqrt() * std_normal(rng)]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        (q[0] - p[0]).powi(2) / (2.0 * self.sigma2)
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        Ok(vec![mean_by(samples, |x| x[0])])
    }

    fn expected_carrier(&self, t: &[f64]) -> Option<f64> {
        let mu = self.sigma2 * t[0];
        Some(-(self.sigma2 + mu * mu) / (2.0 * self.sigma2))
    }
    fn carrier_exp_moment(&self, t: &[f64], s: f64) -> Option<f64> {
        if s <= -1.0 {
            return None;
        }
        let mu = self.sigma2 * t[0];
        Some((1.0 + s).powf(-0.5) * (-s * mu * mu / (2.0 * self.sigma2 * (1.0 + s))).exp())
    }
}

/// `N(μ, I_d)`: `θ = μ`, `t(x) = x`, `k(x) = -xᵀx/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicGaussian {
    pub d: usize,
}

impl ExponentialFamily for IsotropicGaussian {
    fn name(&self) -> &'static str {
        "isotropic_gaussian"
    }
    fn obs_dim(&self) -> usize {
        self.d
    }
    fn order(&self) -> usize {
        self.d
    }
    fn support(&self) -> Support {
        Support::RealVectors
    }
    fn carrier_is_zero(&self) -> bool {
        false
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("d", self.d as f64)]
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        let name = match space {
            Space::Source => "mu",
            Space::Natural => "theta",
            Space::Expectation => "eta",
        };
        vec![Field::vector(name, self.d)]
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::support(self.name(), "observation must be finite"))
        }
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        check_reals("mu", s)
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        check_reals("theta", t)
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        check_reals("eta", e)
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn carrier(&self, x: &[f64]) -> f64 {
        -0.5 * stable_sum(x.iter().map(|v| v * v))
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        0.5 * stable_sum(t.iter().map(|v| v * v)) + 0.5 * self.d as f64 * LN_2PI
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        t.to_vec()
    }
    fn hessian_log_normalizer(&self, _t: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.d, self.d))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        Some(0.5 * stable_sum(e.iter().map(|v| v * v)) - 0.5 * self.d as f64 * LN_2PI)
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(e.to_vec())
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        s.to_vec()
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        t.to_vec()
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        s.iter().map(|m| m + std_normal(rng)).collect()
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        0.5 * stable_sum(p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)))
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        Ok((0..self.d).map(|i| mean_by(samples, |x| x[i])).collect())
    }

    fn expected_carrier(&self, t: &[f64]) -> Option<f64> {
        Some(-0.5 * (self.d as f64 + stable_sum(t.iter().map(|v| v * v))))
    }
    fn carrier_exp_moment(&self, t: &[f64], s: f64) -> Option<f64> {
        if s <= -1.0 {
            return None;
        }
        let norm2 = stable_sum(t.iter().map(|v| v * v));
        Some((1.0 + s).powf(-0.5 * self.d as f64) * (-s * norm2 / (2.0 * (1.0 + s))).exp())
    }
}

/// `N(μ, Σ)` in dimension `d`: `θ = (Σ⁻¹μ, Σ⁻¹/2)`, `t(x) = (x, -xxᵀ)`.
///
/// Matrix blocks are stored row-major after the vector block. `F` and `∇F` are
/// evaluated at the symmetric part of the matrix block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultivariateGaussian {
    pub d: usize,
}

/// Relative tolerance for the symmetry check on matrix blocks.
const SYMMETRY_TOL: f64 = 1e-9;

impl MultivariateGaussian {
    fn split(&self, v: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.d;
        let vec = DVector::from_column_slice(&v[..d]);
        let m = DMatrix::from_row_slice(d, d, &v[d..]);
        (vec, (&m + m.transpose()) * 0.5)
    }

    fn join(&self, vec: &DVector<f64>, m: &DMatrix<f64>) -> Vec<f64> {
        let sym = (m + m.transpose()) * 0.5;
        let mut out: Vec<f64> = vec.iter().copied().collect();
        for i in 0..self.d {
            for j in 0..self.d {
                out.push(sym[(i, j)]);
            }
        }
        out
    }

    fn check_spd(&self, field: &str, v: &[f64]) -> Result<()> {
        let d = self.d;
        let m = DMatrix::from_row_slice(d, d, v);
        let scale = m.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        for i in 0..d {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::domain(field, format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        if m.cholesky().is_none() {
            return Err(Error::domain(field, "matrix is not positive definite"));
        }
        Ok(())
    }

    /// Inverse of a symmetric positive-definite matrix via Cholesky.
    fn spd_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
        match m.clone().cholesky() {
            Some(c) => {
                let inv = c.inverse();
                (&inv + inv.transpose()) * 0.5
            }
            None => DMatrix::from_element(m.nrows(), m.ncols(), f64::NAN),
        }
    }

    fn ln_det_spd(m: &DMatrix<f64>) -> f64 {
        match m.clone().cholesky() {
            Some(c) => 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
            None => f64::NAN,
        }
    }

    fn covariance_from_expectation(&self, e: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (eta, h) = self.split(e);
        let sigma = -(h + &eta * eta.transpose());
        (eta, sigma)
    }
}

impl ExponentialFamily for MultivariateGaussian {
    fn name(&self) -> &'static str {
        "multivariate_gaussian"
    }
    fn obs_dim(&self) -> usize {
        self.d
    }
    fn order(&self) -> usize {
        self.d + self.d * self.d
    }
    fn support(&self) -> Support {
        Support::RealVectors
    }
    fn carrier_is_zero(&self) -> bool {
        true
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("d", self.d as f64)]
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        let (a, b) = match space {
            Space::Source => ("mu", "sigma"),
            Space::Natural => ("theta", "theta_matrix"),
            Space::Expectation => ("eta", "eta_matrix"),
        };
        vec![Field::vector(a, self.d), Field::matrix(b, self.d)]
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        IsotropicGaussian { d: self.d }.check_observation(x)
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        check_reals("mu", &s[..self.d])?;
        self.check_spd("sigma", &s[self.d..])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        check_reals("theta", &t[..self.d])?;
        self.check_spd("theta_matrix", &t[self.d..])
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        check_reals("eta", &e[..self.d])?;
        let d = self.d;
        let h = DMatrix::from_row_slice(d, d, &e[d..]);
        let scale = h.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        for i in 0..d {
            for j in 0..i {
                if (h[(i, j)] - h[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::domain("eta_matrix", format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let (_, sigma) = self.covariance_from_expectation(e);
        if sigma.cholesky().is_none() {
            return Err(Error::domain("eta_matrix", "-(H + eta eta^T) is not positive definite"));
        }
        Ok(())
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        let mut t = x.to_vec();
        for i in 0..self.d {
            for j in 0..self.d {
                t.push(-x[i] * x[j]);
            }
        }
        t
    }
    fn carrier(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        let (theta, s) = self.split(t);
        let inv = Self::spd_inverse(&s);
        let quad = theta.dot(&(&inv * &theta));
        0.25 * quad - 0.5 * Self::ln_det_spd(&s) + 0.5 * self.d as f64 * PI.ln()
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        let (theta, s) = self.split(t);
        let inv = Self::spd_inverse(&s);
        let mu = &inv * &theta * 0.5;
        let h = -(&inv * 0.5) - &mu * mu.transpose();
        self.join(&mu, &h)
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        let (_, sigma) = self.covariance_from_expectation(e);
        Some(-0.5 * Self::ln_det_spd(&sigma) - 0.5 * self.d as f64 * (LN_2PI + 1.0))
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        let (eta, sigma) = self.covariance_from_expectation(e);
        let prec = Self::spd_inverse(&sigma);
        if prec[(0, 0)].is_nan() {
            return Err(Error::Numerical("covariance is not positive definite".into()));
        }
        Ok(self.join(&(&prec * eta), &(prec * 0.5)))
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        let (mu, sigma) = self.split(s);
        let prec = Self::spd_inverse(&sigma);
        self.join(&(&prec * mu), &(prec * 0.5))
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        let (theta, s) = self.split(t);
        let inv = Self::spd_inverse(&s);
        self.join(&(&inv * theta * 0.5), &(inv * 0.5))
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        let (mu, sigma) = self.split(s);
        let h = -(sigma + &mu * mu.transpose());
        self.join(&mu, &h)
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        let (eta, sigma) = self.covariance_from_expectation(e);
        Ok(self.join(&eta, &sigma))
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        let (mu, sigma) = self.split(s);
        let l = sigma.cholesky().expect("validated covariance").l();
        let z = DVector::from_iterator(self.d, (0..self.d).map(|_| std_normal(rng)));
        (mu + l * z).iter().copied().collect()
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        let (mp, sp) = self.split(p);
        let (mq, sq) = self.split(q);
        let inv_q = Self::spd_inverse(&sq);
        let diff = &mq - &mp;
        0.5 * (Self::ln_det_spd(&sq) - Self::ln_det_spd(&sp) + (&inv_q * &sp).trace() + diff.dot(&(&inv_q * &diff))
            - self.d as f64)
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        let d = self.d;
        let mean: Vec<f64> = (0..d).map(|i| mean_by(samples, |x| x[i])).collect();
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let c = mean_by(samples, |x| (x[i] - mean[i]) * (x[j] - mean[j]));
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        if cov.clone().cholesky().is_none() {
            return Err(Error::DegenerateData("sample covariance is singular".into()));
        }
        Ok(self.join(&DVector::from_vec(mean), &cov))
    }
}
