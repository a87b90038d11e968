use nalgebra::DMatrix;
use rand_distr::{Distribution, Gamma as GammaDist};

use super::util::{greater, indexed, mean_by, negative, positive, require_samples};
use crate::error::{Error, Result};
use crate::family::{ExponentialFamily, Field, Space, Support};
use crate::numerics::{newton_solve, stable_sum, SeededRng};
use crate::special::{lbeta, lgamma, psi, psi1};

const MAX_NEWTON: usize = 100;

/// Solves `ln k - Ψ(k) = s` for the Gamma shape `k` (`s > 0`), by Newton in
/// `u = ln k` from Minka's starting point.
fn gamma_shape(s: f64) -> Result<f64> {
    let k0 = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    let f = |u: f64| {
        let k = u.exp();
        k.ln() - psi(k) - s
    };
    let df = |u: f64| {
        let k = u.exp();
        1.0 - k * psi1(k)
    };
    let tol = 1e-12 * s + 1e-15;
    newton_solve(f, df, k0.ln(), tol, MAX_NEWTON, |u| u).map(f64::exp)
}

/// Inverse of the digamma function (Minka's initialization plus Newton).
fn inverse_digamma(y: f64) -> f64 {
    let mut x = if y >= -2.22 { y.exp() + 0.5 } else { -1.0 / (y + 0.577_215_664_901_532_9) };
    for _ in 0..8 {
        let step = (psi(x) - y) / psi1(x);
        x = if x - step > 0.0 { x - step } else { 0.5 * x };
    }
    x
}

/// Finds `α > 0` with `Ψ(α_i) - Ψ(Σα) = η_i`, i.e. minimizes the convex
/// `L(α) = Σ lnΓ(α_i) - lnΓ(Σα) - <α, η>` by damped Newton. The Hessian
/// `diag Ψ'(α_i) - Ψ'(α_0) 11ᵀ` is inverted by Sherman–Morrison.
pub(crate) fn dirichlet_from_mean_logs(eta: &[f64]) -> Result<Vec<f64>> {
    let objective = |a: &[f64]| {
        let total: f64 = a.iter().sum();
        stable_sum(a.iter().zip(eta).map(|(ai, ei)| lgamma(*ai) - ai * ei)) - lgamma(total)
    };
    // Start from the fixed point at α_0 = k.
    let k = eta.len() as f64;
    let mut alpha: Vec<f64> = eta.iter().map(|e| inverse_digamma(e + psi(k))).collect();
    let mut value = objective(&alpha);
    for iteration in 0..MAX_NEWTON {
        let total: f64 = alpha.iter().sum();
        let psi_total = psi(total);
        let grad: Vec<f64> = alpha.iter().zip(eta).map(|(a, e)| psi(*a) - psi_total - e).collect();
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if scale < 1e-14 {
            return Ok(alpha);
        }
        let q: Vec<f64> = alpha.iter().map(|a| psi1(*a)).collect();
        let c = psi1(total);
        let sum_g_over_q: f64 = grad.iter().zip(&q).map(|(g, q)| g / q).sum();
        let sum_inv_q: f64 = q.iter().map(|q| 1.0 / q).sum();
        let b = c * sum_g_over_q / (1.0 - c * sum_inv_q);
        let step: Vec<f64> = grad.iter().zip(&q).map(|(g, q)| (g + b) / q).collect();
        if step.iter().zip(&alpha).all(|(s, a)| s.abs() <= 1e-13 * a) {
            return Ok(alpha.iter().zip(&step).map(|(a, s)| a - s).collect());
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = alpha.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            if trial.iter().all(|a| *a > 0.0 && a.is_finite()) {
                let v = objective(&trial);
                if v <= value + 1e-12 * value.abs().max(1.0) {
                    alpha = trial;
                    value = v;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // No further decrease is representable; accept if the gradient
            // is at rounding level.
            if scale < 1e-9 {
                return Ok(alpha);
            }
            return Err(Error::Newton {
                iterations: iteration,
                last: alpha[0],
            });
        }
    }
    Err(Error::Newton {
        iterations: MAX_NEWTON,
        last: alpha[0],
    })
}

fn check_mean_logs(e: &[f64]) -> Result<()> {
    for (i, &v) in e.iter().enumerate() {
        negative(&indexed("eta", i), v)?;
    }
    let mass = stable_sum(e.iter().map(|v| v.exp()));
    if mass >= 1.0 {
        return Err(Error::domain("eta", format!("sum of exp(eta_i) must be < 1, got {mass}")));
    }
    Ok(())
}

fn digamma_hessian(alpha: &[f64]) -> DMatrix<f64> {
    let total: f64 = alpha.iter().sum();
    let c = psi1(total);
    let n = alpha.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { psi1(alpha[i]) - c } else { -c })
}

fn gamma_draw(shape: f64, rng: &mut SeededRng) -> f64 {
    GammaDist::new(shape, 1.0).expect("validated shape").sample(rng)
}

/// Gamma with source `(λ, k)` (scale, shape): `θ = (k - 1, -1/λ)`,
/// `t(x) = (ln x, x)`, `η = (Ψ(k) + ln λ, kλ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma;

impl ExponentialFamily for Gamma {
    fn name(&self) -> &'static str {
        "gamma"
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
        true
    }
    fn has_closed_conjugate(&self) -> bool {
        false
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        match space {
            Space::Source => vec![Field::scalar("lambda"), Field::scalar("k")],
            Space::Natural => vec![Field::scalar("theta1"), Field::scalar("theta2")],
            Space::Expectation => vec![Field::scalar("eta1"), Field::scalar("eta2")],
        }
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        if x[0] > 0.0 && x[0].is_finite() {
            Ok(())
        } else {
            Err(Error::support(self.name(), format!("observation must be > 0, got {}", x[0])))
        }
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        positive("lambda", s[0])?;
        positive("k", s[1])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        greater("theta1", t[0], -1.0)?;
        negative("theta2", t[1])
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        positive("eta2", e[1])?;
        if e[0] < e[1].ln() {
            Ok(())
        } else {
            Err(Error::domain("eta1", format!("must be < ln(eta2) = {}, got {}", e[1].ln(), e[0])))
        }
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0].ln(), x[0]]
    }
    fn carrier(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        lgamma(t[0] + 1.0) + (t[0] + 1.0) * (-1.0 / t[1]).ln()
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        vec![psi(t[0] + 1.0) - (-t[1]).ln(), -(t[0] + 1.0) / t[1]]
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        let off = -1.0 / t[1];
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[psi1(t[0] + 1.0), off, off, (t[0] + 1.0) / (t[1] * t[1])],
        ))
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        let k = gamma_shape(e[1].ln() - e[0])?;
        Ok(vec![k - 1.0, -k / e[1]])
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![s[1] - 1.0, -1.0 / s[0]]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![-1.0 / t[1], t[0] + 1.0]
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        vec![psi(s[1]) + s[0].ln(), s[1] * s[0]]
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        vec![s[0] * gamma_draw(s[1], rng)]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        let (lp, kp) = (p[0], p[1]);
        let (lq, kq) = (q[0], q[1]);
        (kp - kq) * psi(kp) - lgamma(kp) + lgamma(kq) + kq * (lq / lp).ln() + kp * (lp - lq) / lq
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 2)?;
        let mean = mean_by(samples, |x| x[0]);
        let mean_log = mean_by(samples, |x| x[0].ln());
        let s = mean.ln() - mean_log;
        if s <= 0.0 {
            return Err(Error::DegenerateData("all observations are identical".into()));
        }
        let k = gamma_shape(s)?;
        Ok(vec![mean / k, k])
    }
}

/// Beta(α, β): `θ = (α - 1, β - 1)`, `t(x) = (ln x, ln(1 - x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta;

impl ExponentialFamily for Beta {
    fn name(&self) -> &'static str {
        "beta"
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        2
    }
    fn support(&self) -> Support {
        Support::UnitInterval
    }
    fn carrier_is_zero(&self) -> bool {
        true
    }
    fn has_closed_conjugate(&self) -> bool {
        false
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        match space {
            Space::Source => vec![Field::scalar("alpha"), Field::scalar("beta")],
            Space::Natural => vec![Field::scalar("theta1"), Field::scalar("theta2")],
            Space::Expectation => vec![Field::scalar("eta1"), Field::scalar("eta2")],
        }
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        if x[0] > 0.0 && x[0] < 1.0 {
            Ok(())
        } else {
            Err(Error::support(self.name(), format!("observation must lie in (0, 1), got {}", x[0])))
        }
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        positive("alpha", s[0])?;
        positive("beta", s[1])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        greater("theta1", t[0], -1.0)?;
        greater("theta2", t[1], -1.0)
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        check_mean_logs(e)
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0].ln(), (-x[0]).ln_1p()]
    }
    fn carrier(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        lbeta(t[0] + 1.0, t[1] + 1.0)
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        let (a, b) = (t[0] + 1.0, t[1] + 1.0);
        let total = psi(a + b);
        vec![psi(a) - total, psi(b) - total]
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        Some(digamma_hessian(&[t[0] + 1.0, t[1] + 1.0]))
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        let alpha = dirichlet_from_mean_logs(e)?;
        Ok(vec![alpha[0] - 1.0, alpha[1] - 1.0])
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0] - 1.0, s[1] - 1.0]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![t[0] + 1.0, t[1] + 1.0]
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        let a = gamma_draw(s[0], rng);
        let b = gamma_draw(s[1], rng);
        let mut x = a / (a + b);
        // Keep draws strictly inside the support.
        if x <= 0.0 {
            x = f64::MIN_POSITIVE;
        } else if x >= 1.0 {
            x = 1.0 - f64::EPSILON / 2.0;
        }
        vec![x]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        let (ap, bp) = (p[0], p[1]);
        let (aq, bq) = (q[0], q[1]);
        lbeta(aq, bq) - lbeta(ap, bp) + (ap - aq) * psi(ap) + (bp - bq) * psi(bp) + (aq - ap + bq - bp) * psi(ap + bp)
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 2)?;
        let e = [
            mean_by(samples, |x| x[0].ln()),
            mean_by(samples, |x| (-x[0]).ln_1p()),
        ];
        check_mean_logs(&e).map_err(|_| Error::DegenerateData("all observations are identical".into()))?;
        dirichlet_from_mean_logs(&e)
    }
}

/// Dirichlet(α) over `k` components: `θ = α`, `t(x) = (ln x_i)`,
/// `k(x) = -Σ ln x_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dirichlet {
    pub k: usize,
}

/// Tolerance on `Σ x_i = 1` for simplex observations.
const SIMPLEX_TOL: f64 = 1e-9;

impl ExponentialFamily for Dirichlet {
    fn name(&self) -> &'static str {
        "dirichlet"
    }
    fn obs_dim(&self) -> usize {
        self.k
    }
    fn order(&self) -> usize {
        self.k
    }
    fn support(&self) -> Support {
        Support::Simplex
    }
    fn carrier_is_zero(&self) -> bool {
        false
    }
    fn has_closed_conjugate(&self) -> bool {
        false
    }
    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("k", self.k as f64)]
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        let name = match space {
            Space::Source => "alpha",
            Space::Natural => "theta",
            Space::Expectation => "eta",
        };
        vec![Field::vector(name, self.k)]
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::support(self.name(), "components must lie in (0, 1)"));
        }
        let total = stable_sum(x.iter().copied());
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::support(self.name(), format!("components sum to {total}, expected 1")));
        }
        Ok(())
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        for (i, &v) in s.iter().enumerate() {
            positive(&indexed("alpha", i), v)?;
        }
        Ok(())
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        for (i, &v) in t.iter().enumerate() {
            positive(&indexed("theta", i), v)?;
        }
        Ok(())
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        check_mean_logs(e)
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.ln()).collect()
    }
    fn carrier(&self, x: &[f64]) -> f64 {
        -stable_sum(x.iter().map(|v| v.ln()))
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        let total: f64 = t.iter().sum();
        stable_sum(t.iter().map(|a| lgamma(*a))) - lgamma(total)
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        let total = psi(t.iter().sum());
        t.iter().map(|a| psi(*a) - total).collect()
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        Some(digamma_hessian(t))
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        dirichlet_from_mean_logs(e)
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        s.to_vec()
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        t.to_vec()
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        let draws: Vec<f64> = s.iter().map(|a| gamma_draw(*a, rng).max(f64::MIN_POSITIVE)).collect();
        let total: f64 = draws.iter().sum();
        draws.iter().map(|g| g / total).collect()
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        let (tp, tq): (f64, f64) = (p.iter().sum(), q.iter().sum());
        let psi_tp = psi(tp);
        lgamma(tp) - stable_sum(p.iter().map(|a| lgamma(*a))) - lgamma(tq)
            + stable_sum(q.iter().map(|a| lgamma(*a)))
            + stable_sum(p.iter().zip(q).map(|(a, b)| (a - b) * (psi(*a) - psi_tp)))
    }

    fn mle_closed_form(&self, _samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        Err(Error::Unsupported {
            family: self.name(),
            reason: "no closed-form estimator; use the expectation-parameter MLE".into(),
        })
    }

    fn expected_carrier(&self, t: &[f64]) -> Option<f64> {
        Some(-stable_sum(self.grad_log_normalizer(t)))
    }
    fn carrier_exp_moment(&self, t: &[f64], s: f64) -> Option<f64> {
        // E[Π x_i^{-s}] = B(α - s)/B(α)
        if t.iter().any(|a| *a <= s) {
            return None;
        }
        let shifted: Vec<f64> = t.iter().map(|a| a - s).collect();
        Some((self.log_normalizer(&shifted) - self.log_normalizer(t)).exp())
    }
}
