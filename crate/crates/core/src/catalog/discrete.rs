use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson as PoissonDist};

use super::util::{
    binomial_expectation, closed_unit, finite, indexed, is_count, logistic_variance, logit, mean_by, open_unit,
    poisson_expectation, positive, require_samples, sigmoid, softplus,
};
use crate::error::{Error, Result};
use crate::family::{for_each_composition, ExponentialFamily, Field, Space, Support};
use crate::numerics::{stable_sum, SeededRng};
use crate::special::ln_factorial;

fn binomial_draw(n: u64, p: f64, rng: &mut SeededRng) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        rand_distr::Binomial::new(n, p).expect("validated p").sample(rng)
    }
}

fn scalar_count(name: &'static str, x: f64) -> Result<()> {
    if is_count(x) {
        Ok(())
    } else {
        Err(Error::support(name, format!("observation must be a non-negative integer, got {x}")))
    }
}

/// Poisson(λ): `θ = ln λ`, `t(x) = x`, `k(x) = -ln x!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poisson;

impl ExponentialFamily for Poisson {
    fn name(&self) -> &'static str {
        "poisson"
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        1
    }
    fn support(&self) -> Support {
        Support::NonNegativeIntegers
    }
    fn carrier_is_zero(&self) -> bool {
        false
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        match space {
            Space::Source => vec![Field::scalar("lambda")],
            Space::Natural => vec![Field::scalar("theta")],
            Space::Expectation => vec![Field::scalar("eta")],
        }
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        scalar_count(self.name(), x[0])
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        positive("lambda", s[0])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        finite("theta", t[0])
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        positive("eta", e[0])
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }
    fn carrier(&self, x: &[f64]) -> f64 {
        -ln_factorial(x[0] as u64)
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        t[0].exp()
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        vec![t[0].exp()]
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, t[0].exp()))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        Some(e[0] * e[0].ln() - e[0])
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![e[0].ln()])
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0].ln()]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![t[0].exp()]
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0]]
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![e[0]])
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        let x: f64 = PoissonDist::new(s[0]).expect("validated rate").sample(rng);
        vec![x]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        q[0] - p[0] * (1.0 + (q[0] / p[0]).ln())
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        let mean = mean_by(samples, |x| x[0]);
        if mean <= 0.0 {
            return Err(Error::DegenerateData("all counts are zero".into()));
        }
        Ok(vec![mean])
    }

    fn expected_carrier(&self, t: &[f64]) -> Option<f64> {
        Some(-poisson_expectation(t[0].exp(), ln_factorial))
    }
    fn carrier_exp_moment(&self, t: &[f64], s: f64) -> Option<f64> {
        if s <= -1.0 {
            return None;
        }
        Some(poisson_expectation(t[0].exp(), |x| (-s * ln_factorial(x)).exp()))
    }
}

/// Bernoulli(p): `θ = logit p`, `t(x) = x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bernoulli;

impl ExponentialFamily for Bernoulli {
    fn name(&self) -> &'static str {
        "bernoulli"
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        1
    }
    fn support(&self) -> Support {
        Support::BoundedIntegers
    }
    fn carrier_is_zero(&self) -> bool {
        true
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![]
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        match space {
            Space::Source => vec![Field::scalar("p")],
            Space::Natural => vec![Field::scalar("theta")],
            Space::Expectation => vec![Field::scalar("eta")],
        }
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        if x[0] == 0.0 || x[0] == 1.0 {
            Ok(())
        } else {
            Err(Error::support(self.name(), format!("observation must be 0 or 1, got {}", x[0])))
        }
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        open_unit("p", s[0])
    }
    fn check_source_closed(&self, s: &[f64]) -> Result<()> {
        closed_unit("p", s[0])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        finite("theta", t[0])
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        open_unit("eta", e[0])
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }
    fn carrier(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        softplus(t[0])
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        vec![sigmoid(t[0])]
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, logistic_variance(t[0])))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        let p = e[0];
        Some(p * p.ln() + (1.0 - p) * (-p).ln_1p())
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![logit(e[0])])
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![logit(s[0])]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![sigmoid(t[0])]
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0]]
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![e[0]])
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        vec![if rng.random::<f64>() < s[0] { 1.0 } else { 0.0 }]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        let (a, b) = (p[0], q[0]);
        a * (a / b).ln() + (1.0 - a) * ((-a).ln_1p() - (-b).ln_1p())
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        let p = mean_by(samples, |x| x[0]);
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::DegenerateData(format!("all outcomes equal {p}")));
        }
        Ok(vec![p])
    }
}

/// Binomial(n, p) with `n` fixed: `θ = logit p`, `t(x) = x`,
/// `k(x) = -ln(x! (n-x)!)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binomial {
    pub n: u64,
}

impl ExponentialFamily for Binomial {
    fn name(&self) -> &'static str {
        "binomial"
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        1
    }
    fn support(&self) -> Support {
        Support::BoundedIntegers
    }
    fn carrier_is_zero(&self) -> bool {
        false
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("n", self.n as f64)]
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        Bernoulli.fields(space)
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        scalar_count(self.name(), x[0])?;
        if x[0] > self.n as f64 {
            return Err(Error::support(self.name(), format!("observation {} exceeds n = {}", x[0], self.n)));
        }
        Ok(())
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        open_unit("p", s[0])
    }
    fn check_source_closed(&self, s: &[f64]) -> Result<()> {
        closed_unit("p", s[0])
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        finite("theta", t[0])
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        if e[0] > 0.0 && e[0] < self.n as f64 {
            Ok(())
        } else {
            Err(Error::domain("eta", format!("must lie in (0, {}), got {}", self.n, e[0])))
        }
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }
    fn carrier(&self, x: &[f64]) -> f64 {
        let c = x[0] as u64;
        -ln_factorial(c) - ln_factorial(self.n - c)
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        self.n as f64 * softplus(t[0]) - ln_factorial(self.n)
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        vec![self.n as f64 * sigmoid(t[0])]
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, self.n as f64 * logistic_variance(t[0])))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        let n = self.n as f64;
        let (a, b) = (e[0], n - e[0]);
        Some(a * (a / b).ln() - n * (n / b).ln() + ln_factorial(self.n))
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![(e[0] / (self.n as f64 - e[0])).ln()])
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        vec![logit(s[0])]
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        vec![sigmoid(t[0])]
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        vec![self.n as f64 * s[0]]
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![e[0] / self.n as f64])
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        vec![binomial_draw(self.n, s[0], rng) as f64]
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        self.n as f64 * Bernoulli.kl_closed_form(p, q)
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        let p = mean_by(samples, |x| x[0]) / self.n as f64;
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::DegenerateData(format!("estimated p = {p} lies on the boundary")));
        }
        Ok(vec![p])
    }

    fn expected_carrier(&self, t: &[f64]) -> Option<f64> {
        let n = self.n;
        Some(binomial_expectation(n, sigmoid(t[0]), |x| {
            -ln_factorial(x) - ln_factorial(n - x)
        }))
    }
    fn carrier_exp_moment(&self, t: &[f64], s: f64) -> Option<f64> {
        let n = self.n;
        Some(binomial_expectation(n, sigmoid(t[0]), |x| {
            (-s * (ln_factorial(x) + ln_factorial(n - x))).exp()
        }))
    }
}

/// Multinomial(n, p) over `k` categories, `n` fixed. The natural parameters
/// are the `k - 1` log-odds against the last category; `t(x)` is the first
/// `k - 1` counts and `k(x) = -Σ ln x_i!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multinomial {
    pub n: u64,
    pub k: usize,
}

/// Largest composition count enumerated exactly by `carrier_exp_moment`.
const MAX_ENUMERATED: f64 = 1e6;

impl Multinomial {
    /// Category probabilities `(p_1, ..., p_k)` from natural parameters.
    fn probabilities(&self, t: &[f64]) -> Vec<f64> {
        let m = t.iter().fold(0.0f64, |a, &b| a.max(b));
        let weights: Vec<f64> = t.iter().map(|v| (v - m).exp()).chain([(-m).exp()]).collect();
        let total = stable_sum(weights.iter().copied());
        weights.into_iter().map(|w| w / total).collect()
    }

    fn compositions(&self) -> f64 {
        // C(n + k - 1, k - 1)
        let (n, k) = (self.n, self.k as u64);
        (ln_factorial(n + k - 1) - ln_factorial(n) - ln_factorial(k - 1)).exp()
    }

    fn check_probabilities(&self, s: &[f64], closed: bool) -> Result<()> {
        for (i, &p) in s.iter().enumerate() {
            if closed {
                closed_unit(&indexed("p", i), p)?;
            } else {
                open_unit(&indexed("p", i), p)?;
            }
        }
        let total = stable_sum(s.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain("p", format!("probabilities must sum to 1, got {total}")));
        }
        Ok(())
    }
}

impl ExponentialFamily for Multinomial {
    fn name(&self) -> &'static str {
        "multinomial"
    }
    fn obs_dim(&self) -> usize {
        self.k
    }
    fn order(&self) -> usize {
        self.k - 1
    }
    fn support(&self) -> Support {
        Support::CountVectors
    }
    fn carrier_is_zero(&self) -> bool {
        false
    }
    fn has_closed_conjugate(&self) -> bool {
        true
    }
    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("n", self.n as f64), ("k", self.k as f64)]
    }
    fn fields(&self, space: Space) -> Vec<Field> {
        match space {
            Space::Source => vec![Field::vector("p", self.k)],
            Space::Natural => vec![Field::vector("theta", self.k - 1)],
            Space::Expectation => vec![Field::vector("eta", self.k - 1)],
        }
    }

    fn check_observation(&self, x: &[f64]) -> Result<()> {
        for &c in x {
            scalar_count(self.name(), c)?;
        }
        let total: f64 = x.iter().sum();
        if total != self.n as f64 {
            return Err(Error::support(self.name(), format!("counts sum to {total}, expected n = {}", self.n)));
        }
        Ok(())
    }
    fn check_source(&self, s: &[f64]) -> Result<()> {
        self.check_probabilities(s, false)
    }
    fn check_source_closed(&self, s: &[f64]) -> Result<()> {
        self.check_probabilities(s, true)
    }
    fn check_natural(&self, t: &[f64]) -> Result<()> {
        for (i, &v) in t.iter().enumerate() {
            finite(&indexed("theta", i), v)?;
        }
        Ok(())
    }
    fn check_expectation(&self, e: &[f64]) -> Result<()> {
        for (i, &v) in e.iter().enumerate() {
            positive(&indexed("eta", i), v)?;
        }
        let total = stable_sum(e.iter().copied());
        if total >= self.n as f64 {
            return Err(Error::domain("eta", format!("entries must sum below n = {}, got {total}", self.n)));
        }
        Ok(())
    }

    fn sufficient_statistic(&self, x: &[f64]) -> Vec<f64> {
        x[..self.k - 1].to_vec()
    }
    fn carrier(&self, x: &[f64]) -> f64 {
        -stable_sum(x.iter().map(|&c| ln_factorial(c as u64)))
    }
    fn log_normalizer(&self, t: &[f64]) -> f64 {
        let m = t.iter().fold(0.0f64, |a, &b| a.max(b));
        let inner = stable_sum(t.iter().map(|v| (v - m).exp()).chain([(-m).exp()]));
        self.n as f64 * (m + inner.ln()) - ln_factorial(self.n)
    }
    fn grad_log_normalizer(&self, t: &[f64]) -> Vec<f64> {
        let p = self.probabilities(t);
        p[..self.k - 1].iter().map(|v| self.n as f64 * v).collect()
    }
    fn hessian_log_normalizer(&self, t: &[f64]) -> Option<DMatrix<f64>> {
        let p = self.probabilities(t);
        let m = self.k - 1;
        let n = self.n as f64;
        Some(DMatrix::from_fn(m, m, |i, j| {
            n * (if i == j { p[i] } else { 0.0 } - p[i] * p[j])
        }))
    }
    fn conjugate(&self, e: &[f64]) -> Option<f64> {
        let n = self.n as f64;
        let last = n - stable_sum(e.iter().copied());
        let xlogx = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
        Some(stable_sum(e.iter().map(|&v| xlogx(v))) + xlogx(last) - n * n.ln() + ln_factorial(self.n))
    }
    fn grad_conjugate(&self, e: &[f64]) -> Result<Vec<f64>> {
        let last = self.n as f64 - stable_sum(e.iter().copied());
        Ok(e.iter().map(|v| (v / last).ln()).collect())
    }

    fn source_to_natural(&self, s: &[f64]) -> Vec<f64> {
        let last = s[self.k - 1];
        s[..self.k - 1].iter().map(|p| (p / last).ln()).collect()
    }
    fn natural_to_source(&self, t: &[f64]) -> Vec<f64> {
        self.probabilities(t)
    }
    fn source_to_expectation(&self, s: &[f64]) -> Vec<f64> {
        s[..self.k - 1].iter().map(|p| self.n as f64 * p).collect()
    }
    fn expectation_to_source(&self, e: &[f64]) -> Result<Vec<f64>> {
        let n = self.n as f64;
        let mut p: Vec<f64> = e.iter().map(|v| v / n).collect();
        p.push((n - stable_sum(e.iter().copied())) / n);
        Ok(p)
    }

    fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Vec<f64> {
        // Sequential conditional binomials.
        let mut remaining = self.n;
        let mut mass_left = 1.0;
        let mut out = Vec::with_capacity(self.k);
        for (i, &p) in s.iter().enumerate() {
            if i == self.k - 1 {
                out.push(remaining as f64);
                break;
            }
            let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 0.0 };
            let c = if remaining == 0 { 0 } else { binomial_draw(remaining, q, rng) };
            out.push(c as f64);
            remaining -= c;
            mass_left -= p;
        }
        out
    }

    fn kl_closed_form(&self, p: &[f64], q: &[f64]) -> f64 {
        self.n as f64 * stable_sum(p.iter().zip(q).map(|(a, b)| a * (a / b).ln()))
    }

    fn mle_closed_form(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        require_samples(samples, 1)?;
        let n = self.n as f64;
        let p: Vec<f64> = (0..self.k).map(|i| mean_by(samples, |x| x[i]) / n).collect();
        if let Some(i) = p.iter().position(|&v| v <= 0.0) {
            return Err(Error::DegenerateData(format!("category {i} was never observed")));
        }
        Ok(p)
    }

    fn expected_carrier(&self, t: &[f64]) -> Option<f64> {
        let p = self.probabilities(t);
        Some(-stable_sum(p.iter().map(|&pi| binomial_expectation(self.n, pi, ln_factorial))))
    }
    fn carrier_exp_moment(&self, t: &[f64], s: f64) -> Option<f64> {
        if self.compositions() > MAX_ENUMERATED {
            return None;
        }
        let p = self.probabilities(t);
        let ln_p: Vec<f64> = p.iter().map(|v| v.ln()).collect();
        let ln_n = ln_factorial(self.n);
        let mut terms = Vec::new();
        for_each_composition(self.n, self.k, &mut |counts| {
            let ln_carrier: f64 = -counts.iter().map(|&c| ln_factorial(c)).sum::<f64>();
            let ln_mass = ln_n
                + ln_carrier
                + counts
                    .iter()
                    .zip(&ln_p)
                    .map(|(&c, lp)| if c == 0 { 0.0 } else { c as f64 * lp })
                    .sum::<f64>();
            terms.push((ln_mass + s * ln_carrier).exp());
        });
        Some(stable_sum(terms))
    }
}
