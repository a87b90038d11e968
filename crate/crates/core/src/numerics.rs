//! Numerical oracles and solvers: adaptive Gauss–Kronrod quadrature, central
//! finite differences, safeguarded Newton iteration, seeded Monte Carlo and
//! compensated summation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Random generator used throughout the crate.
pub type SeededRng = ChaCha20Rng;

/// Seed for every randomized operation.
///
/// The same seed always yields a bit-identical stream. Independent
/// sub-streams for parallel chunks are derived with [`RngSeed::stream`], which
/// selects the ChaCha stream id while keeping the key fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> SeededRng {
        SeededRng::seed_from_u64(self.0)
    }

    pub fn stream(self, id: u64) -> SeededRng {
        let mut rng = SeededRng::seed_from_u64(self.0);
        rng.set_stream(id);
        rng
    }
}

/// Integration range and tolerances for [`adaptive_quadrature`].
///
/// Either bound may be infinite; infinite ranges are mapped onto a finite
/// interval by a rational change of variables before integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub lower: f64,
    pub upper: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl QuadratureSpec {
    pub fn new(lower: f64, upper: f64) -> Self {
        QuadratureSpec {
            lower,
            upper,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_depth: 64,
        }
    }

    pub fn tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn max_depth(mut self, depth: u32) -> Self {
        self.max_depth = depth;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.lower.is_nan() || self.upper.is_nan() || !(self.lower < self.upper) {
            return Err(Error::InvalidArgument(format!(
                "quadrature range requires lower < upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("quadrature tolerances must be positive".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidArgument("quadrature max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

// 15-point Kronrod abscissae (non-negative half) and weights, with the
// embedded 7-point Gauss weights for the odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 20_000;

struct Segment {
    a: f64,
    b: f64,
    integral: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let integral = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (integral, error)
}

/// Adaptive 15-point Gauss–Kronrod quadrature with global error control.
///
/// Returns the estimate once the summed error bound is below
/// `max(abs_tol, rel_tol * |estimate|)`. If every remaining segment has hit
/// `max_depth` (or the segment budget is exhausted) the partial estimate is
/// returned inside [`Error::Quadrature`].
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let (lo, hi) = (spec.lower, spec.upper);
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => integrate_finite(&f, lo, hi, spec),
        (true, false) => integrate_finite(
            &|t: f64| {
                let s = 1.0 - t;
                f(lo + t / s) / (s * s)
            },
            0.0,
            1.0,
            spec,
        ),
        (false, true) => integrate_finite(
            &|t: f64| {
                let s = 1.0 - t;
                f(hi - t / s) / (s * s)
            },
            0.0,
            1.0,
            spec,
        ),
        (false, false) => integrate_finite(
            &|t: f64| {
                let s = 1.0 - t * t;
                f(t / s) * (1.0 + t * t) / (s * s)
            },
            -1.0,
            1.0,
            spec,
        ),
    }
}

fn integrate_finite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    let (integral, error) = kronrod15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        integral,
        error,
        depth: 0,
    });
    let mut frozen: Vec<Segment> = Vec::new();
    let mut total = integral;
    let mut total_err = error;
    let mut segments = 1usize;

    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
            });
        }
        if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            break;
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        if worst.depth >= spec.max_depth || segments >= MAX_SEGMENTS {
            frozen.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (li, le) = kronrod15(f, worst.a, mid);
        let (ri, re) = kronrod15(f, mid, worst.b);
        total += li + ri - worst.integral;
        total_err += le + re - worst.error;
        segments += 1;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            integral: li,
            error: le,
            depth: worst.depth + 1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            integral: ri,
            error: re,
            depth: worst.depth + 1,
        });
    }

    let all: Vec<&Segment> = heap.iter().chain(frozen.iter()).collect();
    let estimate = stable_sum(all.iter().map(|s| s.integral));
    let bound = stable_sum(all.iter().map(|s| s.error));
    if bound <= spec.abs_tol.max(spec.rel_tol * estimate.abs()) {
        Ok(estimate)
    } else {
        Err(Error::Quadrature {
            estimate,
            error: bound,
        })
    }
}

/// Central-difference gradient with a fixed step `h` on every coordinate.
pub fn finite_diff_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Newton iteration `x <- project(x - f(x)/df(x))`.
///
/// `project` maps an iterate back into the feasible region (pass `|x| x` when
/// unconstrained). Succeeds once `|f(x)| < tol`.
pub fn newton_solve<F, D, P>(f: F, df: D, x0: f64, tol: f64, max_iter: usize, project: P) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let mut x = x0;
    for iteration in 0..=max_iter {
        let value = f(x);
        if !value.is_finite() {
            return Err(Error::Newton {
                iterations: iteration,
                last: x,
            });
        }
        if value.abs() < tol {
            return Ok(x);
        }
        if iteration == max_iter {
            break;
        }
        let slope = df(x);
        if slope == 0.0 || !slope.is_finite() {
            return Err(Error::Newton {
                iterations: iteration,
                last: x,
            });
        }
        x = project(x - value / slope);
    }
    Err(Error::Newton {
        iterations: max_iter,
        last: x,
    })
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Draws per chunk. Chunk `c` uses sub-stream `c` of the seed, so the result
/// does not depend on how many worker threads run the chunks.
pub const MC_CHUNK: usize = 4096;

#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, other: Moments) -> Moments {
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }
}

/// Estimates `E[g(X)]` from `n` draws of `sampler`.
pub fn monte_carlo_expectation<X, S, G>(sampler: S, g: G, n: usize, seed: RngSeed) -> Result<Estimate>
where
    S: Fn(&mut SeededRng) -> X + Sync,
    G: Fn(&X) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least 2 draws, got {n}"
        )));
    }
    let chunks = n.div_ceil(MC_CHUNK);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.stream(c as u64);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut m = Moments {
                count: 0.0,
                mean: 0.0,
                m2: 0.0,
            };
            for _ in 0..len {
                let v = g(&sampler(&mut rng));
                m.count += 1.0;
                let delta = v - m.mean;
                m.mean += delta / m.count;
                m.m2 += delta * (v - m.mean);
            }
            m
        })
        .collect();
    let total = partials.into_iter().fold(
        Moments {
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
        },
        Moments::merge,
    );
    if !total.mean.is_finite() {
        return Err(Error::Numerical("Monte Carlo integrand produced a non-finite value".into()));
    }
    let variance = (total.m2 / (total.count - 1.0)).max(0.0);
    Ok(Estimate {
        mean: total.mean,
        std_error: (variance / total.count).sqrt(),
    })
}

/// Neumaier-compensated sum in input order.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    stable_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal, Poisson};
    use std::f64::consts::PI;

    #[test]
    fn quadrature_examples() {
        let spec = QuadratureSpec::new(0.0, 1.0).tolerances(1e-10, 1e-10);
        let v = adaptive_quadrature(|x| x * x, &spec).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);

        let gauss = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let v = adaptive_quadrature(gauss, &QuadratureSpec::new(f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        assert!((v - 1.0).abs() < 1e-8);

        let v = adaptive_quadrature(|x: f64| x * (-x).exp(), &QuadratureSpec::new(0.0, f64::INFINITY)).unwrap();
        assert!((v - 1.0).abs() < 1e-8);

        let v = adaptive_quadrature(|x: f64| x.exp(), &QuadratureSpec::new(f64::NEG_INFINITY, 0.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quadrature_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let spec = QuadratureSpec::new(0.0, 1.0).tolerances(1e-9, 1e-9);
        let v = adaptive_quadrature(|x: f64| 1.0 / x.sqrt(), &spec).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn quadrature_reports_nonconvergence() {
        let spec = QuadratureSpec::new(0.0, 1.0).tolerances(1e-14, 1e-14).max_depth(2);
        match adaptive_quadrature(|x: f64| 1.0 / x.sqrt(), &spec) {
            Err(Error::Quadrature { estimate, .. }) => assert!(estimate > 1.0 && estimate < 2.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(adaptive_quadrature(|x| x, &QuadratureSpec::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn finite_differences() {
        let g = finite_diff_gradient(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]), &[3.0, 4.0], 1e-5);
        assert!((g[0] - 3.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);
        let g = finite_diff_gradient(|x| x[0].exp(), &[0.0], 1e-5);
        assert!((g[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn newton_examples() {
        let r = newton_solve(|t: f64| t.exp() - 2.0, |t: f64| t.exp(), 0.0, 1e-14, 50, |x| x).unwrap();
        assert!((r - 2f64.ln()).abs() < 1e-12);
        let r = newton_solve(|x: f64| x.powi(3) - 1.0, |x: f64| 3.0 * x * x, 2.0, 1e-14, 50, |x| x).unwrap();
        assert!((r - 1.0).abs() < 1e-12);

        // ψ(k) - ln k + 1/2 = 0, checked against plain bisection on the same equation.
        let f = |k: f64| crate::special::psi(k) - k.ln() + 0.5;
        let df = |k: f64| crate::special::psi1(k) - 1.0 / k;
        let r = newton_solve(f, df, 1.0, 1e-13, 100, |k: f64| k.max(1e-8)).unwrap();
        let (mut lo, mut hi) = (0.01, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((r - 0.5 * (lo + hi)).abs() < 1e-10);
        assert!((r - 1.137_724_727_147_858_7).abs() < 1e-10);
        assert!(f(r).abs() < 1e-13);
    }

    #[test]
    fn newton_failure_is_explicit() {
        // x^2 + 1 has no real root.
        let err = newton_solve(|x: f64| x * x + 1.0, |x: f64| 2.0 * x, 0.5, 1e-12, 30, |x| x).unwrap_err();
        assert!(matches!(err, Error::Newton { .. }));
    }

    #[test]
    fn monte_carlo_examples() {
        let e = monte_carlo_expectation(|rng: &mut SeededRng| rng.random::<f64>(), |_| 1.0, 1000, RngSeed(1)).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);

        let normal = Normal::new(0.0, 1.0).unwrap();
        let e = monte_carlo_expectation(|rng: &mut SeededRng| normal.sample(rng), |x| x * x, 1_000_000, RngSeed(3))
            .unwrap();
        assert!((e.mean - 1.0).abs() < 3.0 * e.std_error, "{e:?}");

        let poisson = Poisson::new(4.0).unwrap();
        let e = monte_carlo_expectation(|rng: &mut SeededRng| poisson.sample(rng), |x| *x, 1_000_000, RngSeed(5))
            .unwrap();
        assert!((e.mean - 4.0).abs() < 3.0 * e.std_error, "{e:?}");

        assert!(monte_carlo_expectation(|_: &mut SeededRng| 0.0, |x| *x, 1, RngSeed(0)).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible_and_thread_independent() {
        let normal = Normal::new(1.0, 2.0).unwrap();
        let run = || monte_carlo_expectation(|rng: &mut SeededRng| normal.sample(rng), |x| *x, 50_000, RngSeed(9));
        let a = run().unwrap();
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());

        let c = monte_carlo_expectation(|rng: &mut SeededRng| normal.sample(rng), |x| *x, 50_000, RngSeed(10)).unwrap();
        let combined = (a.std_error.powi(2) + c.std_error.powi(2)).sqrt();
        assert!((a.mean - c.mean).abs() < 4.0 * combined);
    }

    #[test]
    fn compensated_summation() {
        assert_eq!(stable_sum([1.0, 2.0, 3.0]), 6.0);
        assert_eq!(stable_sum([1e16, 1.0, -1e16]), 1.0);
        assert_eq!(stable_sum(std::iter::empty()), 0.0);
    }
}
