//! Finite mixtures of one exponential family: sampling, Bregman hard
//! clustering, EM soft clustering and approximations of the KL divergence
//! between mixtures.
//!
//! Components live in expectation coordinates. The M-step and the clustering
//! centroids are plain (weighted) means there; natural parameters are derived
//! through `∇G` when a density or a responsibility is needed.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::catalog::Family;
use crate::divergences::{bregman_natural, conjugate_with_gradient};
use crate::error::{Error, Result};
use crate::family::{check_len, log_density_unchecked, Observation, ParamVector, Space};
use crate::numerics::{dot, monte_carlo_expectation, stable_sum, Estimate, RngSeed, SeededRng};

/// Tolerance on `Σ wᵢ = 1`.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Column mass below which an EM component counts as vanished.
pub const VANISHED_MASS: f64 = 1e-12;

/// Iteration cap for the hard clustering run inside [`em_init`].
pub const INIT_CLUSTERING_ITERS: usize = 100;

/// `Σ wᵢ p_F(x; θᵢ)` with components stored as expectation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    family: Family,
    weights: Vec<f64>,
    components: Vec<ParamVector>,
}

impl MixtureModel {
    /// Components may be given in any space; they are stored as η.
    pub fn new(family: Family, weights: Vec<f64>, components: Vec<ParamVector>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("a mixture needs at least one component".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::Dimension {
                expected: components.len(),
                got: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::domain("weights", format!("weight {w} is not a finite non-negative number")));
        }
        let total = stable_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::domain("weights", format!("weights sum to {total}, not 1")));
        }
        let components = components
            .into_iter()
            .map(|c| {
                if c.family() != family {
                    return Err(Error::FamilyMismatch {
                        left: family.to_string(),
                        right: c.family().to_string(),
                    });
                }
                c.to_expectation()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureModel {
            family,
            weights,
            components,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Components as expectation parameters.
    pub fn components(&self) -> &[ParamVector] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }
}

/// Posterior membership probabilities, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    matrix: DMatrix<f64>,
}

impl Responsibilities {
    /// Validates that every row is a probability vector (within `1e-12`).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        for (i, row) in matrix.row_iter().enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::domain("responsibilities", format!("row {i} has an entry outside [0, 1]")));
            }
            let s = stable_sum(row.iter().copied());
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::domain("responsibilities", format!("row {i} sums to {s}")));
            }
        }
        Ok(Responsibilities { matrix })
    }

    /// One-hot rows from hard labels.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        let mut matrix = DMatrix::zeros(labels.len(), k);
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidArgument(format!("label {l} out of range for {k} components")));
            }
            matrix[(i, l)] = 1.0;
        }
        Ok(Responsibilities { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Average log-likelihood after initialization and after every EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub avg_log_likelihood: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Per-component quantities needed to evaluate densities.
struct Prepared {
    family: Family,
    log_w: Vec<f64>,
    eta: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    g: Vec<f64>,
}

impl Prepared {
    fn new(model: &MixtureModel) -> Result<Self> {
        let fam = model.family;
        let mut theta = Vec::with_capacity(model.k());
        let mut g = Vec::with_capacity(model.k());
        for c in &model.components {
            let (gv, t) = conjugate_with_gradient(&fam, c.values())?;
            theta.push(t);
            g.push(gv);
        }
        Ok(Prepared {
            family: fam,
            log_w: model.weights.iter().map(|w| w.ln()).collect(),
            eta: model.components.iter().map(|c| c.values().to_vec()).collect(),
            theta,
            g,
        })
    }

    /// `ln wⱼ + G(ηⱼ) + <t - ηⱼ, ∇G(ηⱼ)>`, i.e. `ln wⱼ + ln p_F(x; θⱼ) - k(x)`.
    fn log_terms(&self, t: &[f64]) -> Vec<f64> {
        (0..self.log_w.len())
            .map(|j| {
                let diff: Vec<f64> = t.iter().zip(&self.eta[j]).map(|(a, b)| a - b).collect();
                self.log_w[j] + self.g[j] + dot(&diff, &self.theta[j])
            })
            .collect()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.log_w.len())
            .map(|j| self.log_w[j] + log_density_unchecked(&self.family, x, &self.theta[j]))
            .collect();
        log_sum_exp(&terms)
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + stable_sum(values.iter().map(|v| (v - m).exp())).ln()
}

fn statistics(family: &Family, data: &[Observation]) -> Result<Vec<Vec<f64>>> {
    data.iter()
        .map(|x| {
            check_len(x, family.obs_dim())?;
            family.check_observation(x)?;
            Ok(family.sufficient_statistic(x))
        })
        .collect()
}

fn check_observations(family: &Family, data: &[Observation]) -> Result<()> {
    for x in data {
        check_len(x, family.obs_dim())?;
        family.check_observation(x)?;
    }
    Ok(())
}

fn same_mixture_family(f: &MixtureModel, g: &MixtureModel) -> Result<()> {
    if f.family != g.family {
        return Err(Error::FamilyMismatch {
            left: f.family.to_string(),
            right: g.family.to_string(),
        });
    }
    Ok(())
}

fn pick_component(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .iter()
        .position(|c| u < *c)
        .unwrap_or_else(|| cumulative.len() - 1)
}

fn cumulative_weights(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // Guard against the last partial sum falling just short of 1: the final
    // component with positive weight absorbs the remainder.
    if let Some(last) = weights.iter().rposition(|w| *w > 0.0) {
        for c in &mut out[last..] {
            *c = f64::INFINITY;
        }
    }
    out
}

fn sources(model: &MixtureModel) -> Result<Vec<Vec<f64>>> {
    model
        .components
        .iter()
        .map(|c| Ok(c.to_source()?.into_values()))
        .collect()
}

/// `n` draws from the mixture with their component labels.
///
/// Labels come from sub-stream 1 of the seed and observations from
/// sub-stream 0, so a one-component mixture reproduces
/// [`crate::catalog::sample`] with the same seed.
pub fn sample_mixture(model: &MixtureModel, n: usize, seed: RngSeed) -> Result<(Vec<Observation>, Vec<usize>)> {
    let sources = sources(model)?;
    let cumulative = cumulative_weights(&model.weights);
    let mut label_rng = seed.stream(1);
    let labels: Vec<usize> = (0..n)
        .map(|_| pick_component(&cumulative, label_rng.random::<f64>()))
        .collect();
    let mut rng = seed.stream(0);
    let data = labels
        .iter()
        .map(|&j| model.family.sample(&sources[j], &mut rng))
        .collect();
    Ok((data, labels))
}

/// Outcome of [`bregman_hard_clustering`].
#[derive(Debug, Clone, PartialEq)]
pub struct HardClustering {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Clustering objective after each assignment step.
    pub objective: Vec<f64>,
    pub converged: bool,
}

/// Moves a candidate centroid into the open expectation domain by repeated
/// 10% steps toward `anchor`, which must itself lie in the domain.
fn admit(family: &Family, mut c: Vec<f64>, anchor: &[f64]) -> Result<Vec<f64>> {
    for _ in 0..400 {
        if family.check_expectation(&c).is_ok() {
            return Ok(c);
        }
        for (ci, a) in c.iter_mut().zip(anchor) {
            *ci += 0.1 * (a - *ci);
        }
    }
    Err(Error::DegenerateData("cluster centroid could not be moved into the expectation domain".into()))
}

fn mean_of(points: &[Vec<f64>], members: impl Iterator<Item = usize> + Clone, dim: usize) -> Vec<f64> {
    let count = members.clone().count() as f64;
    (0..dim)
        .map(|d| stable_sum(members.clone().map(|i| points[i][d])) / count)
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    stable_sum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
}

/// Greedy k-means++ seeding with squared Euclidean distances in `t`-space:
/// each step draws `2 + ln k` candidates by D² weighting and keeps the one
/// that lowers the potential most.
fn seed_indices(points: &[Vec<f64>], k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let n = points.len();
    let trials = 2 + (k as f64).ln() as usize;
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total = stable_sum(d2.iter().copied());
        if total <= 0.0 {
            chosen.push((0..n).find(|i| !chosen.contains(i)).expect("n >= k"));
            continue;
        }
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                if *d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if u < acc {
                    break;
                }
            }
            let c = pick.expect("positive total has a positive entry");
            let updated: Vec<f64> = points
                .iter()
                .zip(&d2)
                .map(|(p, d)| d.min(squared_distance(p, &points[c])))
                .collect();
            let potential = stable_sum(updated.iter().copied());
            if best.as_ref().is_none_or(|b| potential < b.1) {
                best = Some((c, potential, updated));
            }
        }
        let (c, _, updated) = best.expect("at least one trial");
        chosen.push(c);
        d2 = updated;
    }
    chosen
}

/// Cluster means, with empty clusters re-seeded at the point farthest
/// (Euclidean) from its current centroid.
fn update_centroids(
    family: &Family,
    points: &[Vec<f64>],
    assignments: &[usize],
    centroids: &mut [Vec<f64>],
    global: &[f64],
) -> Result<()> {
    let n = points.len();
    let dim = global.len();
    for j in 0..centroids.len() {
        let members = (0..n).filter(|&i| assignments[i] == j);
        if members.clone().next().is_none() {
            let far = (0..n)
                .map(|i| (i, squared_distance(&points[i], &centroids[assignments[i]])))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
                .0;
            centroids[j] = admit(family, points[far].clone(), global)?;
        } else {
            centroids[j] = admit(family, mean_of(points, members, dim), global)?;
        }
    }
    Ok(())
}

/// Lloyd-style Bregman hard clustering of expectation-space points with the
/// divergence `B_G(t || η̄)`.
///
/// A point `t(x)` of a single observation often lies on the boundary of the
/// expectation domain, where `G` is undefined, so assignments use
/// `-G(η̄ⱼ) - <t - η̄ⱼ, ∇G(η̄ⱼ)>`, which differs from `B_G(t || η̄ⱼ)` only by
/// `G(t)`. The reported objective adds `Σ G(tᵢ)` back when every point is in
/// the domain and is otherwise the objective up to that constant.
///
/// Seeds are drawn k-means++ style with squared Euclidean distances in
/// `t`-space and the first partition assigns each point to its nearest seed
/// in that metric. Ties go to the lowest index. Centroids are cluster means; a mean on the
/// boundary of the domain is moved 10% at a time toward the global mean, and
/// an empty cluster is re-seeded at the point farthest (Euclidean) from its
/// centroid. `max_iter` bounds the number of centroid updates.
pub fn bregman_hard_clustering(
    family: &Family,
    points: &[Vec<f64>],
    k: usize,
    seed: RngSeed,
    max_iter: usize,
) -> Result<HardClustering> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::InsufficientData(format!("{} points for {k} clusters", points.len())));
    }
    let dim = family.order();
    for p in points {
        check_len(p, dim)?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("points", "non-finite coordinate"));
        }
    }
    let n = points.len();
    let global = mean_of(points, 0..n, dim);
    if family.check_expectation(&global).is_err() {
        return Err(Error::DegenerateData("the mean of all points is outside the expectation domain".into()));
    }
    let point_g: Option<Vec<f64>> = points
        .iter()
        .map(|p| {
            family.check_expectation(p).ok()?;
            conjugate_with_gradient(family, p).ok().map(|(g, _)| g)
        })
        .collect();
    let offset = point_g.map(|g| stable_sum(g)).unwrap_or(0.0);

    let mut rng = seed.rng();
    let seeds = seed_indices(points, k, &mut rng);
    // The seeds are single observations, typically on the boundary of the
    // domain where B_G degenerates, so the first partition uses the seeding
    // metric.
    let mut assignments: Vec<usize> = points
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, &s) in seeds.iter().enumerate() {
                let d = squared_distance(p, &points[s]);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best.0
        })
        .collect();
    let mut centroids = seeds
        .iter()
        .map(|&i| admit(family, points[i].clone(), &global))
        .collect::<Result<Vec<_>>>()?;
    update_centroids(family, points, &assignments, &mut centroids, &global)?;

    let mut objective = Vec::new();
    let mut converged = false;
    let mut iter = 0;
    loop {
        let prepared = centroids
            .iter()
            .map(|c| conjugate_with_gradient(family, c))
            .collect::<Result<Vec<_>>>()?;
        let scored: Vec<(usize, f64)> = points
            .par_iter()
            .map(|t| {
                let mut best = (0, f64::INFINITY);
                for (j, (g, theta)) in prepared.iter().enumerate() {
                    let diff: Vec<f64> = t.iter().zip(&centroids[j]).map(|(a, b)| a - b).collect();
                    let s = -g - dot(&diff, theta);
                    if s < best.1 {
                        best = (j, s);
                    }
                }
                best
            })
            .collect();
        let next: Vec<usize> = scored.iter().map(|s| s.0).collect();
        objective.push(stable_sum(scored.iter().map(|s| s.1)) + offset);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        if iter == max_iter {
            break;
        }
        iter += 1;
        update_centroids(family, points, &assignments, &mut centroids, &global)?;
    }
    Ok(HardClustering {
        assignments,
        centroids,
        objective,
        converged,
    })
}

/// Initial mixture from a hard clustering of the sufficient statistics:
/// `wᵢ = nᵢ / n` and `ηᵢ` the mean of `t(x)` over cluster `i` (moved into the
/// domain as in [`bregman_hard_clustering`] when it lies on the boundary).
pub fn em_init(family: &Family, data: &[Observation], k: usize, seed: RngSeed) -> Result<MixtureModel> {
    let stats = statistics(family, data)?;
    init_from_stats(family, &stats, k, seed)
}

fn init_from_stats(family: &Family, stats: &[Vec<f64>], k: usize, seed: RngSeed) -> Result<MixtureModel> {
    if stats.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let clustering = bregman_hard_clustering(family, stats, k, seed, INIT_CLUSTERING_ITERS)?;
    let n = stats.len();
    let dim = family.order();
    let global = mean_of(stats, 0..n, dim);
    let mut weights = Vec::with_capacity(k);
    let mut components = Vec::with_capacity(k);
    for j in 0..k {
        let members = (0..n).filter(|&i| clustering.assignments[i] == j);
        let count = members.clone().count();
        if count == 0 {
            return Err(Error::VanishedComponent { index: j, mass: 0.0 });
        }
        weights.push(count as f64 / n as f64);
        let eta = admit(family, mean_of(stats, members, dim), &global)?;
        components.push(ParamVector::expectation(*family, eta)?);
    }
    normalize_rounding(&mut weights);
    MixtureModel::new(*family, weights, components)
}

/// Counts divided by `n` can miss 1 by a few ulps; rescale so the model
/// invariant holds exactly enough.
fn normalize_rounding(weights: &mut [f64]) {
    let total = stable_sum(weights.iter().copied());
    if total != 1.0 {
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
}

/// Responsibilities and per-row log-likelihoods (carrier included).
fn expectation_step(prep: &Prepared, stats: &[Vec<f64>], carriers: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let rows: Vec<Option<(Vec<f64>, f64)>> = stats
        .par_iter()
        .map(|t| {
            let terms = prep.log_terms(t);
            let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !m.is_finite() {
                return None;
            }
            let scaled: Vec<f64> = terms.iter().map(|v| (v - m).exp()).collect();
            let total = stable_sum(scaled.iter().copied());
            let resp = scaled.iter().map(|v| v / total).collect();
            Some((resp, m + total.ln()))
        })
        .collect();
    let k = prep.log_w.len();
    let mut matrix = DMatrix::zeros(stats.len(), k);
    let mut loglik = Vec::with_capacity(stats.len());
    for (i, row) in rows.into_iter().enumerate() {
        let (resp, ll) = row.ok_or(Error::Underflow { row: i })?;
        for (j, r) in resp.into_iter().enumerate() {
            matrix[(i, j)] = r;
        }
        loglik.push(ll + carriers[i]);
    }
    Ok((matrix, loglik))
}

/// E-step: `p(i, j) ∝ wⱼ exp(G(ηⱼ) + <t(xᵢ) - ηⱼ, ∇G(ηⱼ)>)`, normalized per
/// row in the log domain. The carrier cancels within a row.
pub fn em_expectation(model: &MixtureModel, data: &[Observation]) -> Result<Responsibilities> {
    let stats = statistics(&model.family, data)?;
    let prep = Prepared::new(model)?;
    let carriers = vec![0.0; stats.len()];
    let (matrix, _) = expectation_step(&prep, &stats, &carriers)?;
    Ok(Responsibilities { matrix })
}

fn maximization_step(family: &Family, stats: &[Vec<f64>], resp: &DMatrix<f64>) -> Result<MixtureModel> {
    let n = stats.len();
    let dim = family.order();
    let mut weights = Vec::with_capacity(resp.ncols());
    let mut components = Vec::with_capacity(resp.ncols());
    for j in 0..resp.ncols() {
        let mass = stable_sum((0..n).map(|i| resp[(i, j)]));
        if !(mass >= VANISHED_MASS) {
            return Err(Error::VanishedComponent { index: j, mass });
        }
        weights.push(mass / n as f64);
        let eta: Vec<f64> = (0..dim)
            .map(|d| stable_sum((0..n).map(|i| resp[(i, j)] * stats[i][d])) / mass)
            .collect();
        let eta = ParamVector::expectation(*family, eta).map_err(|e| match e {
            Error::Domain { reason, .. } => {
                Error::DegenerateData(format!("component {j} left the expectation domain: {reason}"))
            }
            other => other,
        })?;
        components.push(eta);
    }
    normalize_rounding(&mut weights);
    MixtureModel::new(*family, weights, components)
}

/// M-step: `wⱼ = (1/n) Σᵢ p(i, j)`, `ηⱼ = Σᵢ p(i, j) t(xᵢ) / Σᵢ p(i, j)`.
pub fn em_maximization(family: &Family, data: &[Observation], resp: &Responsibilities) -> Result<MixtureModel> {
    if data.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    if resp.rows() != data.len() {
        return Err(Error::Dimension {
            expected: data.len(),
            got: resp.rows(),
        });
    }
    let stats = statistics(family, data)?;
    maximization_step(family, &stats, &resp.matrix)
}

/// EM from [`em_init`] until the relative change of the average
/// log-likelihood drops below `rel_tol` or `max_iter` iterations have run.
pub fn em_fit(
    family: &Family,
    data: &[Observation],
    k: usize,
    max_iter: usize,
    rel_tol: f64,
    seed: RngSeed,
) -> Result<(MixtureModel, FitTrace)> {
    if !(rel_tol >= 0.0) {
        return Err(Error::InvalidArgument("tolerance must be non-negative".into()));
    }
    let stats = statistics(family, data)?;
    if stats.len() < k {
        return Err(Error::InsufficientData(format!("{} observations for {k} components", stats.len())));
    }
    let carriers: Vec<f64> = data.iter().map(|x| family.carrier(x)).collect();
    let n = stats.len() as f64;
    let mut model = init_from_stats(family, &stats, k, seed)?;
    let (mut resp, ll) = expectation_step(&Prepared::new(&model)?, &stats, &carriers)?;
    let mut current = stable_sum(ll) / n;
    let mut trace = FitTrace {
        avg_log_likelihood: vec![current],
        iterations_run: 0,
        converged: false,
    };
    while trace.iterations_run < max_iter {
        model = maximization_step(family, &stats, &resp)?;
        let (next_resp, ll) = expectation_step(&Prepared::new(&model)?, &stats, &carriers)?;
        resp = next_resp;
        let next = stable_sum(ll) / n;
        trace.avg_log_likelihood.push(next);
        trace.iterations_run += 1;
        let change = (next - current).abs();
        current = next;
        if change <= rel_tol * current.abs() {
            trace.converged = true;
            break;
        }
    }
    Ok((model, trace))
}

/// `ln Σ wᵢ p_F(x; θᵢ)` by log-sum-exp.
pub fn mixture_log_density(model: &MixtureModel, x: &[f64]) -> Result<f64> {
    check_observations(&model.family, std::slice::from_ref(&x.to_vec()))?;
    Ok(Prepared::new(model)?.log_density(x))
}

/// Average log-likelihood of `data` under the mixture.
pub fn average_log_likelihood(model: &MixtureModel, data: &[Observation]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    check_observations(&model.family, data)?;
    let prep = Prepared::new(model)?;
    let values: Vec<f64> = data.par_iter().map(|x| prep.log_density(x)).collect();
    Ok(stable_sum(values) / data.len() as f64)
}

/// Upper bound `Σᵢ Σⱼ wᵢ w'ⱼ KL(fᵢ || gⱼ)` from joint convexity of KL.
pub fn mixture_kl_jensen_bound(f: &MixtureModel, g: &MixtureModel) -> Result<f64> {
    same_mixture_family(f, g)?;
    let (pf, pg) = (Prepared::new(f)?, Prepared::new(g)?);
    let fam = f.family;
    let terms = (0..f.k()).flat_map(|i| {
        let (pf, pg) = (&pf, &pg);
        (0..g.k()).map(move |j| {
            f.weights[i] * g.weights[j] * bregman_natural(&fam, &pg.theta[j], &pf.theta[i])
        })
    });
    Ok(stable_sum(terms))
}

/// Matching approximation `Σᵢ wᵢ (KL(fᵢ || g_{j*}) + ln(wᵢ / w'_{j*}))` with
/// `j*` the component of `g` closest to `fᵢ` in KL (ties to the lowest
/// index, zero-weight components skipped). The weight ratio uses the matched
/// component. The value may be negative.
pub fn mixture_kl_matching(f: &MixtureModel, g: &MixtureModel) -> Result<f64> {
    same_mixture_family(f, g)?;
    let (pf, pg) = (Prepared::new(f)?, Prepared::new(g)?);
    let fam = f.family;
    let mut terms = Vec::with_capacity(f.k());
    for i in 0..f.k() {
        if f.weights[i] == 0.0 {
            continue;
        }
        let mut best = (0, f64::INFINITY);
        for j in (0..g.k()).filter(|&j| g.weights[j] > 0.0) {
            let d = bregman_natural(&fam, &pg.theta[j], &pf.theta[i]);
            if d < best.1 {
                best = (j, d);
            }
        }
        terms.push(f.weights[i] * (best.1 + (f.weights[i] / g.weights[best.0]).ln()));
    }
    Ok(stable_sum(terms))
}

/// Mean and covariance of a Gaussian component from its source parameters.
fn gaussian_moments(family: &Family, source: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
    match family {
        Family::UnivariateGaussian => Some((vec![source[0]], DMatrix::from_element(1, 1, source[1]))),
        Family::GaussianFixedVariance(g) => Some((vec![source[0]], DMatrix::from_element(1, 1, g.sigma2))),
        Family::IsotropicGaussian(g) => Some((source.to_vec(), DMatrix::identity(g.d, g.d))),
        Family::MultivariateGaussian(g) => Some((
            source[..g.d].to_vec(),
            DMatrix::from_row_slice(g.d, g.d, &source[g.d..]),
        )),
        _ => None,
    }
}

/// Unscented-transform approximation for Gaussian mixtures: sigma points
/// `μᵢ ± columnⱼ(√(d Σᵢ))` for each component of `f`, and
/// `(1/2d) Σᵢ wᵢ Σ_points [ln f(x) - ln g(x)]`.
///
/// Both log-densities are evaluated, so `f = g` gives exactly zero.
pub fn mixture_kl_unscented(f: &MixtureModel, g: &MixtureModel) -> Result<f64> {
    same_mixture_family(f, g)?;
    let fam = f.family;
    if !fam.is_gaussian() {
        return Err(Error::Unsupported {
            family: fam.name(),
            reason: "the unscented transform needs a Gaussian family".into(),
        });
    }
    let (pf, pg) = (Prepared::new(f)?, Prepared::new(g)?);
    let d = fam.obs_dim();
    let mut terms = Vec::with_capacity(2 * d * f.k());
    for (i, c) in f.components.iter().enumerate() {
        let source = c.to_source()?;
        let (mu, cov) = gaussian_moments(&fam, source.values()).expect("Gaussian family");
        let eig = SymmetricEigen::new(cov * d as f64);
        let root_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&root_vals) * eig.eigenvectors.transpose();
        for j in 0..d {
            for sign in [1.0, -1.0] {
                let x: Vec<f64> = (0..d).map(|r| mu[r] + sign * root[(r, j)]).collect();
                terms.push(f.weights[i] * (pf.log_density(&x) - pg.log_density(&x)));
            }
        }
    }
    Ok(stable_sum(terms) / (2 * d) as f64)
}

/// Monte-Carlo estimate of `KL(f || g) = E_f[ln f(X) - ln g(X)]` from `n`
/// draws of `f`.
pub fn mixture_kl_monte_carlo(f: &MixtureModel, g: &MixtureModel, n: usize, seed: RngSeed) -> Result<Estimate> {
    same_mixture_family(f, g)?;
    let fam = f.family;
    let (pf, pg) = (Prepared::new(f)?, Prepared::new(g)?);
    let sources = sources(f)?;
    let cumulative = cumulative_weights(&f.weights);
    monte_carlo_expectation(
        |rng: &mut SeededRng| {
            let j = pick_component(&cumulative, rng.random::<f64>());
            fam.sample(&sources[j], rng)
        },
        |x: &Vec<f64>| pf.log_density(x) - pg.log_density(x),
        n,
        seed,
    )
}

/// Natural parameters of every component.
pub fn natural_components(model: &MixtureModel) -> Result<Vec<ParamVector>> {
    model.components.iter().map(|c| c.convert(Space::Natural)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_source, sample};
    use crate::divergences::kl;
    use crate::family::log_density;
    use crate::inference::mle;

    fn gauss(mu: f64, var: f64) -> ParamVector {
        ParamVector::source(Family::UnivariateGaussian, vec![mu, var]).unwrap()
    }

    fn mixture(family: Family, weights: &[f64], comps: Vec<ParamVector>) -> MixtureModel {
        MixtureModel::new(family, weights.to_vec(), comps).unwrap()
    }

    fn benchmark() -> MixtureModel {
        mixture(
            Family::UnivariateGaussian,
            &[0.5, 0.5],
            vec![gauss(0.0, 1.0), gauss(10.0, 1.0)],
        )
    }

    fn obs(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|v| vec![*v]).collect()
    }

    #[test]
    fn model_validation() {
        let fam = Family::UnivariateGaussian;
        assert!(MixtureModel::new(fam, vec![0.5, 0.6], vec![gauss(0.0, 1.0), gauss(1.0, 1.0)]).is_err());
        assert!(MixtureModel::new(fam, vec![-0.5, 1.5], vec![gauss(0.0, 1.0), gauss(1.0, 1.0)]).is_err());
        assert!(MixtureModel::new(fam, vec![1.0], vec![]).is_err());
        let pois = ParamVector::source(Family::Poisson, vec![1.0]).unwrap();
        assert!(matches!(
            MixtureModel::new(fam, vec![1.0], vec![pois]),
            Err(Error::FamilyMismatch { .. })
        ));
        let m = benchmark();
        assert_eq!(m.components()[1].space(), Space::Expectation);
    }

    #[test]
    fn sampling() {
        let src = vec![2.0, 3.0];
        let single = mixture(Family::UnivariateGaussian, &[1.0], vec![gauss(2.0, 3.0)]);
        let (data, labels) = sample_mixture(&single, 100, RngSeed(5)).unwrap();
        assert_eq!(data, sample(&Family::UnivariateGaussian, &src, 100, RngSeed(5)).unwrap());
        assert!(labels.iter().all(|l| *l == 0));

        let lopsided = mixture(Family::UnivariateGaussian, &[1.0, 0.0], vec![gauss(0.0, 1.0), gauss(5.0, 1.0)]);
        let (_, labels) = sample_mixture(&lopsided, 1000, RngSeed(1)).unwrap();
        assert!(labels.iter().all(|l| *l == 0));

        let n = 100_000;
        let (_, labels) = sample_mixture(&benchmark(), n, RngSeed(2)).unwrap();
        let freq = labels.iter().filter(|l| **l == 0).count() as f64 / n as f64;
        assert!((freq - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
        assert_eq!(sample_mixture(&benchmark(), 50, RngSeed(2)).unwrap(), sample_mixture(&benchmark(), 50, RngSeed(2)).unwrap());
    }

    fn gaussian_points(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| vec![*x, x * x]).collect()
    }

    #[test]
    fn hard_clustering_examples() {
        let fam = Family::UnivariateGaussian;
        let pts = gaussian_points(&[0.3, -1.2, 2.5, 0.8, -0.4]);
        let one = bregman_hard_clustering(&fam, &pts, 1, RngSeed(0), 10).unwrap();
        let mean = mean_of(&pts, 0..pts.len(), 2);
        assert_eq!(one.centroids[0], mean);

        let eps = 0.01;
        let pts = gaussian_points(&[-eps, 10.0 + eps, eps, 10.0 - eps, 0.0, 10.0]);
        for seed in 0..10 {
            let two = bregman_hard_clustering(&fam, &pts, 2, RngSeed(seed), 50).unwrap();
            let a = &two.assignments;
            assert!(a[0] == a[2] && a[0] == a[4] && a[1] == a[3] && a[1] == a[5] && a[0] != a[1]);
        }

        // Poisson points lie inside the expectation domain, so the objective
        // is the true Bregman information.
        let pois = Family::Poisson;
        let pts: Vec<Vec<f64>> = [1.0, 3.0, 4.0, 9.0].iter().map(|v| vec![*v]).collect();
        let each = bregman_hard_clustering(&pois, &pts, 4, RngSeed(3), 10).unwrap();
        assert!(each.objective.last().unwrap().abs() < 1e-12);
    }

    #[test]
    fn hard_clustering_objective_decreases() {
        let fam = Family::UnivariateGaussian;
        let (data, _) = sample_mixture(&benchmark(), 400, RngSeed(8)).unwrap();
        let pts: Vec<Vec<f64>> = data.iter().map(|x| fam.sufficient_statistic(x)).collect();
        for seed in 0..5 {
            let c = bregman_hard_clustering(&fam, &pts, 3, RngSeed(seed), 100).unwrap();
            assert!(c.converged);
            for w in c.objective.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{:?}", c.objective);
            }
        }
    }

    #[test]
    fn init_examples() {
        let fam = Family::UnivariateGaussian;
        let data = obs(&[0.1, -0.3, 10.2, 9.7, 0.4, 10.1]);
        let one = em_init(&fam, &data, 1, RngSeed(0)).unwrap();
        assert_eq!(one.weights(), &[1.0]);
        let global = crate::inference::observed_point(&fam, &data).unwrap();
        for (a, b) in one.components()[0].values().iter().zip(&global) {
            assert!((a - b).abs() < 1e-14);
        }
        for seed in 0..50 {
            let two = em_init(&fam, &data, 2, RngSeed(seed)).unwrap();
            let mut means: Vec<f64> = two.components().iter().map(|c| c.values()[0]).collect();
            means.sort_by(f64::total_cmp);
            assert!((means[0] - 0.2 / 3.0).abs() < 1e-14 && (means[1] - 30.0 / 3.0).abs() < 1e-13, "seed {seed}");
            assert_eq!(two.weights(), &[0.5, 0.5]);
        }

        let pois = obs(&[1.0, 5.0, 12.0]);
        let each = em_init(&Family::Poisson, &pois, 3, RngSeed(1)).unwrap();
        assert!(each.weights().iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn expectation_examples() {
        let fam = Family::UnivariateGaussian;
        let single = mixture(fam, &[1.0], vec![gauss(0.0, 1.0)]);
        let r = em_expectation(&single, &obs(&[0.5, -3.0])).unwrap();
        assert!(r.matrix().iter().all(|v| *v == 1.0));

        let sym = mixture(fam, &[0.5, 0.5], vec![gauss(-1.0, 1.0), gauss(1.0, 1.0)]);
        let r = em_expectation(&sym, &obs(&[0.0])).unwrap();
        assert!((r.matrix()[(0, 0)] - 0.5).abs() < 1e-15);

        let r = em_expectation(&benchmark(), &obs(&[0.0])).unwrap();
        // Density ratio e^{-50}.
        assert!((r.matrix()[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((r.matrix()[(0, 1)] - (-50f64).exp()).abs() < 1e-30);
    }

    #[test]
    fn expectation_matches_density_form() {
        for fam in [Family::UnivariateGaussian, Family::Poisson, Family::Gamma, Family::Rayleigh] {
            let src = default_source(&fam);
            let other: Vec<f64> = src.iter().map(|v| v * 1.7).collect();
            let p = ParamVector::source(fam, src.clone()).unwrap();
            let q = ParamVector::source(fam, other).unwrap();
            let model = mixture(fam, &[0.3, 0.7], vec![p.clone(), q.clone()]);
            let data = sample(&fam, &src, 200, RngSeed(11)).unwrap();
            let r = em_expectation(&model, &data).unwrap();
            for (i, x) in data.iter().enumerate() {
                let a = 0.3f64.ln() + log_density(x, &p).unwrap();
                let b = 0.7f64.ln() + log_density(x, &q).unwrap();
                let m = a.max(b);
                let direct = (a - m).exp() / ((a - m).exp() + (b - m).exp());
                assert!((r.matrix()[(i, 0)] - direct).abs() < 1e-10, "{fam}");
            }
        }
    }

    #[test]
    fn maximization_examples() {
        let fam = Family::UnivariateGaussian;
        let (data, labels) = sample_mixture(&benchmark(), 300, RngSeed(3)).unwrap();
        let resp = Responsibilities::from_labels(&labels, 2).unwrap();
        let m = em_maximization(&fam, &data, &resp).unwrap();
        for j in 0..2 {
            let group: Vec<Vec<f64>> = data.iter().zip(&labels).filter(|(_, l)| **l == j).map(|(x, _)| x.clone()).collect();
            let expected = crate::inference::observed_point(&fam, &group).unwrap();
            for (a, b) in m.components()[j].values().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }
        }

        let uniform = Responsibilities::new(DMatrix::from_element(data.len(), 2, 0.5)).unwrap();
        let m = em_maximization(&fam, &data, &uniform).unwrap();
        let global = crate::inference::observed_point(&fam, &data).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
        for c in m.components() {
            for (a, b) in c.values().iter().zip(&global) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }
        }

        let single = Responsibilities::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let m = em_maximization(&Family::Poisson, &obs(&[7.0]), &single).unwrap();
        assert_eq!(m.components()[0].values(), &[7.0]);
    }

    #[test]
    fn vanished_component_is_reported() {
        let data = obs(&[1.0, 2.0, 3.0]);
        let resp = Responsibilities::from_labels(&[0, 0, 0], 2).unwrap();
        assert!(matches!(
            em_maximization(&Family::Poisson, &data, &resp),
            Err(Error::VanishedComponent { index: 1, .. })
        ));
    }

    #[test]
    fn underflow_is_reported() {
        let model = mixture(Family::Bernoulli, &[1.0], vec![ParamVector::source(Family::Bernoulli, vec![0.5]).unwrap()]);
        let prep = Prepared::new(&model).unwrap();
        let stats = vec![vec![0.0], vec![f64::NAN]];
        assert!(matches!(expectation_step(&prep, &stats, &[0.0, 0.0]), Err(Error::Underflow { row: 1 })));
    }

    #[test]
    fn em_single_component_is_mle() {
        let fam = Family::UnivariateGaussian;
        let data = sample(&fam, &[1.0, 2.0], 500, RngSeed(4)).unwrap();
        let (model, trace) = em_fit(&fam, &data, 1, 1, 0.0, RngSeed(0)).unwrap();
        assert_eq!(trace.iterations_run, 1);
        assert_eq!(model.components()[0].values(), mle(&fam, &data).unwrap().eta.values());

        let (init, trace) = em_fit(&fam, &data, 1, 0, 1e-9, RngSeed(0)).unwrap();
        assert_eq!(trace.avg_log_likelihood.len(), 1);
        assert_eq!(init, em_init(&fam, &data, 1, RngSeed(0)).unwrap());
    }

    #[test]
    fn em_recovers_two_gaussians() {
        let fam = Family::UnivariateGaussian;
        let (data, _) = sample_mixture(&benchmark(), 5000, RngSeed(42)).unwrap();
        let (model, trace) = em_fit(&fam, &data, 2, 200, 1e-10, RngSeed(42)).unwrap();
        assert!(trace.converged);
        let mut fitted: Vec<(f64, f64)> = model
            .components()
            .iter()
            .zip(model.weights())
            .map(|(c, w)| (c.values()[0], *w))
            .collect();
        fitted.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(fitted[0].0.abs() < 0.15 && (fitted[1].0 - 10.0).abs() < 0.15);
        assert!((fitted[0].1 - 0.5).abs() < 0.03);
    }

    #[test]
    fn em_is_monotone() {
        let cases = [
            (Family::UnivariateGaussian, vec![gauss(0.0, 1.0), gauss(2.5, 0.5)]),
            (
                Family::Poisson,
                vec![
                    ParamVector::source(Family::Poisson, vec![2.0]).unwrap(),
                    ParamVector::source(Family::Poisson, vec![7.0]).unwrap(),
                ],
            ),
            (
                Family::Gamma,
                vec![
                    ParamVector::source(Family::Gamma, vec![1.0, 2.0]).unwrap(),
                    ParamVector::source(Family::Gamma, vec![0.2, 5.0]).unwrap(),
                ],
            ),
        ];
        for (fam, comps) in cases {
            let truth = mixture(fam, &[0.4, 0.6], comps);
            for seed in 0..3 {
                let (data, _) = sample_mixture(&truth, 600, RngSeed(seed)).unwrap();
                let (_, trace) = em_fit(&fam, &data, 2, 60, 0.0, RngSeed(seed)).unwrap();
                for w in trace.avg_log_likelihood.windows(2) {
                    assert!(w[1] >= w[0] - 1e-9, "{fam}: {:?}", trace.avg_log_likelihood);
                }
            }
        }
    }

    #[test]
    fn em_is_thread_count_invariant() {
        let fam = Family::UnivariateGaussian;
        let (data, _) = sample_mixture(&benchmark(), 3000, RngSeed(6)).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| em_fit(&fam, &data, 2, 50, 1e-12, RngSeed(6)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn log_density_examples() {
        let p = gauss(1.0, 2.0);
        let single = mixture(Family::UnivariateGaussian, &[1.0], vec![p.clone()]);
        let doubled = mixture(Family::UnivariateGaussian, &[0.5, 0.5], vec![p.clone(), p.clone()]);
        for x in [-3.0, 0.0, 2.5] {
            let direct = log_density(&[x], &p).unwrap();
            assert!((mixture_log_density(&single, &[x]).unwrap() - direct).abs() < 1e-14);
            assert!((mixture_log_density(&doubled, &[x]).unwrap() - direct).abs() < 1e-14);
        }
        let tail = mixture_log_density(&benchmark(), &[-38.0]).unwrap();
        assert!(tail.is_finite() && tail < -700.0);
        let far = mixture_log_density(&benchmark(), &[-1000.0]).unwrap();
        assert!(far.is_finite());
    }

    #[test]
    fn jensen_bound_examples() {
        let (p, q) = (gauss(0.0, 1.0), gauss(1.0, 2.0));
        let f = mixture(Family::UnivariateGaussian, &[1.0], vec![p.clone()]);
        let g = mixture(Family::UnivariateGaussian, &[1.0], vec![q.clone()]);
        assert!((mixture_kl_jensen_bound(&f, &g).unwrap() - kl(&p, &q).unwrap()).abs() < 1e-14);
        assert!(mixture_kl_jensen_bound(&f, &f).unwrap().abs() < 1e-15);

        let f = benchmark();
        let g = mixture(Family::UnivariateGaussian, &[0.3, 0.7], vec![gauss(1.0, 1.5), gauss(9.0, 1.0)]);
        let bound = mixture_kl_jensen_bound(&f, &g).unwrap();
        let mc = mixture_kl_monte_carlo(&f, &g, 100_000, RngSeed(1)).unwrap();
        assert!(bound >= mc.mean - 4.0 * mc.std_error, "{bound} vs {mc:?}");
    }

    #[test]
    fn matching_examples() {
        let f = benchmark();
        assert!(mixture_kl_matching(&f, &f).unwrap().abs() < 1e-15);
        let (p, q) = (gauss(0.0, 1.0), gauss(1.0, 2.0));
        let fp = mixture(Family::UnivariateGaussian, &[1.0], vec![p.clone()]);
        let gq = mixture(Family::UnivariateGaussian, &[1.0], vec![q.clone()]);
        assert!((mixture_kl_matching(&fp, &gq).unwrap() - kl(&p, &q).unwrap()).abs() < 1e-14);

        let g = mixture(Family::UnivariateGaussian, &[0.4, 0.6], vec![gauss(0.5, 1.2), gauss(10.5, 0.9)]);
        let approx = mixture_kl_matching(&f, &g).unwrap();
        let mc = mixture_kl_monte_carlo(&f, &g, 100_000, RngSeed(2)).unwrap();
        assert!((approx - mc.mean).abs() < 0.1, "{approx} vs {mc:?}");
    }

    #[test]
    fn unscented_examples() {
        let f = benchmark();
        assert_eq!(mixture_kl_unscented(&f, &f).unwrap(), 0.0);
        let fp = mixture(Family::UnivariateGaussian, &[1.0], vec![gauss(0.0, 2.0)]);
        let gq = mixture(Family::UnivariateGaussian, &[1.0], vec![gauss(1.5, 2.0)]);
        let expected = 1.5f64.powi(2) / (2.0 * 2.0);
        assert!((mixture_kl_unscented(&fp, &gq).unwrap() - expected).abs() < 1e-13);

        let mvn = Family::multivariate_gaussian(2).unwrap();
        let a = ParamVector::source(mvn, vec![0.0, 0.0, 1.0, 0.3, 0.3, 2.0]).unwrap();
        let b = ParamVector::source(mvn, vec![1.0, -1.0, 1.0, 0.3, 0.3, 2.0]).unwrap();
        let fa = mixture(mvn, &[1.0], vec![a.clone()]);
        let gb = mixture(mvn, &[1.0], vec![b.clone()]);
        assert!((mixture_kl_unscented(&fa, &gb).unwrap() - kl(&a, &b).unwrap()).abs() < 1e-10);

        let pois = mixture(Family::Poisson, &[1.0], vec![ParamVector::source(Family::Poisson, vec![1.0]).unwrap()]);
        assert!(matches!(mixture_kl_unscented(&pois, &pois), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn monte_carlo_examples() {
        let f = benchmark();
        let same = mixture_kl_monte_carlo(&f, &f, 10_000, RngSeed(0)).unwrap();
        assert_eq!(same.mean, 0.0);
        let fp = mixture(Family::UnivariateGaussian, &[1.0], vec![gauss(0.0, 1.0)]);
        let gq = mixture(Family::UnivariateGaussian, &[1.0], vec![gauss(1.0, 1.0)]);
        let est = mixture_kl_monte_carlo(&fp, &gq, 1_000_000, RngSeed(3)).unwrap();
        assert!((est.mean - 0.5).abs() < 4.0 * est.std_error);

        let pois = |l: f64| ParamVector::source(Family::Poisson, vec![l]).unwrap();
        let a = mixture(Family::Poisson, &[0.5, 0.5], vec![pois(1.0), pois(6.0)]);
        let b = mixture(Family::Poisson, &[0.2, 0.8], vec![pois(2.0), pois(5.0)]);
        let x = mixture_kl_monte_carlo(&a, &b, 20_000, RngSeed(9)).unwrap();
        assert!(x.mean.is_finite());
        assert_eq!(x, mixture_kl_monte_carlo(&a, &b, 20_000, RngSeed(9)).unwrap());
    }

    #[test]
    fn permutation_invariance() {
        let f = mixture(
            Family::UnivariateGaussian,
            &[0.2, 0.3, 0.5],
            vec![gauss(0.0, 1.0), gauss(3.0, 2.0), gauss(-2.0, 0.5)],
        );
        let f_perm = mixture(
            Family::UnivariateGaussian,
            &[0.5, 0.2, 0.3],
            vec![gauss(-2.0, 0.5), gauss(0.0, 1.0), gauss(3.0, 2.0)],
        );
        let g = mixture(Family::UnivariateGaussian, &[0.6, 0.4], vec![gauss(0.5, 1.0), gauss(2.0, 1.0)]);
        for x in [-1.0, 0.7, 4.0] {
            let a = mixture_log_density(&f, &[x]).unwrap();
            assert!((a - mixture_log_density(&f_perm, &[x]).unwrap()).abs() < 1e-14);
        }
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12 * (1.0 + a.abs());
        assert!(close(mixture_kl_jensen_bound(&f, &g).unwrap(), mixture_kl_jensen_bound(&f_perm, &g).unwrap()));
        assert!(close(mixture_kl_matching(&f, &g).unwrap(), mixture_kl_matching(&f_perm, &g).unwrap()));
        assert!(close(mixture_kl_unscented(&f, &g).unwrap(), mixture_kl_unscented(&f_perm, &g).unwrap()));
    }
}
