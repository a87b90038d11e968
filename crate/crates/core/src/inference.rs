//! Maximum-likelihood estimation through the observed point, the Cramér–Rao
//! bound and conjugate-prior bookkeeping.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::catalog::Family;
use crate::error::{Error, Result};
use crate::family::{check_len, fd_step, fisher_information_natural, ParamVector, Space};
use crate::numerics::{dot, stable_sum};

/// Result of [`mle`]: the observed point and its natural parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MleEstimate {
    pub eta: ParamVector,
    pub theta: ParamVector,
}

/// Average of the sufficient statistics, coordinate by coordinate in input
/// order. Observations are validated.
pub fn observed_point(family: &Family, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let stats = samples
        .iter()
        .map(|x| {
            check_len(x, family.obs_dim())?;
            family.check_observation(x)?;
            Ok(family.sufficient_statistic(x))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = samples.len() as f64;
    Ok((0..family.order())
        .map(|j| stable_sum(stats.iter().map(|t| t[j])) / n)
        .collect())
}

/// Maximum-likelihood estimate `η̂ = (1/n) Σ t(x_i)`, `θ̂ = ∇G(η̂)`.
///
/// Fails with [`Error::DegenerateData`] when the observed point is not in the
/// open expectation domain (e.g. identical Gaussian samples); no jitter is
/// added.
pub fn mle(family: &Family, samples: &[Vec<f64>]) -> Result<MleEstimate> {
    let point = observed_point(family, samples)?;
    let eta = ParamVector::expectation(*family, point).map_err(|e| match e {
        Error::Domain { field, reason } => Error::DegenerateData(format!(
            "observed point is outside the open expectation domain ({field}: {reason})"
        )),
        other => other,
    })?;
    let theta = eta.to_natural()?;
    Ok(MleEstimate { eta, theta })
}

/// Inverse of a symmetric positive semi-definite matrix through its
/// eigendecomposition, dropping eigenvalues below `1e-10` of the largest.
/// Returns the number of retained eigenvalues.
fn pseudo_inverse(m: DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut rank = 0;
    let inv_vals = eig.eigenvalues.map(|v| {
        if v > 1e-10 * top {
            rank += 1;
            1.0 / v
        } else {
            0.0
        }
    });
    let q = &eig.eigenvectors;
    (q * DMatrix::from_diagonal(&inv_vals) * q.transpose(), rank)
}

/// Cramér–Rao bound `I(θ)⁻¹ / n` on the covariance of unbiased estimators of
/// θ from `n` observations.
///
/// The multivariate Gaussian's flattened natural matrix block makes `I(θ)`
/// singular along antisymmetric directions; the Moore–Penrose inverse is used
/// there.
pub fn cramer_rao_bound(params: &ParamVector, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let info = fisher_information_natural(params)?;
    let dim = info.nrows();
    let inv = if matches!(params.family(), Family::MultivariateGaussian(_)) {
        pseudo_inverse(info).0
    } else {
        let (inv, rank) = pseudo_inverse(info);
        if rank < dim {
            return Err(Error::Numerical("Fisher information is singular".into()));
        }
        inv
    };
    Ok(inv / n as f64)
}

/// Cramér–Rao bound carried to source coordinates, `J B Jᵀ` with
/// `J = dλ/dθ` by central differences.
pub fn cramer_rao_bound_source(params: &ParamVector, n: usize) -> Result<DMatrix<f64>> {
    let bound = cramer_rao_bound(params, n)?;
    let theta = params.to_natural()?;
    let fam = params.family();
    let t = theta.values();
    let rows = fam.param_len(Space::Source);
    let mut jac = DMatrix::zeros(rows, t.len());
    let mut probe = t.to_vec();
    for j in 0..t.len() {
        let h = fd_step(t[j]);
        probe[j] = t[j] + h;
        let up = fam.natural_to_source(&probe);
        probe[j] = t[j] - h;
        let down = fam.natural_to_source(&probe);
        probe[j] = t[j];
        for i in 0..rows {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(&jac * bound * jac.transpose())
}

/// Log-kernel of the conjugate prior, `<θ, g> - v F(θ)`.
pub fn conjugate_prior_log_unnormalized(params: &ParamVector, g: &[f64], v: f64) -> Result<f64> {
    let theta = params.to_natural()?;
    let fam = params.family();
    check_len(g, fam.order())?;
    if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("g, v", "hyperparameters must be finite"));
    }
    Ok(dot(theta.values(), g) - v * fam.log_normalizer(theta.values()))
}

/// Conjugate update `g' = g + Σ t(x_i)`, `v' = v + n`.
pub fn posterior_update(g: &[f64], v: f64, family: &Family, samples: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    check_len(g, family.order())?;
    let mut stats = Vec::with_capacity(samples.len());
    for x in samples {
        check_len(x, family.obs_dim())?;
        family.check_observation(x)?;
        stats.push(family.sufficient_statistic(x));
    }
    let updated = g
        .iter()
        .enumerate()
        .map(|(j, gj)| gj + stable_sum(stats.iter().map(|t| t[j])))
        .collect();
    Ok((updated, v + samples.len() as f64))
}
