//! Multivariate Gaussian parameters with exact conditioning via block
//! decomposition, log-densities and entropies. All logarithms are natural.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SurrogateError;

/// ½·log(2πe), the per-dimension entropy constant of a unit-variance Gaussian.
pub const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Variances below this floor are clamped before entering a logarithm.
pub const VAR_FLOOR: f64 = 1e-12;

/// Entropy of a 1-D Gaussian with the given variance, floor applied.
pub fn gaussian_entropy_1d(var: f64) -> f64 {
    HALF_LN_2PI_E + 0.5 * var.max(VAR_FLOOR).ln()
}

/// Mean vector and covariance matrix of a (possibly conditioned) Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianParams {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Marginal over `indices`, in the given order.
    pub fn marginal(&self, indices: &[usize]) -> GaussianParams {
        let mean = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(indices.len(), indices.len(), |r, c| {
            self.cov[(indices[r], indices[c])]
        });
        GaussianParams { mean, cov }
    }

    fn cholesky(&self) -> Result<Cholesky<f64, Dyn>, SurrogateError> {
        Cholesky::new(self.cov.clone()).ok_or_else(|| SurrogateError::NumericalFailure {
            condition_estimate: condition_estimate(&self.cov),
        })
    }

    /// Log-density at `x`. A zero-dimensional Gaussian has log-density 0.
    pub fn log_density(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        let k = self.dim();
        if k == 0 {
            return Ok(0.0);
        }
        let chol = self.cholesky()?;
        let diff = DVector::from_row_slice(x) - &self.mean;
        let solved = chol.solve(&diff);
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        Ok(-0.5 * diff.dot(&solved) - 0.5 * log_det - k as f64 * HALF_LN_2PI)
    }

    /// Differential entropy in nats: ½ log((2πe)^k |Σ|).
    pub fn entropy(&self) -> Result<f64, SurrogateError> {
        let k = self.dim();
        if k == 0 {
            return Ok(0.0);
        }
        let chol = self.cholesky()?;
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        Ok(k as f64 * HALF_LN_2PI_E + 0.5 * log_det)
    }

    /// Draws one sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>, SurrogateError> {
        let chol = self.cholesky()?;
        let z = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| StandardNormal.sample(rng)),
        );
        Ok(&self.mean + chol.l() * z)
    }
}

/// Gaussian conditional over the `indices` block given observed values,
/// computed with the Schur complement:
/// μ_{u|o} = μ_u + Σ_uo Σ_oo⁻¹ (x_o − μ_o),
/// Σ_{u|o} = Σ_uu − Σ_uo Σ_oo⁻¹ Σ_ou.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGaussian {
    /// Original coordinate index of each retained dimension, ascending.
    pub indices: Vec<usize>,
    pub params: GaussianParams,
}

impl ConditionalGaussian {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Position of original coordinate `index` inside this conditional.
    pub fn position_of(&self, index: usize) -> Option<usize> {
        self.indices.iter().position(|&i| i == index)
    }

    /// Mean and variance of a single retained coordinate.
    pub fn scalar(&self, index: usize) -> Option<(f64, f64)> {
        let p = self.position_of(index)?;
        Some((self.params.mean[p], self.params.cov[(p, p)]))
    }

    /// Conditions this conditional further on one of its own coordinates,
    /// using a rank-one Schur update.
    pub fn condition_scalar(&self, index: usize, value: f64) -> Result<ConditionalGaussian, SurrogateError> {
        let p = self
            .position_of(index)
            .ok_or(SurrogateError::NotACandidate(index))?;
        let var = self.params.cov[(p, p)].max(VAR_FLOOR);
        let n = self.dim();
        let keep: Vec<usize> = (0..n).filter(|&j| j != p).collect();
        let shift = (value - self.params.mean[p]) / var;
        let mean = DVector::from_iterator(
            keep.len(),
            keep.iter()
                .map(|&j| self.params.mean[j] + self.params.cov[(j, p)] * shift),
        );
        let cov = DMatrix::from_fn(keep.len(), keep.len(), |r, c| {
            self.params.cov[(keep[r], keep[c])]
                - self.params.cov[(keep[r], p)] * self.params.cov[(p, keep[c])] / var
        });
        Ok(ConditionalGaussian {
            indices: keep.iter().map(|&j| self.indices[j]).collect(),
            params: GaussianParams { mean, cov },
        })
    }
}

/// Conditions a joint Gaussian on `observed` (index, value) pairs.
/// Conditioning on the empty set returns the marginal over the complement;
/// conditioning on everything returns an empty conditional.
pub fn condition(
    joint: &GaussianParams,
    observed: &[(usize, f64)],
) -> Result<ConditionalGaussian, SurrogateError> {
    let d = joint.dim();
    let obs_idx: Vec<usize> = observed.iter().map(|&(i, _)| i).collect();
    let mut is_obs = vec![false; d];
    for &i in &obs_idx {
        is_obs[i] = true;
    }
    let keep: Vec<usize> = (0..d).filter(|&i| !is_obs[i]).collect();

    if observed.is_empty() {
        return Ok(ConditionalGaussian {
            indices: keep,
            params: joint.clone(),
        });
    }

    let o = obs_idx.len();
    let sigma_oo = DMatrix::from_fn(o, o, |r, c| joint.cov[(obs_idx[r], obs_idx[c])]);
    let chol = Cholesky::new(sigma_oo.clone()).ok_or_else(|| SurrogateError::NumericalFailure {
        condition_estimate: condition_estimate(&sigma_oo),
    })?;

    let diff = DVector::from_iterator(
        o,
        observed.iter().map(|&(i, v)| v - joint.mean[i]),
    );
    let solved_diff = chol.solve(&diff);

    // Σ_ou, one column per retained coordinate.
    let sigma_ou = DMatrix::from_fn(o, keep.len(), |r, c| joint.cov[(obs_idx[r], keep[c])]);
    let solved_block = chol.solve(&sigma_ou);

    let mean = DVector::from_iterator(
        keep.len(),
        keep.iter()
            .enumerate()
            .map(|(c, &i)| joint.mean[i] + sigma_ou.column(c).dot(&solved_diff)),
    );
    let mut cov = DMatrix::from_fn(keep.len(), keep.len(), |r, c| {
        joint.cov[(keep[r], keep[c])]
    });
    cov -= sigma_ou.transpose() * solved_block;
    // Symmetrize away the solve's rounding.
    let cov = (&cov + cov.transpose()) * 0.5;

    Ok(ConditionalGaussian {
        indices: keep,
        params: GaussianParams { mean, cov },
    })
}

/// Cheap condition-number estimate for error reporting: ratio of extreme
/// eigenvalues of a symmetric matrix.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if min.abs() < f64::MIN_POSITIVE {
        f64::INFINITY
    } else {
        (max / min).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bivariate(rho: f64) -> GaussianParams {
        GaussianParams {
            mean: DVector::from_vec(vec![0.0, 0.0]),
            cov: DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]),
        }
    }

    #[test]
    fn empty_conditioning_is_identity() {
        let g = bivariate(0.3);
        let c = condition(&g, &[]).unwrap();
        assert_eq!(c.indices, vec![0, 1]);
        assert_eq!(c.params, g);
    }

    #[test]
    fn bivariate_conditional_variance_closed_form() {
        let g = bivariate(0.5);
        let c = condition(&g, &[(0, 0.0)]).unwrap();
        let (mean, var) = c.scalar(1).unwrap();
        assert_relative_eq!(var, 0.75, epsilon = 1e-10);
        assert_relative_eq!(mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn conditioning_on_everything_is_empty() {
        let g = bivariate(0.5);
        let c = condition(&g, &[(0, 0.1), (1, 0.2)]).unwrap();
        assert_eq!(c.dim(), 0);
        assert_eq!(c.params.log_density(&[]).unwrap(), 0.0);
    }

    #[test]
    fn log_density_matches_univariate_formula() {
        let g = GaussianParams {
            mean: DVector::from_vec(vec![1.0]),
            cov: DMatrix::from_row_slice(1, 1, &[4.0]),
        };
        let x = 2.0_f64;
        let expect = -0.5 * ((x - 1.0) * (x - 1.0) / 4.0) - 0.5 * (4.0_f64).ln() - HALF_LN_2PI;
        assert_relative_eq!(g.log_density(&[x]).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn entropy_matches_univariate_formula() {
        let g = GaussianParams {
            mean: DVector::from_vec(vec![0.0]),
            cov: DMatrix::from_row_slice(1, 1, &[0.75]),
        };
        assert_relative_eq!(
            g.entropy().unwrap(),
            gaussian_entropy_1d(0.75),
            epsilon = 1e-12
        );
    }

    #[test]
    fn scalar_schur_update_matches_full_conditioning() {
        let g = GaussianParams {
            mean: DVector::from_vec(vec![0.1, -0.2, 0.4]),
            cov: DMatrix::from_row_slice(
                3,
                3,
                &[1.0, 0.4, 0.2, 0.4, 1.5, -0.3, 0.2, -0.3, 0.8],
            ),
        };
        let joint = condition(&g, &[(0, 0.5), (2, -0.1)]).unwrap();
        let seq = condition(&g, &[(0, 0.5)])
            .unwrap()
            .condition_scalar(2, -0.1)
            .unwrap();
        assert_eq!(joint.indices, seq.indices);
        assert_relative_eq!(joint.params.mean[0], seq.params.mean[0], epsilon = 1e-10);
        assert_relative_eq!(
            joint.params.cov[(0, 0)],
            seq.params.cov[(0, 0)],
            epsilon = 1e-10
        );
    }

    #[test]
    fn singular_covariance_reports_condition_estimate() {
        let g = GaussianParams {
            mean: DVector::from_vec(vec![0.0, 0.0]),
            cov: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        };
        match condition(&g, &[(0, 0.0), (1, 0.0)]).map(|_| ()) {
            Err(SurrogateError::NumericalFailure { condition_estimate }) => {
                assert!(condition_estimate > 1e12 || condition_estimate.is_infinite());
            }
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }
}
