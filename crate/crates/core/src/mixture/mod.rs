//! Full-covariance Gaussian mixtures: EM fitting, BIC model selection and
//! nearest-component Mahalanobis scoring.
//!
//! The anomaly score of a point is the Mahalanobis distance to the closest
//! component mean. Mixture weights take part in fitting and BIC but never in
//! the score.

mod em;
pub mod snapshot;

pub use em::{fit_em, fit_em_traced, select_k_bic, BicSelection, EmFit, EmSettings};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::streams::TorqueSample;

/// Absolute lower bound on the covariance ridge, used when the data has no
/// spread at all.
pub const MIN_REG_COVAR: f64 = 1e-10;

/// Ridge relative to the mean per-dimension variance of the data.
pub const REL_REG_COVAR: f64 = 1e-6;

/// Tolerance on the sum of component weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A flattened window of `M` consecutive torque samples from `n` motors.
///
/// Layout is motor-major: `values[motor * M + step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowVector {
    values: DVector<f64>,
    start_index: usize,
}

impl WindowVector {
    pub fn new(values: Vec<f64>, start_index: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("window starting at {start_index}")));
        }
        Ok(Self {
            values: DVector::from_vec(values),
            start_index,
        })
    }

    /// Flattens `samples` (oldest first) into a motor-major window.
    pub fn from_samples<'a, I>(samples: I, start_index: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TorqueSample>,
        I::IntoIter: ExactSizeIterator + Clone,
    {
        let iter = samples.into_iter();
        let m = iter.len();
        let n = iter.clone().next().map_or(0, TorqueSample::n_motors);
        let mut values = vec![0.0; n * m];
        for (step, s) in iter.enumerate() {
            if s.n_motors() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: s.n_motors(),
                });
            }
            for (motor, &v) in s.tau.iter().enumerate() {
                values[motor * m + step] = v;
            }
        }
        Self::new(values, start_index)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }
}

/// All stride-1 windows of length `m` over `samples`.
pub fn sliding_windows(samples: &[TorqueSample], m: usize) -> Result<Vec<WindowVector>> {
    if m == 0 || samples.len() < m {
        return Ok(Vec::new());
    }
    (0..=samples.len() - m)
        .map(|j| WindowVector::from_samples(&samples[j..j + m], j))
        .collect()
}

/// One weighted Gaussian with a cached Cholesky factor of its covariance.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    weight: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for GaussianComponent {
    fn eq(&self, other: &Self) -> bool {
        self.weight == other.weight && self.mean == other.mean && self.covariance == other.covariance
    }
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.nrows(),
            });
        }
        if !(weight.is_finite() && weight > 0.0 && weight <= 1.0 + WEIGHT_SUM_TOL) {
            return Err(Error::InvalidConfig(format!("component weight {weight} outside (0, 1]")));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("component parameters".into()));
        }
        let chol = Cholesky::new(covariance.clone()).ok_or(Error::SingularCovariance)?;
        Ok(Self {
            weight,
            mean,
            covariance,
            chol,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Whitened residual `L⁻¹(x − μ)` where `Σ = L Lᵀ`.
    fn whiten(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut z = x - &self.mean;
        self.chol.l_dirty().solve_lower_triangular_unchecked_mut(&mut z);
        Ok(z)
    }

    pub fn mahalanobis(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.whiten(x)?.norm())
    }

    pub(crate) fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Log of the (unweighted) normal density at `x`.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        let z = self.whiten(x)?;
        let d = self.dim() as f64;
        Ok(-0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det() + z.norm_squared()))
    }
}

/// A fitted mixture plus its fit metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    components: Vec<GaussianComponent>,
    pub bic: f64,
    pub log_likelihood: f64,
    pub n_iterations: usize,
    pub seed: u64,
    /// Ridge added to every covariance during fitting.
    pub reg_covar: f64,
}

impl MixtureModel {
    /// Builds a model from components; fit metadata starts zeroed.
    pub fn from_components(components: Vec<GaussianComponent>) -> Result<Self> {
        let first = components.first().ok_or(Error::Empty("mixture components"))?;
        let d = first.dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum(total));
        }
        Ok(Self {
            components,
            bic: f64::NAN,
            log_likelihood: f64::NAN,
            n_iterations: 0,
            seed: 0,
            reg_covar: 0.0,
        })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Distance to the nearest component mean.
    pub fn distance(&self, x: &DVector<f64>) -> Result<f64> {
        let mut best = f64::INFINITY;
        for c in &self.components {
            best = best.min(c.mahalanobis(x)?);
        }
        Ok(best)
    }

    /// `ln p(x)` under the full mixture.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        let terms = self
            .components
            .iter()
            .map(|c| Ok(c.weight.ln() + c.log_density(x)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(log_sum_exp(&terms))
    }

    /// Total log-likelihood of `data`.
    pub fn total_log_likelihood(&self, data: &[WindowVector]) -> Result<f64> {
        let mut total = 0.0;
        for x in data {
            total += self.log_density(x.values())?;
        }
        Ok(total)
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

pub fn mahalanobis_to_component(x: &WindowVector, c: &GaussianComponent) -> Result<f64> {
    c.mahalanobis(x.values())
}

pub fn distance_to_model(x: &WindowVector, m: &MixtureModel) -> Result<f64> {
    m.distance(x.values())
}

/// Free parameters of a `k`-component full-covariance mixture in `d`
/// dimensions: weights, means and symmetric covariances.
pub fn parameter_count(k: usize, d: usize) -> usize {
    (k - 1) + k * d + k * d * (d + 1) / 2
}

/// `p·ln N − 2·ln L`; lower is better.
pub fn bic_score(m: &MixtureModel, data: &[WindowVector]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("BIC data"));
    }
    let ll = m.total_log_likelihood(data)?;
    let p = parameter_count(m.k(), m.dim()) as f64;
    Ok(p * (data.len() as f64).ln() - 2.0 * ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn comp(mean: &[f64], cov: DMatrix<f64>) -> GaussianComponent {
        GaussianComponent::new(1.0, DVector::from_column_slice(mean), cov).unwrap()
    }

    #[test]
    fn distance_at_mean_is_zero() {
        let c = comp(&[1.0, -2.0], DMatrix::identity(2, 2));
        let x = WindowVector::new(vec![1.0, -2.0], 0).unwrap();
        assert_eq!(mahalanobis_to_component(&x, &c).unwrap(), 0.0);
    }

    #[test]
    fn identity_covariance_is_euclidean() {
        let c = comp(&[0.0, 0.0], DMatrix::identity(2, 2));
        let x = WindowVector::new(vec![3.0, 4.0], 0).unwrap();
        assert_relative_eq!(mahalanobis_to_component(&x, &c).unwrap(), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn axis_scaling() {
        let c = comp(&[0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])));
        let x = WindowVector::new(vec![2.0, 0.0], 0).unwrap();
        assert_relative_eq!(mahalanobis_to_component(&x, &c).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn nearest_component_wins_and_weights_ignored() {
        let a = GaussianComponent::new(0.9, DVector::from_vec(vec![0.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        let b = GaussianComponent::new(0.1, DVector::from_vec(vec![10.0, 10.0]), DMatrix::identity(2, 2)).unwrap();
        let m = MixtureModel::from_components(vec![a, b]).unwrap();
        let x = WindowVector::new(vec![10.0, 10.0], 0).unwrap();
        assert_eq!(distance_to_model(&x, &m).unwrap(), 0.0);
    }

    #[test]
    fn singular_covariance_rejected() {
        let err = GaussianComponent::new(1.0, DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::SingularCovariance));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let c = comp(&[0.0, 0.0], DMatrix::identity(2, 2));
        let x = WindowVector::new(vec![1.0, 2.0, 3.0], 0).unwrap();
        assert!(matches!(
            mahalanobis_to_component(&x, &c),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let a = GaussianComponent::new(0.5, DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
        assert!(matches!(MixtureModel::from_components(vec![a]), Err(Error::WeightSum(_))));
    }

    #[test]
    fn non_finite_window_rejected() {
        assert!(WindowVector::new(vec![1.0, f64::NAN], 3).is_err());
    }

    #[test]
    fn windows_are_motor_major() {
        let samples: Vec<_> = (0..3)
            .map(|i| TorqueSample::new(i as f64, vec![i as f64, 10.0 + i as f64]))
            .collect();
        let w = WindowVector::from_samples(&samples, 0).unwrap();
        assert_eq!(w.values().as_slice(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(sliding_windows(&samples, 2).unwrap().len(), 2);
    }

    #[test]
    fn parameter_count_full_covariance() {
        // 1 weight, 2 means x2, 3 covariance entries x2
        assert_eq!(parameter_count(2, 2), 1 + 4 + 6);
        assert_eq!(parameter_count(1, 20), 20 + 210);
    }
}
