//! Distance metrics: Euclidean, squared Euclidean, and Mahalanobis under a
//! symmetric PSD matrix.
//!
//! For `M = WᵀW` the Mahalanobis distance in the original space equals the
//! Euclidean distance after applying the linear map `W`, which is what makes
//! a learned linear embedding equivalent to a metric on the input space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element-wise symmetry tolerance for Mahalanobis matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Quadratic forms in `[-PSD_CLAMP, 0)` are treated as rounding noise and
/// clamped to zero; anything below is a genuine PSD violation.
pub const PSD_CLAMP: f64 = 1e-9;

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            id: "distance operands".to_string(),
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// Squared Euclidean distance with no dimension check; callers guarantee
/// equal lengths. This is the hot path for clustering.
#[inline]
pub(crate) fn sq_dist_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        sum += d * d;
    }
    sum
}

/// `sqrt(Σ_d (a_d − b_d)²)`.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(sq_dist_unchecked(a, b).sqrt())
}

/// `Σ_d (a_d − b_d)²`.
pub fn squared_euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(sq_dist_unchecked(a, b))
}

/// `sqrt((a−b)ᵀ M (a−b))` for a symmetric PSD matrix `M`.
///
/// Quadratic forms within `-1e-9` of zero are clamped to zero; anything more
/// negative is reported as [`Error::NotPsd`].
pub fn mahalanobis_distance(a: &[f64], b: &[f64], matrix: &[Vec<f64>]) -> Result<f64> {
    check_dims(a, b)?;
    let d = a.len();
    if matrix.len() != d || matrix.iter().any(|row| row.len() != d) {
        return Err(Error::BadMatrixShape { dimension: d });
    }
    let diff: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
    let mut quad = 0.0;
    for (i, di) in diff.iter().enumerate() {
        let mut row_sum = 0.0;
        for (j, dj) in diff.iter().enumerate() {
            row_sum += matrix[i][j] * dj;
        }
        quad += di * row_sum;
    }
    if quad < -PSD_CLAMP {
        return Err(Error::NotPsd { value: quad });
    }
    Ok(quad.max(0.0).sqrt())
}

/// Which distance a classifier or report uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    #[default]
    Euclidean,
    SquaredEuclidean,
    Mahalanobis,
}

/// A distance metric, optionally parameterized by a Mahalanobis matrix.
///
/// The matrix is present exactly when `kind` is [`MetricKind::Mahalanobis`]
/// and is checked for symmetry at construction; positive semi-definiteness is
/// enforced lazily by clamping tiny negative quadratic forms and rejecting
/// large ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    kind: MetricKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    matrix: Option<Vec<Vec<f64>>>,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::euclidean()
    }
}

impl MetricSpec {
    pub fn euclidean() -> Self {
        MetricSpec {
            kind: MetricKind::Euclidean,
            matrix: None,
        }
    }

    pub fn squared_euclidean() -> Self {
        MetricSpec {
            kind: MetricKind::SquaredEuclidean,
            matrix: None,
        }
    }

    /// Builds a Mahalanobis metric, rejecting non-square or asymmetric
    /// matrices (tolerance `1e-9` element-wise).
    #[allow(clippy::needless_range_loop)]
    pub fn mahalanobis(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let d = matrix.len();
        if d == 0 || matrix.iter().any(|row| row.len() != d) {
            return Err(Error::BadMatrixShape { dimension: d });
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (matrix[i][j] - matrix[j][i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(MetricSpec {
            kind: MetricKind::Mahalanobis,
            matrix: Some(matrix),
        })
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn matrix(&self) -> Option<&Vec<Vec<f64>>> {
        self.matrix.as_ref()
    }

    /// Distance between `a` and `b` under this metric.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self.kind {
            MetricKind::Euclidean => euclidean_distance(a, b),
            MetricKind::SquaredEuclidean => squared_euclidean_distance(a, b),
            MetricKind::Mahalanobis => {
                let matrix = self
                    .matrix
                    .as_ref()
                    .ok_or(Error::BadMatrixShape { dimension: a.len() })?;
                mahalanobis_distance(a, b, matrix)
            }
        }
    }

    /// Re-checks the stored matrix against a dataset dimension; used when
    /// loading persisted classifiers.
    pub fn check_dimension(&self, dimension: usize) -> Result<()> {
        if let Some(matrix) = &self.matrix {
            if matrix.len() != dimension {
                return Err(Error::BadMatrixShape { dimension });
            }
        }
        Ok(())
    }
}
