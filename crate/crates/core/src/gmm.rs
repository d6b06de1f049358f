//! Gaussian mixture models fitted by expectation-maximization, initialized
//! from a K-Means run.
//!
//! Densities are evaluated in the log domain with log-sum-exp normalization;
//! in 128 dimensions the linear-domain densities underflow immediately.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans_fit_once, KMeansConfig};

const LN_2PI: f64 = 1.8378770664093453;

/// Weight below which a component is reported as collapsed.
pub const WEIGHT_UNDERFLOW: f64 = 1e-12;

/// Covariance structure per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceKind {
    /// One variance per dimension. The practical choice when the dimension
    /// rivals the sample count, where full matrices go singular.
    #[default]
    Diagonal,
    /// Full symmetric covariance matrices; intended for low dimensions.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iterations: usize,
    /// Absolute change in mean per-sample log-likelihood that counts as
    /// converged.
    pub tolerance: f64,
    pub covariance_kind: CovarianceKind,
    /// Lower bound kept on every variance (diagonal) or added to the
    /// diagonal (full) so components cannot collapse to zero volume.
    pub covariance_floor: f64,
    pub rng_seed: u64,
}

impl GmmConfig {
    pub fn new(components: usize, rng_seed: u64) -> Self {
        GmmConfig {
            components,
            max_iterations: 100,
            tolerance: 1e-6,
            covariance_kind: CovarianceKind::default(),
            covariance_floor: 1e-6,
            rng_seed,
        }
    }

    pub fn with_covariance_kind(mut self, kind: CovarianceKind) -> Self {
        self.covariance_kind = kind;
        self
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    fn check(&self, records: usize) -> Result<()> {
        if self.components == 0 {
            return Err(Error::InvalidConfig {
                reason: "component count must be at least 1".to_string(),
            });
        }
        if self.components > records {
            return Err(Error::TooFewRecords {
                k: self.components,
                records,
            });
        }
        if self.covariance_floor.is_nan() || self.covariance_floor <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: "covariance floor must be positive".to_string(),
            });
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::InvalidConfig {
                reason: "tolerance must be non-negative".to_string(),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig {
                reason: "iteration budget must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Per-component covariances in the layout matching [`CovarianceKind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Covariances {
    /// k vectors of per-dimension variances.
    Diagonal(Vec<Vec<f64>>),
    /// k symmetric matrices.
    Full(Vec<Vec<Vec<f64>>>),
}

/// A fitted mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    /// Non-negative, sums to 1.
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Covariances,
    /// Final mean per-sample log-likelihood.
    pub log_likelihood: f64,
    /// Mean per-sample log-likelihood after each E-step, in order.
    /// Non-decreasing up to rounding.
    pub log_likelihood_history: Vec<f64>,
    /// Number of M-steps performed.
    pub iterations_run: usize,
    /// Per-record posterior over components; each row sums to 1.
    pub responsibilities: Vec<Vec<f64>>,
}

impl GmmModel {
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dimension(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Hard assignment per record: argmax responsibility, lowest index on ties.
    pub fn hard_assignments(&self) -> Vec<usize> {
        self.responsibilities
            .iter()
            .map(|row| argmax(row))
            .collect()
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Cholesky factorization A = LLᵀ; `None` if a pivot is not strictly positive.
#[allow(clippy::needless_range_loop)]
fn cholesky(matrix: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = matrix.len();
    let mut lower = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i][j];
            for k in 0..j {
                sum -= lower[i][k] * lower[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                lower[i][j] = sum.sqrt();
            } else {
                lower[i][j] = sum / lower[j][j];
            }
        }
    }
    Some(lower)
}

/// Solves L z = b by forward substitution.
fn forward_solve(lower: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = lower.len();
    let mut z = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= lower[i][k] * z[k];
        }
        z[i] = sum / lower[i][i];
    }
    z
}

/// Log-density evaluators, precomputed once per EM iteration.
enum Densities {
    Diagonal {
        variances: Vec<Vec<f64>>,
        /// −0.5 (D ln 2π + Σ ln σ²) per component.
        constants: Vec<f64>,
    },
    Full {
        factors: Vec<Vec<Vec<f64>>>,
        constants: Vec<f64>,
    },
}

impl Densities {
    fn build(covariances: &Covariances, dimension: usize) -> Result<Self> {
        match covariances {
            Covariances::Diagonal(variances) => {
                let constants = variances
                    .iter()
                    .map(|v| {
                        let log_det: f64 = v.iter().map(|s| s.ln()).sum();
                        -0.5 * (dimension as f64 * LN_2PI + log_det)
                    })
                    .collect();
                Ok(Densities::Diagonal {
                    variances: variances.clone(),
                    constants,
                })
            }
            Covariances::Full(matrices) => {
                let mut factors = Vec::with_capacity(matrices.len());
                let mut constants = Vec::with_capacity(matrices.len());
                for (component, matrix) in matrices.iter().enumerate() {
                    let lower = cholesky(matrix).ok_or(Error::DegenerateComponent { component })?;
                    let log_det: f64 = lower.iter().enumerate().map(|(i, r)| r[i].ln()).sum();
                    constants.push(-0.5 * dimension as f64 * LN_2PI - log_det);
                    factors.push(lower);
                }
                Ok(Densities::Full { factors, constants })
            }
        }
    }

    fn log_pdf(&self, component: usize, x: &[f64], mean: &[f64]) -> f64 {
        match self {
            Densities::Diagonal {
                variances,
                constants,
            } => {
                let mut maha = 0.0;
                for ((xi, mi), var) in x.iter().zip(mean.iter()).zip(variances[component].iter()) {
                    let d = xi - mi;
                    maha += d * d / var;
                }
                constants[component] - 0.5 * maha
            }
            Densities::Full { factors, constants } => {
                let diff: Vec<f64> = x.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
                let z = forward_solve(&factors[component], &diff);
                let maha: f64 = z.iter().map(|v| v * v).sum();
                constants[component] - 0.5 * maha
            }
        }
    }
}

struct EStep {
    responsibilities: Vec<Vec<f64>>,
    mean_log_likelihood: f64,
}

fn e_step(vectors: &[&[f64]], weights: &[f64], means: &[Vec<f64>], densities: &Densities) -> EStep {
    let k = weights.len();
    let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut responsibilities = Vec::with_capacity(vectors.len());
    let mut total = 0.0;
    let mut joint = vec![0.0f64; k];
    for x in vectors {
        for j in 0..k {
            joint[j] = log_weights[j] + densities.log_pdf(j, x, &means[j]);
        }
        let norm = log_sum_exp(&joint);
        total += norm;
        responsibilities.push(joint.iter().map(|lj| (lj - norm).exp()).collect());
    }
    EStep {
        responsibilities,
        mean_log_likelihood: total / vectors.len() as f64,
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    for (component, w) in weights.iter().enumerate() {
        if *w < WEIGHT_UNDERFLOW {
            return Err(Error::DegenerateComponent { component });
        }
    }
    Ok(())
}

fn floored_diagonal_covariances(
    vectors: &[&[f64]],
    responsibilities: &[Vec<f64>],
    means: &[Vec<f64>],
    totals: &[f64],
    floor: f64,
) -> Vec<Vec<f64>> {
    let dimension = means[0].len();
    let mut variances = vec![vec![0.0f64; dimension]; means.len()];
    for (x, resp) in vectors.iter().zip(responsibilities.iter()) {
        for (j, r) in resp.iter().enumerate() {
            for (d, v) in variances[j].iter_mut().enumerate() {
                let diff = x[d] - means[j][d];
                *v += r * diff * diff;
            }
        }
    }
    for (j, row) in variances.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = (*v / totals[j]).max(floor);
        }
    }
    variances
}

fn regularized_full_covariances(
    vectors: &[&[f64]],
    responsibilities: &[Vec<f64>],
    means: &[Vec<f64>],
    totals: &[f64],
    floor: f64,
) -> Vec<Vec<Vec<f64>>> {
    let dimension = means[0].len();
    let k = means.len();
    let mut matrices = vec![vec![vec![0.0f64; dimension]; dimension]; k];
    let mut diff = vec![0.0f64; dimension];
    for (x, resp) in vectors.iter().zip(responsibilities.iter()) {
        for (j, r) in resp.iter().enumerate() {
            for d in 0..dimension {
                diff[d] = x[d] - means[j][d];
            }
            for a in 0..dimension {
                let ra = r * diff[a];
                for b in 0..dimension {
                    matrices[j][a][b] += ra * diff[b];
                }
            }
        }
    }
    for (j, matrix) in matrices.iter_mut().enumerate() {
        for (a, row) in matrix.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v /= totals[j];
                if a == b {
                    *v += floor;
                }
            }
        }
    }
    matrices
}

/// Fits a mixture by EM.
///
/// Initialization runs one K-Means pass with the same seed: means are the
/// centroids, weights the cluster-size fractions, and covariances the
/// per-cluster variances (floored). E and M steps then alternate until the
/// change in mean per-sample log-likelihood drops below `tolerance` or the
/// iteration budget runs out.
///
/// A component whose weight underflows below `1e-12` is reported as
/// [`Error::DegenerateComponent`] rather than silently repaired.
pub fn gmm_fit(data: &Dataset, config: &GmmConfig) -> Result<GmmModel> {
    config.check(data.len())?;
    let vectors = data.vectors();
    let n = vectors.len();
    let k = config.components;
    let dimension = data.dimension();

    let kmeans = kmeans_fit_once(
        data,
        &KMeansConfig::new(k, config.rng_seed).with_restarts(1),
    )?;
    let mut counts = vec![0usize; k];
    for &a in &kmeans.assignments {
        counts[a] += 1;
    }
    let mut weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    check_weights(&weights)?;
    let mut means = kmeans.centroids;

    // Initial responsibilities are the hard K-Means assignments; reusing the
    // M-step estimators gives the per-cluster covariances.
    let hard: Vec<Vec<f64>> = kmeans
        .assignments
        .iter()
        .map(|&a| {
            let mut row = vec![0.0f64; k];
            row[a] = 1.0;
            row
        })
        .collect();
    let totals: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut covariances = match config.covariance_kind {
        CovarianceKind::Diagonal => Covariances::Diagonal(floored_diagonal_covariances(
            &vectors,
            &hard,
            &means,
            &totals,
            config.covariance_floor,
        )),
        CovarianceKind::Full => Covariances::Full(regularized_full_covariances(
            &vectors,
            &hard,
            &means,
            &totals,
            config.covariance_floor,
        )),
    };

    let mut densities = Densities::build(&covariances, dimension)?;
    let mut step = e_step(&vectors, &weights, &means, &densities);
    let mut history = vec![step.mean_log_likelihood];
    let mut iterations_run = 0usize;

    while iterations_run < config.max_iterations {
        // M-step.
        let totals: Vec<f64> = (0..k)
            .map(|j| step.responsibilities.iter().map(|r| r[j]).sum())
            .collect();
        weights = totals.iter().map(|t| t / n as f64).collect();
        check_weights(&weights)?;
        for (j, mean) in means.iter_mut().enumerate() {
            mean.iter_mut().for_each(|m| *m = 0.0);
            for (x, resp) in vectors.iter().zip(step.responsibilities.iter()) {
                let r = resp[j];
                for (m, xv) in mean.iter_mut().zip(x.iter()) {
                    *m += r * xv;
                }
            }
            mean.iter_mut().for_each(|m| *m /= totals[j]);
        }
        covariances = match config.covariance_kind {
            CovarianceKind::Diagonal => Covariances::Diagonal(floored_diagonal_covariances(
                &vectors,
                &step.responsibilities,
                &means,
                &totals,
                config.covariance_floor,
            )),
            CovarianceKind::Full => Covariances::Full(regularized_full_covariances(
                &vectors,
                &step.responsibilities,
                &means,
                &totals,
                config.covariance_floor,
            )),
        };

        // E-step against the updated parameters.
        densities = Densities::build(&covariances, dimension)?;
        let previous = step.mean_log_likelihood;
        step = e_step(&vectors, &weights, &means, &densities);
        iterations_run += 1;
        history.push(step.mean_log_likelihood);
        if (step.mean_log_likelihood - previous).abs() < config.tolerance {
            break;
        }
    }

    Ok(GmmModel {
        weights,
        means,
        covariances,
        log_likelihood: step.mean_log_likelihood,
        log_likelihood_history: history,
        iterations_run,
        responsibilities: step.responsibilities,
    })
}

/// Posterior over components for one vector plus the argmax component
/// (lowest index on ties).
pub fn gmm_predict(model: &GmmModel, vector: &[f64]) -> Result<(usize, Vec<f64>)> {
    let dimension = model.dimension();
    if vector.len() != dimension {
        return Err(Error::DimensionMismatch {
            id: "query".to_string(),
            expected: dimension,
            actual: vector.len(),
        });
    }
    if let Some(index) = vector.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteComponent {
            id: "query".to_string(),
            index,
        });
    }
    let densities = Densities::build(&model.covariances, dimension)?;
    let joint: Vec<f64> = model
        .weights
        .iter()
        .enumerate()
        .map(|(j, w)| w.ln() + densities.log_pdf(j, vector, &model.means[j]))
        .collect();
    let norm = log_sum_exp(&joint);
    let posterior: Vec<f64> = joint.iter().map(|lj| (lj - norm).exp()).collect();
    Ok((argmax(&posterior), posterior))
}
