//! Lloyd's K-Means with seeded initialization and multi-restart.
//!
//! Everything here is deterministic: a fixed seed fixes the initial centroids,
//! iteration order is fixed, assignment ties go to the lowest centroid index,
//! and no parallel reductions are used, so identical `(data, config)` inputs
//! produce bit-identical models on any IEEE-754 platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::sq_dist_unchecked;

/// How initial centroids are chosen from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    /// First centroid is a uniformly random record; each further centroid is
    /// the record farthest (squared Euclidean) from all chosen so far.
    /// Deterministic given the seed and robust to tight, well-separated
    /// clusters, where purely random seeding routinely collapses two seeds
    /// into one cluster and strands another.
    #[default]
    FarthestFirst,
    /// k distinct records sampled uniformly without replacement.
    RandomRecords,
}

/// Clustering parameters. `tolerance` bounds the maximum centroid
/// displacement per iteration; iteration stops when displacement drops below
/// it or `max_iterations` is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub rng_seed: u64,
    pub init: InitMethod,
}

impl KMeansConfig {
    pub fn new(k: usize, rng_seed: u64) -> Self {
        KMeansConfig {
            k,
            restarts: 5,
            max_iterations: 300,
            tolerance: 1e-6,
            rng_seed,
            init: InitMethod::default(),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_init(mut self, init: InitMethod) -> Self {
        self.init = init;
        self
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    fn check(&self, records: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig {
                reason: "cluster count must be at least 1".to_string(),
            });
        }
        if self.k > records {
            return Err(Error::TooFewRecords { k: self.k, records });
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig {
                reason: "restart count must be at least 1".to_string(),
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

/// A fitted K-Means model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    /// k centroids of the training dimension.
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared Euclidean distances of each training point to its
    /// assigned centroid, recomputed against the final centroids.
    pub inertia: f64,
    /// Number of update steps performed.
    pub iterations_run: usize,
    /// Per-record cluster index; always the argmin over the final centroids,
    /// ties to the lowest index.
    pub assignments: Vec<usize>,
    /// Inertia observed after each assignment pass, in order. Non-increasing.
    pub inertia_history: Vec<f64>,
}

/// SplitMix64 output scrambler; the stable basis for sub-seed derivation.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for restart `index` of a run seeded with `rng_seed`:
/// `splitmix64(rng_seed XOR (index + 1) · 0x9E3779B97F4A7C15)`.
///
/// Documented so callers can reproduce any single restart with
/// [`kmeans_fit_once`]; the derivation is stable across releases.
pub fn restart_seed(rng_seed: u64, index: u64) -> u64 {
    splitmix64(rng_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct AssignmentPass {
    assignments: Vec<usize>,
    /// Squared distance of each point to its assigned centroid.
    distances: Vec<f64>,
    inertia: f64,
}

fn assign(vectors: &[&[f64]], centroids: &[Vec<f64>]) -> AssignmentPass {
    let mut assignments = Vec::with_capacity(vectors.len());
    let mut distances = Vec::with_capacity(vectors.len());
    let mut inertia = 0.0;
    for v in vectors {
        let mut best = 0usize;
        let mut best_d2 = sq_dist_unchecked(v, &centroids[0]);
        for (j, c) in centroids.iter().enumerate().skip(1) {
            let d2 = sq_dist_unchecked(v, c);
            if d2 < best_d2 {
                best_d2 = d2;
                best = j;
            }
        }
        assignments.push(best);
        distances.push(best_d2);
        inertia += best_d2;
    }
    AssignmentPass {
        assignments,
        distances,
        inertia,
    }
}

fn init_centroids(
    vectors: &[&[f64]],
    k: usize,
    init: InitMethod,
    rng: &mut ChaCha20Rng,
) -> Vec<Vec<f64>> {
    let n = vectors.len();
    match init {
        InitMethod::RandomRecords => rand::seq::index::sample(rng, n, k)
            .into_iter()
            .map(|i| vectors[i].to_vec())
            .collect(),
        InitMethod::FarthestFirst => {
            let mut chosen = vec![false; n];
            let first = rng.random_range(0..n);
            chosen[first] = true;
            let mut centroids = vec![vectors[first].to_vec()];
            // min squared distance from each point to the chosen set
            let mut min_d2: Vec<f64> = vectors
                .iter()
                .map(|v| sq_dist_unchecked(v, vectors[first]))
                .collect();
            while centroids.len() < k {
                let mut best: Option<usize> = None;
                for i in 0..n {
                    if chosen[i] {
                        continue;
                    }
                    if best.is_none_or(|b| min_d2[i] > min_d2[b]) {
                        best = Some(i);
                    }
                }
                let next = best.expect("k <= n leaves an unchosen record");
                chosen[next] = true;
                centroids.push(vectors[next].to_vec());
                for i in 0..n {
                    let d2 = sq_dist_unchecked(vectors[i], vectors[next]);
                    if d2 < min_d2[i] {
                        min_d2[i] = d2;
                    }
                }
            }
            centroids
        }
    }
}

/// One Lloyd run: seeded initialization, then alternate assignment (nearest
/// centroid, lowest-index tie-break) and update (mean of assigned points)
/// until the maximum centroid displacement falls below `tolerance` or the
/// iteration budget runs out. `restarts` is ignored here.
///
/// A cluster left empty by an update is reseeded at the point farthest from
/// its currently assigned centroid, which keeps k fixed and never increases
/// inertia on the following pass.
#[allow(clippy::needless_range_loop)]
pub fn kmeans_fit_once(data: &Dataset, config: &KMeansConfig) -> Result<KMeansModel> {
    config.check(data.len())?;
    let vectors = data.vectors();
    let k = config.k;
    let dimension = data.dimension();
    let mut rng = ChaCha20Rng::seed_from_u64(config.rng_seed);
    let mut centroids = init_centroids(&vectors, k, config.init, &mut rng);

    let mut iterations_run = 0usize;
    let mut inertia_history = Vec::new();
    let mut pass = assign(&vectors, &centroids);
    inertia_history.push(pass.inertia);

    while iterations_run < config.max_iterations {
        // Update step: means of assigned points.
        let mut sums = vec![vec![0.0f64; dimension]; k];
        let mut counts = vec![0usize; k];
        for (v, &cluster) in vectors.iter().zip(pass.assignments.iter()) {
            counts[cluster] += 1;
            for (s, x) in sums[cluster].iter_mut().zip(v.iter()) {
                *s += x;
            }
        }
        let mut new_centroids = Vec::with_capacity(k);
        for j in 0..k {
            if counts[j] > 0 {
                let n = counts[j] as f64;
                new_centroids.push(sums[j].iter().map(|s| s / n).collect::<Vec<f64>>());
            } else {
                new_centroids.push(centroids[j].clone());
            }
        }
        // Empty-cluster repair: reseed at the point farthest from its own
        // centroid, one distinct point per empty cluster.
        let mut reseeded = vec![false; vectors.len()];
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let mut farthest: Option<usize> = None;
            for i in 0..vectors.len() {
                if reseeded[i] {
                    continue;
                }
                if farthest.is_none_or(|f| pass.distances[i] > pass.distances[f]) {
                    farthest = Some(i);
                }
            }
            let i = farthest.expect("more records than clusters");
            reseeded[i] = true;
            new_centroids[j] = vectors[i].to_vec();
        }

        let displacement = centroids
            .iter()
            .zip(new_centroids.iter())
            .map(|(old, new)| sq_dist_unchecked(old, new).sqrt())
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        iterations_run += 1;
        pass = assign(&vectors, &centroids);
        inertia_history.push(pass.inertia);
        if displacement < config.tolerance {
            break;
        }
    }

    Ok(KMeansModel {
        centroids,
        inertia: pass.inertia,
        iterations_run,
        assignments: pass.assignments,
        inertia_history,
    })
}

/// Runs [`kmeans_fit_once`] `config.restarts` times with seeds derived by
/// [`restart_seed`] and returns every model in restart order, so callers can
/// either report all runs or pick one.
pub fn kmeans_fit(data: &Dataset, config: &KMeansConfig) -> Result<Vec<KMeansModel>> {
    config.check(data.len())?;
    (0..config.restarts)
        .map(|i| {
            let sub = config
                .clone()
                .with_seed(restart_seed(config.rng_seed, i as u64));
            kmeans_fit_once(data, &sub)
        })
        .collect()
}

/// The model with minimum inertia; ties go to the earliest index.
pub fn select_best_by_inertia(models: &[KMeansModel]) -> Result<&KMeansModel> {
    models
        .iter()
        .reduce(|best, m| if m.inertia < best.inertia { m } else { best })
        .ok_or(Error::EmptyList)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{schema_of, AttributeSchema, EmbeddingRecord};
    use rand::Rng;

    fn plain_schema() -> AttributeSchema {
        schema_of([("blob", ["a", "b"].as_slice())])
    }

    fn dataset_from_vectors(vectors: Vec<Vec<f64>>) -> Dataset {
        let records = vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| EmbeddingRecord::new(format!("r{i}"), v, Vec::new()))
            .collect();
        Dataset::validate(records, plain_schema()).unwrap()
    }

    fn random_dataset(seed: u64, n: usize, d: usize) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        dataset_from_vectors(
            (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect(),
        )
    }

    /// Two tight blobs at ±5·e₁, labels by true blob.
    fn two_blobs(seed: u64, per_blob: usize, d: usize) -> (Dataset, Vec<usize>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut vectors = Vec::new();
        let mut truth = Vec::new();
        for (blob, sign) in [(0usize, -5.0), (1usize, 5.0)] {
            for _ in 0..per_blob {
                let mut v: Vec<f64> = (0..d).map(|_| 0.1 * rng.random_range(-1.0..1.0)).collect();
                v[0] += sign;
                vectors.push(v);
                truth.push(blob);
            }
        }
        (dataset_from_vectors(vectors), truth)
    }

    #[test]
    fn k1_centroid_is_dataset_mean() {
        let data = random_dataset(5, 40, 8);
        let model = kmeans_fit_once(&data, &KMeansConfig::new(1, 9)).unwrap();
        let mut mean = vec![0.0; 8];
        for r in data.records() {
            for (m, x) in mean.iter_mut().zip(r.vector.iter()) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= data.len() as f64;
        }
        for (got, want) in model.centroids[0].iter().zip(mean.iter()) {
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
        // inertia equals the total squared deviation from the mean
        let total: f64 = data
            .records()
            .iter()
            .map(|r| sq_dist_unchecked(&r.vector, &mean))
            .sum();
        assert!((model.inertia - total).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn k_equals_n_reaches_zero_inertia() {
        let data = random_dataset(6, 12, 4);
        for init in [InitMethod::FarthestFirst, InitMethod::RandomRecords] {
            let config = KMeansConfig::new(12, 3).with_init(init);
            let model = kmeans_fit_once(&data, &config).unwrap();
            assert_eq!(model.inertia, 0.0);
            let mut seen = [false; 12];
            for &a in &model.assignments {
                seen[a] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn separated_blobs_recovered_exactly() {
        // Oracle: label every point by its nearest true blob mean.
        let (data, truth) = two_blobs(8, 50, 8);
        for init in [InitMethod::FarthestFirst, InitMethod::RandomRecords] {
            let config = KMeansConfig::new(2, 17).with_init(init);
            let model = kmeans_fit_once(&data, &config).unwrap();
            let direct: usize = model
                .assignments
                .iter()
                .zip(truth.iter())
                .filter(|(a, t)| *a == *t)
                .count();
            let flipped: usize = model
                .assignments
                .iter()
                .zip(truth.iter())
                .filter(|(a, t)| 1 - *a == **t)
                .count();
            assert_eq!(direct.max(flipped), data.len(), "init {init:?}");
        }
    }

    #[test]
    fn same_config_is_bit_identical() {
        let data = random_dataset(10, 60, 6);
        let config = KMeansConfig::new(4, 123);
        let a = kmeans_fit(&data, &config).unwrap();
        let b = kmeans_fit(&data, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_restart_matches_fit_once_with_derived_seed() {
        let data = random_dataset(11, 30, 5);
        let config = KMeansConfig::new(3, 77).with_restarts(1);
        let from_fit = kmeans_fit(&data, &config).unwrap();
        let direct =
            kmeans_fit_once(&data, &config.clone().with_seed(restart_seed(77, 0))).unwrap();
        assert_eq!(from_fit.len(), 1);
        assert_eq!(from_fit[0], direct);
    }

    #[test]
    fn inertia_history_is_non_increasing() {
        for seed in 0..20 {
            let data = random_dataset(seed, 50, 4);
            let model = kmeans_fit_once(&data, &KMeansConfig::new(5, seed * 3 + 1)).unwrap();
            for pair in model.inertia_history.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-9 * pair[0].abs().max(1.0),
                    "seed {seed}: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn assignments_are_argmin_over_final_centroids() {
        let data = random_dataset(13, 40, 3);
        let model = kmeans_fit_once(&data, &KMeansConfig::new(4, 5)).unwrap();
        for (record, &assigned) in data.records().iter().zip(model.assignments.iter()) {
            let own = sq_dist_unchecked(&record.vector, &model.centroids[assigned]);
            for (j, c) in model.centroids.iter().enumerate() {
                let d = sq_dist_unchecked(&record.vector, c);
                assert!(own <= d || (own == d && assigned <= j));
            }
        }
    }

    #[test]
    fn duplicate_seed_vectors_trigger_empty_repair() {
        // Two records share a vector; whenever both seed the run, one cluster
        // starts empty (ties go to the lower index) and must be reseeded.
        let vectors = vec![
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![9.0, 9.0],
            vec![9.1, 9.0],
        ];
        let data = dataset_from_vectors(vectors);
        let mut repaired = false;
        for seed in 0..64 {
            let config = KMeansConfig::new(2, seed).with_init(InitMethod::RandomRecords);
            let model = kmeans_fit_once(&data, &config).unwrap();
            let mut counts = [0usize; 2];
            for &a in &model.assignments {
                counts[a] += 1;
            }
            assert!(
                counts[0] > 0 && counts[1] > 0,
                "seed {seed} left a cluster empty"
            );
            if model.inertia < 0.02 {
                repaired = true;
            }
        }
        assert!(repaired, "no seed exercised the repair path");
    }

    #[test]
    fn best_by_inertia_prefers_minimum_then_earliest() {
        let data = random_dataset(14, 20, 2);
        let mut models = kmeans_fit(&data, &KMeansConfig::new(2, 4).with_restarts(3)).unwrap();
        models[0].inertia = 3.2;
        models[1].inertia = 1.1;
        models[2].inertia = 2.0;
        assert_eq!(select_best_by_inertia(&models).unwrap().inertia, 1.1);
        models[2].inertia = 1.1;
        let best = select_best_by_inertia(&models).unwrap();
        assert!(std::ptr::eq(best, &models[1]));
        assert!(matches!(select_best_by_inertia(&[]), Err(Error::EmptyList)));
    }

    #[test]
    fn too_few_records_is_reported() {
        let data = random_dataset(15, 3, 2);
        assert!(matches!(
            kmeans_fit_once(&data, &KMeansConfig::new(4, 0)),
            Err(Error::TooFewRecords { k: 4, records: 3 })
        ));
    }
}
