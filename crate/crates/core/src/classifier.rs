//! Nearest-centroid classification over labeled cluster centroids, the
//! stratified train/test split that feeds it, and one-shot identity lookup
//! over a gallery.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::align::{align_and_score, AlignmentReport};
use crate::dataset::{AttributeSchema, Dataset};
use crate::error::{Error, Result};
use crate::gmm::{gmm_fit, GmmConfig};
use crate::kmeans::{kmeans_fit, restart_seed, KMeansConfig};
use crate::metric::{euclidean_distance, MetricSpec};

/// Default number of neighbors for identity lookup.
pub const DEFAULT_NEIGHBOR_COUNT: usize = 1;
/// Default rejection radius: queries farther than this from every gallery
/// record are reported as unknown.
pub const DEFAULT_REJECTION_RADIUS: f64 = 0.6;
/// Default training fraction of a split.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// One persisted centroid: position, composite label, and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidEntry {
    pub centroid: Vec<f64>,
    pub labels: BTreeMap<String, String>,
    /// Cluster count of the model that produced this centroid.
    pub level: usize,
    /// Restart index of the selected model.
    pub restart: usize,
}

/// Labeled centroids persisted after training; classification returns the
/// label of the nearest centroid under `metric`.
///
/// Persistence lives in [`crate::io`]; loading re-validates through
/// [`CentroidClassifier::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidClassifier {
    dimension: usize,
    metric: MetricSpec,
    schema: AttributeSchema,
    entries: Vec<CentroidEntry>,
}

impl CentroidClassifier {
    pub fn new(
        dimension: usize,
        metric: MetricSpec,
        schema: AttributeSchema,
        entries: Vec<CentroidEntry>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NoRecords);
        }
        metric.check_dimension(dimension)?;
        for (index, entry) in entries.iter().enumerate() {
            let id = || format!("centroid {index}");
            if entry.centroid.len() != dimension {
                return Err(Error::DimensionMismatch {
                    id: id(),
                    expected: dimension,
                    actual: entry.centroid.len(),
                });
            }
            if let Some(bad) = entry.centroid.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteComponent {
                    id: id(),
                    index: bad,
                });
            }
            for (attribute, value) in &entry.labels {
                match schema.get(attribute) {
                    None => {
                        return Err(Error::UnknownAttribute {
                            id: id(),
                            attribute: attribute.clone(),
                        })
                    }
                    Some(permitted) if !permitted.contains(value) => {
                        return Err(Error::UnknownValue {
                            id: id(),
                            attribute: attribute.clone(),
                            value: value.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(CentroidClassifier {
            dimension,
            metric,
            schema,
            entries,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn entries(&self) -> &[CentroidEntry] {
        &self.entries
    }

    /// Distinct levels present, ascending.
    pub fn levels(&self) -> Vec<usize> {
        let mut levels: Vec<usize> = self.entries.iter().map(|e| e.level).collect();
        levels.sort_unstable();
        levels.dedup();
        levels
    }
}

/// Parameters of a deterministic stratified split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of each stratum that goes to training, strictly in (0, 1).
    pub train_fraction: f64,
    /// Attributes whose value combination defines a stratum; empty means one
    /// stratum for the whole dataset.
    pub stratify_by: Vec<String>,
    pub rng_seed: u64,
}

impl SplitSpec {
    pub fn new(rng_seed: u64) -> Self {
        SplitSpec {
            train_fraction: DEFAULT_TRAIN_FRACTION,
            stratify_by: Vec::new(),
            rng_seed,
        }
    }

    pub fn stratified_by(mut self, attributes: impl IntoIterator<Item = String>) -> Self {
        self.stratify_by = attributes.into_iter().collect();
        self
    }

    pub fn with_fraction(mut self, train_fraction: f64) -> Self {
        self.train_fraction = train_fraction;
        self
    }
}

/// Splits a dataset into train and test partitions, stratum by stratum.
///
/// Each stratum contributes `round(train_fraction · size)` records to the
/// train side (clamped so both sides stay non-empty), chosen by a seeded
/// shuffle. Record order within each side follows the original dataset, so
/// the split is reproducible byte for byte.
pub fn split_dataset(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidTrainFraction {
            fraction: spec.train_fraction,
        });
    }
    if data.is_empty() {
        return Err(Error::NoRecords);
    }

    let mut strata: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (index, record) in data.records().iter().enumerate() {
        let key: Vec<String> = spec
            .stratify_by
            .iter()
            .map(|a| data.label_of(record, a))
            .collect::<Result<_>>()?;
        strata.entry(key).or_default().push(index);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(spec.rng_seed);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for (key, mut indices) in strata {
        let size = indices.len();
        if size < 2 {
            return Err(Error::StratumTooSmall {
                stratum: key.join("|"),
                size,
            });
        }
        let train_count = ((spec.train_fraction * size as f64).round() as usize).clamp(1, size - 1);
        indices.shuffle(&mut rng);
        train_indices.extend_from_slice(&indices[..train_count]);
        test_indices.extend_from_slice(&indices[train_count..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok((data.subset(&train_indices), data.subset(&test_indices)))
}

/// Training diagnostics for one cluster count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTraining {
    pub cluster_count: usize,
    /// Training overall accuracy of each restart, in restart order.
    pub restart_accuracies: Vec<f64>,
    /// Index of the restart whose centroids were kept.
    pub selected_restart: usize,
    /// Training alignment of the selected restart.
    pub report: AlignmentReport,
}

/// A trained classifier plus the per-level training evidence behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidTraining {
    pub classifier: CentroidClassifier,
    pub levels: Vec<LevelTraining>,
}

fn entries_from_centroids(
    centroids: &[Vec<f64>],
    report: &AlignmentReport,
    level: usize,
    restart: usize,
) -> Vec<CentroidEntry> {
    centroids
        .iter()
        .enumerate()
        .map(|(cluster, centroid)| CentroidEntry {
            centroid: centroid.clone(),
            labels: report.mapped_values(cluster).expect("cluster in mapping"),
            level,
            restart,
        })
        .collect()
}

fn check_cluster_counts(cluster_counts: &[usize]) -> Result<Vec<usize>> {
    if cluster_counts.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "at least one cluster count is required".to_string(),
        });
    }
    let mut counts = cluster_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    Ok(counts)
}

/// Trains the nearest-centroid classifier: at each cluster count, runs
/// multi-restart K-Means on the training data, scores every restart by its
/// aligned training accuracy, keeps the best restart (earliest on ties), and
/// labels its centroids with their aligned composite labels. Entries from all
/// levels are stored together, distinguishable by level.
pub fn train_centroid_classifier(
    train: &Dataset,
    attributes: &[String],
    cluster_counts: &[usize],
    config: &KMeansConfig,
) -> Result<CentroidTraining> {
    let counts = check_cluster_counts(cluster_counts)?;
    let mut entries = Vec::new();
    let mut levels = Vec::new();
    for &count in &counts {
        let models = kmeans_fit(train, &config.clone().with_k(count))?;
        let reports: Vec<AlignmentReport> = models
            .iter()
            .map(|m| align_and_score(&m.assignments, train, attributes))
            .collect::<Result<_>>()?;
        let restart_accuracies: Vec<f64> = reports.iter().map(|r| r.overall_accuracy).collect();
        let selected = argmax_first(&restart_accuracies);
        entries.extend(entries_from_centroids(
            &models[selected].centroids,
            &reports[selected],
            count,
            selected,
        ));
        levels.push(LevelTraining {
            cluster_count: count,
            restart_accuracies,
            selected_restart: selected,
            report: reports[selected].clone(),
        });
    }
    let classifier = CentroidClassifier::new(
        train.dimension(),
        MetricSpec::euclidean(),
        train.schema().clone(),
        entries,
    )?;
    Ok(CentroidTraining { classifier, levels })
}

/// Mixture-backed variant of [`train_centroid_classifier`]: each restart fits
/// a Gaussian mixture (components = cluster count, seeds derived as in
/// [`kmeans_fit`]), restarts are scored by aligning the hard posterior
/// assignments on the training data, and the selected mixture's means become
/// the persisted centroids.
pub fn train_centroid_classifier_gmm(
    train: &Dataset,
    attributes: &[String],
    cluster_counts: &[usize],
    base: &GmmConfig,
    restarts: usize,
) -> Result<CentroidTraining> {
    let counts = check_cluster_counts(cluster_counts)?;
    if restarts == 0 {
        return Err(Error::InvalidConfig {
            reason: "restart count must be at least 1".to_string(),
        });
    }
    let mut entries = Vec::new();
    let mut levels = Vec::new();
    for &count in &counts {
        let mut reports = Vec::with_capacity(restarts);
        let mut means_per_restart = Vec::with_capacity(restarts);
        for index in 0..restarts {
            let config = GmmConfig {
                components: count,
                rng_seed: restart_seed(base.rng_seed, index as u64),
                ..base.clone()
            };
            let model = gmm_fit(train, &config)?;
            reports.push(align_and_score(
                &model.hard_assignments(),
                train,
                attributes,
            )?);
            means_per_restart.push(model.means);
        }
        let restart_accuracies: Vec<f64> = reports.iter().map(|r| r.overall_accuracy).collect();
        let selected = argmax_first(&restart_accuracies);
        entries.extend(entries_from_centroids(
            &means_per_restart[selected],
            &reports[selected],
            count,
            selected,
        ));
        levels.push(LevelTraining {
            cluster_count: count,
            restart_accuracies,
            selected_restart: selected,
            report: reports[selected].clone(),
        });
    }
    let classifier = CentroidClassifier::new(
        train.dimension(),
        MetricSpec::euclidean(),
        train.schema().clone(),
        entries,
    )?;
    Ok(CentroidTraining { classifier, levels })
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// One classification outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub labels: BTreeMap<String, String>,
    /// Level of the winning centroid.
    pub level: usize,
    /// Index of the winning entry within the classifier.
    pub entry_index: usize,
    pub distance: f64,
}

/// Label of the nearest centroid under the classifier's metric, restricted to
/// `level` when given. Ties go to the lowest entry index.
pub fn classify(
    classifier: &CentroidClassifier,
    vector: &[f64],
    level: Option<usize>,
) -> Result<Classification> {
    if vector.len() != classifier.dimension() {
        return Err(Error::DimensionMismatch {
            id: "query".to_string(),
            expected: classifier.dimension(),
            actual: vector.len(),
        });
    }
    if let Some(index) = vector.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteComponent {
            id: "query".to_string(),
            index,
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (index, entry) in classifier.entries().iter().enumerate() {
        if level.is_some_and(|l| entry.level != l) {
            continue;
        }
        let distance = classifier.metric().distance(vector, &entry.centroid)?;
        if best.is_none_or(|(_, d)| distance < d) {
            best = Some((index, distance));
        }
    }
    let (entry_index, distance) = best.ok_or(Error::EmptyLevel {
        level: level.unwrap_or(0),
    })?;
    let entry = &classifier.entries()[entry_index];
    Ok(Classification {
        labels: entry.labels.clone(),
        level: entry.level,
        entry_index,
        distance,
    })
}

/// Scores a classifier against the labels of a held-out dataset.
///
/// `overall_accuracy` is the exact-composite match rate over `attributes`,
/// `per_attribute` the per-attribute match rates, and `per_class` the recall
/// per true composite class. Classification is restricted to `level` when
/// given.
pub fn evaluate_classifier(
    classifier: &CentroidClassifier,
    data: &Dataset,
    attributes: &[String],
    level: Option<usize>,
) -> Result<crate::align::AveragedAccuracies> {
    if data.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut per_attribute_hits: BTreeMap<&str, u64> =
        attributes.iter().map(|a| (a.as_str(), 0)).collect();
    let mut class_totals: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut exact = 0u64;
    for record in data.records() {
        let truth: Vec<(String, String)> = attributes
            .iter()
            .map(|a| Ok((a.clone(), data.label_of(record, a)?)))
            .collect::<Result<_>>()?;
        let result = classify(classifier, &record.vector, level)?;
        let mut all = true;
        for (attribute, value) in &truth {
            if result.labels.get(attribute) == Some(value) {
                *per_attribute_hits.get_mut(attribute.as_str()).unwrap() += 1;
            } else {
                all = false;
            }
        }
        let class = crate::align::composite_label(
            &truth.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>(),
        );
        let entry = class_totals.entry(class).or_insert((0, 0));
        entry.1 += 1;
        if all {
            exact += 1;
            entry.0 += 1;
        }
    }
    let n = data.len() as f64;
    Ok(crate::align::AveragedAccuracies {
        runs: 1,
        per_class: class_totals
            .into_iter()
            .map(|(class, (hit, total))| (class, hit as f64 / total as f64))
            .collect(),
        per_attribute: per_attribute_hits
            .into_iter()
            .map(|(a, hits)| (a.to_string(), hits as f64 / n))
            .collect(),
        overall_accuracy: exact as f64 / n,
    })
}

/// Outcome of a gallery lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Identification {
    Identified { identity: String, distance: f64 },
    Unknown { nearest_distance: f64 },
}

/// k-nearest-neighbor identity lookup over a labeled gallery.
///
/// The k nearest records (Euclidean) vote by their `identity_attribute`
/// value; with the default k = 1 that is simply the nearest record's
/// identity. If even the nearest record is farther than `threshold`, the
/// query is reported as [`Identification::Unknown`]. Vote ties prefer the
/// identity with the closer nearest member, then lexicographic order.
pub fn knn_identify(
    gallery: &Dataset,
    identity_attribute: &str,
    query: &[f64],
    k: usize,
    threshold: f64,
) -> Result<Identification> {
    if gallery.is_empty() {
        return Err(Error::NoRecords);
    }
    if k == 0 {
        return Err(Error::InvalidConfig {
            reason: "neighbor count must be at least 1".to_string(),
        });
    }
    let mut scored = Vec::with_capacity(gallery.len());
    for record in gallery.records() {
        let identity = gallery.label_of(record, identity_attribute)?;
        let distance = euclidean_distance(query, &record.vector)?;
        scored.push((distance, identity));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nearest_distance = scored[0].0;
    if nearest_distance > threshold {
        return Ok(Identification::Unknown { nearest_distance });
    }
    let top = &scored[..k.min(scored.len())];
    let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for (distance, identity) in top {
        let entry = votes.entry(identity).or_insert((0, *distance));
        entry.0 += 1;
        if *distance < entry.1 {
            entry.1 = *distance;
        }
    }
    let (identity, (_, distance)) = votes
        .into_iter()
        .max_by(|(id_a, (votes_a, dist_a)), (id_b, (votes_b, dist_b))| {
            votes_a
                .cmp(votes_b)
                .then(dist_b.total_cmp(dist_a))
                .then(id_b.cmp(id_a))
        })
        .expect("top neighbors non-empty");
    Ok(Identification::Identified {
        identity: identity.to_string(),
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{schema_of, EmbeddingRecord};
    use crate::synth::{generate, AttributeAxis, HierarchySpec};
    use rand::{Rng, SeedableRng};

    fn eight_strata_dataset(per_stratum: usize) -> Dataset {
        let schema = schema_of([
            ("shade", ["dark", "pale"].as_slice()),
            ("gender", ["female", "male"].as_slice()),
            ("age", ["old", "young"].as_slice()),
        ]);
        let mut records = Vec::new();
        for cell in 0..8usize {
            let labels = [
                ("shade", if cell & 1 == 1 { "pale" } else { "dark" }),
                ("gender", if cell & 2 == 2 { "male" } else { "female" }),
                ("age", if cell & 4 == 4 { "young" } else { "old" }),
            ];
            for i in 0..per_stratum {
                records.push(EmbeddingRecord::new(
                    format!("c{cell}-{i}"),
                    vec![cell as f64, i as f64],
                    labels
                        .iter()
                        .map(|(a, v)| (a.to_string(), v.to_string()))
                        .collect::<Vec<_>>(),
                ));
            }
        }
        Dataset::validate(records, schema).unwrap()
    }

    fn stratify() -> Vec<String> {
        ["shade", "gender", "age"]
            .into_iter()
            .map(String::from)
            .collect()
    }

    #[test]
    fn eight_balanced_strata_split_88_37() {
        let data = eight_strata_dataset(125);
        let spec = SplitSpec::new(5).stratified_by(stratify());
        let (train, test) = split_dataset(&data, &spec).unwrap();
        assert_eq!(train.len(), 8 * 88);
        assert_eq!(test.len(), 8 * 37);
        // disjoint and covering
        let mut ids: Vec<&str> = train
            .records()
            .iter()
            .chain(test.records())
            .map(|r| r.id.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 1000);
    }

    #[test]
    fn two_record_stratum_splits_one_and_one() {
        let data = eight_strata_dataset(2);
        let spec = SplitSpec::new(1)
            .stratified_by(stratify())
            .with_fraction(0.5);
        let (train, test) = split_dataset(&data, &spec).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 8);
    }

    #[test]
    fn same_seed_reproduces_the_split() {
        let data = eight_strata_dataset(20);
        let spec = SplitSpec::new(42).stratified_by(stratify());
        let (train_a, test_a) = split_dataset(&data, &spec).unwrap();
        let (train_b, test_b) = split_dataset(&data, &spec).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
    }

    #[test]
    fn undersized_stratum_is_reported() {
        let schema = schema_of([("shade", ["dark", "pale"].as_slice())]);
        let records = vec![
            EmbeddingRecord::new("a", vec![0.0], [("shade".to_string(), "dark".to_string())]),
            EmbeddingRecord::new("b", vec![1.0], [("shade".to_string(), "dark".to_string())]),
            EmbeddingRecord::new("c", vec![2.0], [("shade".to_string(), "pale".to_string())]),
        ];
        let data = Dataset::validate(records, schema).unwrap();
        let spec = SplitSpec::new(0).stratified_by(vec!["shade".to_string()]);
        assert!(matches!(
            split_dataset(&data, &spec),
            Err(Error::StratumTooSmall { size: 1, .. })
        ));
    }

    #[test]
    fn stratifying_on_an_absent_attribute_is_reported() {
        let data = eight_strata_dataset(4);
        let spec = SplitSpec::new(0).stratified_by(vec!["hairstyle".to_string()]);
        assert!(matches!(
            split_dataset(&data, &spec),
            Err(Error::MissingAttribute { attribute, .. }) if attribute == "hairstyle"
        ));
    }

    #[test]
    fn bad_fraction_is_reported() {
        let data = eight_strata_dataset(2);
        for fraction in [0.0, 1.0, -0.5, f64::NAN] {
            let spec = SplitSpec::new(0).with_fraction(fraction);
            assert!(matches!(
                split_dataset(&data, &spec),
                Err(Error::InvalidTrainFraction { .. })
            ));
        }
    }

    fn separable_spec(seed: u64) -> HierarchySpec {
        HierarchySpec {
            dimension: 8,
            attributes: vec![
                AttributeAxis::random("first", 10.0),
                AttributeAxis::random("second", 3.0),
            ],
            noise_sigma: 0.02,
            samples_per_cell: 20,
            rng_seed: seed,
        }
    }

    #[test]
    fn training_on_separable_data_is_perfect() {
        let data = generate(&separable_spec(3)).unwrap();
        let attributes = vec!["first".to_string(), "second".to_string()];
        let config = KMeansConfig::new(4, 11);
        let outcome = train_centroid_classifier(&data, &attributes, &[2, 4], &config).unwrap();
        let level4 = &outcome.levels[1];
        assert_eq!(level4.report.overall_accuracy, 1.0);
        assert!(level4.restart_accuracies.iter().all(|&a| a == 1.0));

        // selected level-4 centroids coincide with per-class means
        let mut class_sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
        for record in data.records() {
            let key = format!("{}|{}", record.labels["first"], record.labels["second"]);
            let entry = class_sums
                .entry(key)
                .or_insert((vec![0.0; data.dimension()], 0));
            for (s, x) in entry.0.iter_mut().zip(record.vector.iter()) {
                *s += x;
            }
            entry.1 += 1;
        }
        for entry in outcome.classifier.entries().iter().filter(|e| e.level == 4) {
            let key = format!("{}|{}", entry.labels["first"], entry.labels["second"]);
            let (sum, count) = &class_sums[&key];
            for (c, s) in entry.centroid.iter().zip(sum.iter()) {
                assert!((c - s / *count as f64).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn single_restart_selection_is_trivial() {
        let data = generate(&separable_spec(4)).unwrap();
        let attributes = vec!["first".to_string()];
        let config = KMeansConfig::new(2, 9).with_restarts(1);
        let outcome = train_centroid_classifier(&data, &attributes, &[2], &config).unwrap();
        assert_eq!(outcome.levels[0].selected_restart, 0);
        assert_eq!(outcome.levels[0].restart_accuracies.len(), 1);
    }

    #[test]
    fn classify_returns_exact_centroid_matches_at_distance_zero() {
        let data = generate(&separable_spec(5)).unwrap();
        let attributes = vec!["first".to_string(), "second".to_string()];
        let outcome =
            train_centroid_classifier(&data, &attributes, &[4], &KMeansConfig::new(4, 2)).unwrap();
        let classifier = &outcome.classifier;
        for (index, entry) in classifier.entries().iter().enumerate() {
            let result = classify(classifier, &entry.centroid, None).unwrap();
            assert_eq!(result.entry_index, index);
            assert_eq!(result.distance, 0.0);
            assert_eq!(result.labels, entry.labels);
        }
    }

    #[test]
    fn equidistant_queries_take_the_lower_entry_index() {
        let schema = schema_of([("side", ["left", "right"].as_slice())]);
        let entries = vec![
            CentroidEntry {
                centroid: vec![-1.0, 0.0],
                labels: [("side".to_string(), "left".to_string())]
                    .into_iter()
                    .collect(),
                level: 2,
                restart: 0,
            },
            CentroidEntry {
                centroid: vec![1.0, 0.0],
                labels: [("side".to_string(), "right".to_string())]
                    .into_iter()
                    .collect(),
                level: 2,
                restart: 0,
            },
        ];
        let classifier =
            CentroidClassifier::new(2, MetricSpec::euclidean(), schema, entries).unwrap();
        let result = classify(&classifier, &[0.0, 5.0], None).unwrap();
        assert_eq!(result.entry_index, 0);
        assert_eq!(result.labels["side"], "left");
    }

    #[test]
    fn classify_agrees_with_exhaustive_scan() {
        let data = generate(&separable_spec(6)).unwrap();
        let attributes = vec!["first".to_string(), "second".to_string()];
        let outcome =
            train_centroid_classifier(&data, &attributes, &[2, 4], &KMeansConfig::new(4, 7))
                .unwrap();
        let classifier = &outcome.classifier;
        let mut rng = ChaCha20Rng::seed_from_u64(55);
        for _ in 0..500 {
            let query: Vec<f64> = (0..8).map(|_| rng.random_range(-12.0..12.0)).collect();
            let got = classify(classifier, &query, None).unwrap();
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, entry) in classifier.entries().iter().enumerate() {
                let d = euclidean_distance(&query, &entry.centroid).unwrap();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            assert_eq!(got.entry_index, best);
            assert_eq!(got.distance, best_d);
        }
    }

    #[test]
    fn level_filter_restricts_the_candidate_set() {
        let data = generate(&separable_spec(7)).unwrap();
        let attributes = vec!["first".to_string(), "second".to_string()];
        let outcome =
            train_centroid_classifier(&data, &attributes, &[2, 4], &KMeansConfig::new(4, 3))
                .unwrap();
        let classifier = &outcome.classifier;
        let query: Vec<f64> = classifier.entries()[0].centroid.clone();
        let at2 = classify(classifier, &query, Some(2)).unwrap();
        assert_eq!(at2.level, 2);
        let at4 = classify(classifier, &query, Some(4)).unwrap();
        assert_eq!(at4.level, 4);
        assert!(matches!(
            classify(classifier, &query, Some(8)),
            Err(Error::EmptyLevel { level: 8 })
        ));
    }

    #[test]
    fn classify_is_knn_over_the_centroid_gallery() {
        let data = generate(&separable_spec(8)).unwrap();
        let attributes = vec!["first".to_string(), "second".to_string()];
        let outcome =
            train_centroid_classifier(&data, &attributes, &[2, 4], &KMeansConfig::new(4, 5))
                .unwrap();
        let classifier = &outcome.classifier;
        // gallery with one record per centroid, identity = entry index
        let schema = schema_of([(
            "entry",
            (0..classifier.entries().len())
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>()
                .as_slice(),
        )]);
        let records: Vec<EmbeddingRecord> = classifier
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                EmbeddingRecord::new(
                    format!("g{i}"),
                    e.centroid.clone(),
                    [("entry".to_string(), i.to_string())],
                )
            })
            .collect();
        let gallery = Dataset::validate(records, schema).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(66);
        for _ in 0..200 {
            let query: Vec<f64> = (0..8).map(|_| rng.random_range(-12.0..12.0)).collect();
            let via_classify = classify(classifier, &query, None).unwrap();
            let via_knn = knn_identify(&gallery, "entry", &query, 1, f64::INFINITY).unwrap();
            let Identification::Identified { identity, distance } = via_knn else {
                panic!("infinite threshold cannot reject");
            };
            assert_eq!(identity, via_classify.entry_index.to_string());
            assert_eq!(distance, via_classify.distance);
        }
    }

    #[test]
    fn translating_data_and_query_together_keeps_labels() {
        let spec = separable_spec(9);
        let data = generate(&spec).unwrap();
        let offset: Vec<f64> = (0..8).map(|i| 40.0 + i as f64 * 3.0).collect();
        let shifted_records: Vec<EmbeddingRecord> = data
            .records()
            .iter()
            .map(|r| {
                let vector = r
                    .vector
                    .iter()
                    .zip(offset.iter())
                    .map(|(x, o)| x + o)
                    .collect();
                EmbeddingRecord::new(r.id.clone(), vector, r.labels.clone())
            })
            .collect();
        let shifted = Dataset::validate(shifted_records, data.schema().clone()).unwrap();
        let attributes = vec!["first".to_string(), "second".to_string()];
        let config = KMeansConfig::new(4, 13);
        let base = train_centroid_classifier(&data, &attributes, &[4], &config).unwrap();
        let moved = train_centroid_classifier(&shifted, &attributes, &[4], &config).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for _ in 0..100 {
            let query: Vec<f64> = (0..8).map(|_| rng.random_range(-12.0..12.0)).collect();
            let shifted_query: Vec<f64> = query
                .iter()
                .zip(offset.iter())
                .map(|(x, o)| x + o)
                .collect();
            let a = classify(&base.classifier, &query, None).unwrap();
            let b = classify(&moved.classifier, &shifted_query, None).unwrap();
            assert_eq!(a.labels, b.labels);
        }
    }

    fn identity_gallery() -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let ids: Vec<String> = (0..10).map(|i| format!("person{i}")).collect();
        let schema = schema_of([(
            "identity",
            ids.iter()
                .map(String::as_str)
                .collect::<Vec<_>>()
                .as_slice(),
        )]);
        let records = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let vector: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
                EmbeddingRecord::new(
                    format!("g{i}"),
                    vector,
                    [("identity".to_string(), id.clone())],
                )
            })
            .collect();
        Dataset::validate(records, schema).unwrap()
    }

    #[test]
    fn exact_gallery_match_is_identified_at_distance_zero() {
        let gallery = identity_gallery();
        let record = &gallery.records()[3];
        let result = knn_identify(
            &gallery,
            "identity",
            &record.vector,
            DEFAULT_NEIGHBOR_COUNT,
            DEFAULT_REJECTION_RADIUS,
        )
        .unwrap();
        assert_eq!(
            result,
            Identification::Identified {
                identity: "person3".to_string(),
                distance: 0.0
            }
        );
    }

    #[test]
    fn distant_queries_are_unknown() {
        let gallery = identity_gallery();
        // push the query far beyond the rejection radius from everything
        let query = vec![100.0; 16];
        let result = knn_identify(&gallery, "identity", &query, 1, 0.6).unwrap();
        assert!(
            matches!(result, Identification::Unknown { nearest_distance } if nearest_distance > 0.6)
        );
    }

    #[test]
    fn single_neighbor_lookup_matches_linear_scan() {
        let gallery = identity_gallery();
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for _ in 0..200 {
            let query: Vec<f64> = (0..16).map(|_| rng.random_range(-1.5..1.5)).collect();
            let got = knn_identify(&gallery, "identity", &query, 1, f64::INFINITY).unwrap();
            let best = gallery
                .records()
                .iter()
                .min_by(|a, b| {
                    euclidean_distance(&query, &a.vector)
                        .unwrap()
                        .total_cmp(&euclidean_distance(&query, &b.vector).unwrap())
                })
                .unwrap();
            assert_eq!(
                got,
                Identification::Identified {
                    identity: best.labels["identity"].clone(),
                    distance: euclidean_distance(&query, &best.vector).unwrap()
                }
            );
        }
    }

    #[test]
    fn majority_vote_with_three_neighbors() {
        let schema = schema_of([("identity", ["a", "b"].as_slice())]);
        let records = vec![
            EmbeddingRecord::new("r0", vec![0.0], [("identity".to_string(), "a".to_string())]),
            EmbeddingRecord::new("r1", vec![0.3], [("identity".to_string(), "b".to_string())]),
            EmbeddingRecord::new("r2", vec![0.4], [("identity".to_string(), "b".to_string())]),
            EmbeddingRecord::new("r3", vec![5.0], [("identity".to_string(), "a".to_string())]),
        ];
        let gallery = Dataset::validate(records, schema).unwrap();
        let result = knn_identify(&gallery, "identity", &[0.1], 3, 10.0).unwrap();
        // neighbors: r0 (a, 0.1), r1 (b, 0.2), r2 (b, 0.3) -> b wins 2:1
        assert!(matches!(
            result,
            Identification::Identified { identity, .. } if identity == "b"
        ));
    }
}
