//! Scoring unlabeled clusterings against attribute labels: optimal
//! cluster→class alignment, confusion matrices, per-class recall, multi-run
//! averaging, and the cluster-count sweep that exposes which attributes the
//! embedding space resolves first.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hungarian::align_clusters;
use crate::kmeans::{kmeans_fit, KMeansConfig};

/// Display form of a composite class: attribute values joined in attribute
/// order.
pub fn composite_label(values: &[String]) -> String {
    values.join("|")
}

/// One clustering scored against the composite of the requested attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    /// The attributes whose composite defines the classes, in request order.
    pub attributes: Vec<String>,
    /// Class labels in row/column order of `confusion`.
    pub class_labels: Vec<String>,
    /// Attribute values of each class, parallel to `class_labels`.
    pub class_values: Vec<Vec<String>>,
    /// Class index each cluster maps to.
    pub cluster_to_class: Vec<usize>,
    /// Counts; rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    /// Recall per class after alignment.
    pub per_class_accuracy: BTreeMap<String, f64>,
    pub overall_accuracy: f64,
}

impl AlignmentReport {
    /// Label assigned to a cluster index.
    pub fn mapped_label(&self, cluster: usize) -> Option<&str> {
        self.cluster_to_class
            .get(cluster)
            .map(|&class| self.class_labels[class].as_str())
    }

    /// Attribute values assigned to a cluster, as a label map.
    pub fn mapped_values(&self, cluster: usize) -> Option<BTreeMap<String, String>> {
        self.cluster_to_class.get(cluster).map(|&class| {
            self.attributes
                .iter()
                .cloned()
                .zip(self.class_values[class].iter().cloned())
                .collect()
        })
    }

    pub fn record_count(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Fraction of records whose predicted value for `attribute` matches the
    /// true one, marginalizing the confusion matrix over the other
    /// attributes. `None` if the attribute was not evaluated.
    pub fn attribute_accuracy(&self, attribute: &str) -> Option<f64> {
        let position = self.attributes.iter().position(|a| a == attribute)?;
        let mut agree = 0u64;
        let mut total = 0u64;
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, &count) in row.iter().enumerate() {
                total += count;
                if self.class_values[t][position] == self.class_values[p][position] {
                    agree += count;
                }
            }
        }
        Some(agree as f64 / total as f64)
    }
}

/// Scores cluster assignments against the composite of `attributes`.
///
/// The cluster→class mapping is the agreement-maximizing assignment on the
/// cluster-by-class contingency matrix; with more clusters than classes every
/// class keeps exactly one core cluster and surplus clusters take their own
/// best class. Per-class accuracy is recall after this relabeling.
pub fn align_and_score(
    assignments: &[usize],
    data: &Dataset,
    attributes: &[String],
) -> Result<AlignmentReport> {
    if data.is_empty() {
        return Err(Error::NoRecords);
    }
    if assignments.len() != data.len() {
        return Err(Error::AssignmentCountMismatch {
            expected: data.len(),
            actual: assignments.len(),
        });
    }
    if attributes.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "at least one attribute is required".to_string(),
        });
    }

    let mut record_values = Vec::with_capacity(data.len());
    let mut class_set: BTreeSet<Vec<String>> = BTreeSet::new();
    for record in data.records() {
        let values: Vec<String> = attributes
            .iter()
            .map(|a| data.label_of(record, a))
            .collect::<Result<_>>()?;
        class_set.insert(values.clone());
        record_values.push(values);
    }
    let class_values: Vec<Vec<String>> = class_set.into_iter().collect();
    let class_index: BTreeMap<&[String], usize> = class_values
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_slice(), i))
        .collect();
    let classes = class_values.len();

    let clusters = assignments.iter().copied().max().unwrap_or(0) + 1;
    let mut contingency = vec![vec![0u64; classes]; clusters];
    let mut true_classes = Vec::with_capacity(data.len());
    for (&cluster, values) in assignments.iter().zip(record_values.iter()) {
        let class = class_index[values.as_slice()];
        contingency[cluster][class] += 1;
        true_classes.push(class);
    }

    let cluster_to_class = align_clusters(&contingency);

    let mut confusion = vec![vec![0u64; classes]; classes];
    for (&cluster, &truth) in assignments.iter().zip(true_classes.iter()) {
        confusion[truth][cluster_to_class[cluster]] += 1;
    }
    let class_labels: Vec<String> = class_values.iter().map(|v| composite_label(v)).collect();
    let mut per_class_accuracy = BTreeMap::new();
    let mut correct = 0u64;
    for (c, row) in confusion.iter().enumerate() {
        let row_sum: u64 = row.iter().sum();
        correct += row[c];
        per_class_accuracy.insert(class_labels[c].clone(), row[c] as f64 / row_sum as f64);
    }
    let overall_accuracy = correct as f64 / data.len() as f64;

    Ok(AlignmentReport {
        attributes: attributes.to_vec(),
        class_labels,
        class_values,
        cluster_to_class,
        confusion,
        per_class_accuracy,
        overall_accuracy,
    })
}

/// Arithmetic means of accuracies across runs of the same evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedAccuracies {
    pub runs: usize,
    pub per_class: BTreeMap<String, f64>,
    pub per_attribute: BTreeMap<String, f64>,
    pub overall_accuracy: f64,
}

/// Averages per-class, per-attribute, and overall accuracy across reports.
/// All reports must cover the same attribute and class sets.
pub fn average_runs(reports: &[AlignmentReport]) -> Result<AveragedAccuracies> {
    let first = reports.first().ok_or(Error::EmptyList)?;
    for report in &reports[1..] {
        if report.class_labels != first.class_labels || report.attributes != first.attributes {
            return Err(Error::SchemaMismatch);
        }
    }
    let runs = reports.len() as f64;
    let mut per_class = BTreeMap::new();
    for label in &first.class_labels {
        let mean = reports
            .iter()
            .map(|r| r.per_class_accuracy[label])
            .sum::<f64>()
            / runs;
        per_class.insert(label.clone(), mean);
    }
    let mut per_attribute = BTreeMap::new();
    for attribute in &first.attributes {
        let mean = reports
            .iter()
            .map(|r| {
                r.attribute_accuracy(attribute)
                    .expect("attribute evaluated")
            })
            .sum::<f64>()
            / runs;
        per_attribute.insert(attribute.clone(), mean);
    }
    let overall_accuracy = reports.iter().map(|r| r.overall_accuracy).sum::<f64>() / runs;
    Ok(AveragedAccuracies {
        runs: reports.len(),
        per_class,
        per_attribute,
        overall_accuracy,
    })
}

/// Score of one attribute subset at one cluster count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub attributes: Vec<String>,
    pub overall_accuracy: f64,
}

/// Outcome of one cluster count in the hierarchy sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyLevel {
    pub cluster_count: usize,
    /// The best-scoring attribute subset: what this level resolves.
    pub attributes: Vec<String>,
    /// Restart-averaged overall accuracy of the best subset.
    pub overall_accuracy: f64,
    /// Restart-averaged per-attribute accuracy within the best subset.
    pub attribute_accuracies: BTreeMap<String, f64>,
    /// Every candidate subset with its averaged accuracy, in enumeration order.
    pub candidates: Vec<SubsetScore>,
}

/// Result of probing which attributes successive cluster counts resolve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub levels: Vec<HierarchyLevel>,
    /// Attributes ordered by the level at which they first become resolved,
    /// most dominant first.
    pub dominance_order: Vec<String>,
}

fn subsets_of_size(items: &[String], size: usize) -> Vec<Vec<String>> {
    fn rec(
        items: &[String],
        size: usize,
        start: usize,
        current: &mut Vec<String>,
        out: &mut Vec<Vec<String>>,
    ) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in start..items.len() {
            current.push(items[i].clone());
            rec(items, size, i + 1, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, size, 0, &mut Vec::new(), &mut out);
    out
}

/// Fits K-Means at each requested cluster count `2^m` (multi-restart, scores
/// averaged across restarts) and scores every m-subset of the binary
/// attributes; the best subset defines what that level resolves. The
/// dominance order lists attributes by the level at which they first appear
/// in a best subset.
pub fn hierarchy_probe(
    data: &Dataset,
    attributes: &[String],
    cluster_counts: &[usize],
    config: &KMeansConfig,
) -> Result<HierarchyReport> {
    if attributes.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "at least one attribute is required".to_string(),
        });
    }
    for attribute in attributes {
        let mut values = BTreeSet::new();
        for record in data.records() {
            values.insert(data.label_of(record, attribute)?);
        }
        if values.len() != 2 {
            return Err(Error::NonBinaryAttribute {
                attribute: attribute.clone(),
                count: values.len(),
            });
        }
    }
    let max = 1usize << attributes.len();
    let mut counts: Vec<usize> = cluster_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    if counts.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "at least one cluster count is required".to_string(),
        });
    }
    for &count in &counts {
        if !count.is_power_of_two() || count < 2 || count > max {
            return Err(Error::InvalidClusterCount { count, max });
        }
    }

    let mut levels = Vec::with_capacity(counts.len());
    let mut dominance_order: Vec<String> = Vec::new();
    for &count in &counts {
        let subset_size = count.trailing_zeros() as usize;
        let models = kmeans_fit(data, &config.clone().with_k(count))?;
        let mut candidates = Vec::new();
        let mut best: Option<(usize, f64, Vec<AlignmentReport>)> = None;
        for (index, subset) in subsets_of_size(attributes, subset_size)
            .into_iter()
            .enumerate()
        {
            let reports: Vec<AlignmentReport> = models
                .iter()
                .map(|m| align_and_score(&m.assignments, data, &subset))
                .collect::<Result<_>>()?;
            let mean =
                reports.iter().map(|r| r.overall_accuracy).sum::<f64>() / reports.len() as f64;
            candidates.push(SubsetScore {
                attributes: subset,
                overall_accuracy: mean,
            });
            if best.as_ref().is_none_or(|(_, acc, _)| mean > *acc) {
                best = Some((index, mean, reports));
            }
        }
        let (best_index, overall_accuracy, reports) = best.expect("at least one subset");
        let best_subset = candidates[best_index].attributes.clone();
        let mut attribute_accuracies = BTreeMap::new();
        for attribute in &best_subset {
            let mean = reports
                .iter()
                .map(|r| {
                    r.attribute_accuracy(attribute)
                        .expect("attribute evaluated")
                })
                .sum::<f64>()
                / reports.len() as f64;
            attribute_accuracies.insert(attribute.clone(), mean);
        }
        for attribute in attributes {
            if best_subset.contains(attribute) && !dominance_order.contains(attribute) {
                dominance_order.push(attribute.clone());
            }
        }
        levels.push(HierarchyLevel {
            cluster_count: count,
            attributes: best_subset,
            overall_accuracy,
            attribute_accuracies,
            candidates,
        });
    }
    // Attributes never resolved at any probed level trail in request order.
    for attribute in attributes {
        if !dominance_order.contains(attribute) {
            dominance_order.push(attribute.clone());
        }
    }

    Ok(HierarchyReport {
        levels,
        dominance_order,
    })
}
