//! Synthetic embeddings with a controllable attribute hierarchy.
//!
//! Each binary attribute contributes `±offset · direction` to a cell mean;
//! strictly decreasing offsets along orthogonal directions make earlier
//! attributes dominate the geometry, which is the structure the hierarchy
//! probe is built to detect.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeSchema, Dataset, EmbeddingRecord};
use crate::error::{Error, Result};

/// Attribute value attached to the negative side of an axis.
pub const NEGATIVE_VALUE: &str = "neg";
/// Attribute value attached to the positive side of an axis.
pub const POSITIVE_VALUE: &str = "pos";

/// How an attribute's axis direction is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Drawn from the seeded generator and orthogonalized against all
    /// preceding axes.
    #[default]
    RandomOrthogonal,
    /// Caller-supplied unit vector.
    Fixed(Vec<f64>),
}

/// One binary attribute axis: offset magnitude and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeAxis {
    pub name: String,
    pub offset: f64,
    #[serde(default)]
    pub direction: Direction,
}

impl AttributeAxis {
    pub fn random(name: impl Into<String>, offset: f64) -> Self {
        AttributeAxis {
            name: name.into(),
            offset,
            direction: Direction::RandomOrthogonal,
        }
    }
}

/// Generator spec: dimension, ordered attribute axes (most dominant first),
/// isotropic noise level, samples per cell, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub dimension: usize,
    pub attributes: Vec<AttributeAxis>,
    pub noise_sigma: f64,
    pub samples_per_cell: usize,
    pub rng_seed: u64,
}

impl HierarchySpec {
    /// Whether the noise is small enough (below a quarter of the smallest
    /// offset) that nearest-true-mean labeling is essentially error-free.
    pub fn is_separable(&self) -> bool {
        self.attributes
            .iter()
            .map(|a| a.offset)
            .fold(f64::INFINITY, f64::min)
            / 4.0
            > self.noise_sigma
    }

    pub fn cell_count(&self) -> usize {
        1usize << self.attributes.len()
    }

    fn check(&self) -> Result<()> {
        let fail = |reason: &str| Error::InvalidSpec {
            reason: reason.to_string(),
        };
        if self.attributes.is_empty() {
            return Err(fail("at least one attribute is required"));
        }
        if self.attributes.len() > self.dimension {
            return Err(fail(
                "dimension must be at least the number of attributes for orthogonal axes",
            ));
        }
        if self.attributes.len() >= usize::BITS as usize {
            return Err(fail("too many attributes"));
        }
        for axis in &self.attributes {
            if axis.name.is_empty() {
                return Err(fail("attribute names must be non-empty"));
            }
            if axis.offset.is_nan() || axis.offset <= 0.0 {
                return Err(fail("offset magnitudes must be positive"));
            }
            if let Direction::Fixed(v) = &axis.direction {
                if v.len() != self.dimension {
                    return Err(fail("fixed directions must match the dimension"));
                }
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(fail("fixed directions must be unit vectors"));
                }
            }
        }
        for pair in self.attributes.windows(2) {
            if pair[1].offset >= pair[0].offset {
                return Err(fail(
                    "offset magnitudes must be strictly decreasing, most dominant first",
                ));
            }
        }
        if self.noise_sigma.is_nan() || self.noise_sigma <= 0.0 {
            return Err(fail("noise sigma must be positive"));
        }
        if self.samples_per_cell == 0 {
            return Err(fail("samples per cell must be at least 1"));
        }
        let names: std::collections::BTreeSet<&str> =
            self.attributes.iter().map(|a| a.name.as_str()).collect();
        if names.len() != self.attributes.len() {
            return Err(fail("attribute names must be distinct"));
        }
        Ok(())
    }
}

/// Orthonormal axis directions: fixed ones pass through, random ones are
/// Gram-Schmidt orthogonalized against everything before them.
fn resolve_directions(spec: &HierarchySpec, rng: &mut ChaCha20Rng) -> Result<Vec<Vec<f64>>> {
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(spec.attributes.len());
    for axis in &spec.attributes {
        match &axis.direction {
            Direction::Fixed(v) => directions.push(v.clone()),
            Direction::RandomOrthogonal => {
                // Redraw on (vanishingly unlikely) near-collinear draws.
                loop {
                    let mut candidate: Vec<f64> = (0..spec.dimension)
                        .map(|_| StandardNormal.sample(rng))
                        .collect();
                    for existing in &directions {
                        let dot: f64 = candidate
                            .iter()
                            .zip(existing.iter())
                            .map(|(a, b)| a * b)
                            .sum();
                        for (c, e) in candidate.iter_mut().zip(existing.iter()) {
                            *c -= dot * e;
                        }
                    }
                    let norm: f64 = candidate.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-6 {
                        candidate.iter_mut().for_each(|c| *c /= norm);
                        directions.push(candidate);
                        break;
                    }
                }
            }
        }
    }
    Ok(directions)
}

/// Mean of cell `cell`: bit `i` of the cell index picks the sign of axis `i`.
pub fn cell_mean(spec: &HierarchySpec, directions: &[Vec<f64>], cell: usize) -> Vec<f64> {
    let mut mean = vec![0.0f64; spec.dimension];
    for (i, axis) in spec.attributes.iter().enumerate() {
        let sign = if (cell >> i) & 1 == 1 { 1.0 } else { -1.0 };
        for (m, d) in mean.iter_mut().zip(directions[i].iter()) {
            *m += sign * axis.offset * d;
        }
    }
    mean
}

/// Labels of cell `cell`, parallel to [`cell_mean`].
pub fn cell_labels(spec: &HierarchySpec, cell: usize) -> BTreeMap<String, String> {
    spec.attributes
        .iter()
        .enumerate()
        .map(|(i, axis)| {
            let value = if (cell >> i) & 1 == 1 {
                POSITIVE_VALUE
            } else {
                NEGATIVE_VALUE
            };
            (axis.name.clone(), value.to_string())
        })
        .collect()
}

/// Axis directions exactly as [`generate`] will use them, for oracle checks.
pub fn directions_for(spec: &HierarchySpec) -> Result<Vec<Vec<f64>>> {
    spec.check()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.rng_seed);
    resolve_directions(spec, &mut rng)
}

/// Generates `samples_per_cell` records around each of the `2^m` cell means,
/// labeled with the cell's attribute values. Deterministic under the seed.
pub fn generate(spec: &HierarchySpec) -> Result<Dataset> {
    spec.check()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.rng_seed);
    let directions = resolve_directions(spec, &mut rng)?;

    let schema: AttributeSchema = spec
        .attributes
        .iter()
        .map(|axis| {
            (
                axis.name.clone(),
                [NEGATIVE_VALUE.to_string(), POSITIVE_VALUE.to_string()]
                    .into_iter()
                    .collect(),
            )
        })
        .collect();

    let cells = spec.cell_count();
    let mut records = Vec::with_capacity(cells * spec.samples_per_cell);
    for cell in 0..cells {
        let mean = cell_mean(spec, &directions, cell);
        let labels = cell_labels(spec, cell);
        for sample in 0..spec.samples_per_cell {
            let vector: Vec<f64> = mean
                .iter()
                .map(|m| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    m + spec.noise_sigma * noise
                })
                .collect();
            records.push(EmbeddingRecord {
                id: format!("c{cell:02}-s{sample:04}"),
                vector,
                labels: labels.clone(),
            });
        }
    }
    Dataset::validate(records, schema)
}
