//! Embedding records, attribute schemas, and validated datasets.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Permitted values per attribute name.
pub type AttributeSchema = BTreeMap<String, BTreeSet<String>>;

/// One embedded sample: a fixed-dimension vector plus string attribute labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

impl EmbeddingRecord {
    pub fn new(
        id: impl Into<String>,
        vector: Vec<f64>,
        labels: impl IntoIterator<Item = (String, String)>,
    ) -> Self {
        EmbeddingRecord {
            id: id.into(),
            vector,
            labels: labels.into_iter().collect(),
        }
    }
}

/// A validated collection of records sharing one dimension and label schema.
///
/// Construction goes through [`Dataset::validate`], which checks every
/// invariant once; afterwards the collection is immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dimension: usize,
    records: Vec<EmbeddingRecord>,
    schema: AttributeSchema,
}

impl Dataset {
    /// Validates `records` against `schema` and builds a dataset. The
    /// dimension is inferred from the first record.
    ///
    /// Checks, in order per record: non-empty unique id, matching dimension,
    /// finite components, and every label naming a schema attribute with a
    /// permitted value.
    pub fn validate(records: Vec<EmbeddingRecord>, schema: AttributeSchema) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::NoRecords);
        }
        let dimension = records[0].vector.len();
        if dimension == 0 {
            return Err(Error::DimensionMismatch {
                id: records[0].id.clone(),
                expected: 1,
                actual: 0,
            });
        }
        let mut seen: HashSet<&str> = HashSet::with_capacity(records.len());
        for record in &records {
            if record.id.is_empty() {
                return Err(Error::DuplicateId { id: String::new() });
            }
            if !seen.insert(record.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: record.id.clone(),
                });
            }
            if record.vector.len() != dimension {
                return Err(Error::DimensionMismatch {
                    id: record.id.clone(),
                    expected: dimension,
                    actual: record.vector.len(),
                });
            }
            if let Some(index) = record.vector.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteComponent {
                    id: record.id.clone(),
                    index,
                });
            }
            for (attribute, value) in &record.labels {
                match schema.get(attribute) {
                    None => {
                        return Err(Error::UnknownAttribute {
                            id: record.id.clone(),
                            attribute: attribute.clone(),
                        })
                    }
                    Some(permitted) if !permitted.contains(value) => {
                        return Err(Error::UnknownValue {
                            id: record.id.clone(),
                            attribute: attribute.clone(),
                            value: value.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(Dataset {
            dimension,
            records,
            schema,
        })
    }

    /// Builds a dataset from records already known to satisfy the invariants
    /// (subsets of a validated dataset).
    pub(crate) fn from_validated(
        dimension: usize,
        records: Vec<EmbeddingRecord>,
        schema: AttributeSchema,
    ) -> Self {
        Dataset {
            dimension,
            records,
            schema,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Borrowed view of every vector, in record order.
    pub fn vectors(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.vector.as_slice()).collect()
    }

    /// New dataset holding clones of the records at `indices`, in the given
    /// order. Indices must be in range.
    pub(crate) fn subset(&self, indices: &[usize]) -> Dataset {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Dataset::from_validated(self.dimension, records, self.schema.clone())
    }

    /// The label value of `record` for `attribute`, or the error naming both.
    pub(crate) fn label_of(&self, record: &EmbeddingRecord, attribute: &str) -> Result<String> {
        record
            .labels
            .get(attribute)
            .cloned()
            .ok_or_else(|| Error::MissingAttribute {
                id: record.id.clone(),
                attribute: attribute.to_string(),
            })
    }
}

/// Convenience builder for schemas: `schema_of([("gender", &["male", "female"])])`.
pub fn schema_of<'a>(
    entries: impl IntoIterator<Item = (&'a str, &'a [&'a str])>,
) -> AttributeSchema {
    entries
        .into_iter()
        .map(|(name, values)| {
            (
                name.to_string(),
                values.iter().map(|v| v.to_string()).collect(),
            )
        })
        .collect()
}
