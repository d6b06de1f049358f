//! Run reports: the structured output of every CLI command, serializable as
//! JSON (machine) or rendered as fixed-width tables (human).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::align::{AlignmentReport, AveragedAccuracies, HierarchyReport};
use crate::classifier::LevelTraining;
use crate::error::{Error, Result};

/// Everything one command run produced. Sections are populated per command;
/// absent sections are omitted from the JSON so reports stay diff-friendly.
///
/// `duration_ms` is `None` unless timing was explicitly requested, so that
/// identical seeds produce byte-identical report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunReport {
    /// The subcommand that ran.
    pub command: String,
    /// Echo of the effective parameters, name → rendered value.
    pub parameters: BTreeMap<String, String>,
    /// Per-restart alignments, in restart order.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub runs: Vec<AlignmentReport>,
    /// Averages over `runs`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub averages: Option<AveragedAccuracies>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hierarchy: Option<HierarchyReport>,
    /// Per-level training evidence plus where the model file went.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub training: Vec<LevelTraining>,
    /// Named accuracy summaries (for example test-split evaluations).
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub evaluations: BTreeMap<String, AveragedAccuracies>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub duration_ms: Option<u64>,
}

impl RunReport {
    pub fn new(command: impl Into<String>) -> Self {
        RunReport {
            command: command.into(),
            ..RunReport::default()
        }
    }

    pub fn parameter(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(name.to_string(), value.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "report".to_string(),
            line: 1,
            message: e.to_string(),
        })
    }

    /// Human-readable rendering.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        for (name, value) in &self.parameters {
            let _ = writeln!(out, "  {name}: {value}");
        }
        if !self.runs.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "per-class accuracy");
            let mut header = format!("{:<24}", "class");
            for run in 1..=self.runs.len() {
                let _ = write!(header, "{:>9}", format!("run {run}"));
            }
            let _ = write!(header, "{:>10}", "average");
            let _ = writeln!(out, "{header}");
            let first = &self.runs[0];
            for label in &first.class_labels {
                let mut row = format!("{label:<24}");
                for run in &self.runs {
                    let cell = format!("{:.1}%", run.per_class_accuracy[label] * 100.0);
                    let _ = write!(row, "{cell:>9}");
                }
                if let Some(avg) = &self.averages {
                    let cell = format!("{:.1}%", avg.per_class[label] * 100.0);
                    let _ = write!(row, "{cell:>10}");
                }
                let _ = writeln!(out, "{row}");
            }
            if let Some(avg) = &self.averages {
                let _ = writeln!(out);
                for (attribute, accuracy) in &avg.per_attribute {
                    let _ = writeln!(
                        out,
                        "attribute {attribute}: average accuracy {:.1}%",
                        accuracy * 100.0
                    );
                }
                let _ = writeln!(
                    out,
                    "overall: average accuracy {:.1}%",
                    avg.overall_accuracy * 100.0
                );
            }
        }
        if let Some(hierarchy) = &self.hierarchy {
            let _ = writeln!(out);
            let _ = writeln!(out, "hierarchy probe");
            for level in &hierarchy.levels {
                let _ = writeln!(
                    out,
                    "  {:>3} clusters -> resolves [{}] at {:.1}%",
                    level.cluster_count,
                    level.attributes.join(", "),
                    level.overall_accuracy * 100.0
                );
                for candidate in &level.candidates {
                    let _ = writeln!(
                        out,
                        "        candidate [{}] {:.1}%",
                        candidate.attributes.join(", "),
                        candidate.overall_accuracy * 100.0
                    );
                }
            }
            let _ = writeln!(
                out,
                "dominance order: {}",
                hierarchy.dominance_order.join(" > ")
            );
        }
        if !self.training.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "training");
            for level in &self.training {
                let accuracies: Vec<String> = level
                    .restart_accuracies
                    .iter()
                    .map(|a| format!("{:.1}%", a * 100.0))
                    .collect();
                let _ = writeln!(
                    out,
                    "  {:>3} clusters: restarts [{}], kept restart {} at {:.1}%",
                    level.cluster_count,
                    accuracies.join(", "),
                    level.selected_restart,
                    level.report.overall_accuracy * 100.0
                );
            }
        }
        for (name, summary) in &self.evaluations {
            let _ = writeln!(out);
            let _ = writeln!(out, "{name}");
            for (attribute, accuracy) in &summary.per_attribute {
                let _ = writeln!(out, "  attribute {attribute}: {:.1}%", accuracy * 100.0);
            }
            let _ = writeln!(out, "  overall: {:.1}%", summary.overall_accuracy * 100.0);
        }
        if let Some(ms) = self.duration_ms {
            let _ = writeln!(out);
            let _ = writeln!(out, "duration: {ms} ms");
        }
        out
    }
}
