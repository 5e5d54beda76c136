use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::search::Heatmap;

/// One entry of a submission file. Exactly one of `tour`, `heatmap` and
/// `heatmap_file` must be set; `heatmap_file` is resolved relative to the
/// submission file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmissionEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tour: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap_file: Option<String>,
}

/// A model's output on a dataset, as read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSubmission {
    pub model: String,
    /// Construction the model was meant to be decoded with, used when the
    /// command line does not name one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<String>,
    pub entries: Vec<SubmissionEntry>,
}

/// A resolved entry.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    Tour(Vec<usize>),
    Heatmap(Heatmap),
}

/// A submission checked against a dataset, entries in manifest order.
#[derive(Debug, Clone)]
pub struct ResolvedSubmission {
    pub model: String,
    pub construction: Option<String>,
    pub outputs: Vec<ModelOutput>,
}

impl ModelSubmission {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    /// Checks that every dataset instance appears exactly once and loads
    /// heatmap files. `base` is the directory relative file names resolve
    /// against.
    pub fn resolve(self, dataset: &Dataset, base: &Path) -> Result<ResolvedSubmission> {
        let mut slots: Vec<Option<ModelOutput>> = vec![None; dataset.len()];
        for entry in self.entries {
            let Some(i) = dataset.position(&entry.id) else {
                return Err(Error::Dataset(format!(
                    "submission entry {} is not in dataset {}",
                    entry.id,
                    dataset.id()
                )));
            };
            if slots[i].is_some() {
                return Err(Error::Dataset(format!(
                    "submission covers {} more than once",
                    entry.id
                )));
            }
            let output = match (entry.tour, entry.heatmap, entry.heatmap_file) {
                (Some(t), None, None) => ModelOutput::Tour(t),
                (None, Some(rows), None) => ModelOutput::Heatmap(
                    Heatmap::from_rows(rows).map_err(|e| in_entry(&entry.id, e))?,
                ),
                (None, None, Some(file)) => ModelOutput::Heatmap(
                    Heatmap::load(&base.join(file)).map_err(|e| in_entry(&entry.id, e))?,
                ),
                _ => {
                    return Err(Error::Dataset(format!(
                        "submission entry {} must set exactly one of tour, heatmap, heatmap_file",
                        entry.id
                    )))
                }
            };
            slots[i] = Some(output);
        }
        let missing: Vec<&str> = slots
            .iter()
            .zip(dataset.ids())
            .filter(|(s, _)| s.is_none())
            .map(|(_, id)| id)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Dataset(format!(
                "submission does not cover {} instance(s): {}",
                missing.len(),
                missing.join(", ")
            )));
        }
        Ok(ResolvedSubmission {
            model: self.model,
            construction: self.construction,
            outputs: slots.into_iter().map(Option::unwrap).collect(),
        })
    }
}

fn in_entry(id: &str, e: Error) -> Error {
    Error::Dataset(format!("submission entry {id}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, tour: Vec<usize>) -> SubmissionEntry {
        SubmissionEntry {
            id: id.into(),
            tour: Some(tour),
            heatmap: None,
            heatmap_file: None,
        }
    }

    #[test]
    fn coverage_is_enforced() {
        let ds = Dataset::generate(4, 2, 0).unwrap();
        let base = Path::new(".");
        let full = ModelSubmission {
            model: "m".into(),
            construction: None,
            entries: vec![
                entry("inst_0001", vec![0, 1, 2, 3]),
                entry("inst_0000", vec![3, 2, 1, 0]),
            ],
        };
        let r = full.clone().resolve(&ds, base).unwrap();
        assert_eq!(r.outputs[0], ModelOutput::Tour(vec![3, 2, 1, 0]));

        let mut dup = full.clone();
        dup.entries[1].id = "inst_0001".into();
        assert!(dup.resolve(&ds, base).is_err());

        let mut short = full.clone();
        short.entries.pop();
        assert!(short
            .resolve(&ds, base)
            .unwrap_err()
            .to_string()
            .contains("inst_0000"));

        let mut both = full;
        both.entries[0].heatmap = Some(vec![vec![0.0; 4]; 4]);
        assert!(both.resolve(&ds, base).is_err());
    }

    #[test]
    fn parses_heatmap_entries() {
        let text = r#"{"model": "m", "entries": [
            {"id": "inst_0000", "heatmap": [[0,1,1],[1,0,1],[1,1,0]]}
        ]}"#;
        let s: ModelSubmission = serde_json::from_str(text).unwrap();
        let ds = Dataset::generate(3, 1, 0).unwrap();
        let r = s.resolve(&ds, Path::new(".")).unwrap();
        assert!(matches!(r.outputs[0], ModelOutput::Heatmap(_)));
    }
}
