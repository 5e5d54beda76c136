use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{import_references, write_references, ReferenceSolution};
use crate::seed::derive_seed;
use crate::tsp::TspInstance;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REFERENCES_FILE: &str = "references.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    /// Hex FNV-1a fingerprint of the instance coordinates.
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub n: usize,
    pub count: usize,
    /// Instance `i` is generated from `derive_seed(seed, [i])`.
    pub seed: u64,
    pub instances: Vec<ManifestEntry>,
}

/// A set of instances bound to the seed that generated them.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub instances: Vec<TspInstance>,
    dir: Option<PathBuf>,
}

fn instance_id(i: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(4);
    format!("inst_{i:0width$}")
}

impl Dataset {
    pub fn generate(n: usize, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter(
                "dataset count must be at least 1".into(),
            ));
        }
        let instances = (0..count)
            .into_par_iter()
            .map(|i| TspInstance::generate(n, derive_seed(seed, &[i as u64])))
            .collect::<Result<Vec<_>>>()?;
        let entries = instances
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                let id = instance_id(i, count);
                ManifestEntry {
                    file: format!("{id}.json"),
                    id,
                    fingerprint: format!("{:016x}", inst.fingerprint()),
                }
            })
            .collect();
        Ok(Self {
            manifest: Manifest {
                id: format!("tsp{n}-x{count}-seed{seed}"),
                n,
                count,
                seed,
                instances: entries,
            },
            instances,
            dir: None,
        })
    }

    /// Writes the manifest and one JSON file per instance. A non-empty
    /// directory is refused unless `overwrite` is set.
    pub fn write(&mut self, dir: &Path, overwrite: bool) -> Result<()> {
        if dir.exists() {
            let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
            if entries.next().is_some() {
                if !overwrite {
                    return Err(Error::Dataset(format!(
                        "{} exists and is not empty; pass --overwrite to replace it",
                        dir.display()
                    )));
                }
                fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (entry, inst) in self.manifest.instances.iter().zip(&self.instances) {
            let path = dir.join(&entry.file);
            fs::write(&path, inst.to_json()).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join(MANIFEST_FILE);
        let mut text =
            serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::json(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.dir = Some(dir.to_path_buf());
        Ok(())
    }

    /// Loads and validates a dataset directory: the manifest count must match
    /// its entries and the instance files on disk, and every file must match
    /// its recorded fingerprint.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
        if manifest.count != manifest.instances.len() {
            return Err(Error::Dataset(format!(
                "manifest declares {} instances but lists {}",
                manifest.count,
                manifest.instances.len()
            )));
        }
        let on_disk = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| {
                let name = e.file_name();
                let name = name.to_string_lossy();
                name.starts_with("inst_") && name.ends_with(".json")
            })
            .count();
        if on_disk != manifest.count {
            return Err(Error::Dataset(format!(
                "manifest declares {} instances but {} instance files are present in {}",
                manifest.count,
                on_disk,
                dir.display()
            )));
        }
        let instances = manifest
            .instances
            .par_iter()
            .map(|entry| {
                let path = dir.join(&entry.file);
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let inst = TspInstance::from_json(&text)?;
                if inst.n() != manifest.n {
                    return Err(Error::Dataset(format!(
                        "{}: {} vertices, manifest says {}",
                        entry.id,
                        inst.n(),
                        manifest.n
                    )));
                }
                if format!("{:016x}", inst.fingerprint()) != entry.fingerprint {
                    return Err(Error::Dataset(format!(
                        "{}: fingerprint does not match the manifest",
                        entry.id
                    )));
                }
                Ok(inst)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            manifest,
            instances,
            dir: Some(dir.to_path_buf()),
        })
    }

    pub fn id(&self) -> &str {
        &self.manifest.id
    }

    pub fn n(&self) -> usize {
        self.manifest.n
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.manifest.instances.iter().map(|e| e.id.as_str())
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.manifest.instances.iter().position(|e| e.id == id)
    }

    pub fn instance(&self, id: &str) -> Option<&TspInstance> {
        self.position(id).map(|i| &self.instances[i])
    }

    fn require_dir(&self) -> Result<&Path> {
        self.dir
            .as_deref()
            .ok_or_else(|| Error::Dataset("dataset has not been written to disk".into()))
    }

    pub fn references_path(&self) -> Result<PathBuf> {
        Ok(self.require_dir()?.join(REFERENCES_FILE))
    }

    /// Writes references in manifest order.
    pub fn write_references(&self, references: &[ReferenceSolution]) -> Result<()> {
        write_references(&self.references_path()?, references)
    }

    /// Reads the dataset's reference file, in manifest order. Fails if any
    /// record is rejected, duplicated, or any instance lacks a reference.
    pub fn load_references(&self) -> Result<Vec<ReferenceSolution>> {
        let path = self.references_path()?;
        if !path.exists() {
            return Err(Error::MissingReferences(
                self.ids().map(String::from).collect(),
            ));
        }
        self.import(&path)
    }

    /// Imports an external reference file against this dataset, with the
    /// same checks as [`Dataset::load_references`].
    pub fn import(&self, path: &Path) -> Result<Vec<ReferenceSolution>> {
        let outcome = import_references(path, |id| self.instance(id))?;
        if !outcome.rejected.is_empty() {
            let reasons: Vec<String> = outcome
                .rejected
                .iter()
                .map(|r| format!("{}: {}", r.id, r.reason))
                .collect();
            return Err(Error::Dataset(format!(
                "{} reference record(s) rejected: {}",
                reasons.len(),
                reasons.join("; ")
            )));
        }
        let mut slots: Vec<Option<ReferenceSolution>> = vec![None; self.len()];
        for r in outcome.accepted {
            let i = self.position(&r.id).expect("import only accepts known ids");
            if slots[i].is_some() {
                return Err(Error::Dataset(format!("duplicate reference for {}", r.id)));
            }
            slots[i] = Some(r);
        }
        let missing: Vec<String> = slots
            .iter()
            .zip(self.ids())
            .filter(|(s, _)| s.is_none())
            .map(|(_, id)| id.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingReferences(missing));
        }
        Ok(slots.into_iter().map(Option::unwrap).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_zero_padded() {
        assert_eq!(instance_id(7, 100), "inst_0007");
        assert_eq!(instance_id(7, 100_000), "inst_00007");
    }

    #[test]
    fn write_load_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("d");
        let mut ds = Dataset::generate(8, 5, 3).unwrap();
        ds.write(&dir, false).unwrap();
        let back = Dataset::load(&dir).unwrap();
        assert_eq!(back.manifest, ds.manifest);
        assert_eq!(back.instances, ds.instances);
        assert!(ds.write(&dir, false).is_err());
        ds.write(&dir, true).unwrap();
    }

    #[test]
    fn deleted_instance_fails_fast() {
        let tmp = tempfile::tempdir().unwrap();
        let mut ds = Dataset::generate(5, 3, 0).unwrap();
        ds.write(tmp.path(), false).unwrap();
        fs::remove_file(tmp.path().join("inst_0001.json")).unwrap();
        let err = Dataset::load(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("2 instance files"), "{err}");
    }

    #[test]
    fn tampered_instance_is_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let mut ds = Dataset::generate(5, 2, 0).unwrap();
        ds.write(tmp.path(), false).unwrap();
        let other = TspInstance::generate(5, 99).unwrap();
        fs::write(tmp.path().join("inst_0000.json"), other.to_json()).unwrap();
        assert!(Dataset::load(tmp.path()).is_err());
    }
}
