//! JSON dataset manifests: which cases exist and which pool each starts in.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Labeled,
    Unlabeled,
    Test,
}

/// One manifest entry. Paths are stored as written and resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub id: String,
    pub volume: PathBuf,
    pub labels: Option<PathBuf>,
    pub split: Split,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    num_classes: usize,
    cases: Vec<Case>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    base_dir: PathBuf,
    cases: Vec<Case>,
}

impl DatasetManifest {
    /// Checks id uniqueness and label presence; file existence is checked by [`load_manifest`].
    pub fn new(base_dir: impl Into<PathBuf>, cases: Vec<Case>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &cases {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate case id {:?}", c.id)));
            }
            if c.split != Split::Unlabeled && c.labels.is_none() {
                return Err(Error::Manifest(format!(
                    "case {:?} is in the {:?} split but has no labels",
                    c.id, c.split
                )));
            }
        }
        Ok(Self {
            base_dir: base_dir.into(),
            cases,
        })
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn case(&self, id: &str) -> Option<&Case> {
        self.cases.iter().find(|c| c.id == id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Case> {
        self.cases.iter().filter(move |c| c.split == split)
    }

    pub fn volume_path(&self, case: &Case) -> PathBuf {
        self.base_dir.join(&case.volume)
    }

    pub fn labels_path(&self, case: &Case) -> Option<PathBuf> {
        case.labels.as_ref().map(|p| self.base_dir.join(p))
    }

    fn check_paths(&self) -> Result<()> {
        for c in &self.cases {
            let paths = std::iter::once(self.volume_path(c)).chain(self.labels_path(c));
            for p in paths {
                if !p.is_file() {
                    return Err(Error::Manifest(format!(
                        "case {:?}: dangling path {}",
                        c.id,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = ManifestFile {
            num_classes: NUM_CLASSES,
            cases: self.cases.clone(),
        };
        serde_json::to_string_pretty(&file).expect("manifest serializes") + "\n"
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ManifestFile =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    if file.num_classes != NUM_CLASSES {
        return Err(Error::Manifest(format!(
            "num_classes must be {NUM_CLASSES}, got {}",
            file.num_classes
        )));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = DatasetManifest::new(base, file.cases)?;
    m.check_paths()?;
    Ok(m)
}

pub fn save_manifest(m: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), m.to_json().as_bytes())
}
