//! Adapter for classifiers that live in another process.
//!
//! Protocol (version 1):
//!
//! * Every patch is written as `<id>.png` into a fresh temporary directory
//!   next to `manifest.json`:
//!   `{"version":1,"labels":[...],"patches":[{"id":"...","png_path":"..."}]}`
//! * The command runs as `<program> [args...] <manifest-path>`.
//! * On success it exits 0 and prints a JSON array on stdout:
//!   `[{"id":"...","label":"...","confidence":0.93}, ...]`, one entry per
//!   manifest id, in any order.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierVerdict, Patch};
use crate::error::{Error, Result};
use crate::imgcore::{encode_png, PixelImage};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub png_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub labels: Vec<String>,
    pub patches: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseEntry {
    pub id: String,
    pub label: String,
    pub confidence: f64,
}

/// External process classifier. Calls are serialized: one process per batch.
#[derive(Clone, Debug)]
pub struct ExternalClassifier {
    pub program: String,
    pub args: Vec<String>,
    pub labels: Vec<String>,
}

impl ExternalClassifier {
    /// `command` is split on whitespace; the first word is the program.
    pub fn new(command: &str, labels: Vec<String>) -> Result<Self> {
        let mut words = command.split_whitespace().map(str::to_string);
        let program = words
            .next()
            .ok_or_else(|| Error::Config("external classifier command is empty".into()))?;
        Ok(Self {
            program,
            args: words.collect(),
            labels,
        })
    }
}

impl Classifier for ExternalClassifier {
    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn classify_batch(&self, patches: &[Patch]) -> Result<Vec<ClassifierVerdict>> {
        let pairs: Vec<(String, &PixelImage)> =
            patches.iter().map(|p| (p.id.clone(), &p.image)).collect();
        external_classify(self, &pairs)
    }
}

fn safe_file_stem(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        && !id.starts_with('.')
}

/// Runs `cmd` once over all patches and returns verdicts in patch order.
pub fn external_classify(
    cmd: &ExternalClassifier,
    patches: &[(String, &PixelImage)],
) -> Result<Vec<ClassifierVerdict>> {
    if patches.is_empty() {
        return Ok(Vec::new());
    }
    let dir = tempfile::Builder::new().prefix("quadleaf-patches-").tempdir()?;
    let mut entries = Vec::with_capacity(patches.len());
    let mut seen = BTreeSet::new();
    for (id, img) in patches {
        if !safe_file_stem(id) {
            return Err(Error::Classify(format!("patch id {id:?} is not a safe file name")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::Classify(format!("duplicate patch id {id:?}")));
        }
        let path = dir.path().join(format!("{id}.png"));
        std::fs::write(&path, encode_png(img)?)?;
        entries.push(ManifestEntry {
            id: id.clone(),
            png_path: path,
        });
    }
    let manifest = Manifest {
        version: PROTOCOL_VERSION,
        labels: cmd.labels.clone(),
        patches: entries,
    };
    let manifest_path = dir.path().join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )?;

    log::debug!("running external classifier {} on {} patches", cmd.program, patches.len());
    let output = Command::new(&cmd.program)
        .args(&cmd.args)
        .arg(&manifest_path)
        .output()
        .map_err(|e| Error::ExternalClassifier(format!("cannot run {:?}: {e}", cmd.program)))?;
    if !output.status.success() {
        return Err(Error::ExternalClassifier(format!(
            "{:?} exited with {}: {}",
            cmd.program,
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let response: Vec<ResponseEntry> = serde_json::from_slice(&output.stdout)
        .map_err(|e| Error::Protocol(format!("malformed response: {e}")))?;

    let allowed: BTreeSet<&str> = cmd.labels.iter().map(String::as_str).collect();
    let mut by_id: HashMap<String, ResponseEntry> = HashMap::with_capacity(response.len());
    for entry in response {
        if !seen.contains(entry.id.as_str()) {
            return Err(Error::Protocol(format!("response names unknown id {:?}", entry.id)));
        }
        if !allowed.is_empty() && !allowed.contains(entry.label.as_str()) {
            return Err(Error::Protocol(format!(
                "id {:?}: label {:?} is not one of {:?}",
                entry.id, entry.label, cmd.labels
            )));
        }
        if !(0.0..=1.0).contains(&entry.confidence) {
            return Err(Error::Protocol(format!(
                "id {:?}: confidence {} outside [0, 1]",
                entry.id, entry.confidence
            )));
        }
        let id = entry.id.clone();
        if by_id.insert(id.clone(), entry).is_some() {
            return Err(Error::Protocol(format!("response repeats id {id:?}")));
        }
    }
    patches
        .iter()
        .map(|(id, _)| {
            let e = by_id
                .remove(id)
                .ok_or_else(|| Error::Protocol(format!("response is missing id {id:?}")))?;
            Ok(ClassifierVerdict {
                label: e.label,
                confidence: e.confidence,
            })
        })
        .collect()
}
