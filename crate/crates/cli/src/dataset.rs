//! Labelled image folders: `<root>/<label>/<image>.{png,ppm}`.

use std::path::{Path, PathBuf};

use anyhow::Context;

use quadleaf::evalbench::EvalSample;
use quadleaf::imgcore::load_image;
use quadleaf::{ImageFormat, PixelImage};

fn sorted_entries(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        out.push(entry?.path());
    }
    out.sort();
    Ok(out)
}

/// Every image file below `root`, labelled by its parent directory. Files
/// that fail to decode are kept as failed samples.
pub fn load_samples(root: &Path) -> anyhow::Result<Vec<EvalSample>> {
    let mut samples = Vec::new();
    for class_dir in sorted_entries(root)? {
        if !class_dir.is_dir() {
            continue;
        }
        let label = class_dir
            .file_name()
            .and_then(|n| n.to_str())
            .with_context(|| format!("{} is not a UTF-8 label", class_dir.display()))?
            .to_string();
        for file in sorted_entries(&class_dir)? {
            if !file.is_file() || ImageFormat::from_path(&file).is_none() {
                continue;
            }
            let id = file.strip_prefix(root).unwrap_or(&file).display().to_string();
            let image = load_image(&file).map_err(|e| e.to_string());
            samples.push(EvalSample {
                id,
                truth: label.clone(),
                image,
            });
        }
    }
    Ok(samples)
}

/// Training pairs; unlike evaluation, an unreadable file is an error.
pub fn load_training(root: &Path) -> anyhow::Result<Vec<(PixelImage, String)>> {
    load_samples(root)?
        .into_iter()
        .map(|s| {
            let img = s.image.map_err(|e| anyhow::anyhow!("{}: {e}", s.id))?;
            Ok((img, s.truth))
        })
        .collect()
}
