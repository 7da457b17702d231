//! Nearest-centroid colour-statistics classifier.
//!
//! Features per patch: mean HSV (hue scaled to `[0, 1)`) followed by a
//! 12-bin hue histogram with 15° bins over `[0°, 180°)`. Both are computed
//! over in-gamut pixels only: chromatic enough for the hue to mean something
//! (`s >= 0.15`, `v >= 0.08`) and with hue below 180°, which covers every
//! foliage and lesion colour. Grey background therefore does not leak into
//! the red bins. A patch without in-gamut pixels falls back to the mean over
//! all pixels and a uniform histogram.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierVerdict, Patch};
use crate::error::{Error, Result};
use crate::imgcore::{rgb_to_hsv, PixelImage};

pub const HUE_BINS: usize = 12;
pub const FEATURE_LEN: usize = 3 + HUE_BINS;

const BIN_WIDTH: f32 = 15.0;
const GAMUT_MIN_S: f32 = 0.15;
const GAMUT_MIN_V: f32 = 0.08;
const GAMUT_MAX_H: f32 = BIN_WIDTH * HUE_BINS as f32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCentroid {
    pub label: String,
    pub mean_hsv: [f64; 3],
    pub hue_histogram: [f64; HUE_BINS],
}

impl ClassCentroid {
    fn features(&self) -> [f64; FEATURE_LEN] {
        let mut f = [0.0; FEATURE_LEN];
        f[..3].copy_from_slice(&self.mean_hsv);
        f[3..].copy_from_slice(&self.hue_histogram);
        f
    }
}

/// Per-class feature centroids, sorted by label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub classes: Vec<ClassCentroid>,
}

pub fn feature_vector(img: &PixelImage) -> Result<[f64; FEATURE_LEN]> {
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Classify("empty patch".into()));
    }
    let mut sum_all = [0.0f64; 3];
    let mut sum_in = [0.0f64; 3];
    let mut hist = [0u64; HUE_BINS];
    let mut n_in = 0u64;
    let mut n_all = 0u64;
    for [r, g, b] in img.pixels() {
        let p = rgb_to_hsv(r, g, b);
        let hsv = [(p.h / 360.0) as f64, p.s as f64, p.v as f64];
        n_all += 1;
        for i in 0..3 {
            sum_all[i] += hsv[i];
        }
        if p.s >= GAMUT_MIN_S && p.v >= GAMUT_MIN_V && p.h < GAMUT_MAX_H {
            n_in += 1;
            for i in 0..3 {
                sum_in[i] += hsv[i];
            }
            hist[((p.h / BIN_WIDTH) as usize).min(HUE_BINS - 1)] += 1;
        }
    }
    let mut f = [0.0; FEATURE_LEN];
    if n_in > 0 {
        for i in 0..3 {
            f[i] = sum_in[i] / n_in as f64;
        }
        for (k, c) in hist.iter().enumerate() {
            f[3 + k] = *c as f64 / n_in as f64;
        }
    } else {
        for i in 0..3 {
            f[i] = sum_all[i] / n_all as f64;
        }
        f[3..].fill(1.0 / HUE_BINS as f64);
    }
    Ok(f)
}

fn distance(a: &[f64; FEATURE_LEN], b: &[f64; FEATURE_LEN]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Trains on labelled patches; the class set is whatever labels occur.
pub fn train_baseline(patches: &[(PixelImage, String)]) -> Result<BaselineModel> {
    let classes: Vec<String> = patches
        .iter()
        .map(|(_, l)| l.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    BaselineModel::train(&classes, patches)
}

impl BaselineModel {
    /// Trains one centroid per declared class. Every class needs at least
    /// one patch and every patch must carry a declared label.
    pub fn train(classes: &[String], patches: &[(PixelImage, String)]) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Training("no classes to train".into()));
        }
        let mut by_class: BTreeMap<&str, Vec<[f64; FEATURE_LEN]>> =
            classes.iter().map(|c| (c.as_str(), Vec::new())).collect();
        for (img, label) in patches {
            let slot = by_class
                .get_mut(label.as_str())
                .ok_or_else(|| Error::Training(format!("patch labelled {label:?} is not a declared class")))?;
            slot.push(feature_vector(img).map_err(|e| Error::Training(e.to_string()))?);
        }
        let mut out = Vec::with_capacity(by_class.len());
        for (label, feats) in &by_class {
            if feats.is_empty() {
                return Err(Error::Training(format!("class {label:?} has no training patches")));
            }
            let mut mean = [0.0f64; FEATURE_LEN];
            for f in feats {
                for (m, v) in mean.iter_mut().zip(f) {
                    *m += v / feats.len() as f64;
                }
            }
            let mut mean_hsv = [0.0; 3];
            mean_hsv.copy_from_slice(&mean[..3]);
            let mut hue_histogram = [0.0; HUE_BINS];
            hue_histogram.copy_from_slice(&mean[3..]);
            out.push(ClassCentroid {
                label: label.to_string(),
                mean_hsv,
                hue_histogram,
            });
        }
        Ok(Self { classes: out })
    }

    /// Model trained on generated leaf scenes with the stock labels
    /// `healthy`, `late_blight` and `early_blight`.
    pub fn builtin() -> Self {
        let patches = crate::synth::builtin_training_set();
        train_baseline(&patches).expect("builtin training set covers every class")
    }

    pub fn class_labels(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.label.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Config("baseline model has no classes".into()));
        }
        for w in self.classes.windows(2) {
            if w[0].label >= w[1].label {
                return Err(Error::Config("baseline model labels must be unique and sorted".into()));
            }
        }
        for c in &self.classes {
            let mass: f64 = c.hue_histogram.iter().sum();
            if (mass - 1.0).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "histogram of class {:?} sums to {mass}, expected 1",
                    c.label
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let model: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Nearest centroid; ties go to the lexicographically smallest label.
    pub fn classify(&self, patch: &PixelImage) -> Result<ClassifierVerdict> {
        let f = feature_vector(patch)?;
        let mut best: Option<(f64, &str)> = None;
        let mut second = f64::INFINITY;
        for c in &self.classes {
            let d = distance(&f, &c.features());
            match best {
                Some((bd, _)) if d < bd => {
                    second = bd;
                    best = Some((d, &c.label));
                }
                Some(_) => second = second.min(d),
                None => best = Some((d, &c.label)),
            }
        }
        let (d1, label) = best.ok_or_else(|| Error::Classify("model has no classes".into()))?;
        let confidence = if self.classes.len() < 2 {
            1.0
        } else if d1 + second == 0.0 {
            0.5
        } else {
            1.0 - d1 / (d1 + second)
        };
        ClassifierVerdict::new(label, confidence)
    }
}

impl Classifier for BaselineModel {
    fn labels(&self) -> Vec<String> {
        self.class_labels()
    }

    fn classify_batch(&self, patches: &[Patch]) -> Result<Vec<ClassifierVerdict>> {
        patches.iter().map(|p| self.classify(&p.image)).collect()
    }
}
