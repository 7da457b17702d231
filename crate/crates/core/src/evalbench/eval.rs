use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{class_metrics, macro_average, ClassMetrics, ConfusionMatrix, MacroAverage};
use crate::error::{Error, Result};
use crate::grouping::{localize, DetectionReport, GroupingMode};
use crate::imgcore::PixelImage;
use crate::pipeline::{detect, Detection, PipelineConfig};
use crate::predicates::Classifier;

/// How a whole-image label is derived from a detection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageLabelRule {
    /// Disease with the largest surviving segment area.
    #[default]
    LargestArea,
    /// Disease with the most grouped boxes.
    BoxCount,
    /// Label of the most confident gating verdict.
    MaxConfidence,
}

impl FromStr for ImageLabelRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "largest_area" => Ok(Self::LargestArea),
            "box_count" => Ok(Self::BoxCount),
            "max_confidence" => Ok(Self::MaxConfidence),
            other => Err(Error::Config(format!(
                "unknown label rule {other:?} (expected largest_area, box_count or max_confidence)"
            ))),
        }
    }
}

/// Picks the image label. Ties go to the smallest label; an empty
/// detection is healthy.
pub fn predict_label(det: &Detection, report: &DetectionReport, cfg: &PipelineConfig, rule: ImageLabelRule) -> String {
    let best = |scores: BTreeMap<&str, f64>| {
        scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .fold(None::<(&str, f64)>, |acc, (l, s)| match acc {
                Some((_, bs)) if bs >= s => acc,
                _ => Some((l, s)),
            })
            .map(|(l, _)| l.to_string())
    };
    let picked = match rule {
        ImageLabelRule::LargestArea => best(
            det.features
                .iter()
                .map(|(l, segs)| (l, segs.iter().map(|s| s.area()).sum::<u64>() as f64))
                .collect(),
        ),
        ImageLabelRule::BoxCount => best(report.diseases.iter().map(|(l, b)| (l.as_str(), b.len() as f64)).collect()),
        ImageLabelRule::MaxConfidence => {
            let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
            for g in &det.verdicts {
                if g.verdict.label != cfg.healthy_label && det.features.get(&g.verdict.label).len() > 0 {
                    let e = scores.entry(g.verdict.label.as_str()).or_default();
                    *e = e.max(g.verdict.confidence);
                }
            }
            best(scores)
        }
    };
    picked.unwrap_or_else(|| cfg.healthy_label.clone())
}

/// One labelled input. A decode failure is carried as `Err(reason)`.
#[derive(Clone, Debug)]
pub struct EvalSample {
    pub id: String,
    pub truth: String,
    pub image: std::result::Result<PixelImage, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalSummary {
    pub matrix: ConfusionMatrix,
    pub metrics: BTreeMap<String, ClassMetrics>,
    pub macro_average: MacroAverage,
    pub evaluated: usize,
    pub failures: Vec<EvalFailure>,
}

/// Runs the pipeline on every sample and scores the image labels.
/// Unreadable samples are listed as failures; classifier errors abort.
pub fn evaluate_dataset<C: Classifier + ?Sized>(
    samples: &[EvalSample],
    cfg: &PipelineConfig,
    classifier: &C,
    mode: GroupingMode,
    rule: ImageLabelRule,
) -> Result<EvalSummary> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("evaluation needs at least one sample".into()));
    }
    let labels = cfg.class_labels();
    let mut matrix = ConfusionMatrix::new(labels.clone())?;
    for s in samples {
        if matrix.index_of(&s.truth).is_none() {
            return Err(Error::Config(format!(
                "sample {:?} has label {:?}, expected one of {labels:?}",
                s.id, s.truth
            )));
        }
    }
    let mut failures = Vec::new();
    let mut evaluated = 0;
    for s in samples {
        let img = match &s.image {
            Ok(img) => img,
            Err(reason) => {
                log::warn!("skipping {}: {reason}", s.id);
                failures.push(EvalFailure {
                    id: s.id.clone(),
                    reason: reason.clone(),
                });
                continue;
            }
        };
        let det = detect(img, cfg, classifier)?;
        let report = localize(&det.features, img.dims(), mode);
        let predicted = predict_label(&det, &report, cfg, rule);
        log::debug!("{}: truth {} predicted {predicted}", s.id, s.truth);
        matrix.record(&s.truth, &predicted)?;
        evaluated += 1;
    }
    let metrics: BTreeMap<String, ClassMetrics> = labels
        .iter()
        .map(|l| Ok((l.clone(), class_metrics(&matrix, l)?)))
        .collect::<Result<_>>()?;
    let macro_average = macro_average(metrics.values());
    Ok(EvalSummary {
        matrix,
        metrics,
        macro_average,
        evaluated,
        failures,
    })
}
