//! Detection pipeline: base-colour pruning, classifier gate, feature refinement.
//!
//! Each quadtree layer runs two passes over the shared [`FeatureMap`]:
//!
//! * [`PipelineState::base_colour_layer`] splits the green frontier while the
//!   layer is shallower than the base-colour threshold `B`, classifies the
//!   frontier at `B`, and past `B` splits diseased segments keeping only
//!   children that still show leaf green, up to each disease's limit.
//! * [`PipelineState::disease_feature_layer`] takes over for a disease once
//!   the layer exceeds its limit, keeping children that show the disease's
//!   own colour.
//!
//! Every list is kept sorted row-major after each layer so results do not
//! depend on iteration order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{PixelImage, Segment};
use crate::predicates::{Classifier, ClassifierVerdict, ColorRange, Patch, RangeMask};
use crate::quadtree::{run_recursion, LayerStats, LayerTrace, RecursionParams};
use crate::synth::{EARLY_BLIGHT, HEALTHY, LATE_BLIGHT};

/// Reserved label of the green search frontier.
pub const BASE_COLOUR: &str = "base_colour";

/// Label → surviving segments, each list sorted by `(y1, x1)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureMap(BTreeMap<String, Vec<Segment>>);

impl FeatureMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, label: &str) -> &[Segment] {
        self.0.get(label).map_or(&[], Vec::as_slice)
    }

    /// Replaces the list for `label`, sorting it first.
    pub fn set(&mut self, label: impl Into<String>, mut segments: Vec<Segment>) {
        segments.sort();
        self.0.insert(label.into(), segments);
    }

    pub fn push(&mut self, label: &str, seg: Segment) {
        self.0.entry(label.to_string()).or_default().push(seg);
    }

    pub fn take(&mut self, label: &str) -> Vec<Segment> {
        self.0.remove(label).unwrap_or_default()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Segment])> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.0.values().all(Vec::is_empty)
    }

    pub fn total_segments(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    fn sort_all(&mut self) {
        for v in self.0.values_mut() {
            v.sort();
        }
    }

    fn drop_empty(&mut self) {
        self.0.retain(|_, v| !v.is_empty());
    }
}

/// Base-colour threshold `B` plus per-disease offsets `x_k`; the refinement
/// limit of disease `k` is `B + x_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitMap {
    pub base_colour_threshold: u32,
    pub feature_offsets: BTreeMap<String, u32>,
}

impl LimitMap {
    pub fn limit(&self, feature: &str) -> Option<u32> {
        self.feature_offsets
            .get(feature)
            .map(|x| self.base_colour_threshold + x)
    }
}

impl Default for LimitMap {
    /// `B = 0`; early blight refines by green down to `B + 3`, late blight to `B + 1`.
    fn default() -> Self {
        Self {
            base_colour_threshold: 0,
            feature_offsets: [(EARLY_BLIGHT.to_string(), 3), (LATE_BLIGHT.to_string(), 1)]
                .into_iter()
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Maximum number of quadtree layers processed.
    pub depth_limit: u32,
    pub limits: LimitMap,
    pub base_green: ColorRange,
    pub disease_ranges: BTreeMap<String, ColorRange>,
    /// Verdicts below this confidence are treated as healthy.
    pub confidence_threshold: f64,
    pub healthy_label: String,
    /// Split diseased segments without the green filter between `B` and
    /// each disease limit.
    pub skip_green_refinement: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            depth_limit: 8,
            limits: LimitMap::default(),
            base_green: ColorRange::default_base_green(),
            disease_ranges: [
                (EARLY_BLIGHT.to_string(), ColorRange::default_early_blight()),
                (LATE_BLIGHT.to_string(), ColorRange::default_late_blight()),
            ]
            .into_iter()
            .collect(),
            confidence_threshold: 0.5,
            healthy_label: HEALTHY.to_string(),
            skip_green_refinement: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.base_green.validate()?;
        for (label, range) in &self.disease_ranges {
            range
                .validate()
                .map_err(|e| Error::Config(format!("disease range {label:?}: {e}")))?;
        }
        let range_keys: Vec<&String> = self.disease_ranges.keys().collect();
        let limit_keys: Vec<&String> = self.limits.feature_offsets.keys().collect();
        if range_keys != limit_keys {
            return Err(Error::Config(format!(
                "disease colour ranges {range_keys:?} and limit offsets {limit_keys:?} must name the same diseases"
            )));
        }
        for label in range_keys {
            if label == BASE_COLOUR || *label == self.healthy_label {
                return Err(Error::Config(format!("{label:?} cannot be a disease label")));
            }
            let limit = self.limits.limit(label).expect("keys checked above");
            if limit >= self.depth_limit {
                return Err(Error::Config(format!(
                    "limit for {label:?} is B + x = {limit}, which must be below depth_limit {}",
                    self.depth_limit
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::Config(format!(
                "confidence_threshold must lie in [0, 1], got {}",
                self.confidence_threshold
            )));
        }
        Ok(())
    }

    /// Healthy label followed by the disease labels.
    pub fn class_labels(&self) -> Vec<String> {
        std::iter::once(self.healthy_label.clone())
            .chain(self.disease_ranges.keys().cloned())
            .collect()
    }

    fn check_classifier_labels(&self, labels: &[String]) -> Result<()> {
        for l in labels {
            if *l != self.healthy_label && !self.disease_ranges.contains_key(l) {
                return Err(Error::Config(format!(
                    "classifier label {l:?} is neither {:?} nor a configured disease",
                    self.healthy_label
                )));
            }
        }
        Ok(())
    }
}

/// A verdict that admitted a segment at the classification layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub segment: Segment,
    pub verdict: ClassifierVerdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    /// Final disease segments; the green frontier is not included.
    pub features: FeatureMap,
    pub trace: LayerTrace,
    /// Every verdict at the classification layer, healthy ones included.
    pub verdicts: Vec<GateRecord>,
}

/// Mutable state threaded through the layers of one detection run.
pub struct PipelineState<'a> {
    img: &'a PixelImage,
    cfg: &'a PipelineConfig,
    green: RangeMask,
    disease_masks: BTreeMap<String, RangeMask>,
    pub features: FeatureMap,
    pub verdicts: Vec<GateRecord>,
}

/// Per-layer counters accumulated by both passes.
#[derive(Clone, Copy, Debug, Default)]
pub struct LayerTally {
    pub examined: usize,
    pub classified: usize,
}

enum ChildFilter<'m> {
    Keep,
    Mask(&'m RangeMask),
}

/// Splits every segment and keeps the children that pass `filter`.
/// Segments too thin to split are carried forward as they are.
fn refine(segments: Vec<Segment>, filter: ChildFilter<'_>, tally: &mut LayerTally) -> Result<Vec<Segment>> {
    let mut out = Vec::with_capacity(segments.len() * 2);
    for seg in segments {
        if !seg.is_divisible() {
            tally.examined += 1;
            out.push(seg);
            continue;
        }
        for child in seg.split_quadrants()? {
            tally.examined += 1;
            let keep = match &filter {
                ChildFilter::Keep => true,
                ChildFilter::Mask(m) => m.has_feature(&child)?,
            };
            if keep {
                out.push(child);
            }
        }
    }
    out.sort();
    Ok(out)
}

impl<'a> PipelineState<'a> {
    pub fn new(img: &'a PixelImage, cfg: &'a PipelineConfig) -> Self {
        let hsv = img.to_hsv();
        let (w, h) = img.dims();
        let green = RangeMask::build(&hsv, w, h, cfg.base_green);
        let disease_masks = cfg
            .disease_ranges
            .iter()
            .map(|(k, r)| (k.clone(), RangeMask::build(&hsv, w, h, *r)))
            .collect();
        let mut features = FeatureMap::new();
        features.set(BASE_COLOUR, vec![img.root_segment()]);
        Self {
            img,
            cfg,
            green,
            disease_masks,
            features,
            verdicts: Vec::new(),
        }
    }

    fn disease_labels(&self) -> Vec<String> {
        self.features
            .labels()
            .filter(|l| *l != BASE_COLOUR)
            .map(str::to_string)
            .collect()
    }

    /// Green pruning, the classifier gate, and green refinement of diseased
    /// segments up to their limits.
    pub fn base_colour_layer<C: Classifier + ?Sized>(
        &mut self,
        depth: u32,
        classifier: &C,
        tally: &mut LayerTally,
    ) -> Result<()> {
        let b = self.cfg.limits.base_colour_threshold;
        if depth < b {
            let frontier = self.features.take(BASE_COLOUR);
            let next = refine(frontier, ChildFilter::Mask(&self.green), tally)?;
            self.features.set(BASE_COLOUR, next);
        } else if depth == b {
            let frontier = self.features.take(BASE_COLOUR);
            let mut candidates = Vec::with_capacity(frontier.len());
            for seg in frontier {
                tally.examined += 1;
                if self.green.has_feature(&seg)? {
                    candidates.push(seg);
                }
            }
            self.classify_frontier(depth, candidates, classifier, tally)?;
        } else {
            for label in self.disease_labels() {
                let limit = self.cfg.limits.limit(&label).expect("validated label");
                if depth > limit {
                    continue;
                }
                let filter = if self.cfg.skip_green_refinement {
                    ChildFilter::Keep
                } else {
                    ChildFilter::Mask(&self.green)
                };
                let segs = self.features.take(&label);
                let next = refine(segs, filter, tally)?;
                self.features.set(label, next);
            }
        }
        Ok(())
    }

    fn classify_frontier<C: Classifier + ?Sized>(
        &mut self,
        depth: u32,
        candidates: Vec<Segment>,
        classifier: &C,
        tally: &mut LayerTally,
    ) -> Result<()> {
        if candidates.is_empty() {
            return Ok(());
        }
        let patches = candidates
            .iter()
            .map(|s| {
                Ok(Patch {
                    id: format!("d{depth}_y{}_x{}_w{}_h{}", s.y1, s.x1, s.width(), s.height()),
                    image: self.img.crop(s)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let verdicts = classifier.classify_batch(&patches)?;
        tally.classified += patches.len();
        if verdicts.len() != candidates.len() {
            return Err(Error::Classify(format!(
                "classifier returned {} verdicts for {} patches",
                verdicts.len(),
                candidates.len()
            )));
        }
        let known = classifier.labels();
        for (seg, verdict) in candidates.into_iter().zip(verdicts) {
            if !known.contains(&verdict.label) {
                return Err(Error::Classify(format!(
                    "classifier produced undeclared label {:?}",
                    verdict.label
                )));
            }
            if !(0.0..=1.0).contains(&verdict.confidence) {
                return Err(Error::Classify(format!(
                    "confidence {} outside [0, 1]",
                    verdict.confidence
                )));
            }
            if verdict.label != self.cfg.healthy_label && verdict.confidence >= self.cfg.confidence_threshold {
                self.features.push(&verdict.label, seg);
            }
            self.verdicts.push(GateRecord { segment: seg, verdict });
        }
        self.features.sort_all();
        Ok(())
    }

    /// Disease-colour refinement for every disease whose limit is below `depth`.
    pub fn disease_feature_layer(&mut self, depth: u32, tally: &mut LayerTally) -> Result<()> {
        for label in self.disease_labels() {
            let limit = self.cfg.limits.limit(&label).expect("validated label");
            if depth <= limit {
                continue;
            }
            let mask = &self.disease_masks[&label];
            let segs = self.features.take(&label);
            let next = refine(segs, ChildFilter::Mask(mask), tally)?;
            self.features.set(label, next);
        }
        Ok(())
    }

    fn frontier_stats(&self, tally: LayerTally) -> LayerStats {
        let mut stats = LayerStats {
            examined: tally.examined,
            classified: tally.classified,
            ..LayerStats::default()
        };
        for (_, segs) in self.features.iter() {
            for s in segs {
                stats.surviving += 1;
                stats.surviving_area += s.area();
                let (w, h) = stats.frontier_dims.unwrap_or((u32::MAX, u32::MAX));
                stats.frontier_dims = Some((w.min(s.width()), h.min(s.height())));
            }
        }
        stats
    }
}

pub fn detect<C: Classifier + ?Sized>(img: &PixelImage, cfg: &PipelineConfig, classifier: &C) -> Result<Detection> {
    detect_observed(img, cfg, classifier, |_, _| {})
}

/// [`detect`], calling `observer` with the full feature map (green frontier
/// included) after every layer.
pub fn detect_observed<C, F>(img: &PixelImage, cfg: &PipelineConfig, classifier: &C, mut observer: F) -> Result<Detection>
where
    C: Classifier + ?Sized,
    F: FnMut(u32, &FeatureMap),
{
    cfg.validate()?;
    cfg.check_classifier_labels(&classifier.labels())?;
    let params = RecursionParams::new(cfg.depth_limit as i64)?;
    let state = PipelineState::new(img, cfg);
    let (state, trace) = run_recursion(img.dims(), params, state, |mut st, depth| {
        let mut tally = LayerTally::default();
        st.base_colour_layer(depth, classifier, &mut tally)?;
        st.disease_feature_layer(depth, &mut tally)?;
        observer(depth, &st.features);
        let stats = st.frontier_stats(tally);
        log::debug!(
            "layer {depth}: examined {} surviving {} classified {}",
            stats.examined,
            stats.surviving,
            stats.classified
        );
        Ok::<_, Error>((st, stats))
    })?;
    let mut features = state.features;
    features.take(BASE_COLOUR);
    features.drop_empty();
    Ok(Detection {
        features,
        trace,
        verdicts: state.verdicts,
    })
}
