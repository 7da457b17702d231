use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use quadleaf::predicates::{color_fraction, has_feature, Patch};
use quadleaf::synth::{generate_scene, LesionKind, SceneParams, EARLY_BLIGHT, HEALTHY, LATE_BLIGHT};
use quadleaf::{detect, Classifier, ClassifierVerdict, ColorRange, PipelineConfig, PixelImage, Segment};

/// Votes by counting disease-coloured pixels; deterministic and independent
/// of the pipeline's own masks.
struct ColourVote;

impl Classifier for ColourVote {
    fn labels(&self) -> Vec<String> {
        [EARLY_BLIGHT, HEALTHY, LATE_BLIGHT].map(String::from).to_vec()
    }

    fn classify_batch(&self, patches: &[Patch]) -> quadleaf::Result<Vec<ClassifierVerdict>> {
        patches
            .iter()
            .map(|p| {
                let root = p.image.root_segment();
                let lb = color_fraction(&p.image, &root, &ColorRange::default_late_blight())?;
                let eb = color_fraction(&p.image, &root, &ColorRange::default_early_blight())?;
                let label = if lb == 0.0 && eb == 0.0 {
                    HEALTHY
                } else if lb >= eb {
                    LATE_BLIGHT
                } else {
                    EARLY_BLIGHT
                };
                ClassifierVerdict::new(label, 0.9)
            })
            .collect()
    }
}

fn scene(w: u32, h: u32, seed: u64, kind: u8) -> PixelImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disease = match kind % 3 {
        0 => Some(LesionKind::LateBlight),
        1 => Some(LesionKind::EarlyBlight),
        _ => None,
    };
    generate_scene(&SceneParams::new(w, h), disease, &mut rng).image
}

fn config(b: u32, depth_limit: u32) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.depth_limit = depth_limit;
    cfg.limits.base_colour_threshold = b;
    cfg.base_green.min_fraction = 0.02;
    cfg
}

/// Depth-`b` segments whose every ancestor below the root shows green; the
/// root itself is only checked when `b == 0`.
fn green_frontier(img: &PixelImage, range: &ColorRange, b: u32) -> Vec<Segment> {
    fn walk(img: &PixelImage, range: &ColorRange, seg: Segment, left: u32, out: &mut Vec<Segment>) {
        if left == 0 {
            out.push(seg);
            return;
        }
        for child in seg.split_quadrants().unwrap() {
            if has_feature(img, &child, range).unwrap() {
                walk(img, range, child, left - 1, out);
            }
        }
    }
    let root = img.root_segment();
    let mut out = Vec::new();
    if b > 0 || has_feature(img, &root, range).unwrap() {
        walk(img, range, root, b, &mut out);
    }
    out.sort();
    out
}

fn pixels(segs: &[Segment]) -> std::collections::BTreeSet<(u32, u32)> {
    segs.iter()
        .flat_map(|s| (s.y1..s.y2).flat_map(move |y| (s.x1..s.x2).map(move |x| (x, y))))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invocations_match_green_frontier(
        w in 32u32..96, h in 32u32..96, seed in any::<u64>(), kind in 0u8..3, b in 0u32..3
    ) {
        let img = scene(w, h, seed, kind);
        let cfg = config(b, 7);
        let det = detect(&img, &cfg, &ColourVote).unwrap();
        let frontier = green_frontier(&img, &cfg.base_green, b);
        prop_assert_eq!(det.trace.total_classified(), frontier.len());
        let mut gated: Vec<Segment> = det.verdicts.iter().map(|g| g.segment).collect();
        gated.sort();
        prop_assert_eq!(gated, frontier);
    }

    #[test]
    fn detection_is_deterministic(w in 16u32..80, h in 16u32..80, seed in any::<u64>(), kind in 0u8..3) {
        let img = scene(w, h, seed, kind);
        let cfg = config(1, 6);
        prop_assert_eq!(detect(&img, &cfg, &ColourVote).unwrap(), detect(&img, &cfg, &ColourVote).unwrap());
    }

    #[test]
    fn results_descend_from_gated_segments(
        w in 32u32..96, h in 32u32..96, seed in any::<u64>(), kind in 0u8..3, b in 0u32..3
    ) {
        let img = scene(w, h, seed, kind);
        let cfg = config(b, 7);
        let det = detect(&img, &cfg, &ColourVote).unwrap();
        for (label, segs) in det.features.iter() {
            prop_assert!(label != HEALTHY);
            for s in segs {
                let parent = det
                    .verdicts
                    .iter()
                    .find(|g| g.segment.contains(s))
                    .expect("every result lies inside a classified segment");
                prop_assert_eq!(parent.verdict.label.as_str(), label);
                prop_assert!(s.depth >= parent.segment.depth);
            }
        }
    }

    #[test]
    fn deeper_limit_only_narrows(
        w in 32u32..96, h in 32u32..96, seed in any::<u64>(), kind in 0u8..3, extra in 1u32..3
    ) {
        let img = scene(w, h, seed, kind);
        let shallow = detect(&img, &config(1, 5), &ColourVote).unwrap();
        let deep = detect(&img, &config(1, 5 + extra), &ColourVote).unwrap();
        for (label, segs) in deep.features.iter() {
            let outer = pixels(shallow.features.get(label));
            prop_assert!(pixels(segs).is_subset(&outer), "{label} grew with depth");
        }
    }
}
