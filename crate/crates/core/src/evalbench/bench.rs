use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::PixelImage;
use crate::pipeline::{detect, PipelineConfig};
use crate::predicates::Classifier;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub reps: usize,
    pub samples_ms: Vec<f64>,
    pub min_ms: f64,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub classifier_invocations: usize,
    pub segments_examined: usize,
    pub layers: usize,
    /// False when some repetition produced different counts.
    pub counts_consistent: bool,
}

/// Times `reps` runs of [`detect`] after one untimed warm-up run.
pub fn bench_detect<C: Classifier + ?Sized>(
    img: &PixelImage,
    cfg: &PipelineConfig,
    classifier: &C,
    reps: usize,
) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::Config("bench needs at least one repetition".into()));
    }
    let warm = detect(img, cfg, classifier)?;
    let counts = |d: &crate::pipeline::Detection| {
        (d.trace.total_classified(), d.trace.total_examined(), d.trace.layers.len())
    };
    let expected = counts(&warm);
    let mut consistent = true;
    let mut samples_ms = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        let det = detect(img, cfg, classifier)?;
        samples_ms.push(t.elapsed().as_secs_f64() * 1e3);
        consistent &= counts(&det) == expected;
    }
    let mut sorted = samples_ms.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median_ms = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(BenchReport {
        reps,
        min_ms: sorted[0],
        median_ms,
        mean_ms: sorted.iter().sum::<f64>() / n as f64,
        samples_ms,
        classifier_invocations: expected.0,
        segments_examined: expected.1,
        layers: expected.2,
        counts_consistent: consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicates::BaselineModel;

    #[test]
    fn zero_reps_rejected() {
        let img = PixelImage::filled(8, 8, [120, 120, 120]);
        let model = BaselineModel::builtin();
        assert!(matches!(
            bench_detect(&img, &PipelineConfig::default(), &model, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn grey_image_statistics() {
        let img = PixelImage::filled(32, 32, [120, 120, 120]);
        let model = BaselineModel::builtin();
        let r = bench_detect(&img, &PipelineConfig::default(), &model, 3).unwrap();
        assert_eq!(r.samples_ms.len(), 3);
        assert!(r.min_ms <= r.median_ms && r.min_ms <= r.mean_ms);
        assert_eq!(r.classifier_invocations, 0);
        assert!(r.counts_consistent);
    }
}
