//! Colour-range predicates and the segment classifier interface.

mod baseline;
mod external;

pub use baseline::{feature_vector, train_baseline, BaselineModel, ClassCentroid, FEATURE_LEN, HUE_BINS};
pub use external::{external_classify, ExternalClassifier, Manifest, ManifestEntry, ResponseEntry};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{rgb_to_hsv, HsvPixel, PixelImage, Segment};

/// HSV box with optional hue wrap-around.
///
/// A pixel is in range when its hue lies in `[h_lo, h_hi]` (or outside
/// `(h_hi, h_lo)` when `h_lo > h_hi`), `s >= s_min` and
/// `v_min <= v <= v_max`. A segment has the feature when the in-range
/// fraction is at least `min_fraction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorRange {
    pub h_lo: f32,
    pub h_hi: f32,
    pub s_min: f32,
    pub v_min: f32,
    #[serde(default = "one")]
    pub v_max: f32,
    pub min_fraction: f64,
}

fn one() -> f32 {
    1.0
}

impl ColorRange {
    /// Leaf green.
    pub fn default_base_green() -> Self {
        Self {
            h_lo: 70.0,
            h_hi: 170.0,
            s_min: 0.25,
            v_min: 0.20,
            v_max: 1.0,
            min_fraction: 0.10,
        }
    }

    /// Dark brown necrosis.
    pub fn default_late_blight() -> Self {
        Self {
            h_lo: 10.0,
            h_hi: 30.0,
            s_min: 0.30,
            v_min: 0.05,
            v_max: 0.55,
            min_fraction: 0.01,
        }
    }

    /// Lighter brown to ochre lesions.
    pub fn default_early_blight() -> Self {
        Self {
            h_lo: 20.0,
            h_hi: 45.0,
            s_min: 0.30,
            v_min: 0.30,
            v_max: 0.80,
            min_fraction: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let hue_ok = |h: f32| (0.0..360.0).contains(&h);
        let unit = |v: f32| (0.0..=1.0).contains(&v);
        if !hue_ok(self.h_lo) || !hue_ok(self.h_hi) {
            return Err(Error::Config(format!(
                "hue bounds must lie in [0, 360): {} .. {}",
                self.h_lo, self.h_hi
            )));
        }
        if !unit(self.s_min) || !unit(self.v_min) || !unit(self.v_max) {
            return Err(Error::Config(format!("saturation/value bounds must lie in [0, 1]: {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.min_fraction) {
            return Err(Error::Config(format!(
                "min_fraction must lie in [0, 1], got {}",
                self.min_fraction
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, p: HsvPixel) -> bool {
        let hue_in = if self.h_lo <= self.h_hi {
            p.h >= self.h_lo && p.h <= self.h_hi
        } else {
            p.h >= self.h_lo || p.h <= self.h_hi
        };
        hue_in && p.s >= self.s_min && p.v >= self.v_min && p.v <= self.v_max
    }

    #[inline]
    pub fn passes(&self, fraction: f64) -> bool {
        fraction >= self.min_fraction
    }
}

/// Fraction of the segment's pixels whose HSV lies in `range`.
pub fn color_fraction(img: &PixelImage, seg: &Segment, range: &ColorRange) -> Result<f64> {
    seg.check_within(img.width(), img.height())?;
    let mut hits = 0u64;
    for y in seg.y1..seg.y2 {
        for x in seg.x1..seg.x2 {
            let [r, g, b] = img.get(x, y);
            if range.contains(rgb_to_hsv(r, g, b)) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / seg.area() as f64)
}

pub fn has_feature(img: &PixelImage, seg: &Segment, range: &ColorRange) -> Result<bool> {
    Ok(range.passes(color_fraction(img, seg, range)?))
}

/// Summed-area table of in-range pixels, answering `color_fraction` in O(1).
#[derive(Clone, Debug)]
pub struct RangeMask {
    range: ColorRange,
    width: u32,
    height: u32,
    table: Vec<u32>,
}

impl RangeMask {
    pub fn build(hsv: &[HsvPixel], width: u32, height: u32, range: ColorRange) -> Self {
        let (w, h) = (width as usize, height as usize);
        assert_eq!(hsv.len(), w * h, "hsv buffer does not match dimensions");
        let stride = w + 1;
        let mut table = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            let src = &hsv[y * w..(y + 1) * w];
            for (x, p) in src.iter().enumerate() {
                row += range.contains(*p) as u32;
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self {
            range,
            width,
            height,
            table,
        }
    }

    pub fn range(&self) -> &ColorRange {
        &self.range
    }

    pub fn count(&self, seg: &Segment) -> Result<u64> {
        seg.check_within(self.width, self.height)?;
        let stride = self.width as usize + 1;
        let at = |x: u32, y: u32| self.table[y as usize * stride + x as usize] as i64;
        let n = at(seg.x2, seg.y2) - at(seg.x1, seg.y2) - at(seg.x2, seg.y1) + at(seg.x1, seg.y1);
        Ok(n as u64)
    }

    pub fn fraction(&self, seg: &Segment) -> Result<f64> {
        Ok(self.count(seg)? as f64 / seg.area() as f64)
    }

    pub fn has_feature(&self, seg: &Segment) -> Result<bool> {
        Ok(self.range.passes(self.fraction(seg)?))
    }
}

/// Output of a segment classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub label: String,
    pub confidence: f64,
}

impl ClassifierVerdict {
    pub fn new(label: impl Into<String>, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Classify(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self {
            label: label.into(),
            confidence,
        })
    }
}

/// A cropped segment on its way to a classifier.
#[derive(Clone, Debug)]
pub struct Patch {
    pub id: String,
    pub image: PixelImage,
}

/// Anything that can label image patches.
///
/// Verdicts are returned in the same order as the patches. Implementations
/// must only emit labels from [`Classifier::labels`] with confidence in
/// `[0, 1]`.
pub trait Classifier {
    fn labels(&self) -> Vec<String>;

    fn classify_batch(&self, patches: &[Patch]) -> Result<Vec<ClassifierVerdict>>;
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn labels(&self) -> Vec<String> {
        (**self).labels()
    }

    fn classify_batch(&self, patches: &[Patch]) -> Result<Vec<ClassifierVerdict>> {
        (**self).classify_batch(patches)
    }
}

impl<C: Classifier + ?Sized> Classifier for Box<C> {
    fn labels(&self) -> Vec<String> {
        (**self).labels()
    }

    fn classify_batch(&self, patches: &[Patch]) -> Result<Vec<ClassifierVerdict>> {
        (**self).classify_batch(patches)
    }
}
