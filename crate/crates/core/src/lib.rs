//! Conditioned quadtree search for plant leaf disease localization.
//!
//! The detector walks a quadtree over the input image one layer at a time:
//!
//! 1. **Base colour pruning** – only segments that contain enough leaf green
//!    are subdivided further.
//! 2. **Classifier gate** – at the base-colour threshold layer every surviving
//!    segment is cropped and handed to a [`predicates::Classifier`].
//! 3. **Feature refinement** – segments assigned to a disease are split again,
//!    first filtered by leaf green and then by the disease's own colour range,
//!    down to a per-disease depth.
//! 4. **Grouping** – adjacent diseased segments are merged into bounding boxes
//!    and reported as `[y1, x1, y2, x2]`.
//!
//! [`evalbench`] holds the classification metrics, the convolution step
//! calculator and the timing harness; [`synth`] generates labelled leaf scenes
//! with known lesion masks for testing and benchmarking.

pub mod error;
pub mod evalbench;
pub mod grouping;
pub mod imgcore;
pub mod pipeline;
pub mod predicates;
pub mod quadtree;
pub mod synth;

pub use error::{Error, Result};
pub use grouping::{localize, DetectionReport, GroupingMode, Roi};
pub use imgcore::{HsvPixel, ImageFormat, PixelImage, Segment};
pub use pipeline::{detect, Detection, FeatureMap, LimitMap, PipelineConfig};
pub use predicates::{BaselineModel, Classifier, ClassifierVerdict, ColorRange};
pub use quadtree::{LayerRecord, LayerTrace};
