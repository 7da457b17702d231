//! Layer-by-layer recursion driver.
//!
//! The engine owns no segments itself. A layer processor advances whatever
//! state it threads through (the detection pipeline's feature map, or a test
//! harness) by one quadtree layer and reports what it examined. The engine
//! counts layers, stops at the depth limit, and stops as soon as any segment
//! in the active frontier has collapsed to a one-pixel row or column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loop state of the recursive segmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecursionParams {
    pub depth_limit: u32,
    pub depth_count: u32,
    pub depth_check: bool,
}

impl RecursionParams {
    pub fn new(depth_limit: i64) -> Result<Self> {
        let depth_limit = u32::try_from(depth_limit)
            .map_err(|_| Error::Config(format!("depth_limit must be >= 0, got {depth_limit}")))?;
        Ok(Self {
            depth_limit,
            depth_count: 0,
            depth_check: false,
        })
    }
}

/// What a layer processor reports back for one layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LayerStats {
    /// Segments whose predicate or classifier was evaluated (or that were
    /// carried forward unsplit).
    pub examined: usize,
    /// Segments in the frontier after the layer.
    pub surviving: usize,
    /// Total pixel area of the surviving frontier.
    pub surviving_area: u64,
    /// Smallest width and height in the surviving frontier, `None` if empty.
    pub frontier_dims: Option<(u32, u32)>,
    /// Classifier invocations made during the layer.
    pub classified: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub depth: u32,
    pub examined: usize,
    pub surviving: usize,
    pub surviving_area: u64,
    pub segment_width: u32,
    pub segment_height: u32,
    pub classified: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub layers: Vec<LayerRecord>,
}

impl LayerTrace {
    pub fn total_examined(&self) -> usize {
        self.layers.iter().map(|l| l.examined).sum()
    }

    pub fn total_classified(&self) -> usize {
        self.layers.iter().map(|l| l.classified).sum()
    }

    pub fn max_surviving(&self) -> usize {
        self.layers.iter().map(|l| l.surviving).max().unwrap_or(0)
    }

    pub fn layer(&self, depth: u32) -> Option<&LayerRecord> {
        self.layers.iter().find(|l| l.depth == depth)
    }
}

/// Dimensions of the smallest segment at `depth` under floor halving.
pub fn nominal_segment_dims(width: u32, height: u32, depth: u32) -> (u32, u32) {
    let halve = |v: u32| if depth >= 32 { 0 } else { v >> depth };
    (halve(width).max(1), halve(height).max(1))
}

/// Drives `layer` once per quadtree layer.
///
/// The processor is invoked while the stop flag is clear and the layer count
/// differs from the depth limit. After each call the count is incremented and
/// the stop flag trips if the reported frontier contains a segment of width 1
/// or height 1. An empty frontier falls back to the nominal segment size for
/// the layer so that the loop still terminates at pixel resolution.
pub fn run_recursion<S, E, F>(
    image_dims: (u32, u32),
    mut params: RecursionParams,
    mut state: S,
    mut layer: F,
) -> std::result::Result<(S, LayerTrace), E>
where
    F: FnMut(S, u32) -> std::result::Result<(S, LayerStats), E>,
    E: From<Error>,
{
    if params.depth_count != 0 || params.depth_check {
        return Err(Error::Config(format!(
            "recursion must start at depth 0 with the stop flag clear, got {params:?}"
        ))
        .into());
    }
    let mut trace = LayerTrace::default();
    while !params.depth_check && params.depth_count != params.depth_limit {
        let depth = params.depth_count;
        let (next, stats) = layer(state, depth)?;
        state = next;
        let (w, h) = stats
            .frontier_dims
            .unwrap_or_else(|| nominal_segment_dims(image_dims.0, image_dims.1, depth));
        trace.layers.push(LayerRecord {
            depth,
            examined: stats.examined,
            surviving: stats.surviving,
            surviving_area: stats.surviving_area,
            segment_width: w,
            segment_height: h,
            classified: stats.classified,
        });
        params.depth_count += 1;
        if w <= 1 || h <= 1 {
            params.depth_check = true;
        }
    }
    Ok((state, trace))
}
