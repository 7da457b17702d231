//! Merging diseased segments into regions of interest and the final report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::imgcore::Segment;
use crate::pipeline::{FeatureMap, BASE_COLOUR};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupingMode {
    /// Grow each region against its accumulated bounding box: any remaining
    /// segment touching the box is absorbed, until none is left.
    #[default]
    Faithful,
    /// One box per connected component of the segment adjacency graph
    /// (segments sharing an edge or a corner are adjacent).
    Strict,
}

impl std::str::FromStr for GroupingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "faithful" => Ok(Self::Faithful),
            "strict" => Ok(Self::Strict),
            other => Err(format!("unknown grouping mode {other:?} (expected faithful or strict)")),
        }
    }
}

/// Bounding box of merged segments, half-open like [`Segment`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Roi {
    pub y1: u32,
    pub x1: u32,
    pub y2: u32,
    pub x2: u32,
    pub member_count: usize,
}

impl Roi {
    fn from_segment(s: &Segment) -> Self {
        Self {
            y1: s.y1,
            x1: s.x1,
            y2: s.y2,
            x2: s.x2,
            member_count: 1,
        }
    }

    fn absorb(&mut self, s: &Segment) {
        self.x1 = self.x1.min(s.x1);
        self.y1 = self.y1.min(s.y1);
        self.x2 = self.x2.max(s.x2);
        self.y2 = self.y2.max(s.y2);
        self.member_count += 1;
    }

    pub fn as_segment(&self) -> Segment {
        Segment {
            x1: self.x1,
            y1: self.y1,
            x2: self.x2,
            y2: self.y2,
            depth: 0,
        }
    }

    pub fn area(&self) -> u64 {
        (self.x2 - self.x1) as u64 * (self.y2 - self.y1) as u64
    }

    /// Top-left then bottom-right corner, each written y first:
    /// `[y1, x1, y2, x2]`.
    pub fn to_report_box(&self) -> [u32; 4] {
        [self.y1, self.x1, self.y2, self.x2]
    }
}

pub fn group_segments(segments: &[Segment], mode: GroupingMode) -> Vec<Roi> {
    let mut sorted = segments.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut rois = match mode {
        GroupingMode::Faithful => grow_against_box(sorted),
        GroupingMode::Strict => connected_components(&sorted),
    };
    rois.sort();
    rois
}

fn grow_against_box(mut remaining: Vec<Segment>) -> Vec<Roi> {
    let mut rois = Vec::new();
    while !remaining.is_empty() {
        // remaining stays sorted, so the start node is the row-major smallest
        let start = remaining.remove(0);
        let mut roi = Roi::from_segment(&start);
        loop {
            let hull = roi.as_segment();
            let before = remaining.len();
            remaining.retain(|s| {
                if s.touches(&hull) {
                    roi.absorb(s);
                    false
                } else {
                    true
                }
            });
            if remaining.len() == before {
                break;
            }
        }
        rois.push(roi);
    }
    rois
}

fn connected_components(segments: &[Segment]) -> Vec<Roi> {
    let n = segments.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    // segments are sorted by y1, so the scan can stop once y1 passes y2
    for i in 0..n {
        for j in i + 1..n {
            if segments[j].y1 > segments[i].y2 {
                break;
            }
            if segments[i].touches(&segments[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut by_root: BTreeMap<usize, Roi> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        let r = find(&mut parent, i);
        by_root
            .entry(r)
            .and_modify(|roi| roi.absorb(s))
            .or_insert_with(|| Roi::from_segment(s));
    }
    by_root.into_values().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

/// Disease label → boxes as `[y1, x1, y2, x2]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub image: ImageDims,
    pub diseases: BTreeMap<String, Vec<[u32; 4]>>,
}

impl DetectionReport {
    pub fn boxes(&self, label: &str) -> &[[u32; 4]] {
        self.diseases.get(label).map_or(&[], Vec::as_slice)
    }

    /// Total box area per label.
    pub fn area_by_label(&self) -> BTreeMap<String, u64> {
        self.diseases
            .iter()
            .map(|(k, boxes)| {
                let area = boxes
                    .iter()
                    .map(|[y1, x1, y2, x2]| (x2 - x1) as u64 * (y2 - y1) as u64)
                    .sum();
                (k.clone(), area)
            })
            .collect()
    }
}

pub fn localize(fmap: &FeatureMap, dims: (u32, u32), mode: GroupingMode) -> DetectionReport {
    let diseases = fmap
        .iter()
        .filter(|(label, segs)| *label != BASE_COLOUR && !segs.is_empty())
        .map(|(label, segs)| {
            let boxes = group_segments(segs, mode).iter().map(Roi::to_report_box).collect();
            (label.to_string(), boxes)
        })
        .collect();
    DetectionReport {
        image: ImageDims {
            width: dims.0,
            height: dims.1,
        },
        diseases,
    }
}
