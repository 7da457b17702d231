use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned pixel rectangle `[x1, x2) × [y1, y2)` at a quadtree depth.
///
/// The origin is the top-left corner of the image; x grows to the right and
/// y grows downward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
    pub depth: u32,
}

impl std::fmt::Display for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[x {}..{}, y {}..{} @ depth {}]",
            self.x1, self.x2, self.y1, self.y2, self.depth
        )
    }
}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Row-major order: `(y1, x1)` first, the remaining fields only break ties.
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y1, self.x1, self.y2, self.x2, self.depth).cmp(&(
            other.y1,
            other.x1,
            other.y2,
            other.x2,
            other.depth,
        ))
    }
}

impl Segment {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32, depth: u32) -> Result<Self> {
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::Config(format!(
                "degenerate segment x {x1}..{x2}, y {y1}..{y2}"
            )));
        }
        Ok(Self {
            x1,
            y1,
            x2,
            y2,
            depth,
        })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn is_divisible(&self) -> bool {
        self.width() >= 2 && self.height() >= 2
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<()> {
        if self.x2 > width || self.y2 > height || self.x1 >= self.x2 || self.y1 >= self.y2 {
            return Err(Error::Bounds {
                segment: self.to_string(),
                width,
                height,
            });
        }
        Ok(())
    }

    pub fn contains(&self, other: &Segment) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && other.x2 <= self.x2 && other.y2 <= self.y2
    }

    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        (self.x1..self.x2).contains(&x) && (self.y1..self.y2).contains(&y)
    }

    /// Shares at least one pixel with `other`.
    pub fn overlaps(&self, other: &Segment) -> bool {
        self.x1 < other.x2 && other.x1 < self.x2 && self.y1 < other.y2 && other.y1 < self.y2
    }

    /// Closed hulls intersect: overlapping, or sharing an edge or a corner.
    pub fn touches(&self, other: &Segment) -> bool {
        self.x1 <= other.x2 && other.x1 <= self.x2 && self.y1 <= other.y2 && other.y1 <= self.y2
    }

    /// Splits into `[top-left, top-right, bottom-left, bottom-right]`.
    ///
    /// The split point is `x1 + width / 2` (floor), so right and bottom
    /// children take the remainder of odd dimensions.
    pub fn split_quadrants(&self) -> Result<[Segment; 4]> {
        if !self.is_divisible() {
            return Err(Error::IndivisibleSegment(self.to_string()));
        }
        let mx = self.x1 + self.width() / 2;
        let my = self.y1 + self.height() / 2;
        let d = self.depth + 1;
        let s = |x1, y1, x2, y2| Segment {
            x1,
            y1,
            x2,
            y2,
            depth: d,
        };
        Ok([
            s(self.x1, self.y1, mx, my),
            s(mx, self.y1, self.x2, my),
            s(self.x1, my, mx, self.y2),
            s(mx, my, self.x2, self.y2),
        ])
    }
}
