//! Box overlays for `detect --annotate` and `inspect`.

use quadleaf::{PixelImage, Segment};

/// Colours handed out to labels in sorted order.
const PALETTE: [[u8; 3]; 6] = [
    [230, 25, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
];

pub const FRONTIER: [u8; 3] = [255, 255, 255];

pub fn label_colour(index: usize) -> [u8; 3] {
    PALETTE[index % PALETTE.len()]
}

/// Outlines the half-open box `[x1, x2) x [y1, y2)`, `thickness` pixels wide,
/// clipped to the image.
pub fn draw_box(img: &mut PixelImage, x1: u32, y1: u32, x2: u32, y2: u32, thickness: u32, rgb: [u8; 3]) {
    let (w, h) = img.dims();
    let (x2, y2) = (x2.min(w), y2.min(h));
    if x1 >= x2 || y1 >= y2 {
        return;
    }
    let t = thickness.max(1);
    for y in y1..y2 {
        for x in x1..x2 {
            let edge = x < x1 + t || x + t >= x2 || y < y1 + t || y + t >= y2;
            if edge {
                img.set(x, y, rgb);
            }
        }
    }
}

pub fn draw_segment(img: &mut PixelImage, s: &Segment, thickness: u32, rgb: [u8; 3]) {
    draw_box(img, s.x1, s.y1, s.x2, s.y2, thickness, rgb);
}

/// Draws report boxes (`[y1, x1, y2, x2]`) for each label, colours assigned
/// by the label's position in `labels`.
pub fn annotate_report<'a>(
    img: &PixelImage,
    labels: &[String],
    boxes: impl IntoIterator<Item = (&'a String, &'a Vec<[u32; 4]>)>,
) -> PixelImage {
    let mut out = img.clone();
    let thickness = (img.width().min(img.height()) / 256).max(1);
    for (label, bs) in boxes {
        let idx = labels.iter().position(|l| l == label).unwrap_or(0);
        for &[y1, x1, y2, x2] in bs {
            draw_box(&mut out, x1, y1, x2, y2, thickness, label_colour(idx));
        }
    }
    out
}
