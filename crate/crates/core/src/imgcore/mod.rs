//! Raster substrate: RGB images, HSV conversion, quadtree segments and cropping.

mod codec;
mod color;
mod segment;

pub use codec::{decode_image, encode_image, encode_png, encode_ppm, load_image, save_image, ImageFormat};
pub use color::{hsv_to_rgb, rgb_to_hsv, HsvPixel};
pub use segment::Segment;

use crate::error::{Error, Result};

/// Owned 8-bit RGB raster stored row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct PixelImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for PixelImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PixelImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl PixelImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Decode(format!(
                "image dimensions must be non-zero, got {width}x{height}"
            )));
        }
        let expected = pixel_bytes(width, height)?;
        if data.len() != expected {
            return Err(Error::Decode(format!(
                "expected {expected} bytes of RGB data for {width}x{height}, got {}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// An image with every pixel set to `rgb`.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        let n = width as usize * height as usize;
        let data = rgb.iter().copied().cycle().take(n * 3).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        debug_assert!(x < self.width && y < self.height);
        let i = self.offset(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        debug_assert!(x < self.width && y < self.height);
        let i = self.offset(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Segment covering the whole image at depth 0.
    pub fn root_segment(&self) -> Segment {
        Segment {
            x1: 0,
            y1: 0,
            x2: self.width,
            y2: self.height,
            depth: 0,
        }
    }

    /// HSV conversion of every pixel, row-major.
    pub fn to_hsv(&self) -> Vec<HsvPixel> {
        self.pixels().map(|[r, g, b]| rgb_to_hsv(r, g, b)).collect()
    }

    /// Copy of the pixels covered by `seg`.
    pub fn crop(&self, seg: &Segment) -> Result<PixelImage> {
        seg.check_within(self.width, self.height)?;
        let w = seg.width() as usize;
        let mut data = Vec::with_capacity(w * seg.height() as usize * 3);
        for y in seg.y1..seg.y2 {
            let start = self.offset(seg.x1, y);
            data.extend_from_slice(&self.data[start..start + w * 3]);
        }
        Ok(PixelImage {
            width: seg.width(),
            height: seg.height(),
            data,
        })
    }
}

/// Free-function form of [`PixelImage::crop`].
pub fn crop(img: &PixelImage, seg: &Segment) -> Result<PixelImage> {
    img.crop(seg)
}

pub(crate) fn pixel_bytes(width: u32, height: u32) -> Result<usize> {
    (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::Decode(format!("image {width}x{height} is too large")))
}
