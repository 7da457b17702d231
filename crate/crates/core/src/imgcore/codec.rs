use std::io::Cursor;
use std::path::Path;

use image::{ColorType, ImageFormat as ImgFormat};

use super::{pixel_bytes, PixelImage};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Ppm,
    Png,
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

impl ImageFormat {
    /// Guess from the leading bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(PNG_MAGIC) {
            Some(Self::Png)
        } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
            Some(Self::Ppm)
        } else {
            None
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ppm" | "pnm" => Some(Self::Ppm),
            "png" => Some(Self::Png),
            _ => None,
        }
    }
}

pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<PixelImage> {
    match format {
        ImageFormat::Ppm => decode_ppm(bytes),
        ImageFormat::Png => decode_png(bytes),
    }
}

pub fn encode_image(img: &PixelImage, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Ppm => Ok(encode_ppm(img)),
        ImageFormat::Png => encode_png(img),
    }
}

/// Reads a PPM or PNG file, trusting the magic bytes over the extension.
pub fn load_image(path: &Path) -> Result<PixelImage> {
    let bytes = std::fs::read(path)?;
    let format = ImageFormat::sniff(&bytes)
        .or_else(|| ImageFormat::from_path(path))
        .ok_or_else(|| Error::UnsupportedFormat(format!("{}: not a PPM or PNG file", path.display())))?;
    decode_image(&bytes, format)
}

/// Writes PNG for `.png` paths and binary PPM otherwise.
pub fn save_image(path: &Path, img: &PixelImage) -> Result<()> {
    let format = ImageFormat::from_path(path).unwrap_or(ImageFormat::Ppm);
    std::fs::write(path, encode_image(img, format)?)?;
    Ok(())
}

pub fn encode_ppm(img: &PixelImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_bytes());
    out
}

pub fn encode_png(img: &PixelImage) -> Result<Vec<u8>> {
    let buf = image::RgbImage::from_raw(img.width(), img.height(), img.as_bytes().to_vec())
        .expect("PixelImage buffer length is an invariant");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImgFormat::Png)
        .map_err(|e| Error::Decode(format!("png encode: {e}")))?;
    Ok(out.into_inner())
}

fn decode_png(bytes: &[u8]) -> Result<PixelImage> {
    let dynimg = image::load_from_memory_with_format(bytes, ImgFormat::Png)
        .map_err(|e| Error::Decode(format!("png: {e}")))?;
    let rgb = match dynimg.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => dynimg.to_rgb8(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "png with {other:?} samples; only 8-bit channels are supported"
            )))
        }
    };
    let (w, h) = rgb.dimensions();
    PixelImage::new(w, h, rgb.into_raw())
}

/// Minimal header tokenizer: whitespace separated fields with `#` comments.
struct PpmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PpmHeader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            if self.bytes[self.pos] == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Decode(format!("ppm header: missing {what}")));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self.token(what)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                Error::Decode(format!(
                    "ppm header: {what} is not a number: {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

fn decode_ppm(bytes: &[u8]) -> Result<PixelImage> {
    let mut hdr = PpmHeader { bytes, pos: 0 };
    let magic = hdr.token("magic number")?;
    match magic {
        b"P6" => {}
        b"P1" | b"P2" | b"P3" | b"P4" | b"P5" => {
            return Err(Error::UnsupportedFormat(format!(
                "{} netpbm variant; only binary RGB (P6) is supported",
                String::from_utf8_lossy(magic)
            )))
        }
        _ => {
            return Err(Error::Decode(format!(
                "ppm header: bad magic {:?}",
                String::from_utf8_lossy(magic)
            )))
        }
    }
    let width = hdr.number("width")?;
    let height = hdr.number("height")?;
    let maxval = hdr.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Decode(format!("ppm header: zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Decode(format!("ppm header: invalid maxval {maxval}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "ppm maxval {maxval}; only 8-bit (maxval 255) is supported"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(hdr.pos) {
        Some(c) if c.is_ascii_whitespace() => hdr.pos += 1,
        _ => return Err(Error::Decode("ppm header: missing raster separator".into())),
    }
    let need = pixel_bytes(width, height)?;
    let raster = &bytes[hdr.pos..];
    if raster.len() < need {
        return Err(Error::Decode(format!(
            "ppm raster truncated: need {need} bytes, have {}",
            raster.len()
        )));
    }
    PixelImage::new(width, height, raster[..need].to_vec())
}
