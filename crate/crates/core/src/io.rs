//! PNG and P3F persistence.
//!
//! P3F layout (all little-endian):
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 4    | magic `P3F1`                              |
//! | 4      | 4    | width, `u32`                              |
//! | 8      | 4    | height, `u32`                             |
//! | 12     | 4    | channels, `u32`, always 3                 |
//! | 16     | 4·n  | `f32` samples, channel-major then row-major |

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::raster::{IntensityRaster, LabelMap, ProbabilityMap, NUM_CLASSES};

pub const P3F_MAGIC: &[u8; 4] = b"P3F1";
const P3F_HEADER: usize = 16;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image { path: path.to_path_buf(), source }
}

/// Interleaves planar channels into a PNG-ready buffer.
fn to_dynamic(raster: &IntensityRaster) -> DynamicImage {
    let (w, h) = (raster.width() as u32, raster.height() as u32);
    if raster.channels() == 1 {
        DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, raster.data().to_vec()).expect("sized buffer"))
    } else {
        let n = raster.width() * raster.height();
        let mut buf = Vec::with_capacity(n * 3);
        for i in 0..n {
            for c in 0..3 {
                buf.push(raster.plane(c)[i]);
            }
        }
        DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, buf).expect("sized buffer"))
    }
}

fn from_dynamic(img: DynamicImage) -> Result<IntensityRaster> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let is_gray = matches!(
        img,
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_)
    );
    if is_gray {
        return IntensityRaster::new(w, h, 1, img.into_luma8().into_raw());
    }
    let rgb = img.into_rgb8().into_raw();
    let n = w * h;
    let mut data = vec![0u8; n * 3];
    for (i, px) in rgb.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * n + i] = px[c];
        }
    }
    IntensityRaster::new(w, h, 3, data)
}

pub fn encode_png(raster: &IntensityRaster) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    to_dynamic(raster)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(image_err(Path::new("<memory>")))?;
    Ok(out.into_inner())
}

pub fn write_png(raster: &IntensityRaster, path: &Path) -> Result<()> {
    to_dynamic(raster).save_with_format(path, ImageFormat::Png).map_err(image_err(path))
}

pub fn read_png(path: &Path) -> Result<IntensityRaster> {
    let img = image::open(path).map_err(image_err(path))?;
    from_dynamic(img)
}

pub fn write_label_png(labels: &LabelMap, path: &Path) -> Result<()> {
    let (w, h) = (labels.width() as u32, labels.height() as u32);
    GrayImage::from_raw(w, h, labels.data().to_vec())
        .expect("sized buffer")
        .save_with_format(path, ImageFormat::Png)
        .map_err(image_err(path))
}

/// Reads a grayscale PNG whose values are labels in `0..=3`.
pub fn read_label_png(path: &Path) -> Result<LabelMap> {
    let img = image::open(path).map_err(image_err(path))?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    LabelMap::new(w, h, img.into_raw())
}

pub fn encode_p3f(probs: &ProbabilityMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(P3F_HEADER + probs.data().len() * 4);
    out.extend_from_slice(P3F_MAGIC);
    out.extend_from_slice(&(probs.width() as u32).to_le_bytes());
    out.extend_from_slice(&(probs.height() as u32).to_le_bytes());
    out.extend_from_slice(&(NUM_CLASSES as u32).to_le_bytes());
    for &v in probs.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_p3f(bytes: &[u8]) -> Result<ProbabilityMap> {
    if bytes.len() < P3F_HEADER {
        return Err(Error::P3f(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != P3F_MAGIC {
        return Err(Error::P3f("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (width, height, channels) = (word(4), word(8), word(12));
    if channels != NUM_CLASSES {
        return Err(Error::P3f(format!("expected 3 channels, got {channels}")));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels * 4))
        .ok_or_else(|| Error::P3f("dimensions overflow".into()))?;
    let payload = &bytes[P3F_HEADER..];
    if payload.len() != expected {
        return Err(Error::P3f(format!("expected {expected} payload bytes, got {}", payload.len())));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    ProbabilityMap::new(width, height, data)
}

pub fn write_p3f(probs: &ProbabilityMap, path: &Path) -> Result<()> {
    fs::write(path, encode_p3f(probs)).map_err(io_err(path))
}

pub fn read_p3f(path: &Path) -> Result<ProbabilityMap> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_p3f(&bytes)
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, contents).map_err(io_err(tmp))?;
    fs::rename(tmp, path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p3f_layout() {
        let p = ProbabilityMap::new(2, 1, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125]).unwrap();
        let bytes = encode_p3f(&p);
        assert_eq!(&bytes[..4], b"P3F1");
        assert_eq!(&bytes[4..16], &[2, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &0.25f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(decode_p3f(&bytes).unwrap(), p);
    }

    #[test]
    fn p3f_rejects_garbage() {
        assert!(decode_p3f(b"P3F").is_err());
        assert!(decode_p3f(b"P3F2\x01\0\0\0\x01\0\0\0\x03\0\0\0").is_err());
        let mut bytes = encode_p3f(&ProbabilityMap::new(1, 1, vec![0.1, 0.2, 0.7]).unwrap());
        bytes.pop();
        assert!(decode_p3f(&bytes).is_err());
        bytes[12] = 4;
        assert!(decode_p3f(&bytes).is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rgb = IntensityRaster::new(3, 2, 3, (0..18).map(|v| v * 14).collect()).unwrap();
        let path = dir.path().join("rgb.png");
        write_png(&rgb, &path).unwrap();
        assert_eq!(read_png(&path).unwrap(), rgb);

        let gray = IntensityRaster::from_fn(5, 4, |x, y| (x * 50 + y) as u8).unwrap();
        let path = dir.path().join("gray.png");
        write_png(&gray, &path).unwrap();
        assert_eq!(read_png(&path).unwrap(), gray);

        let labels = LabelMap::from_rows(&["0123", "3210"]).unwrap();
        let path = dir.path().join("labels.png");
        write_label_png(&labels, &path).unwrap();
        assert_eq!(read_label_png(&path).unwrap(), labels);
    }

    #[test]
    fn label_png_rejects_large_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        write_png(&IntensityRaster::filled(2, 2, 1, 200).unwrap(), &path).unwrap();
        assert!(matches!(read_label_png(&path), Err(Error::InvalidLabel { .. })));
    }
}
