//! Image containers shared by every stage of the pipeline.
//!
//! All three containers store their samples row-major. Multi-channel data is
//! planar: every channel is a full `width * height` plane and planes follow
//! each other in channel order.

use crate::error::{Error, Result};

/// Number of classes produced by the segmentation (labels 1, 2 and 3).
pub const NUM_CLASSES: usize = 3;

/// Background, both above and below the tissue, plus the collagen scaffold.
pub const LABEL_BACKGROUND: u8 = 1;
/// Stratum corneum.
pub const LABEL_SC: u8 = 2;
/// Living epidermis.
pub const LABEL_EPIDERMIS: u8 = 3;
/// Transient "no label" value used inside post-processing.
pub const LABEL_NONE: u8 = 0;

/// 8-bit raster with one or three planar channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntensityRaster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl IntensityRaster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("empty frame {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidRaster(format!(
                "expected {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Raster with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Single-channel raster built from `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[u8] {
        let n = self.width * self.height;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [u8] {
        let n = self.width * self.height;
        &mut self.data[channel * n..(channel + 1) * n]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, channel: usize) -> u8 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, channel: usize, value: u8) {
        self.data[(channel * self.height + y) * self.width + x] = value;
    }

    pub fn is_single_channel(&self) -> bool {
        self.channels == 1
    }

    pub(crate) fn require_single_channel(&self) -> Result<()> {
        if self.channels == 1 {
            Ok(())
        } else {
            Err(Error::NotSingleChannel(self.channels))
        }
    }

    pub(crate) fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    /// Splits into single-channel rasters.
    pub fn split_channels(&self) -> Vec<IntensityRaster> {
        (0..self.channels)
            .map(|c| IntensityRaster {
                width: self.width,
                height: self.height,
                channels: 1,
                data: self.plane(c).to_vec(),
            })
            .collect()
    }

    /// Inverse of [`split_channels`](Self::split_channels).
    pub fn merge_channels(planes: &[IntensityRaster]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidRaster("no channels to merge".into()))?;
        let mut data = Vec::with_capacity(first.data.len() * planes.len());
        for plane in planes {
            plane.require_single_channel()?;
            if plane.dims() != first.dims() {
                return Err(Error::DimensionMismatch { left: first.shape(), right: plane.shape() });
            }
            data.extend_from_slice(&plane.data);
        }
        Self::new(first.width, first.height, planes.len(), data)
    }
}

/// Per-pixel class labels in `{0, 1, 2, 3}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("empty frame {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "expected {} labels, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|&l| l as usize > NUM_CLASSES) {
            return Err(Error::InvalidLabel { x: i % width, y: i / width, label: data[i] });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Result<Self> {
        Self::new(width, height, vec![label; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Parses rows of ASCII digits, e.g. `["112", "223"]`. Handy in tests.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(width * height);
        for row in rows {
            if row.len() != width {
                return Err(Error::InvalidRaster("ragged rows".into()));
            }
            for b in row.bytes() {
                data.push(b.wrapping_sub(b'0'));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Sets a label; panics on values outside `0..=3`.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        assert!(label as usize <= NUM_CLASSES, "label {label} out of range");
        self.data[y * self.width + x] = label;
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn count(&self, label: u8) -> usize {
        self.data.iter().filter(|&&l| l == label).count()
    }

    pub fn contains(&self, label: u8) -> bool {
        self.data.contains(&label)
    }

    pub(crate) fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, 1)
    }
}

/// Three planar channels of class probabilities; channel `k` is label `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("empty frame {width}x{height}")));
        }
        if data.len() != width * height * NUM_CLASSES {
            return Err(Error::InvalidRaster(format!(
                "expected {} probabilities, got {}",
                width * height * NUM_CLASSES,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfUnitRange { index, value: data[index] });
        }
        Ok(Self { width, height, data })
    }

    /// Exact one-hot encoding of a label map. Label 0 maps to all-zero.
    pub fn one_hot(labels: &LabelMap) -> Self {
        let n = labels.width * labels.height;
        let mut data = vec![0.0; n * NUM_CLASSES];
        for (i, &l) in labels.data.iter().enumerate() {
            if l != LABEL_NONE {
                data[(l as usize - 1) * n + i] = 1.0;
            }
        }
        Self { width: labels.width, height: labels.height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.data[(k * self.height + y) * self.width + x]
    }
}

/// Elementwise minimum of two rasters of identical shape.
pub fn pointwise_min(a: &IntensityRaster, b: &IntensityRaster) -> Result<IntensityRaster> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { left: a.shape(), right: b.shape() });
    }
    let data = a.data.iter().zip(&b.data).map(|(&p, &q)| p.min(q)).collect();
    Ok(IntensityRaster { width: a.width, height: a.height, channels: a.channels, data })
}

/// Labels each pixel with its most probable class; ties go to the lower label.
pub fn argmax_labels(probs: &ProbabilityMap) -> LabelMap {
    let n = probs.width * probs.height;
    let data = (0..n)
        .map(|i| {
            let mut best = 0;
            for k in 1..NUM_CLASSES {
                if probs.data[k * n + i] > probs.data[best * n + i] {
                    best = k;
                }
            }
            best as u8 + 1
        })
        .collect();
    LabelMap { width: probs.width, height: probs.height, data }
}

/// Rectangular sub-region extraction.
pub trait Crop: Sized {
    fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self>;
}

fn check_rect(x0: usize, y0: usize, w: usize, h: usize, width: usize, height: usize) -> Result<()> {
    let fits = w > 0
        && h > 0
        && x0.checked_add(w).is_some_and(|r| r <= width)
        && y0.checked_add(h).is_some_and(|b| b <= height);
    if fits {
        Ok(())
    } else {
        Err(Error::OutOfBounds { x0, y0, w, h, width, height })
    }
}

fn copy_rect<T: Copy>(src: &[T], src_width: usize, x0: usize, y0: usize, w: usize, h: usize, dst: &mut Vec<T>) {
    for y in y0..y0 + h {
        let row = y * src_width;
        dst.extend_from_slice(&src[row + x0..row + x0 + w]);
    }
}

impl Crop for IntensityRaster {
    fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        check_rect(x0, y0, w, h, self.width, self.height)?;
        let mut data = Vec::with_capacity(w * h * self.channels);
        for c in 0..self.channels {
            copy_rect(self.plane(c), self.width, x0, y0, w, h, &mut data);
        }
        Ok(Self { width: w, height: h, channels: self.channels, data })
    }
}

impl Crop for LabelMap {
    fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        check_rect(x0, y0, w, h, self.width, self.height)?;
        let mut data = Vec::with_capacity(w * h);
        copy_rect(&self.data, self.width, x0, y0, w, h, &mut data);
        Ok(Self { width: w, height: h, data })
    }
}
