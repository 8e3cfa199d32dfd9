//! Training crops and pad-to-multiple for full-frame inference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Crop as _, IntensityRaster, LabelMap, LABEL_EPIDERMIS, LABEL_SC};

pub const DEFAULT_CROP_SIZE: usize = 512;
/// Four stride-2 downsampling stages.
pub const DEFAULT_PAD_MULTIPLE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub size: usize,
    pub stride: usize,
}

impl CropSpec {
    pub fn new(size: usize, stride: usize) -> Result<Self> {
        if stride == 0 || stride > size {
            return Err(Error::InvalidParameter(format!(
                "crop stride {stride} must lie in 1..={size}"
            )));
        }
        Ok(Self { size, stride })
    }

    /// Non-overlapping crops of `size`.
    pub fn square(size: usize) -> Result<Self> {
        Self::new(size, size)
    }
}

impl Default for CropSpec {
    fn default() -> Self {
        Self { size: DEFAULT_CROP_SIZE, stride: DEFAULT_CROP_SIZE }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Crop {
    pub origin: (usize, usize),
    pub image: IntensityRaster,
    pub labels: LabelMap,
}

/// Crop origins along one axis: multiples of `stride`, with the last origin
/// pulled in so the final crop ends exactly at `extent`.
pub fn axis_origins(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let last = extent - size;
    let mut origins: Vec<usize> = (0..=last).step_by(stride).collect();
    if origins.last() != Some(&last) {
        origins.push(last);
    }
    origins
}

/// All candidate crop origins, row-major.
pub fn candidate_origins(width: usize, height: usize, spec: CropSpec) -> Vec<(usize, usize)> {
    let xs = axis_origins(width, spec.size, spec.stride);
    axis_origins(height, spec.size, spec.stride)
        .into_iter()
        .flat_map(|y| xs.iter().map(move |&x| (x, y)))
        .collect()
}

/// Grid crops that contain at least one stratum corneum or epidermis pixel.
pub fn grid_crops(image: &IntensityRaster, gt: &LabelMap, spec: CropSpec) -> Result<Vec<Crop>> {
    if image.dims() != gt.dims() {
        let (w, h) = gt.dims();
        return Err(Error::DimensionMismatch {
            left: (image.width(), image.height(), image.channels()),
            right: (w, h, 1),
        });
    }
    let (w, h) = image.dims();
    if spec.size == 0 || w < spec.size || h < spec.size {
        return Err(Error::InvalidParameter(format!(
            "image {w}x{h} is smaller than the {} crop size",
            spec.size
        )));
    }
    candidate_origins(w, h, spec)
        .into_par_iter()
        .filter_map(|(x0, y0)| {
            let labels = match gt.crop(x0, y0, spec.size, spec.size) {
                Ok(l) => l,
                Err(e) => return Some(Err(e)),
            };
            if !labels.data().iter().any(|&l| l == LABEL_SC || l == LABEL_EPIDERMIS) {
                return None;
            }
            Some(
                image
                    .crop(x0, y0, spec.size, spec.size)
                    .map(|image| Crop { origin: (x0, y0), image, labels }),
            )
        })
        .collect()
}

/// Edge-replication padding on the right and bottom up to multiples of `m`.
/// Returns the padded raster and the original `(width, height)`.
pub fn pad_to_multiple(image: &IntensityRaster, m: usize) -> Result<(IntensityRaster, (usize, usize))> {
    if m == 0 {
        return Err(Error::InvalidParameter("pad multiple must be at least 1".into()));
    }
    let (w, h) = image.dims();
    let (pw, ph) = (w.div_ceil(m) * m, h.div_ceil(m) * m);
    if (pw, ph) == (w, h) {
        return Ok((image.clone(), (w, h)));
    }
    let mut data = Vec::with_capacity(pw * ph * image.channels());
    for c in 0..image.channels() {
        let plane = image.plane(c);
        for y in 0..ph {
            let row = &plane[y.min(h - 1) * w..][..w];
            data.extend_from_slice(row);
            data.extend(std::iter::repeat_n(row[w - 1], pw - w));
        }
    }
    Ok((IntensityRaster::new(pw, ph, image.channels(), data)?, (w, h)))
}

pub fn unpad(image: &IntensityRaster, original: (usize, usize)) -> Result<IntensityRaster> {
    image.crop(0, 0, original.0, original.1)
}

pub fn unpad_labels(labels: &LabelMap, original: (usize, usize)) -> Result<LabelMap> {
    labels.crop(0, 0, original.0, original.1)
}
