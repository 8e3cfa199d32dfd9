//! Topology-injecting pre-processing.
//!
//! Each channel is reconstructed by dilation from a marker equal to the image
//! on its first and last rows. Bright regions connected to the top or bottom
//! of the frame keep their intensity; bright regions enclosed by darker tissue
//! are capped at the level of their enclosure. The reconstruction is then
//! averaged with the input to recover some of the bright tissue detail.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::morphology::{reconstruct, ReconstructionAlgorithm};
use crate::raster::IntensityRaster;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Output `(J + I) / 2` when set, the bare reconstruction `J` otherwise.
    pub blend: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { blend: true }
    }
}

/// Marker equal to `img` on row 0 and row `height - 1`, zero elsewhere.
pub fn build_border_marker(img: &IntensityRaster) -> Result<IntensityRaster> {
    img.require_single_channel()?;
    let (w, h) = img.dims();
    let mut data = vec![0u8; w * h];
    let src = img.data();
    data[..w].copy_from_slice(&src[..w]);
    let last = (h - 1) * w;
    data[last..].copy_from_slice(&src[last..]);
    IntensityRaster::new(w, h, 1, data)
}

/// `(a + b) / 2` rounded half up.
#[inline]
pub fn blend_mean(a: u8, b: u8) -> u8 {
    ((a as u16 + b as u16 + 1) / 2) as u8
}

pub fn geodesic_preprocess(img: &IntensityRaster, cfg: PreprocessConfig) -> Result<IntensityRaster> {
    let planes = img
        .split_channels()
        .into_par_iter()
        .map(|plane| {
            let marker = build_border_marker(&plane)?;
            let rec = reconstruct(&marker, &plane, ReconstructionAlgorithm::Queue)?;
            if !cfg.blend {
                return Ok(rec);
            }
            let (w, h) = plane.dims();
            let data = rec.data().iter().zip(plane.data()).map(|(&j, &i)| blend_mean(j, i)).collect();
            IntensityRaster::new(w, h, 1, data)
        })
        .collect::<Result<Vec<_>>>()?;
    IntensityRaster::merge_channels(&planes)
}
