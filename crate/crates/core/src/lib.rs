//! Global topological information for local segmentation.
//!
//! A pixel classifier with a bounded receptive field cannot tell whether a
//! bright gap belongs to the background or is enclosed by tissue. Geodesic
//! reconstruction from the top and bottom rows of the image encodes that
//! connectivity into intensities the classifier can see locally.
//!
//! Pipeline pieces, in the order they are usually applied:
//!
//! * [`phantom`]: seeded synthetic layered-tissue images with exact labels.
//! * [`preprocess`]: border-marker reconstruction blended with the input.
//! * [`tiling`]: training crops and pad-to-multiple for inference.
//! * [`classifier`]: window-statistics softmax classifier trained with the
//!   soft Jaccard loss from [`loss`].
//! * [`postprocess`]: component filtering and nearest-label fill.
//! * [`metrics`]: accuracy, per-class Jaccard, contour distance.

pub mod classifier;
pub mod distance;
pub mod error;
pub mod experiment;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod postprocess;
pub mod preprocess;
pub mod raster;
pub mod tiling;

pub use error::{Error, Result};
pub use raster::{argmax_labels, pointwise_min, Crop as _, IntensityRaster, LabelMap, ProbabilityMap};
