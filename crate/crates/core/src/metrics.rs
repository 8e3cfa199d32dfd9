//! Evaluation metrics: pixel accuracy, per-class Jaccard index and mean
//! distance from predicted contours to reference contours.

use serde::{Deserialize, Serialize};

use crate::distance::squared_edt;
use crate::error::{Error, Result};
use crate::raster::{LabelMap, LABEL_EPIDERMIS, LABEL_NONE, LABEL_SC};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub jaccard_sc: f64,
    pub jaccard_le: f64,
    pub mean_contour_distance: f64,
}

impl EvalReport {
    /// Unweighted mean of several reports.
    pub fn mean(reports: &[EvalReport]) -> Option<EvalReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let sum = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(EvalReport {
            accuracy: sum(|r| r.accuracy),
            jaccard_sc: sum(|r| r.jaccard_sc),
            jaccard_le: sum(|r| r.jaccard_le),
            mean_contour_distance: sum(|r| r.mean_contour_distance),
        })
    }
}

/// Which way contour distances are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourDirection {
    /// Predicted contour pixels to the nearest reference contour pixel.
    #[default]
    Directed,
    /// Mean of both directed distances.
    Symmetric,
}

fn check_pair(pred: &LabelMap, gt: &LabelMap) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch { left: pred.shape(), right: gt.shape() });
    }
    for m in [pred, gt] {
        if let Some(i) = m.data().iter().position(|&l| l == LABEL_NONE) {
            return Err(Error::InvalidLabel { x: i % m.width(), y: i / m.width(), label: LABEL_NONE });
        }
    }
    Ok(())
}

pub fn accuracy(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    check_pair(pred, gt)?;
    let hits = pred.data().iter().zip(gt.data()).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.data().len() as f64)
}

/// Intersection over union of the pixels carrying `label`; 1 when neither map
/// contains it.
pub fn class_jaccard(pred: &LabelMap, gt: &LabelMap, label: u8) -> Result<f64> {
    check_pair(pred, gt)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let (a, b) = (p == label, g == label);
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Pixels whose label differs from the pixel directly below or directly to
/// the right. Only the upper/left pixel of each transition is marked.
pub fn boundary_mask(m: &LabelMap) -> Vec<bool> {
    let (w, h) = m.dims();
    let d = m.data();
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            (x + 1 < w && d[i] != d[i + 1]) || (y + 1 < h && d[i] != d[i + w])
        })
        .collect()
}

fn directed_distance(from: &[bool], to: &[bool], w: usize, h: usize) -> f64 {
    let Some(dist) = squared_edt(to, w, h) else {
        return 0.0;
    };
    let (mut total, mut count) = (0.0, 0usize);
    for (&b, &d) in from.iter().zip(&dist) {
        if b {
            total += (d as f64).sqrt();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Mean Euclidean distance from predicted contour pixels to the nearest
/// reference contour pixel. Zero when either contour is empty.
pub fn mean_contour_distance(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    contour_distance(pred, gt, ContourDirection::Directed)
}

pub fn contour_distance(pred: &LabelMap, gt: &LabelMap, direction: ContourDirection) -> Result<f64> {
    check_pair(pred, gt)?;
    let (w, h) = pred.dims();
    let (bp, bg) = (boundary_mask(pred), boundary_mask(gt));
    if !bp.contains(&true) || !bg.contains(&true) {
        return Ok(0.0);
    }
    let forward = directed_distance(&bp, &bg, w, h);
    Ok(match direction {
        ContourDirection::Directed => forward,
        ContourDirection::Symmetric => 0.5 * (forward + directed_distance(&bg, &bp, w, h)),
    })
}

pub fn evaluate(pred: &LabelMap, gt: &LabelMap) -> Result<EvalReport> {
    Ok(EvalReport {
        accuracy: accuracy(pred, gt)?,
        jaccard_sc: class_jaccard(pred, gt, LABEL_SC)?,
        jaccard_le: class_jaccard(pred, gt, LABEL_EPIDERMIS)?,
        mean_contour_distance: mean_contour_distance(pred, gt)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let gt = LabelMap::from_rows(&["1122", "3311"]).unwrap();
        assert_eq!(accuracy(&gt, &gt).unwrap(), 1.0);
        let half = LabelMap::from_rows(&["2211", "3311"]).unwrap();
        assert_eq!(accuracy(&half, &gt).unwrap(), 0.5);
        assert_eq!(accuracy(&gt, &half).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        let gt = LabelMap::from_rows(&["12", "31"]).unwrap();
        let zero = LabelMap::from_rows(&["10", "31"]).unwrap();
        assert!(matches!(accuracy(&zero, &gt), Err(Error::InvalidLabel { x: 1, y: 0, label: 0 })));
        assert!(class_jaccard(&gt, &zero, 2).is_err());
        let other = LabelMap::filled(3, 2, 1).unwrap();
        assert!(matches!(mean_contour_distance(&gt, &other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn jaccard_examples() {
        let gt = LabelMap::from_rows(&["2222", "2211", "1111"]).unwrap();
        assert_eq!(class_jaccard(&gt, &gt, 2).unwrap(), 1.0);
        // pred region 4 px, gt region 6 px, overlap 3 px.
        let pred = LabelMap::from_rows(&["2221", "1112", "1111"]).unwrap();
        assert_eq!(class_jaccard(&pred, &gt, 2).unwrap(), 3.0 / 7.0);
        assert_eq!(class_jaccard(&pred, &gt, 3).unwrap(), 1.0);
    }

    #[test]
    fn one_pixel_shift() {
        let gt = LabelMap::from_fn(8, 8, |_, y| if y <= 3 { 1 } else { 2 }).unwrap();
        let pred = LabelMap::from_fn(8, 8, |_, y| if y <= 4 { 1 } else { 2 }).unwrap();
        assert_eq!(mean_contour_distance(&pred, &gt).unwrap(), 1.0);
        assert_eq!(mean_contour_distance(&gt, &gt).unwrap(), 0.0);
        assert_eq!(contour_distance(&pred, &gt, ContourDirection::Symmetric).unwrap(), 1.0);
    }

    #[test]
    fn uniform_maps_have_no_contour() {
        let a = LabelMap::filled(5, 5, 1).unwrap();
        let b = LabelMap::from_rows(&["11111", "11111", "22222", "22222", "33333"]).unwrap();
        assert!(!boundary_mask(&a).contains(&true));
        assert_eq!(mean_contour_distance(&a, &b).unwrap(), 0.0);
        assert_eq!(mean_contour_distance(&b, &a).unwrap(), 0.0);
    }

    #[test]
    fn directed_is_asymmetric() {
        // Reference contour on row 1; prediction contours on rows 1 and 4.
        let gt = LabelMap::from_fn(6, 8, |_, y| if y <= 1 { 1 } else { 2 }).unwrap();
        let pred = LabelMap::from_fn(6, 8, |_, y| match y {
            0 | 1 => 1,
            2..=4 => 2,
            _ => 3,
        })
        .unwrap();
        assert_eq!(mean_contour_distance(&pred, &gt).unwrap(), 1.5);
        assert_eq!(mean_contour_distance(&gt, &pred).unwrap(), 0.0);
    }

    #[test]
    fn report_mean() {
        let a = EvalReport { accuracy: 1.0, jaccard_sc: 0.5, jaccard_le: 0.25, mean_contour_distance: 2.0 };
        let b = EvalReport { accuracy: 0.5, jaccard_sc: 1.0, jaccard_le: 0.75, mean_contour_distance: 4.0 };
        let m = EvalReport::mean(&[a, b]).unwrap();
        assert_eq!(m, EvalReport { accuracy: 0.75, jaccard_sc: 0.75, jaccard_le: 0.5, mean_contour_distance: 3.0 });
        assert!(EvalReport::mean(&[]).is_none());
    }
}
