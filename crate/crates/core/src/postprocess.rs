//! Topological clean-up of a predicted label map.
//!
//! 1. Stratum corneum and epidermis keep only their largest 4-connected
//!    component. Background keeps the components touching the top row or the
//!    bottom row. Everything else becomes unlabeled.
//! 2. Unlabeled pixels take the label of the nearest labeled pixel
//!    (Euclidean), preferring the smaller label on ties.
//!
//! A Euclidean fill can leave a label split in several pieces (the nearest
//! pixel of a label is not always reachable through pixels that end up with
//! that label), so both steps are repeated until the map stops changing. If
//! that takes more than [`MAX_EUCLIDEAN_PASSES`], the last pass fills by
//! breadth-first propagation instead, which always yields a fixed point.

use std::collections::VecDeque;

use crate::distance::squared_edt;
use crate::error::{Error, Result};
use crate::raster::{LabelMap, LABEL_BACKGROUND, LABEL_EPIDERMIS, LABEL_NONE, LABEL_SC, NUM_CLASSES};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub label: u8,
    /// Row-major pixel indices, in ascending order.
    pub pixels: Vec<usize>,
    pub touches_top: bool,
    pub touches_bottom: bool,
}

impl Component {
    pub fn size(&self) -> usize {
        self.pixels.len()
    }

    /// First pixel in row-major order.
    pub fn first_pixel(&self) -> usize {
        self.pixels[0]
    }
}

/// 4-connected components of `label`, largest first; equal sizes are ordered
/// by their first pixel in row-major order.
pub fn connected_components(m: &LabelMap, label: u8) -> Vec<Component> {
    let (w, h) = m.dims();
    let data = m.data();
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    for start in 0..w * h {
        if seen[start] || data[start] != label {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(p) = queue.pop_front() {
            pixels.push(p);
            let (x, y) = (p % w, p / w);
            let neighbors = [
                (x > 0).then(|| p - 1),
                (x + 1 < w).then(|| p + 1),
                (y > 0).then(|| p - w),
                (y + 1 < h).then(|| p + w),
            ];
            for q in neighbors.into_iter().flatten() {
                if !seen[q] && data[q] == label {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        pixels.sort_unstable();
        let touches_top = pixels[0] < w;
        let touches_bottom = *pixels.last().unwrap() >= (h - 1) * w;
        out.push(Component { label, pixels, touches_top, touches_bottom });
    }
    // Components are discovered in order of their first pixel, so a stable
    // sort on size alone gives the documented tie-break.
    out.sort_by(|a, b| b.size().cmp(&a.size()));
    out
}

/// Step 1 alone: returns the map with discarded components set to 0.
pub fn filter_components(m: &LabelMap) -> LabelMap {
    let mut out = m.clone();
    let data = out.data_mut();
    for label in [LABEL_SC, LABEL_EPIDERMIS] {
        for comp in connected_components(m, label).iter().skip(1) {
            for &p in &comp.pixels {
                data[p] = LABEL_NONE;
            }
        }
    }
    for comp in connected_components(m, LABEL_BACKGROUND) {
        if !(comp.touches_top || comp.touches_bottom) {
            for &p in &comp.pixels {
                data[p] = LABEL_NONE;
            }
        }
    }
    out
}

/// Step 2 alone: labels every 0 pixel from the nearest labeled pixel.
pub fn fill_nearest(m: &LabelMap) -> Result<LabelMap> {
    let (w, h) = m.dims();
    let distances: Vec<Option<Vec<u64>>> = (1..=NUM_CLASSES as u8)
        .map(|label| {
            let features: Vec<bool> = m.data().iter().map(|&l| l == label).collect();
            squared_edt(&features, w, h)
        })
        .collect();
    if distances.iter().all(Option::is_none) {
        return Err(Error::Degenerate);
    }
    let mut out = m.clone();
    for (i, slot) in out.data_mut().iter_mut().enumerate() {
        if *slot != LABEL_NONE {
            continue;
        }
        let mut best: Option<(u64, u8)> = None;
        for (k, dist) in distances.iter().enumerate() {
            if let Some(d) = dist {
                // Strict comparison keeps the smaller label on ties.
                if best.is_none_or(|(bd, _)| d[i] < bd) {
                    best = Some((d[i], k as u8 + 1));
                }
            }
        }
        *slot = best.expect("at least one label survives").1;
    }
    Ok(out)
}

/// Fills 0 pixels by multi-source breadth-first propagation through 4-adjacency.
/// Every filled pixel is connected to a pixel of its label, so the result is
/// a fixed point of [`filter_components`] when the input was filtered.
pub fn fill_propagate(m: &LabelMap) -> Result<LabelMap> {
    let (w, h) = m.dims();
    let mut out = m.clone();
    let data = out.data_mut();
    let mut queue: VecDeque<usize> = (0..w * h).filter(|&i| data[i] != LABEL_NONE).collect();
    if queue.is_empty() {
        return Err(Error::Degenerate);
    }
    while let Some(p) = queue.pop_front() {
        let (x, y) = (p % w, p / w);
        let neighbors = [
            (y > 0).then(|| p - w),
            (x > 0).then(|| p - 1),
            (x + 1 < w).then(|| p + 1),
            (y + 1 < h).then(|| p + w),
        ];
        for q in neighbors.into_iter().flatten() {
            if data[q] == LABEL_NONE {
                data[q] = data[p];
                queue.push_back(q);
            }
        }
    }
    Ok(out)
}

pub const MAX_EUCLIDEAN_PASSES: usize = 16;

/// Both clean-up steps, repeated to a fixed point. Input labels must be in
/// `{1, 2, 3}`.
pub fn enforce_topology(m: &LabelMap) -> Result<LabelMap> {
    if let Some(i) = m.data().iter().position(|&l| l == LABEL_NONE) {
        return Err(Error::InvalidLabel { x: i % m.width(), y: i / m.width(), label: LABEL_NONE });
    }
    let mut current = m.clone();
    for _ in 0..MAX_EUCLIDEAN_PASSES {
        let filtered = filter_components(&current);
        if filtered == current {
            return Ok(current);
        }
        current = fill_nearest(&filtered)?;
    }
    let filtered = filter_components(&current);
    if filtered == current {
        return Ok(current);
    }
    fill_propagate(&filtered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn component_examples() {
        let uniform = LabelMap::filled(4, 3, 2).unwrap();
        let comps = connected_components(&uniform, 2);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].size(), 12);
        assert!(comps[0].touches_top && comps[0].touches_bottom);
        assert!(connected_components(&uniform, 3).is_empty());

        let diagonal = LabelMap::from_rows(&["2211", "2211", "1122", "1122"]).unwrap();
        let comps = connected_components(&diagonal, 2);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].pixels, vec![0, 1, 4, 5]);
        assert!(comps[0].touches_top && !comps[0].touches_bottom);
        assert!(!comps[1].touches_top && comps[1].touches_bottom);
    }

    #[test]
    fn component_ordering() {
        let m = LabelMap::from_rows(&["3131", "1113", "3313"]).unwrap();
        let sizes: Vec<_> = connected_components(&m, 3).iter().map(|c| (c.size(), c.first_pixel())).collect();
        assert_eq!(sizes, vec![(2, 7), (2, 8), (1, 0), (1, 2)]);
    }

    #[test]
    fn conforming_map_is_unchanged() {
        let m = LabelMap::from_rows(&["1111", "2222", "2332", "3333", "1111"]).unwrap();
        assert_eq!(enforce_topology(&m).unwrap(), m);
    }

    #[test]
    fn smaller_sc_component_removed_and_refilled() {
        let m = LabelMap::from_rows(&[
            "111111", //
            "222111", //
            "221122", //
            "111121", //
            "333333", //
            "111111",
        ])
        .unwrap();
        // Sizes 5 and 3. The background pixel at (5,3) is enclosed and goes
        // too. Refill: (4,2) and (5,2) sit next to background; (4,3) is one
        // step from both background (3,3) and epidermis (4,4) and 1 wins the
        // tie; (5,3) is closest to the epidermis.
        let expected = LabelMap::from_rows(&[
            "111111", //
            "222111", //
            "221111", //
            "111113", //
            "333333", //
            "111111",
        ])
        .unwrap();
        assert_eq!(enforce_topology(&m).unwrap(), expected);
    }

    #[test]
    fn interior_background_island_becomes_sc() {
        let m = LabelMap::from_rows(&["11111", "22222", "22122", "22222", "33333"]).unwrap();
        let out = enforce_topology(&m).unwrap();
        assert_eq!(out.get(2, 2), 2);
        assert_eq!(out.count(1), 5);
    }

    #[test]
    fn degenerate_input() {
        // A lone background island: discarded, nothing left to fill from.
        let m = LabelMap::from_rows(&["222", "212", "222"]).unwrap();
        assert!(enforce_topology(&m).is_ok());
        let zeros = LabelMap::filled(3, 3, 0).unwrap();
        assert!(matches!(fill_nearest(&zeros), Err(Error::Degenerate)));
        assert!(enforce_topology(&zeros).is_err());
    }

    #[test]
    fn propagation_keeps_components_whole() {
        let m = LabelMap::from_rows(&["1100", "0000", "0003"]).unwrap();
        let out = fill_propagate(&m).unwrap();
        assert!(!out.contains(0));
        assert_eq!(connected_components(&out, 1).len(), 1);
        assert_eq!(connected_components(&out, 3).len(), 1);
        assert!(fill_propagate(&LabelMap::filled(2, 2, 0).unwrap()).is_err());
    }

    fn random_map() -> impl Strategy<Value = LabelMap> {
        (1usize..16, 1usize..16).prop_flat_map(|(w, h)| {
            prop::collection::vec(1u8..=3, w * h).prop_map(move |d| LabelMap::new(w, h, d).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]
        #[test]
        fn output_is_topologically_clean(m in random_map()) {
            let out = enforce_topology(&m).unwrap();
            prop_assert!(!out.contains(LABEL_NONE));
            prop_assert!(connected_components(&out, LABEL_SC).len() <= 1);
            prop_assert!(connected_components(&out, LABEL_EPIDERMIS).len() <= 1);
            prop_assert_eq!(enforce_topology(&out).unwrap(), out.clone());

            let filtered = filter_components(&m);
            let kept = connected_components(&filtered, LABEL_BACKGROUND);
            prop_assert!(kept.iter().all(|c| c.touches_top || c.touches_bottom));
        }
    }
}
