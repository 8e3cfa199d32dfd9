//! Grayscale dilation with the 4-connected cross and geodesic reconstruction
//! by dilation.
//!
//! Three interchangeable reconstruction algorithms compute the same function:
//!
//! * [`ReconstructionAlgorithm::Naive`] iterates `J <- min(dilate(J), mask)`
//!   until nothing changes. Slow, obviously correct, kept as the oracle.
//! * [`ReconstructionAlgorithm::Sequential`] alternates forward and backward
//!   raster sweeps over causal and anti-causal half-neighborhoods.
//! * [`ReconstructionAlgorithm::Queue`] runs one forward and one backward sweep,
//!   then finishes with FIFO propagation from the pixels that can still grow
//!   (the hybrid algorithm of L. Vincent).
//!
//! Pixels outside the frame do not exist: there is no padding.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::IntensityRaster;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructionAlgorithm {
    Naive,
    Sequential,
    Queue,
}

impl ReconstructionAlgorithm {
    pub const ALL: [ReconstructionAlgorithm; 3] = [Self::Naive, Self::Sequential, Self::Queue];

    pub fn name(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Sequential => "sequential",
            Self::Queue => "queue",
        }
    }
}

impl fmt::Display for ReconstructionAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReconstructionAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Self::Naive),
            "sequential" => Ok(Self::Sequential),
            "queue" => Ok(Self::Queue),
            other => Err(Error::InvalidParameter(format!("unknown reconstruction algorithm `{other}`"))),
        }
    }
}

/// Dilation by the 5-pixel cross (origin plus its 4 neighbors).
pub fn dilate_cross(img: &IntensityRaster) -> Result<IntensityRaster> {
    img.require_single_channel()?;
    let (w, h) = img.dims();
    let mut out = vec![0u8; w * h];
    dilate_plane(img.data(), w, h, &mut out);
    IntensityRaster::new(w, h, 1, out)
}

fn max_into(dst: &mut [u8], src: &[u8]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = (*d).max(s);
    }
}

fn dilate_plane(src: &[u8], w: usize, h: usize, dst: &mut [u8]) {
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut dst[y * w..(y + 1) * w];
        out.copy_from_slice(row);
        max_into(&mut out[1..], &row[..w - 1]);
        max_into(&mut out[..w - 1], &row[1..]);
        if y > 0 {
            max_into(out, &src[(y - 1) * w..y * w]);
        }
        if y + 1 < h {
            max_into(out, &src[(y + 1) * w..(y + 2) * w]);
        }
    }
}

/// Geodesic reconstruction by dilation of `mask` from `marker`.
///
/// Requires single-channel rasters of equal size with `marker <= mask`
/// everywhere; the first offending pixel in row-major order is reported
/// otherwise.
pub fn reconstruct(
    marker: &IntensityRaster,
    mask: &IntensityRaster,
    algo: ReconstructionAlgorithm,
) -> Result<IntensityRaster> {
    marker.require_single_channel()?;
    mask.require_single_channel()?;
    if marker.dims() != mask.dims() {
        return Err(Error::DimensionMismatch { left: marker.shape(), right: mask.shape() });
    }
    let (w, h) = mask.dims();
    if let Some(i) = marker.data().iter().zip(mask.data()).position(|(m, i)| m > i) {
        return Err(Error::MarkerAboveMask {
            x: i % w,
            y: i / w,
            marker: marker.data()[i],
            mask: mask.data()[i],
        });
    }
    let mut current = marker.data().to_vec();
    match algo {
        ReconstructionAlgorithm::Naive => naive(&mut current, mask.data(), w, h),
        ReconstructionAlgorithm::Sequential => sequential(&mut current, mask.data(), w, h),
        ReconstructionAlgorithm::Queue => hybrid(&mut current, mask.data(), w, h),
    }
    IntensityRaster::new(w, h, 1, current)
}

fn naive(current: &mut Vec<u8>, mask: &[u8], w: usize, h: usize) {
    let mut next = vec![0u8; w * h];
    loop {
        dilate_plane(current, w, h, &mut next);
        for (n, &m) in next.iter_mut().zip(mask) {
            *n = (*n).min(m);
        }
        if next == *current {
            return;
        }
        std::mem::swap(current, &mut next);
    }
}

/// Forward raster sweep: origin, upper and left neighbors. Returns whether any
/// pixel changed.
fn forward_sweep(j: &mut [u8], mask: &[u8], w: usize, h: usize) -> bool {
    let mut changed = false;
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            let mut v = j[i];
            if x > 0 {
                v = v.max(j[i - 1]);
            }
            if y > 0 {
                v = v.max(j[i - w]);
            }
            v = v.min(mask[i]);
            if v != j[i] {
                j[i] = v;
                changed = true;
            }
        }
    }
    changed
}

/// Backward raster sweep: origin, lower and right neighbors.
fn backward_sweep(j: &mut [u8], mask: &[u8], w: usize, h: usize) -> bool {
    let mut changed = false;
    for y in (0..h).rev() {
        let row = y * w;
        for x in (0..w).rev() {
            let i = row + x;
            let mut v = j[i];
            if x + 1 < w {
                v = v.max(j[i + 1]);
            }
            if y + 1 < h {
                v = v.max(j[i + w]);
            }
            v = v.min(mask[i]);
            if v != j[i] {
                j[i] = v;
                changed = true;
            }
        }
    }
    changed
}

fn sequential(j: &mut [u8], mask: &[u8], w: usize, h: usize) {
    loop {
        let forward = forward_sweep(j, mask, w, h);
        let backward = backward_sweep(j, mask, w, h);
        if !forward && !backward {
            return;
        }
    }
}

fn hybrid(j: &mut [u8], mask: &[u8], w: usize, h: usize) {
    forward_sweep(j, mask, w, h);

    // Backward sweep that also seeds the queue with every pixel that could
    // still raise one of its anti-causal neighbors.
    let mut queue: VecDeque<usize> = VecDeque::new();
    for y in (0..h).rev() {
        let row = y * w;
        for x in (0..w).rev() {
            let i = row + x;
            let mut v = j[i];
            if x + 1 < w {
                v = v.max(j[i + 1]);
            }
            if y + 1 < h {
                v = v.max(j[i + w]);
            }
            v = v.min(mask[i]);
            j[i] = v;
            let can_raise = |q: usize| j[q] < v && j[q] < mask[q];
            if (x + 1 < w && can_raise(i + 1)) || (y + 1 < h && can_raise(i + w)) {
                queue.push_back(i);
            }
        }
    }

    while let Some(p) = queue.pop_front() {
        let v = j[p];
        let (x, y) = (p % w, p / w);
        let mut visit = |q: usize| {
            if j[q] < v && j[q] != mask[q] {
                j[q] = v.min(mask[q]);
                queue.push_back(q);
            }
        };
        if x > 0 {
            visit(p - 1);
        }
        if x + 1 < w {
            visit(p + 1);
        }
        if y > 0 {
            visit(p - w);
        }
        if y + 1 < h {
            visit(p + w);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::pointwise_min;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gray(w: usize, h: usize, data: &[u8]) -> IntensityRaster {
        IntensityRaster::new(w, h, 1, data.to_vec()).unwrap()
    }

    /// Border of 2s around a 2x2 block of 9s.
    fn walled_block() -> IntensityRaster {
        gray(4, 4, &[2, 2, 2, 2, 2, 9, 9, 2, 2, 9, 9, 2, 2, 2, 2, 2])
    }

    #[test]
    fn dilate_examples() {
        let c = IntensityRaster::filled(4, 3, 1, 42).unwrap();
        assert_eq!(dilate_cross(&c).unwrap(), c);
        assert_eq!(dilate_cross(&gray(1, 1, &[7])).unwrap().data(), &[7]);
        let spot = gray(3, 3, &[0, 0, 0, 0, 5, 0, 0, 0, 0]);
        assert_eq!(dilate_cross(&spot).unwrap().data(), &[0, 5, 0, 5, 5, 5, 0, 5, 0]);
        assert!(matches!(
            dilate_cross(&IntensityRaster::filled(2, 2, 3, 0).unwrap()),
            Err(Error::NotSingleChannel(3))
        ));
    }

    #[test]
    fn reconstruct_examples() {
        let mask = walled_block();
        let mut marker = vec![0u8; 16];
        marker[..4].copy_from_slice(&mask.data()[..4]);
        marker[12..].copy_from_slice(&mask.data()[12..]);
        let marker = gray(4, 4, &marker);
        for algo in ReconstructionAlgorithm::ALL {
            assert_eq!(reconstruct(&mask, &mask, algo).unwrap(), mask, "{algo}");
            let zero = IntensityRaster::filled(4, 4, 1, 0).unwrap();
            assert_eq!(reconstruct(&zero, &mask, algo).unwrap(), zero, "{algo}");
            assert_eq!(reconstruct(&marker, &mask, algo).unwrap().data(), &[2; 16], "{algo}");
        }
    }

    #[test]
    fn reconstruct_preconditions() {
        let mask = walled_block();
        let mut marker = vec![0u8; 16];
        marker[6] = 10;
        marker[9] = 10;
        let err = reconstruct(&gray(4, 4, &marker), &mask, ReconstructionAlgorithm::Queue).unwrap_err();
        assert!(matches!(err, Error::MarkerAboveMask { x: 2, y: 1, marker: 10, mask: 9 }));
        assert!(reconstruct(&gray(2, 2, &[0; 4]), &mask, ReconstructionAlgorithm::Naive).is_err());
    }

    #[test]
    fn names_round_trip() {
        for algo in ReconstructionAlgorithm::ALL {
            assert_eq!(algo.name().parse::<ReconstructionAlgorithm>().unwrap(), algo);
        }
        assert!("fast".parse::<ReconstructionAlgorithm>().is_err());
    }

    fn random_raster(rng: &mut ChaCha8Rng, w: usize, h: usize) -> IntensityRaster {
        gray(w, h, &(0..w * h).map(|_| rng.random()).collect::<Vec<u8>>())
    }

    #[test]
    fn variants_agree_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let (w, h) = (rng.random_range(1..20), rng.random_range(1..20));
            let mask = random_raster(&mut rng, w, h);
            let marker = pointwise_min(&random_raster(&mut rng, w, h), &mask).unwrap();
            let oracle = reconstruct(&marker, &mask, ReconstructionAlgorithm::Naive).unwrap();
            for algo in [ReconstructionAlgorithm::Sequential, ReconstructionAlgorithm::Queue] {
                assert_eq!(reconstruct(&marker, &mask, algo).unwrap(), oracle, "{algo} {w}x{h}");
            }
            let step = pointwise_min(&dilate_cross(&oracle).unwrap(), &mask).unwrap();
            assert_eq!(step, oracle);
        }
    }
}
