//! Seeded synthetic layered-tissue phantoms.
//!
//! From top to bottom a phantom contains: bright background (with a few
//! detached debris flakes), an optional detached strip with a bright gap
//! beneath it, the stratum corneum (with small bright lacunae), the darker
//! speckled living epidermis, the collagen scaffold with large bright holes,
//! and bright background again. Interfaces follow mild sinusoids.
//!
//! When the detached strip spans the whole width it closes the gap off from
//! the top background, and strip plus gap are labeled stratum corneum. When
//! the strip is interrupted by a break the gap is open to the background, and
//! strip plus gap are labeled background. Flakes, scaffold and its holes and
//! both backgrounds are background; lacunae are stratum corneum.
//!
//! # Determinism
//!
//! Randomness comes from ChaCha8 seeded with `seed`: stream 0 drives the
//! geometry, stream 1 the pixel noise. Noise consumes exactly two `u32` per
//! pixel in row-major order regardless of content, so two phantoms that
//! differ only in `detached_layer` share their noise field. Pixel noise is an
//! Irwin-Hall sum of four 4-bit uniforms and interfaces use a polynomial sine
//! built from IEEE additions and multiplications only, so output is
//! bit-identical on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{IntensityRaster, LabelMap, LABEL_BACKGROUND, LABEL_EPIDERMIS, LABEL_SC};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetachedLayer {
    None,
    #[default]
    Unbroken,
    Broken,
}

impl std::str::FromStr for DetachedLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "unbroken" => Ok(Self::Unbroken),
            "broken" => Ok(Self::Broken),
            other => Err(Error::InvalidParameter(format!("unknown detached layer kind `{other}`"))),
        }
    }
}

/// Mean RGB color and noise amplitude of one region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionTone {
    pub rgb: [u8; 3],
    /// Standard deviation of the additive noise, in intensity units.
    pub sigma: u8,
}

impl RegionTone {
    pub const fn new(rgb: [u8; 3], sigma: u8) -> Self {
        Self { rgb, sigma }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhantomTones {
    pub background: RegionTone,
    /// Stratum corneum, the detached strip and the debris flakes.
    pub sc: RegionTone,
    pub epidermis: RegionTone,
    /// Melanin speckles scattered through the epidermis.
    pub speckle: RegionTone,
    pub scaffold: RegionTone,
}

impl Default for PhantomTones {
    fn default() -> Self {
        Self {
            background: RegionTone::new([232, 230, 226], 4),
            sc: RegionTone::new([196, 178, 160], 6),
            epidermis: RegionTone::new([128, 110, 100], 10),
            speckle: RegionTone::new([60, 50, 46], 8),
            scaffold: RegionTone::new([160, 160, 176], 8),
        }
    }
}

/// Band thicknesses as fractions of the image height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandFractions {
    pub top_background: f64,
    pub sc: f64,
    pub epidermis: f64,
    pub scaffold: f64,
}

impl Default for BandFractions {
    fn default() -> Self {
        Self { top_background: 0.22, sc: 0.16, epidermis: 0.22, scaffold: 0.24 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub detached_layer: DetachedLayer,
    /// Width in columns of the interruption of a broken strip.
    pub break_width: usize,
    /// Strip thickness in pixels.
    pub strip_thickness: usize,
    /// Thickness in pixels of the bright gap between strip and stratum corneum.
    pub gap_thickness: usize,
    pub scaffold_hole_count: usize,
    pub sc_hole_count: usize,
    pub flake_count: usize,
    /// Peak deviation in pixels of the sinusoidal interfaces.
    pub wave_amplitude: usize,
    pub bands: BandFractions,
    pub tones: PhantomTones,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            seed: 0,
            detached_layer: DetachedLayer::Unbroken,
            break_width: 24,
            strip_thickness: 4,
            gap_thickness: 6,
            scaffold_hole_count: 6,
            sc_hole_count: 3,
            flake_count: 3,
            wave_amplitude: 3,
            bands: BandFractions::default(),
            tones: PhantomTones::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhantomPair {
    pub image: IntensityRaster,
    pub gt: LabelMap,
}

/// What a pixel shows, before noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Background,
    Flake,
    Strip,
    Gap,
    Sc,
    ScHole,
    Epidermis,
    Scaffold,
    ScaffoldHole,
}

/// Row boundaries of the bands for one column. Each band is `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Column {
    strip_top: usize,
    sc_top: usize,
    sc_bottom: usize,
    epidermis_bottom: usize,
    scaffold_bottom: usize,
}

#[derive(Clone, Copy, Debug)]
struct Ellipse {
    cx: i64,
    cy: i64,
    rx: i64,
    ry: i64,
}

impl Ellipse {
    fn contains(&self, x: usize, y: usize) -> bool {
        let (dx, dy) = (x as i64 - self.cx, y as i64 - self.cy);
        dx * dx * self.ry * self.ry + dy * dy * self.rx * self.rx <= self.rx * self.rx * self.ry * self.ry
    }
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

/// Interface geometry drawn from the geometry stream.
#[derive(Clone, Debug)]
pub struct PhantomLayout {
    spec: PhantomSpec,
    columns: Vec<Column>,
    break_cols: (usize, usize),
    sc_holes: Vec<Ellipse>,
    scaffold_holes: Vec<Ellipse>,
    flakes: Vec<Segment>,
}

/// `sin` from a fixed odd polynomial after reduction to `[-π, π]`. Uses only
/// IEEE-exact basic operations, so it is reproducible everywhere.
pub fn portable_sin(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = x - TAU * (x / TAU).round();
    // Fold into [-π/2, π/2] where the series converges fast.
    if r > PI / 2.0 {
        r = PI - r;
    } else if r < -PI / 2.0 {
        r = -PI - r;
    }
    let r2 = r * r;
    let mut term = r;
    let mut sum = r;
    for k in 1..=10 {
        let k = k as f64;
        term = -term * r2 / ((2.0 * k) * (2.0 * k + 1.0));
        sum += term;
    }
    sum
}

fn wave(rng: &mut ChaCha8Rng, width: usize, amplitude: usize) -> Vec<i64> {
    let cycles = 1.0 + rng.random_range(0u32..3) as f64;
    let phase = rng.random_range(0u32..1 << 16) as f64 / (1u32 << 16) as f64 * std::f64::consts::TAU;
    let amp = amplitude as f64;
    (0..width)
        .map(|x| {
            let t = std::f64::consts::TAU * cycles * x as f64 / width as f64 + phase;
            (amp * portable_sin(t)).round() as i64
        })
        .collect()
}

fn range_u(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo as u64..hi as u64) as usize
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.width < 8 || self.height < 8 {
            return bad(format!("phantom {}x{} is too small", self.width, self.height));
        }
        let b = &self.bands;
        for (name, f) in [("top_background", b.top_background), ("sc", b.sc), ("epidermis", b.epidermis), ("scaffold", b.scaffold)] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("band fraction {name} = {f} must be in (0, 1)"));
            }
        }
        if self.detached_layer == DetachedLayer::Broken && (self.break_width == 0 || self.break_width >= self.width) {
            return bad(format!("break width {} must be in 1..{}", self.break_width, self.width));
        }
        if self.detached_layer != DetachedLayer::None && (self.strip_thickness == 0 || self.gap_thickness == 0) {
            return bad("strip and gap thickness must be at least 1".into());
        }
        let h = self.height as f64;
        let zone = (self.strip_thickness + self.gap_thickness + 2 * self.wave_amplitude + 2) as f64;
        let top = (h * b.top_background).round();
        // The top background must keep at least two clean rows above the
        // detached zone, and the bottom background at least two rows below
        // the scaffold, at every column.
        let needed_top = zone + 2.0;
        let tissue = (h * (b.sc + b.epidermis + b.scaffold)).round();
        if top < needed_top || top + tissue + (2 * self.wave_amplitude + 2) as f64 > h {
            return Err(Error::InvalidParameter(format!(
                "bands do not fit in a height of {} rows",
                self.height
            )));
        }
        for t in [b.sc, b.epidermis, b.scaffold] {
            if ((h * t).round() as usize) < 2 * self.wave_amplitude + 3 {
                return bad("band thinner than the interface waves".into());
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<PhantomLayout> {
        self.validate()?;
        let (w, h) = (self.width, self.height);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0);

        let hf = h as f64;
        let b = &self.bands;
        let sc_top = (hf * b.top_background).round() as i64;
        let sc_bottom = sc_top + (hf * b.sc).round() as i64;
        let epidermis_bottom = sc_bottom + (hf * b.epidermis).round() as i64;
        let scaffold_bottom = epidermis_bottom + (hf * b.scaffold).round() as i64;
        let amp = self.wave_amplitude;
        let waves: Vec<Vec<i64>> = (0..4).map(|_| wave(&mut rng, w, amp)).collect();
        let zone = (self.strip_thickness + self.gap_thickness) as i64;
        let columns = (0..w)
            .map(|x| {
                let top = sc_top + waves[0][x];
                Column {
                    strip_top: (top - zone) as usize,
                    sc_top: top as usize,
                    sc_bottom: (sc_bottom + waves[1][x]) as usize,
                    epidermis_bottom: (epidermis_bottom + waves[2][x]) as usize,
                    scaffold_bottom: (scaffold_bottom + waves[3][x]) as usize,
                }
            })
            .collect::<Vec<_>>();

        // Drawn for every kind so the rest of the geometry does not depend on it.
        let break_start = range_u(&mut rng, 0, w - self.break_width.min(w - 1));
        let break_cols = (break_start, break_start + self.break_width);

        let min_of = |f: fn(&Column) -> usize| columns.iter().map(f).min().unwrap();
        let max_of = |f: fn(&Column) -> usize| columns.iter().map(f).max().unwrap();

        let sc_lo = max_of(|c| c.sc_top);
        let sc_hi = min_of(|c| c.sc_bottom);
        let sc_room = sc_hi.saturating_sub(sc_lo);
        let sc_holes = (0..self.sc_hole_count)
            .map(|_| {
                let ry = (sc_room as i64 / 6).clamp(1, 4);
                let rx = ry + range_u(&mut rng, 1, 5) as i64;
                let cy = range_u(&mut rng, sc_lo + ry as usize + 2, sc_hi.saturating_sub(ry as usize + 2)) as i64;
                let cx = range_u(&mut rng, 0, w) as i64;
                Ellipse { cx, cy, rx, ry }
            })
            .collect();

        let sf_lo = max_of(|c| c.epidermis_bottom);
        let sf_hi = min_of(|c| c.scaffold_bottom);
        let sf_room = sf_hi.saturating_sub(sf_lo);
        let scaffold_holes = (0..self.scaffold_hole_count)
            .map(|_| {
                let max_ry = (sf_room as i64 / 2 - 3).max(1);
                let ry = range_u(&mut rng, (max_ry / 2).max(1) as usize, max_ry as usize + 1) as i64;
                let rx = ry + range_u(&mut rng, 2, 12) as i64;
                let cy = range_u(&mut rng, sf_lo + ry as usize + 2, sf_hi.saturating_sub(ry as usize + 2)) as i64;
                let cx = range_u(&mut rng, 0, w) as i64;
                Ellipse { cx, cy, rx, ry }
            })
            .collect();

        let flake_floor = min_of(|c| c.strip_top).saturating_sub(self.gap_thickness + 2);
        let flakes = (0..self.flake_count)
            .filter_map(|_| {
                let len = range_u(&mut rng, w / 12, w / 5).max(2);
                let x0 = range_u(&mut rng, 0, w.saturating_sub(len));
                let y0 = range_u(&mut rng, 2, flake_floor.saturating_sub(self.strip_thickness));
                let y1 = y0 + self.strip_thickness;
                (y1 <= flake_floor && y0 >= 2).then_some(Segment { x0, x1: x0 + len, y0, y1 })
            })
            .collect();

        Ok(PhantomLayout { spec: self.clone(), columns, break_cols, sc_holes, scaffold_holes, flakes })
    }
}

impl PhantomLayout {
    pub fn region(&self, x: usize, y: usize) -> Region {
        let c = &self.columns[x];
        let detached = self.spec.detached_layer;
        if y < c.sc_top {
            if detached != DetachedLayer::None && y >= c.strip_top {
                let in_break = detached == DetachedLayer::Broken && (self.break_cols.0..self.break_cols.1).contains(&x);
                if y < c.strip_top + self.spec.strip_thickness {
                    return if in_break { Region::Background } else { Region::Strip };
                }
                return Region::Gap;
            }
            if self.flakes.iter().any(|f| (f.x0..f.x1).contains(&x) && (f.y0..f.y1).contains(&y)) {
                return Region::Flake;
            }
            return Region::Background;
        }
        if y < c.sc_bottom {
            if self.sc_holes.iter().any(|e| e.contains(x, y)) {
                return Region::ScHole;
            }
            return Region::Sc;
        }
        if y < c.epidermis_bottom {
            return Region::Epidermis;
        }
        if y < c.scaffold_bottom {
            if self.scaffold_holes.iter().any(|e| e.contains(x, y)) {
                return Region::ScaffoldHole;
            }
            return Region::Scaffold;
        }
        Region::Background
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        match self.region(x, y) {
            Region::Strip | Region::Gap => match self.spec.detached_layer {
                DetachedLayer::Unbroken => LABEL_SC,
                _ => LABEL_BACKGROUND,
            },
            Region::Sc | Region::ScHole => LABEL_SC,
            Region::Epidermis => LABEL_EPIDERMIS,
            Region::Background | Region::Flake | Region::Scaffold | Region::ScaffoldHole => LABEL_BACKGROUND,
        }
    }

    /// Columns of the break in the strip, `[start, end)`. Defined for every
    /// kind of phantom but only used by broken ones.
    pub fn break_columns(&self) -> (usize, usize) {
        self.break_cols
    }

    /// Rows `[strip_top, sc_top)` of the detached zone in column `x`.
    pub fn detached_rows(&self, x: usize) -> (usize, usize) {
        let c = &self.columns[x];
        (c.strip_top, c.sc_top)
    }

    /// Rows `[strip_top + strip_thickness, sc_top)` of the gap in column `x`.
    pub fn gap_rows(&self, x: usize) -> (usize, usize) {
        let c = &self.columns[x];
        (c.strip_top + self.spec.strip_thickness, c.sc_top)
    }
}

/// Irwin-Hall noise with unit spread mapped to `sigma`: four 4-bit uniforms
/// summed and centered give a value in `[-30, 30]` with standard deviation
/// `sqrt(85) ≈ 9.22`.
fn noise(nibbles: u32, sigma: u8) -> i32 {
    let n = (nibbles & 0xF) + (nibbles >> 4 & 0xF) + (nibbles >> 8 & 0xF) + (nibbles >> 12 & 0xF);
    (n as i32 - 30) * sigma as i32 * 100 / 922
}

fn shade(tone: RegionTone, channel: usize, nibbles: u32) -> u8 {
    (tone.rgb[channel] as i32 + noise(nibbles, tone.sigma)).clamp(0, 255) as u8
}

/// One in sixteen epidermis pixels is a melanin speckle.
const SPECKLE_ODDS: u32 = 16;

pub fn generate_phantom(spec: &PhantomSpec) -> Result<PhantomPair> {
    let layout = spec.layout()?;
    let (w, h) = (spec.width, spec.height);
    let n = w * h;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let words: Vec<(u32, u32)> = (0..n).map(|_| (rng.next_u32(), rng.next_u32())).collect();

    let tones = &spec.tones;
    let mut data = vec![0u8; n * 3];
    let mut labels = vec![0u8; n];
    let (planes, _) = data.split_at_mut(n * 3);
    let mut pixels: Vec<(usize, u8, [u8; 3])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let region = layout.region(x, y);
            let (a, b) = words[i];
            let tone = match region {
                Region::Background | Region::Gap | Region::ScHole | Region::ScaffoldHole => tones.background,
                Region::Flake | Region::Strip | Region::Sc => tones.sc,
                Region::Epidermis if (b >> 16) % SPECKLE_ODDS == 0 => tones.speckle,
                Region::Epidermis => tones.epidermis,
                Region::Scaffold => tones.scaffold,
            };
            let nib = [a & 0xFFFF, a >> 16, b & 0xFFFF];
            let rgb = [shade(tone, 0, nib[0]), shade(tone, 1, nib[1]), shade(tone, 2, nib[2])];
            (i, layout.label(x, y), rgb)
        })
        .collect();
    pixels.sort_unstable_by_key(|p| p.0);
    for (i, label, rgb) in pixels {
        labels[i] = label;
        for c in 0..3 {
            planes[c * n + i] = rgb[c];
        }
    }
    Ok(PhantomPair {
        image: IntensityRaster::new(w, h, 3, data)?,
        gt: LabelMap::new(w, h, labels)?,
    })
}
