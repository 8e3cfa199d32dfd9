//! Exact squared Euclidean distance transform.
//!
//! Two separable passes (Meijster, Roerdink and Hesselink): a column scan
//! giving vertical distances, then a lower-envelope scan per row. All
//! arithmetic is integer, so results are exact.

/// Squared distance from every pixel to the nearest `true` pixel of
/// `features`, or `None` when there is no feature pixel at all.
pub fn squared_edt(features: &[bool], width: usize, height: usize) -> Option<Vec<u64>> {
    assert_eq!(features.len(), width * height, "feature mask size");
    if !features.iter().any(|&f| f) {
        return None;
    }
    let inf = (width + height) as i64;

    // Vertical distance to the nearest feature in the same column.
    let mut g = vec![0i64; width * height];
    for x in 0..width {
        g[x] = if features[x] { 0 } else { inf };
        for y in 1..height {
            let i = y * width + x;
            g[i] = if features[i] { 0 } else { g[i - width] + 1 };
        }
        for y in (0..height - 1).rev() {
            let i = y * width + x;
            if g[i + width] < g[i] {
                g[i] = g[i + width] + 1;
            }
        }
    }

    let mut out = vec![0u64; width * height];
    let mut s = vec![0usize; width];
    let mut t = vec![0i64; width];
    for y in 0..height {
        let row = &g[y * width..(y + 1) * width];
        let f = |x: i64, i: usize| (x - i as i64).pow(2) + row[i].pow(2);
        let sep = |i: usize, u: usize| {
            let (i2, u2) = ((i as i64).pow(2), (u as i64).pow(2));
            (u2 - i2 + row[u].pow(2) - row[i].pow(2)).div_euclid(2 * (u as i64 - i as i64))
        };

        let mut q: isize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..width {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let w = 1 + sep(s[q as usize], u);
                if w < width as i64 {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = w;
                }
            }
        }
        for u in (0..width).rev() {
            out[y * width + u] = f(u as i64, s[q as usize]) as u64;
            if u as i64 == t[q as usize] {
                q -= 1;
            }
        }
    }
    Some(out)
}
