//! Closed-form proximal kernels for scalar and pairwise penalties.

/// `sign(z) * max(|z| - w, 0)`, the prox of `w|a|`.
#[inline]
pub fn soft_threshold(z: f64, w: f64) -> f64 {
    debug_assert!(w >= 0.0);
    if z > w {
        z - w
    } else if z < -w {
        z + w
    } else {
        0.0
    }
}

/// Prox of `up * max(a, 0) + low * max(-a, 0)`: slope `up` on the positive
/// side, `low` on the negative side.
#[inline]
pub fn asym_soft_threshold(z: f64, up: f64, low: f64) -> f64 {
    debug_assert!(up >= 0.0 && low >= 0.0);
    if z > up {
        z - up
    } else if z < -low {
        z + low
    } else {
        0.0
    }
}

/// Minimizer of `½[(a - za)² + (b - zb)²] + w |a + s b|` for `s ∈ {+1, -1}`.
///
/// The pair either shrinks by `w` along `(1, s)` or lands on the line
/// `a + s b = 0` at the orthogonal projection of `(za, zb)`.
#[inline]
pub fn fusion_prox_pair(za: f64, zb: f64, s: f64, w: f64) -> (f64, f64) {
    debug_assert!(s == 1.0 || s == -1.0);
    debug_assert!(w >= 0.0);
    let d = za + s * zb;
    if d > 2.0 * w {
        (za - w, zb - s * w)
    } else if d < -2.0 * w {
        (za + w, zb + s * w)
    } else {
        let half = 0.5 * d;
        (za - half, zb - s * half)
    }
}

/// Exact prox of `l1 (|a| + |b|) + w |a + s b|`: the fusion prox followed by
/// entrywise soft-thresholding.
#[inline]
pub fn fused_l1_pair_prox(za: f64, zb: f64, s: f64, w: f64, l1: f64) -> (f64, f64) {
    let (a, b) = fusion_prox_pair(za, zb, s, w);
    (soft_threshold(a, l1), soft_threshold(b, l1))
}
