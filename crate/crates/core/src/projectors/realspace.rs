//! Weight enumeration for the real-space projectors.
//!
//! Every routine calls `emit(pixel, cell, weight)` for one view, where `pixel`
//! is the row-major index into the `size x size` image and `cell` the detector
//! index. Forward and adjoint share these enumerations verbatim.

use std::f64::consts::FRAC_PI_4;

use super::ProjectorKind;

/// Directions with a component below this are treated as axis-parallel.
const AXIS_EPS: f64 = 1e-12;

pub(super) fn for_each_weight(
    kind: ProjectorKind,
    size: usize,
    cells: usize,
    theta: f64,
    emit: impl FnMut(usize, usize, f64),
) {
    match kind {
        ProjectorKind::Pd => pixel_driven(size, cells, theta, emit),
        ProjectorKind::Rd => ray_driven(size, cells, theta, emit),
        ProjectorKind::Dd => distance_driven(size, cells, theta, emit),
        ProjectorKind::Ss => slant_stacking(size, cells, theta, emit),
        ProjectorKind::Wf | ProjectorKind::Kb => unreachable!("gridding projectors have no real-space weights"),
    }
}

fn half(len: usize) -> f64 {
    (len as f64 - 1.0) / 2.0
}

/// Each pixel center is projected onto the detector and split linearly
/// between the two cells whose centers bracket it.
fn pixel_driven(size: usize, cells: usize, theta: f64, mut emit: impl FnMut(usize, usize, f64)) {
    let (s, c) = theta.sin_cos();
    let hp = half(size);
    let hc = half(cells);
    let xs: Vec<f64> = (0..size).map(|j| (j as f64 - hp) * c).collect();
    for i in 0..size {
        let ys = (hp - i as f64) * s;
        for (j, &xc) in xs.iter().enumerate() {
            let pos = xc + ys + hc;
            let n0 = ffloor(pos);
            let frac = pos - n0;
            let pix = i * size + j;
            if n0 >= 0.0 && n0 < cells as f64 && frac < 1.0 {
                emit(pix, n0 as usize, 1.0 - frac);
            }
            let n1 = n0 + 1.0;
            if frac > 0.0 && n1 >= 0.0 && n1 < cells as f64 {
                emit(pix, n1 as usize, frac);
            }
        }
    }
}

/// Siddon traversal: the ray through each cell center is walked through the
/// pixel grid and every pixel receives the length of its intersection.
/// A point on a grid line belongs to the pixel on its higher-coordinate side
/// unless the ray is leaving in the opposite direction.
fn ray_driven(size: usize, cells: usize, theta: f64, mut emit: impl FnMut(usize, usize, f64)) {
    let (s, c) = theta.sin_cos();
    let lim = size as f64 / 2.0;
    let hc = half(cells);
    let last = size as isize - 1;
    // direction along the ray
    let (d1, d2) = (-s, c);
    let inv1 = if d1.abs() < AXIS_EPS { 0.0 } else { 1.0 / d1 };
    let inv2 = if d2.abs() < AXIS_EPS { 0.0 } else { 1.0 / d2 };
    for cell in 0..cells {
        let t = cell as f64 - hc;
        let (p1, p2) = (t * c, t * s);
        let Some((lo1, hi1)) = slab(p1, d1, lim) else { continue };
        let Some((lo2, hi2)) = slab(p2, d2, lim) else { continue };
        let lmin = lo1.max(lo2);
        let lmax = hi1.min(hi2);
        if lmax <= lmin {
            continue;
        }
        let u = p1 + lmin * d1 + lim;
        let v = lim - (p2 + lmin * d2);
        let mut j = (if inv1 < 0.0 { fceil(u) - 1.0 } else { ffloor(u) } as isize).clamp(0, last);
        let mut i = (if inv2 > 0.0 { fceil(v) - 1.0 } else { ffloor(v) } as isize).clamp(0, last);
        // column boundary ahead of the ray and the step in j
        let (sj, mut lam1) = if inv1 > 0.0 {
            (1, (j as f64 + 1.0 - lim - p1) * inv1)
        } else if inv1 < 0.0 {
            (-1, (j as f64 - lim - p1) * inv1)
        } else {
            (0, f64::INFINITY)
        };
        // x2 grows as the row index shrinks
        let (si, mut lam2) = if inv2 > 0.0 {
            (-1, (lim - i as f64 - p2) * inv2)
        } else if inv2 < 0.0 {
            (1, (lim - i as f64 - 1.0 - p2) * inv2)
        } else {
            (0, f64::INFINITY)
        };
        let mut cur = lmin;
        loop {
            let next = lam1.min(lam2).min(lmax);
            if next > cur {
                emit(i as usize * size + j as usize, cell, next - cur);
            }
            if next >= lmax {
                break;
            }
            if lam1 <= lam2 {
                j += sj;
                if !(0..=last).contains(&j) {
                    break;
                }
                let edge = if sj > 0 { j as f64 + 1.0 } else { j as f64 };
                lam1 = (edge - lim - p1) * inv1;
            } else {
                i += si;
                if !(0..=last).contains(&i) {
                    break;
                }
                let edge = if si < 0 { lim - i as f64 } else { lim - i as f64 - 1.0 };
                lam2 = (edge - p2) * inv2;
            }
            cur = cur.max(next);
        }
    }
}

/// Parameter interval where `p + lambda*d` lies in `[-lim, lim]`.
fn slab(p: f64, d: f64, lim: f64) -> Option<(f64, f64)> {
    if d.abs() < AXIS_EPS {
        // half-open box so a ray exactly on the outer edge is counted once
        return if p >= -lim && p < lim { Some((f64::NEG_INFINITY, f64::INFINITY)) } else { None };
    }
    let a = (-lim - p) / d;
    let b = (lim - p) / d;
    Some((a.min(b), a.max(b)))
}

/// `floor` for moderate magnitudes without a libm call.
#[inline(always)]
fn ffloor(x: f64) -> f64 {
    let t = x as i64 as f64;
    if t > x {
        t - 1.0
    } else {
        t
    }
}

#[inline(always)]
fn fceil(x: f64) -> f64 {
    -ffloor(-x)
}

/// Distance-driven: for near-vertical rays each image row's pixel boundaries
/// are mapped onto the detector and weighted by their overlap with cell
/// boundaries; near-horizontal rays do the same per image column.
fn distance_driven(size: usize, cells: usize, theta: f64, mut emit: impl FnMut(usize, usize, f64)) {
    let (s, c) = theta.sin_cos();
    let lim = size as f64 / 2.0;
    let hp = half(size);
    let cell_lo = -(cells as f64) / 2.0;
    // by columns for theta in [pi/4, 3pi/4), by rows otherwise
    let by_columns = (FRAC_PI_4..3.0 * FRAC_PI_4).contains(&theta);
    let (along, across) = if by_columns { (s, c) } else { (c, s) };
    let inv = 1.0 / along.abs();
    for line in 0..size {
        // coordinate of this row (x2) or column (x1) center
        let fixed = if by_columns { line as f64 - hp } else { hp - line as f64 };
        let offset = fixed * across;
        for k in 0..size {
            // pixel boundaries along the traversed axis, in increasing coordinate
            let b0 = k as f64 - lim;
            let ta = b0 * along + offset;
            let tb = (b0 + 1.0) * along + offset;
            let (t0, t1) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            let first = ffloor(t0 - cell_lo).max(0.0) as usize;
            let last = (fceil(t1 - cell_lo) as isize).min(cells as isize);
            let pix = if by_columns {
                // x2 increasing means row index decreasing
                (size - 1 - k) * size + line
            } else {
                line * size + k
            };
            for cell in first..last.max(0) as usize {
                let c0 = cell_lo + cell as f64;
                let overlap = t1.min(c0 + 1.0) - t0.max(c0);
                if overlap > 0.0 {
                    emit(pix, cell, overlap * inv);
                }
            }
        }
    }
}

/// Slant stacking: each ray is sampled once per image row (near-vertical
/// rays) or column (near-horizontal rays) with linear interpolation between
/// the two neighbouring pixels, scaled by the path length per row/column.
fn slant_stacking(size: usize, cells: usize, theta: f64, mut emit: impl FnMut(usize, usize, f64)) {
    let (s, c) = theta.sin_cos();
    let hp = half(size);
    let hc = half(cells);
    let vertical = theta <= FRAC_PI_4 || theta >= 3.0 * FRAC_PI_4;
    let (along, across) = if vertical { (c, s) } else { (s, c) };
    let inv = 1.0 / along.abs();
    let last = size as f64 - 1.0;
    for cell in 0..cells {
        let t = cell as f64 - hc;
        for line in 0..size {
            // fixed coordinate of the row (x2) or column (x1)
            let fixed = if vertical { hp - line as f64 } else { line as f64 - hp };
            let free = (t - fixed * across) * inv * along.signum();
            // fractional index along the free axis
            let q = if vertical { free + hp } else { hp - free };
            if q <= -1.0 || q >= size as f64 {
                continue;
            }
            let q0 = ffloor(q);
            let frac = q - q0;
            let pix = |idx: usize| if vertical { line * size + idx } else { idx * size + line };
            if q0 >= 0.0 && frac < 1.0 {
                emit(pix(q0 as usize), cell, (1.0 - frac) * inv);
            }
            if frac > 0.0 && q0 + 1.0 <= last {
                emit(pix(q0 as usize + 1), cell, frac * inv);
            }
        }
    }
}
