//! Filtered backprojection with windowed ramp filters.
//!
//! The ramp is the band-limited Ram-Lak kernel at unit detector spacing,
//! `h[0] = 1/4`, `h[n] = -1/(pi^2 n^2)` for odd `n`, zero for even `n != 0`,
//! taken to the frequency domain by an exact DFT on the padded length. Its
//! response is `|nu|` up to Nyquist `nu = 1/2`, so backprojection is scaled
//! by `pi / M`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::{reconstruction_circle_mask, Error, ImageGrid, ProjectorPair, Result, Sinogram};

/// Apodization window applied on top of the ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    /// Pure Ram-Lak.
    Ramp,
    /// Shepp-Logan: `sinc(u/2)`.
    Shlo,
    /// Hann: `(1 + cos(pi u)) / 2`.
    Hann,
    /// Parzen (de la Vallee Poussin) piecewise cubic.
    Parz,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [FilterKind::Ramp, FilterKind::Shlo, FilterKind::Hann, FilterKind::Parz];

    pub fn token(self) -> &'static str {
        match self {
            FilterKind::Ramp => "ramp",
            FilterKind::Shlo => "shlo",
            FilterKind::Hann => "hann",
            FilterKind::Parz => "parz",
        }
    }

    /// Window value at `u = |nu| / nu_Nyquist` in `[0, 1]`.
    pub fn window(self, u: f64) -> f64 {
        let u = u.abs().min(1.0);
        match self {
            FilterKind::Ramp => 1.0,
            FilterKind::Shlo => {
                if u == 0.0 {
                    1.0
                } else {
                    let a = PI * u / 2.0;
                    a.sin() / a
                }
            }
            FilterKind::Hann => 0.5 * (1.0 + (PI * u).cos()),
            FilterKind::Parz => {
                if u <= 0.5 {
                    1.0 - 6.0 * u * u * (1.0 - u)
                } else {
                    2.0 * (1.0 - u).powi(3)
                }
            }
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.token().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown filter `{s}` (expected ramp|shlo|hann|parz)")))
    }
}

/// Padded row length: next power of two at or above `2 * cells`.
pub fn padded_length(cells: usize) -> usize {
    (2 * cells).max(1).next_power_of_two()
}

/// Spatial Ram-Lak tap at integer offset `n`.
pub fn ramp_kernel(n: i64) -> f64 {
    if n == 0 {
        0.25
    } else if n % 2 == 0 {
        0.0
    } else {
        -1.0 / (PI * PI * (n * n) as f64)
    }
}

/// Real frequency response of the windowed filter on `len` DFT bins.
pub fn filter_response(kind: FilterKind, len: usize) -> Vec<f64> {
    let mut taps: Vec<Complex64> = (0..len)
        .map(|k| {
            let n = if k < len.div_ceil(2) { k as i64 } else { k as i64 - len as i64 };
            Complex64::new(ramp_kernel(n), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut taps);
    taps.iter()
        .enumerate()
        .map(|(k, h)| {
            let dist = k.min(len - k) as f64;
            h.re * kind.window(2.0 * dist / len as f64)
        })
        .collect()
}

/// Applies the windowed ramp to every row, zero-padded to [`padded_length`].
pub fn filter_sinogram(s: &Sinogram, kind: FilterKind) -> Sinogram {
    let n = s.geometry().num_cells();
    let len = padded_length(n);
    let response = filter_response(kind, len);
    let mut planner = FftPlanner::new();
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(len);
    let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(len);
    let mut out = Sinogram::zeros(s.geometry());
    out.data_mut().par_chunks_mut(n).zip(s.data().par_chunks(n)).for_each(|(dst, src)| {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (b, v) in buf.iter_mut().zip(src) {
            b.re = *v;
        }
        fwd.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&response) {
            *b *= *h;
        }
        inv.process(&mut buf);
        for (d, b) in dst.iter_mut().zip(&buf) {
            *d = b.re / len as f64;
        }
    });
    out
}

/// `adjoint(filter(s)) * pi / M`, masked to the reconstruction circle.
pub fn fbp_reconstruct(s: &Sinogram, adj: &ProjectorPair, kind: FilterKind) -> Result<ImageGrid> {
    let filtered = filter_sinogram(s, kind);
    let mut img = adj.adjoint(&filtered)?;
    img.scale(PI / s.geometry().num_angles() as f64);
    let mask = reconstruction_circle_mask(img.width());
    for (v, m) in img.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
    Ok(img)
}
