//! Fourier-slice projectors with kernel gridding between Cartesian and polar
//! frequency samples.
//!
//! Forward: deapodize, embed in the oversampled grid, 2-D FFT, interpolate
//! polar samples, shift phases to the detector convention, per-view inverse
//! FFT, keep the real part of the central cells. Adjoint runs the adjoint of
//! every stage in reverse order.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::kernels::GriddingKernel;
use crate::{Error, Geometry, Result};

/// Oversampling, kernel width and kernel family of one gridding projector.
#[derive(Debug, Clone)]
pub struct GriddingParams {
    pub alpha: f64,
    /// Kernel support in oversampled-grid taps.
    pub width: usize,
    pub kernel: GriddingKernel,
}

impl GriddingParams {
    pub const DEFAULT_WIDTH: usize = 7;

    /// Prolate spheroidal kernel, bandwidth `6 pi`, oversampling 2.
    pub fn wf() -> Self {
        GriddingParams { alpha: 2.0, width: Self::DEFAULT_WIDTH, kernel: GriddingKernel::prolate(6.0 * PI) }
    }

    /// Kaiser-Bessel kernel, oversampling 1.5.
    pub fn kb() -> Self {
        let width = Self::DEFAULT_WIDTH;
        GriddingParams { alpha: 1.5, width, kernel: GriddingKernel::kaiser_bessel(width, 1.5) }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) || self.width < 3 {
            return Err(Error::InvalidParameter(format!(
                "gridding needs alpha > 1 and width >= 3 (got {}, {})",
                self.alpha, self.width
            )));
        }
        Ok(())
    }
}

pub(super) struct Gridding {
    size: usize,
    /// Oversampled grid side.
    grid: usize,
    cells: usize,
    views: usize,
    taps: usize,
    /// Reciprocal apodization per image pixel.
    deapod: Vec<f64>,
    /// Per polar sample `(view, radial)`: first tap index on each axis.
    start: Vec<(i64, i64)>,
    /// Per polar sample: `taps` weights along axis 1 then `taps` along axis 2.
    weights: Vec<f64>,
    /// Per polar sample: detector-convention phase, already divided by `grid`.
    phase: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Smallest even integer not below `alpha * size`.
pub(super) fn grid_size(size: usize, alpha: f64) -> usize {
    let k = (alpha * size as f64 - 1e-9).ceil() as usize;
    k + (k % 2)
}

impl Gridding {
    pub(super) fn new(geometry: &Geometry, params: GriddingParams) -> Result<Self> {
        params.validate()?;
        let size = geometry.image_size();
        let cells = geometry.num_cells();
        let views = geometry.num_angles();
        let grid = grid_size(size, params.alpha);
        let taps = params.width;
        let kernel = &params.kernel;

        // 1-D apodization at integer offsets from the grid origin
        let origin = (size / 2) as i64;
        let apod: Vec<f64> = (0..size).map(|j| kernel.apodization((j as i64 - origin) as f64, taps, grid)).collect();
        let peak = apod.iter().copied().fold(0.0f64, |a, b| a.max(b.abs()));
        let floor = 1e-8 * peak * peak;
        let mut deapod = vec![0.0; size * size];
        for i in 0..size {
            // x2 offset is origin - i, x1 offset is j - origin; a() is even
            for j in 0..size {
                let a = apod[i] * apod[j];
                deapod[i * size + j] = 1.0 / a.max(floor);
            }
        }

        let half_taps = taps as f64 / 2.0;
        // half-pixel offset between integer grid positions and pixel/cell
        // centers: 0.5 for even sizes, 0 for odd
        let center_shift = (size / 2) as f64 - (size as f64 - 1.0) / 2.0;
        let mut start = Vec::with_capacity(views * grid);
        let mut weights = Vec::with_capacity(views * grid * 2 * taps);
        let mut phase = Vec::with_capacity(views * grid);
        for &theta in geometry.angles() {
            let (s, c) = theta.sin_cos();
            for r in 0..grid {
                let rho = r as f64 - (grid / 2) as f64;
                let (w1, w2) = (rho * c, rho * s);
                let s1 = (w1 - half_taps).floor() as i64 + 1;
                let s2 = (w2 - half_taps).floor() as i64 + 1;
                start.push((s1, s2));
                for t in 0..taps {
                    weights.push(kernel.eval(w1 - (s1 + t as i64) as f64, taps));
                }
                for t in 0..taps {
                    weights.push(kernel.eval(w2 - (s2 + t as i64) as f64, taps));
                }
                let arg = 2.0 * PI * rho * center_shift * (1.0 - c + s) / grid as f64;
                phase.push(Complex64::from_polar(1.0 / grid as f64, arg));
            }
        }

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid);
        let inv = planner.plan_fft_inverse(grid);
        Ok(Gridding { size, grid, cells, views, taps, deapod, start, weights, phase, fwd, inv })
    }

    #[inline]
    fn wrap(&self, k: i64) -> usize {
        k.rem_euclid(self.grid as i64) as usize
    }

    /// Grid position of image pixel `(i, j)`.
    fn pixel_slot(&self, i: usize, j: usize) -> usize {
        let origin = (self.size / 2) as i64;
        let u1 = j as i64 - origin;
        let u2 = origin - i as i64;
        self.wrap(u2) * self.grid + self.wrap(u1)
    }

    /// Slice position of detector cell `n`.
    fn cell_slot(&self, n: usize) -> usize {
        self.wrap(n as i64 - (self.cells / 2) as i64)
    }

    fn fft2(&self, buf: &mut [Complex64], forward: bool) {
        let g = self.grid;
        let plan = if forward { &self.fwd } else { &self.inv };
        plan.process(buf);
        transpose(buf, g);
        plan.process(buf);
        transpose(buf, g);
    }

    pub(super) fn forward(&self, img: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let mut buf = vec![Complex64::new(0.0, 0.0); g * g];
        for i in 0..self.size {
            for j in 0..self.size {
                let idx = i * self.size + j;
                buf[self.pixel_slot(i, j)] = Complex64::new(img[idx] * self.deapod[idx], 0.0);
            }
        }
        self.fft2(&mut buf, true);

        let taps = self.taps;
        let mut slice = vec![Complex64::new(0.0, 0.0); g];
        for k in 0..self.views {
            for r in 0..g {
                let p = k * g + r;
                let (s1, s2) = self.start[p];
                let w = &self.weights[p * 2 * taps..(p + 1) * 2 * taps];
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..taps {
                    let row = &buf[self.wrap(s2 + b as i64) * g..][..g];
                    let mut inner = Complex64::new(0.0, 0.0);
                    for a in 0..taps {
                        inner += row[self.wrap(s1 + a as i64)] * w[a];
                    }
                    acc += inner * w[taps + b];
                }
                let rho = r as i64 - (g / 2) as i64;
                slice[self.wrap(rho)] = acc * self.phase[p];
            }
            self.inv.process(&mut slice);
            let row = &mut out[k * self.cells..(k + 1) * self.cells];
            for (n, v) in row.iter_mut().enumerate() {
                *v = slice[self.cell_slot(n)].re;
            }
        }
    }

    pub(super) fn adjoint(&self, sino: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let taps = self.taps;
        let mut buf = vec![Complex64::new(0.0, 0.0); g * g];
        let mut slice = vec![Complex64::new(0.0, 0.0); g];
        for k in 0..self.views {
            slice.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            let row = &sino[k * self.cells..(k + 1) * self.cells];
            for (n, &v) in row.iter().enumerate() {
                slice[self.cell_slot(n)] = Complex64::new(v, 0.0);
            }
            // adjoint of the unnormalized inverse DFT is the forward DFT
            self.fwd.process(&mut slice);
            for r in 0..g {
                let p = k * g + r;
                let rho = r as i64 - (g / 2) as i64;
                let val = slice[self.wrap(rho)] * self.phase[p].conj();
                let (s1, s2) = self.start[p];
                let w = &self.weights[p * 2 * taps..(p + 1) * 2 * taps];
                for b in 0..taps {
                    let wb = val * w[taps + b];
                    let base = self.wrap(s2 + b as i64) * g;
                    for a in 0..taps {
                        buf[base + self.wrap(s1 + a as i64)] += wb * w[a];
                    }
                }
            }
        }
        // adjoint of the forward DFT is the unnormalized inverse DFT
        self.fft2(&mut buf, false);
        for i in 0..self.size {
            for j in 0..self.size {
                let idx = i * self.size + j;
                out[idx] = buf[self.pixel_slot(i, j)].re * self.deapod[idx];
            }
        }
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}
