//! Shared array types for images and sinograms, the parallel-beam geometry,
//! the seeded random stream, and the reconstruction-circle mask.
//!
//! Coordinates: pixel `(i, j)` (row `i`, column `j`) of a `P x P` image has
//! its center at `x1 = j - (P-1)/2`, `x2 = (P-1)/2 - i`, so the image center
//! sits at the origin and `x2` points up. Detector cell `n` of `N` cells is
//! centered at `t = n - (N-1)/2`; all spacings are 1.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::{Error, Result};

/// Real-valued `width x height` pixel lattice stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        ImageGrid { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "image {}x{} needs {} samples, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(ImageGrid { width, height, data })
    }

    /// Square image whose pixel `(i, j)` is `f(x1, x2)` at the pixel center.
    pub fn from_fn(size: usize, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut img = ImageGrid::zeros(size, size);
        for i in 0..size {
            for j in 0..size {
                let (x1, x2) = pixel_center(size, i, j);
                img.data[i * size + j] = f(x1, x2);
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.width + j] = v;
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageGrid {
        ImageGrid { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Continuous coordinates of the center of pixel `(i, j)` in a `size x size` image.
pub fn pixel_center(size: usize, i: usize, j: usize) -> (f64, f64) {
    let half = (size as f64 - 1.0) / 2.0;
    (j as f64 - half, half - i as f64)
}

/// Nearest pixel `(i, j)` to the continuous point `(x1, x2)`, if inside the lattice.
pub fn nearest_pixel(size: usize, x1: f64, x2: f64) -> Option<(usize, usize)> {
    let half = (size as f64 - 1.0) / 2.0;
    let j = (x1 + half).round();
    let i = (half - x2).round();
    if i < 0.0 || j < 0.0 || i >= size as f64 || j >= size as f64 {
        return None;
    }
    Some((i as usize, j as usize))
}

/// Parallel-beam acquisition: `num_angles` views uniformly spaced in `[0, pi)`
/// and `num_cells` unit detector cells centered on the rotation axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    num_angles: usize,
    num_cells: usize,
    angles: Vec<f64>,
}

impl Geometry {
    pub fn new(num_angles: usize, num_cells: usize) -> Result<Self> {
        if num_angles == 0 || num_cells == 0 {
            return Err(Error::InvalidParameter(format!(
                "geometry needs at least one view and one cell (got {num_angles}x{num_cells})"
            )));
        }
        let angles = (0..num_angles).map(|k| k as f64 * PI / num_angles as f64).collect();
        Ok(Geometry { num_angles, num_cells, angles })
    }

    pub fn num_angles(&self) -> usize {
        self.num_angles
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    /// Side of the square image reconstructed on this geometry.
    pub fn image_size(&self) -> usize {
        self.num_cells
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Signed detector coordinate of the center of cell `n`.
    pub fn cell_center(&self, n: usize) -> f64 {
        n as f64 - (self.num_cells as f64 - 1.0) / 2.0
    }

    pub fn is_undersampled(&self) -> bool {
        is_undersampled(self.num_angles, self.num_cells)
    }
}

/// Sampling criterion for parallel-beam data: too few views when `M < N*pi/2`,
/// with the bound rounded to a whole number of views (402 views count as
/// fully sampled for 256 cells).
pub fn is_undersampled(num_angles: usize, num_cells: usize) -> bool {
    (num_angles as f64) < (num_cells as f64 * PI / 2.0).round()
}

/// Radon-domain samples, one row of `num_cells` values per view.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    geometry: Geometry,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(geometry: &Geometry) -> Self {
        Self::filled(geometry, 0.0)
    }

    pub fn filled(geometry: &Geometry, value: f64) -> Self {
        let len = geometry.num_angles * geometry.num_cells;
        Sinogram { geometry: geometry.clone(), data: vec![value; len] }
    }

    pub fn from_vec(geometry: &Geometry, data: Vec<f64>) -> Result<Self> {
        let len = geometry.num_angles * geometry.num_cells;
        if data.len() != len {
            return Err(Error::Shape(format!(
                "sinogram {}x{} needs {} samples, got {}",
                geometry.num_angles,
                geometry.num_cells,
                len,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sinogram"));
        }
        Ok(Sinogram { geometry: geometry.clone(), data })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.geometry.num_cells;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.geometry.num_cells;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Sinogram {
        Sinogram { geometry: self.geometry.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Deterministic random stream keyed by a 64-bit seed.
///
/// Backed by ChaCha20, whose output is specified bit-for-bit, so a seed
/// reproduces the same stream on every platform.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed, inner: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from this seed and a tag.
    pub fn derive(&self, tag: u64) -> SeededRng {
        // splitmix64 finalizer over (seed, tag)
        let mut z = self.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SeededRng::new(z ^ (z >> 31))
    }

    /// Uniform sample in `[-1, 1)`.
    pub fn uniform_sym(&mut self) -> f64 {
        self.inner.random_range(-1.0..1.0)
    }

    pub fn uniform_sym_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.uniform_sym()).collect()
    }

    pub(crate) fn inner_mut(&mut self) -> &mut ChaCha20Rng {
        &mut self.inner
    }
}

/// Binary mask of pixels whose center lies within `(P-1)/2` of the image center.
pub fn reconstruction_circle_mask(size: usize) -> ImageGrid {
    let radius = (size as f64 - 1.0) / 2.0;
    // small slack so that centers exactly on the circle stay inside
    let r2 = radius * radius * (1.0 + 1e-12);
    ImageGrid::from_fn(size, |x1, x2| if x1 * x1 + x2 * x2 <= r2 { 1.0 } else { 0.0 })
}
