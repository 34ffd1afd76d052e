//! Ellipse phantoms: rasterization and exact parallel-beam line integrals.

use std::f64::consts::PI;

use crate::{Error, Geometry, ImageGrid, Result, Sinogram};

/// One ellipse in normalized coordinates, where the phantom fits the unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub x0: f64,
    pub y0: f64,
    /// Semi-axis along the ellipse's own first axis (rotated by `phi` from `x1`).
    pub a: f64,
    pub b: f64,
    /// Counter-clockwise rotation in radians.
    pub phi: f64,
    /// Additive intensity; overlapping ellipses sum.
    pub rho: f64,
}

impl Ellipse {
    pub fn new(x0: f64, y0: f64, a: f64, b: f64, phi: f64, rho: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidParameter(format!("ellipse semi-axes must be positive (got {a}, {b})")));
        }
        Ok(Ellipse { x0, y0, a, b, phi, rho })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi.sin_cos();
        let (dx, dy) = (x - self.x0, y - self.y0);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }

    /// Weighted chord length along the line `x cos(theta) + y sin(theta) = t`,
    /// all in normalized units.
    pub fn chord(&self, theta: f64, t: f64) -> f64 {
        let tp = t - self.x0 * theta.cos() - self.y0 * theta.sin();
        let (s, c) = (theta - self.phi).sin_cos();
        let a2 = self.a * self.a * c * c + self.b * self.b * s * s;
        if tp * tp > a2 {
            return 0.0;
        }
        2.0 * self.rho * self.a * self.b * (a2 - tp * tp).sqrt() / a2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    ellipses: Vec<Ellipse>,
}

impl Phantom {
    pub fn new(ellipses: Vec<Ellipse>) -> Result<Self> {
        if ellipses.is_empty() {
            return Err(Error::InvalidParameter("phantom needs at least one ellipse".into()));
        }
        Ok(Phantom { ellipses })
    }

    /// Ten-ellipse Shepp-Logan head with the contrast-enhanced intensities
    /// (skull 1.0, brain -0.8, ventricles -0.2, small features +0.1).
    pub fn shepp_logan() -> Self {
        const RHO: [f64; 10] = [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        let mut p = Self::shepp_logan_original();
        for (e, rho) in p.ellipses.iter_mut().zip(RHO) {
            e.rho = rho;
        }
        p
    }

    /// The original head with its classic contrast
    /// (outer skull 2.0, brain -0.98, small features +-0.01/0.02).
    pub fn shepp_logan_original() -> Self {
        let deg = PI / 180.0;
        #[rustfmt::skip]
        let table: [[f64; 6]; 10] = [
            //  x0      y0      a       b       phi   rho
            [ 0.0,    0.0,    0.69,   0.92,    0.0,  2.0 ],
            [ 0.0,   -0.0184, 0.6624, 0.874,   0.0, -0.98],
            [ 0.22,   0.0,    0.11,   0.31,  -18.0, -0.02],
            [-0.22,   0.0,    0.16,   0.41,   18.0, -0.02],
            [ 0.0,    0.35,   0.21,   0.25,    0.0,  0.01],
            [ 0.0,    0.1,    0.046,  0.046,   0.0,  0.01],
            [ 0.0,   -0.1,    0.046,  0.046,   0.0,  0.01],
            [-0.08,  -0.605,  0.046,  0.023,   0.0,  0.01],
            [ 0.0,   -0.605,  0.023,  0.023,   0.0,  0.01],
            [ 0.06,  -0.605,  0.023,  0.046,   0.0,  0.01],
        ];
        let ellipses = table
            .iter()
            .map(|r| Ellipse { x0: r[0], y0: r[1], a: r[2], b: r[3], phi: r[4] * deg, rho: r[5] })
            .collect();
        Phantom { ellipses }
    }

    /// Centered unit disk of intensity 1.
    pub fn unit_disk() -> Self {
        Phantom { ellipses: vec![Ellipse { x0: 0.0, y0: 0.0, a: 1.0, b: 1.0, phi: 0.0, rho: 1.0 }] }
    }

    pub fn ellipses(&self) -> &[Ellipse] {
        &self.ellipses
    }

    /// Intensity at a point given in normalized coordinates.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.rho).sum()
    }

    /// Total mass in normalized units.
    pub fn mass(&self) -> f64 {
        self.ellipses.iter().map(|e| PI * e.a * e.b * e.rho).sum()
    }

    /// Point-samples the phantom at pixel centers of a `size x size` grid whose
    /// half-width `size/2` maps to normalized radius 1.
    pub fn rasterize(&self, size: usize) -> Result<ImageGrid> {
        if size < 8 {
            return Err(Error::InvalidParameter(format!("rasterization needs size >= 8 (got {size})")));
        }
        let scale = size as f64 / 2.0;
        Ok(ImageGrid::from_fn(size, |x1, x2| self.value_at(x1 / scale, x2 / scale)))
    }

    /// Exact line integrals sampled at every `(theta_k, t_n)` of `g`; `scale`
    /// converts normalized phantom units to detector units.
    pub fn analytic_sinogram(&self, g: &Geometry, scale: f64) -> Result<Sinogram> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive (got {scale})")));
        }
        let mut sino = Sinogram::zeros(g);
        for (k, &theta) in g.angles().iter().enumerate() {
            let row = sino.row_mut(k);
            for (n, v) in row.iter_mut().enumerate() {
                let t = g.cell_center(n) / scale;
                *v = scale * self.ellipses.iter().map(|e| e.chord(theta, t)).sum::<f64>();
            }
        }
        Ok(sino)
    }

    /// Analytic sinogram with the phantom inscribed in the detector (`scale = N/2`).
    pub fn default_sinogram(&self, g: &Geometry) -> Result<Sinogram> {
        self.analytic_sinogram(g, g.num_cells() as f64 / 2.0)
    }
}
