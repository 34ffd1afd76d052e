//! Convolution kernels for Fourier gridding and their image-domain transforms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

/// Kernel family with its shape parameter.
#[derive(Debug, Clone)]
pub enum KernelFamily {
    KaiserBessel { beta: f64 },
    /// Zeroth-order prolate spheroidal wave function with bandwidth `c`,
    /// stored as coefficients of normalized even Legendre polynomials.
    Prolate { c: f64, coeffs: Vec<f64> },
}

impl KernelFamily {
    /// Unnormalized profile on the reference interval `x in [-1, 1]`.
    fn profile(&self, x: f64) -> f64 {
        match self {
            KernelFamily::KaiserBessel { beta } => bessel_i0(beta * (1.0 - x * x).max(0.0).sqrt()),
            KernelFamily::Prolate { coeffs, .. } => legendre_series(coeffs, x),
        }
    }
}

/// Samples per unit of the reference interval in the lookup table.
const TABLE_RES: usize = 1 << 16;

/// Separable 1-D interpolation kernel on the oversampled Fourier grid,
/// supported on `|u| < width/2` grid units and normalized to 1 at `u = 0`.
/// Evaluation interpolates linearly in a dense table of the profile.
#[derive(Debug, Clone)]
pub struct GriddingKernel {
    family: KernelFamily,
    table: Vec<f64>,
}

impl GriddingKernel {
    fn tabulate(family: KernelFamily) -> Self {
        let norm = family.profile(0.0);
        let table = (0..=TABLE_RES).map(|k| family.profile(k as f64 / TABLE_RES as f64) / norm).collect();
        GriddingKernel { family, table }
    }

    /// Kaiser-Bessel with the oversampling-dependent shape
    /// `beta = pi * sqrt((W/alpha)^2 (alpha - 1/2)^2 - 0.8)`.
    pub fn kaiser_bessel(width: usize, alpha: f64) -> Self {
        let w = width as f64;
        let beta = PI * ((w / alpha).powi(2) * (alpha - 0.5).powi(2) - 0.8).sqrt();
        Self::tabulate(KernelFamily::KaiserBessel { beta })
    }

    pub fn prolate(c: f64) -> Self {
        Self::tabulate(KernelFamily::Prolate { c, coeffs: prolate_coefficients(c) })
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    #[cfg(test)]
    fn profile(&self, x: f64) -> f64 {
        self.family.profile(x)
    }

    pub fn eval(&self, u: f64, width: usize) -> f64 {
        let x = (2.0 * u / width as f64).abs();
        if x >= 1.0 {
            return 0.0;
        }
        let pos = x * TABLE_RES as f64;
        let k = pos as usize;
        let frac = pos - k as f64;
        self.table[k] * (1.0 - frac) + self.table[k + 1] * frac
    }

    /// Image-domain apodization `a(x) = int k(v) cos(2 pi v x / grid) dv`,
    /// integrated with composite Simpson over the kernel support.
    pub fn apodization(&self, x: f64, width: usize, grid: usize) -> f64 {
        const STEPS: usize = 2048;
        let half = width as f64 / 2.0;
        let h = 2.0 * half / STEPS as f64;
        let omega = 2.0 * PI * x / grid as f64;
        let mut acc = 0.0;
        for k in 0..=STEPS {
            let v = -half + k as f64 * h;
            let wgt = if k == 0 || k == STEPS {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += wgt * self.eval(v, width) * (omega * v).cos();
        }
        acc * h / 3.0
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Legendre coefficients of the zeroth prolate spheroidal function: the
/// eigenvector of the smallest eigenvalue of the symmetric tridiagonal
/// operator restricted to even degrees.
fn prolate_coefficients(c: f64) -> Vec<f64> {
    let terms = (c as usize + 40).max(40);
    let c2 = c * c;
    let mut m = DMatrix::<f64>::zeros(terms, terms);
    for r in 0..terms {
        let k = 2.0 * r as f64;
        m[(r, r)] = k * (k + 1.0) + c2 * (2.0 * k * (k + 1.0) - 1.0) / ((2.0 * k + 3.0) * (2.0 * k - 1.0));
        if r + 1 < terms {
            let off = c2 * (k + 2.0) * (k + 1.0) / ((2.0 * k + 3.0) * ((2.0 * k + 1.0) * (2.0 * k + 5.0)).sqrt());
            m[(r, r + 1)] = off;
            m[(r + 1, r)] = off;
        }
    }
    let eig = SymmetricEigen::new(m);
    let best = (0..terms)
        .min_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap())
        .unwrap();
    let mut coeffs: Vec<f64> = eig.eigenvectors.column(best).iter().copied().collect();
    if legendre_series(&coeffs, 0.0) < 0.0 {
        coeffs.iter_mut().for_each(|v| *v = -*v);
    }
    coeffs
}

/// Evaluates `sum_r coeffs[r] * sqrt(2r + 1/2) * P_2r(x)`.
fn legendre_series(coeffs: &[f64], x: f64) -> f64 {
    let mut p_prev = 1.0; // P_0
    let mut p = x; // P_1
    let mut sum = coeffs[0] * (0.5f64).sqrt();
    let mut deg = 1usize;
    for (r, &a) in coeffs.iter().enumerate().skip(1) {
        let target = 2 * r;
        while deg < target {
            let n = deg as f64;
            let next = ((2.0 * n + 1.0) * x * p - n * p_prev) / (n + 1.0);
            p_prev = p;
            p = next;
            deg += 1;
        }
        sum += a * (target as f64 + 0.5).sqrt() * p;
    }
    sum
}
