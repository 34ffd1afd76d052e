//! Mean squared error and peak signal-to-noise ratio.

use crate::{Error, ImageGrid, Result, Sinogram};

/// Anything with a 2-D shape and row-major samples.
pub trait Samples {
    fn shape(&self) -> (usize, usize);
    fn samples(&self) -> &[f64];
}

impl Samples for ImageGrid {
    fn shape(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    fn samples(&self) -> &[f64] {
        self.data()
    }
}

impl Samples for Sinogram {
    fn shape(&self) -> (usize, usize) {
        (self.geometry().num_angles(), self.geometry().num_cells())
    }

    fn samples(&self) -> &[f64] {
        self.data()
    }
}

fn check<T: Samples + ?Sized>(f: &T, r: &T, mask: Option<&ImageGrid>) -> Result<()> {
    if f.shape() != r.shape() {
        return Err(Error::Shape(format!("metric operands {:?} vs {:?}", f.shape(), r.shape())));
    }
    if let Some(m) = mask {
        if (m.height(), m.width()) != r.shape() {
            return Err(Error::Shape(format!("mask {}x{} vs operands {:?}", m.height(), m.width(), r.shape())));
        }
    }
    Ok(())
}

fn selected<'a>(mask: Option<&'a ImageGrid>, len: usize) -> impl Iterator<Item = bool> + 'a {
    (0..len).map(move |i| mask.is_none_or(|m| m.data()[i] != 0.0))
}

/// Mean of `(f - r)^2`, over the nonzero mask entries when a mask is given.
pub fn mse<T: Samples + ?Sized>(f: &T, r: &T, mask: Option<&ImageGrid>) -> Result<f64> {
    check(f, r, mask)?;
    let (a, b) = (f.samples(), r.samples());
    let mut acc = 0.0;
    let mut count = 0usize;
    for ((x, y), keep) in a.iter().zip(b).zip(selected(mask, a.len())) {
        if keep {
            acc += (x - y) * (x - y);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidParameter("mask selects no samples".into()));
    }
    Ok(acc / count as f64)
}

/// `10 log10(max(r)^2 / MSE)` in dB; `+inf` when the operands agree exactly.
pub fn psnr<T: Samples + ?Sized>(f: &T, r: &T, mask: Option<&ImageGrid>) -> Result<f64> {
    let err = mse(f, r, mask)?;
    let peak = r
        .samples()
        .iter()
        .zip(selected(mask, r.samples().len()))
        .filter(|(_, keep)| *keep)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if r.samples().iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter("PSNR reference is identically zero".into()));
    }
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}
