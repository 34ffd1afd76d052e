//! Expectation maximization and the simultaneous iterative technique, both
//! driven by the normalization image `1 / adjoint(1)`.

use super::{check_pairing, constrain_in_place, mask_in_place, Algorithm, NormalizationImage, Recorder};
use super::{ConvergenceTrace, SolverConfig};
use crate::{reconstruction_circle_mask, ImageGrid, ProjectorPair, Result, Sinogram};

/// Poisson negative log-likelihood up to constants. Negative model values
/// (possible with signed kernels) are clamped inside the logarithm, and
/// zero-count samples contribute only their model term.
fn neg_log_likelihood(rf: &Sinogram, s: &Sinogram, eps: f64) -> f64 {
    rf.data()
        .iter()
        .zip(s.data())
        .map(|(&m, &y)| if y > 0.0 { m - y * (m.max(0.0) + eps).ln() } else { m })
        .sum()
}

pub fn mlem(
    s: &Sinogram,
    fwd: &ProjectorPair,
    adj: &ProjectorPair,
    cfg: &SolverConfig,
    reference: Option<&ImageGrid>,
) -> Result<(ImageGrid, ConvergenceTrace)> {
    cfg.expect(Algorithm::Mlem)?;
    check_pairing(s, fwd, adj)?;
    let eps = cfg.epsilon;
    let p = fwd.image_size();
    let data = s.map(|v| v.max(0.0));
    let norm = NormalizationImage::new(adj, eps)?;

    let mut f = reconstruction_circle_mask(p);
    let mut rf = fwd.forward(&f)?;
    let mut rec = Recorder::new(neg_log_likelihood(&rf, &data, eps), p, reference);
    let mut last_good = f.clone();

    for _ in 0..cfg.iterations {
        let mut ratio = data.clone();
        for (r, m) in ratio.data_mut().iter_mut().zip(rf.data()) {
            *r /= m.max(eps);
        }
        let back = adj.adjoint(&ratio)?;
        for ((x, b), c) in f.data_mut().iter_mut().zip(back.data()).zip(norm.image().data()) {
            *x *= (c * b).max(0.0);
        }
        if cfg.constraints_enabled {
            mask_in_place(&mut f);
        }
        rf = fwd.forward(&f)?;
        if !rec.log(neg_log_likelihood(&rf, &data, eps), &f)? {
            return Ok((last_good, rec.trace));
        }
        last_good.data_mut().copy_from_slice(f.data());
    }
    Ok((f, rec.trace))
}

fn weighted_residual(rf: &Sinogram, s: &Sinogram, w: &Sinogram) -> f64 {
    0.5 * rf.data().iter().zip(s.data()).zip(w.data()).map(|((a, b), wi)| wi * (a - b) * (a - b)).sum::<f64>()
}

pub fn sirt(
    s: &Sinogram,
    fwd: &ProjectorPair,
    adj: &ProjectorPair,
    cfg: &SolverConfig,
    reference: Option<&ImageGrid>,
) -> Result<(ImageGrid, ConvergenceTrace)> {
    cfg.expect(Algorithm::Sirt)?;
    check_pairing(s, fwd, adj)?;
    let eps = cfg.epsilon;
    let p = fwd.image_size();
    let mut col = NormalizationImage::new(adj, eps)?.image().clone();
    mask_in_place(&mut col);
    let row = fwd.forward(&ImageGrid::filled(p, p, 1.0))?.map(|v| 1.0 / v.max(eps));

    let mut f = ImageGrid::zeros(p, p);
    let mut rf = Sinogram::zeros(s.geometry());
    let mut rec = Recorder::new(weighted_residual(&rf, s, &row), p, reference);
    let mut last_good = f.clone();

    for _ in 0..cfg.iterations {
        let mut resid = s.clone();
        for ((r, m), w) in resid.data_mut().iter_mut().zip(rf.data()).zip(row.data()) {
            *r = (*r - m) * w;
        }
        let back = adj.adjoint(&resid)?;
        for ((x, b), c) in f.data_mut().iter_mut().zip(back.data()).zip(col.data()) {
            *x += c * b;
        }
        if cfg.constraints_enabled {
            constrain_in_place(&mut f);
        }
        rf = fwd.forward(&f)?;
        if !rec.log(weighted_residual(&rf, s, &row), &f)? {
            return Ok((last_good, rec.trace));
        }
        last_good.data_mut().copy_from_slice(f.data());
    }
    Ok((f, rec.trace))
}
