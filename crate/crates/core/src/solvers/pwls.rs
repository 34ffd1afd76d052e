//! Penalized weighted least squares with a Huber roughness penalty, solved
//! by diagonally preconditioned gradient descent.

use super::{check_pairing, constrain_in_place, gradient, gradient_adjoint, Algorithm, Recorder};
use super::{ConvergenceTrace, SolverConfig};
use crate::{Error, ImageGrid, ProjectorPair, Result, Sinogram};

/// Largest row sum of `|D^T D|` for the anisotropic forward differences,
/// hence the curvature bound of the quadratic Huber zone.
const ROUGHNESS_CURVATURE: f64 = 8.0;

fn huber(t: f64, delta: f64) -> f64 {
    let a = t.abs();
    if a <= delta {
        0.5 * t * t
    } else {
        delta * a - 0.5 * delta * delta
    }
}

fn huber_slope(t: f64, delta: f64) -> f64 {
    t.clamp(-delta, delta)
}

/// Inverse-variance weights for Poisson data rescaled by `counts_per_unit`,
/// normalized to unit mean. Zero-count samples are given one count.
pub fn poisson_weights(noisy: &Sinogram, counts_per_unit: f64) -> Result<Sinogram> {
    if !(counts_per_unit > 0.0 && counts_per_unit.is_finite()) {
        return Err(Error::InvalidParameter(format!("counts per unit = {counts_per_unit}")));
    }
    let mut w = noisy.map(|v| 1.0 / (v * counts_per_unit).max(1.0));
    let mean = w.mean();
    for v in w.data_mut() {
        *v /= mean;
    }
    Ok(w)
}

fn cost(rf: &Sinogram, s: &Sinogram, w: Option<&Sinogram>, df: &[f64], beta: f64, delta: f64) -> f64 {
    let fit: f64 = match w {
        Some(w) => rf.data().iter().zip(s.data()).zip(w.data()).map(|((a, b), wi)| wi * (a - b) * (a - b)).sum(),
        None => rf.data().iter().zip(s.data()).map(|(a, b)| (a - b) * (a - b)).sum(),
    };
    let rough: f64 = if beta == 0.0 { 0.0 } else { df.iter().map(|&t| huber(t, delta)).sum() };
    0.5 * fit + beta * rough
}

pub fn pwls_huber(
    s: &Sinogram,
    fwd: &ProjectorPair,
    adj: &ProjectorPair,
    cfg: &SolverConfig,
    weights: Option<&Sinogram>,
    reference: Option<&ImageGrid>,
) -> Result<(ImageGrid, ConvergenceTrace)> {
    cfg.expect(Algorithm::Pwls)?;
    check_pairing(s, fwd, adj)?;
    if let Some(w) = weights {
        if w.geometry() != s.geometry() {
            return Err(Error::Shape("PWLS weights do not match the sinogram".into()));
        }
    }
    let p = fwd.image_size();
    let (beta, delta) = (cfg.huber_weight, cfg.huber_delta);
    let weigh = |mut v: Sinogram| {
        if let Some(w) = weights {
            for (x, wi) in v.data_mut().iter_mut().zip(w.data()) {
                *x *= wi;
            }
        }
        v
    };

    let row_sums = fwd.forward(&ImageGrid::filled(p, p, 1.0))?;
    let precond: Vec<f64> = adj
        .adjoint(&weigh(row_sums))?
        .into_vec()
        .into_iter()
        .map(|d| (d + ROUGHNESS_CURVATURE * beta).max(cfg.epsilon))
        .collect();

    let mut f = ImageGrid::zeros(p, p);
    let mut rf = Sinogram::zeros(s.geometry());
    let mut rec = Recorder::new(cost(&rf, s, weights, &gradient(f.data(), p), beta, delta), p, reference);
    let mut last_good = f.clone();

    for _ in 0..cfg.iterations {
        let mut resid = rf.clone();
        for (r, si) in resid.data_mut().iter_mut().zip(s.data()) {
            *r -= si;
        }
        let mut grad = adj.adjoint(&weigh(resid))?.into_vec();
        if beta > 0.0 {
            let slopes: Vec<f64> = gradient(f.data(), p).into_iter().map(|t| huber_slope(t, delta)).collect();
            for (g, r) in grad.iter_mut().zip(gradient_adjoint(&slopes, p)) {
                *g += beta * r;
            }
        }
        for ((x, g), d) in f.data_mut().iter_mut().zip(&grad).zip(&precond) {
            *x -= g / d;
        }
        if cfg.constraints_enabled {
            constrain_in_place(&mut f);
        }
        rf = fwd.forward(&f)?;
        let c = cost(&rf, s, weights, &gradient(f.data(), p), beta, delta);
        if !rec.log(c, &f)? {
            return Ok((last_good, rec.trace));
        }
        last_good.data_mut().copy_from_slice(f.data());
    }
    Ok((f, rec.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Geometry, ProjectorKind, SeededRng};

    #[test]
    fn huber_pieces_join() {
        let d = 0.3;
        assert!((huber(d, d) - huber(d + 1e-12, d)).abs() < 1e-11);
        assert!((huber(-0.1, d) - 0.005).abs() < 1e-15);
        assert!((huber(2.0, d) - (0.6 - 0.045)).abs() < 1e-15);
        assert_eq!(huber_slope(5.0, d), d);
    }

    #[test]
    fn unpenalized_cost_is_monotone() {
        let g = Geometry::new(24, 16).unwrap();
        let mut rng = SeededRng::new(12);
        let truth = crate::grid::reconstruction_circle_mask(16).map(|m| m * (1.0 + rng.uniform_sym()));
        for kind in [ProjectorKind::Pd, ProjectorKind::Rd, ProjectorKind::Dd, ProjectorKind::Ss] {
            let pair = ProjectorPair::new(kind, &g).unwrap();
            let s = pair.forward(&truth).unwrap();
            let mut cfg = SolverConfig::new(Algorithm::Pwls);
            cfg.iterations = 40;
            let (_, trace) = pwls_huber(&s, &pair, &pair, &cfg, None, Some(&truth)).unwrap();
            for w in trace.cost.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{kind}: {w:?}");
            }
        }
    }

    #[test]
    fn weights_have_unit_mean() {
        let g = Geometry::new(2, 3).unwrap();
        let s = Sinogram::from_vec(&g, vec![0.0, 1.0, 2.0, 4.0, 8.0, 0.2]).unwrap();
        let w = poisson_weights(&s, 4.0).unwrap();
        assert!((w.mean() - 1.0).abs() < 1e-15);
        // zero and sub-count samples share the largest weight
        assert_eq!(w.data()[0], w.data()[5]);
        assert!(w.data()[4] < w.data()[3]);
        assert!(poisson_weights(&s, 0.0).is_err());
    }
}
