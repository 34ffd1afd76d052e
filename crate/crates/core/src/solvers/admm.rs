//! ADMM for `1/2 |Rf - s|^2 + lambda * |Df|_1` with the split `z = Df`.

use super::{check_pairing, constrain_in_place, dot, gradient, gradient_adjoint, Algorithm, Recorder};
use super::{ConvergenceTrace, SolverConfig};
use crate::{ImageGrid, ProjectorPair, Result, Sinogram};

fn cost(rf: &Sinogram, s: &Sinogram, df: &[f64], lambda: f64) -> f64 {
    let fit: f64 = rf.data().iter().zip(s.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * fit + lambda * df.iter().map(|v| v.abs()).sum::<f64>()
}

/// `x -> adj(fwd(x)) + rho * D^T D x`, returning the forward image too.
fn normal_op(
    x: &[f64],
    fwd: &ProjectorPair,
    adj: &ProjectorPair,
    rho: f64,
    p: usize,
) -> Result<(Vec<f64>, Sinogram)> {
    let rx = fwd.forward(&ImageGrid::from_vec(p, p, x.to_vec())?)?;
    let out = normal_from_forward(x, &rx, adj, rho, p)?;
    Ok((out, rx))
}

fn normal_from_forward(x: &[f64], rx: &Sinogram, adj: &ProjectorPair, rho: f64, p: usize) -> Result<Vec<f64>> {
    let mut out = adj.adjoint(rx)?.into_vec();
    let dtd = gradient_adjoint(&gradient(x, p), p);
    for (o, d) in out.iter_mut().zip(dtd) {
        *o += rho * d;
    }
    Ok(out)
}

pub fn admm_tv(
    s: &Sinogram,
    fwd: &ProjectorPair,
    adj: &ProjectorPair,
    cfg: &SolverConfig,
    reference: Option<&ImageGrid>,
) -> Result<(ImageGrid, ConvergenceTrace)> {
    cfg.expect(Algorithm::Admm)?;
    check_pairing(s, fwd, adj)?;
    let p = fwd.image_size();
    let (lambda, rho) = (cfg.tv_weight, cfg.admm_penalty);
    let thresh = lambda / rho;

    let rhs0 = adj.adjoint(s)?.into_vec();
    let mut f = ImageGrid::zeros(p, p);
    let mut z = vec![0.0; 2 * p * p];
    let mut u = vec![0.0; 2 * p * p];
    let mut rf = Sinogram::zeros(s.geometry());
    let mut rec = Recorder::new(cost(&rf, s, &z, lambda), p, reference);
    let mut last_good = f.clone();

    for _ in 0..cfg.iterations {
        let zu: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a - b).collect();
        let mut b = gradient_adjoint(&zu, p);
        for (bi, r0) in b.iter_mut().zip(&rhs0) {
            *bi = r0 + rho * *bi;
        }

        // warm-started conjugate gradients on the (possibly non-symmetric) normal system
        let x = f.data_mut();
        let mx = normal_from_forward(x, &rf, adj, rho, p)?;
        let mut r: Vec<f64> = b.iter().zip(&mx).map(|(a, m)| a - m).collect();
        let mut dir = r.clone();
        let mut rr = dot(&r, &r);
        for _ in 0..cfg.inner_cg_iters {
            if rr == 0.0 || !rr.is_finite() {
                break;
            }
            let (md, _) = normal_op(&dir, fwd, adj, rho, p)?;
            let curv = dot(&dir, &md);
            if curv == 0.0 || !curv.is_finite() {
                break;
            }
            let alpha = rr / curv;
            for (xi, di) in x.iter_mut().zip(&dir) {
                *xi += alpha * di;
            }
            for (ri, mi) in r.iter_mut().zip(&md) {
                *ri -= alpha * mi;
            }
            let rr_next = dot(&r, &r);
            let beta = rr_next / rr;
            for (di, ri) in dir.iter_mut().zip(&r) {
                *di = ri + beta * *di;
            }
            rr = rr_next;
        }

        let df = gradient(f.data(), p);
        for ((zi, ui), di) in z.iter_mut().zip(u.iter_mut()).zip(&df) {
            let v = di + *ui;
            *zi = v.signum() * (v.abs() - thresh).max(0.0);
            *ui += di - *zi;
        }
        if cfg.constraints_enabled {
            constrain_in_place(&mut f);
        }

        rf = fwd.forward(&f)?;
        let c = cost(&rf, s, &gradient(f.data(), p), lambda);
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

    fn problem(kind: ProjectorKind) -> (ProjectorPair, Sinogram, ImageGrid) {
        let g = Geometry::new(30, 16).unwrap();
        let pair = ProjectorPair::new(kind, &g).unwrap();
        let mut rng = SeededRng::new(5);
        let truth = crate::grid::reconstruction_circle_mask(16)
            .map(|m| m * (1.0 + 0.5 * rng.uniform_sym()));
        let s = pair.forward(&truth).unwrap();
        (pair, s, truth)
    }

    #[test]
    fn least_squares_cost_decreases() {
        let (pair, s, truth) = problem(ProjectorKind::Dd);
        let mut cfg = SolverConfig::new(Algorithm::Admm);
        cfg.iterations = 30;
        cfg.admm_penalty = 0.5;
        let (img, trace) = admm_tv(&s, &pair, &pair, &cfg, Some(&truth)).unwrap();
        assert!(!trace.diverged);
        for w in trace.cost.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{w:?}");
        }
        assert!(trace.final_psnr() > 25.0, "{}", trace.final_psnr());
        assert_eq!(img.width(), 16);
    }

    #[test]
    fn tv_term_is_logged() {
        let (pair, s, _) = problem(ProjectorKind::Pd);
        let mut cfg = SolverConfig::new(Algorithm::Admm);
        cfg.iterations = 3;
        cfg.tv_weight = 0.5;
        let (img, trace) = admm_tv(&s, &pair, &pair, &cfg, None).unwrap();
        let rf = pair.forward(&img).unwrap();
        let want = cost(&rf, &s, &gradient(img.data(), 16), 0.5);
        assert!((trace.cost[2] - want).abs() <= 1e-12 * want);
        assert!(trace.psnr.iter().all(|p| p.is_nan()));
    }
}
