//! Iterative reconstruction with arbitrary forward/adjoint pairings.
//!
//! Every solver takes the forward projector used to model the data and,
//! separately, the projector whose adjoint drives the updates. The logged
//! cost always uses the forward model. A run is flagged as diverged as soon
//! as a cost is non-finite or exceeds `DIVERGENCE_FACTOR` times the cost of
//! the starting image; the last finite iterate is then returned.

mod ablation;
mod admm;
mod em;
mod pwls;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

pub use ablation::{ablation_admm, AblationCase, AblationOutcome, AblationSetup};
pub use admm::admm_tv;
pub use em::{mlem, sirt};
pub use pwls::{poisson_weights, pwls_huber};

use crate::io::parse_key_values;
use crate::metrics::psnr;
use crate::{reconstruction_circle_mask, Error, ImageGrid, ProjectorPair, Result, Sinogram};

/// Costs above this multiple of the starting cost count as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Admm,
    Pwls,
    Mlem,
    Sirt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Admm, Algorithm::Pwls, Algorithm::Mlem, Algorithm::Sirt];

    pub fn token(self) -> &'static str {
        match self {
            Algorithm::Admm => "admm",
            Algorithm::Pwls => "pwls",
            Algorithm::Mlem => "mlem",
            Algorithm::Sirt => "sirt",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.token().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown algorithm `{s}` (expected admm|pwls|mlem|sirt)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    /// TV weight `lambda` (ADMM).
    pub tv_weight: f64,
    /// Augmented-Lagrangian penalty `rho` (ADMM).
    pub admm_penalty: f64,
    /// Huber penalty weight `beta` (PWLS).
    pub huber_weight: f64,
    /// Huber transition `delta` (PWLS).
    pub huber_delta: f64,
    /// Conjugate-gradient steps per ADMM image update.
    pub inner_cg_iters: usize,
    pub constraints_enabled: bool,
    /// Floor for every division.
    pub epsilon: f64,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        SolverConfig {
            algorithm,
            iterations: 100,
            tv_weight: 0.0,
            admm_penalty: 1.0,
            huber_weight: 0.0,
            huber_delta: 0.01,
            inner_cg_iters: 4,
            constraints_enabled: true,
            epsilon: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
        }
        if !(self.tv_weight >= 0.0 && self.tv_weight.is_finite()) {
            return bad("tv_weight", self.tv_weight);
        }
        if !(self.admm_penalty > 0.0 && self.admm_penalty.is_finite()) {
            return bad("admm_penalty", self.admm_penalty);
        }
        if !(self.huber_weight >= 0.0 && self.huber_weight.is_finite()) {
            return bad("huber_weight", self.huber_weight);
        }
        if !(self.huber_delta > 0.0 && self.huber_delta.is_finite()) {
            return bad("huber_delta", self.huber_delta);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", self.epsilon);
        }
        Ok(())
    }

    fn expect(&self, algorithm: Algorithm) -> Result<()> {
        if self.algorithm != algorithm {
            return Err(Error::InvalidParameter(format!(
                "configuration is for {}, not {algorithm}",
                self.algorithm
            )));
        }
        self.validate()
    }

    /// Applies `key=value` overrides (`algorithm`, `iterations`, `lambda`,
    /// `rho`, `beta`, `delta`, `cg_iters`, `constraints`, `epsilon`).
    /// Unknown keys are rejected.
    pub fn apply_overrides(&mut self, pairs: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in pairs {
            let num = || v.parse::<f64>().map_err(|_| Error::Parse(format!("{k}: `{v}` is not a number")));
            let count = || v.parse::<usize>().map_err(|_| Error::Parse(format!("{k}: `{v}` is not a count")));
            match k.as_str() {
                "algorithm" => self.algorithm = v.parse()?,
                "iterations" => self.iterations = count()?,
                "lambda" => self.tv_weight = num()?,
                "rho" => self.admm_penalty = num()?,
                "beta" => self.huber_weight = num()?,
                "delta" => self.huber_delta = num()?,
                "cg_iters" => self.inner_cg_iters = count()?,
                "epsilon" => self.epsilon = num()?,
                "constraints" => {
                    self.constraints_enabled = match v.as_str() {
                        "true" | "1" | "on" => true,
                        "false" | "0" | "off" => false,
                        _ => return Err(Error::Parse(format!("constraints: `{v}` is not a boolean"))),
                    }
                }
                _ => return Err(Error::Parse(format!("unknown solver key `{k}`"))),
            }
        }
        self.validate()
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let pairs = parse_key_values(text)?;
        let algorithm = pairs.get("algorithm").ok_or_else(|| Error::Parse("missing `algorithm` key".into()))?.parse()?;
        let mut cfg = SolverConfig::new(algorithm);
        cfg.apply_overrides(&pairs)?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "algorithm={}\niterations={}\nlambda={}\nrho={}\nbeta={}\ndelta={}\ncg_iters={}\nconstraints={}\nepsilon={}\n",
            self.algorithm,
            self.iterations,
            self.tv_weight,
            self.admm_penalty,
            self.huber_weight,
            self.huber_delta,
            self.inner_cg_iters,
            self.constraints_enabled,
            self.epsilon
        )
    }
}

/// Per-iteration cost and PSNR (NaN without a reference).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub cost: Vec<f64>,
    pub psnr: Vec<f64>,
    pub diverged: bool,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.cost.len()
    }

    pub fn final_cost(&self) -> f64 {
        if self.diverged {
            f64::INFINITY
        } else {
            self.cost.last().copied().unwrap_or(f64::NAN)
        }
    }

    pub fn final_psnr(&self) -> f64 {
        self.psnr.last().copied().unwrap_or(f64::NAN)
    }

    /// CSV with header `iter,cost,psnr,diverged`, one line per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,cost,psnr,diverged\n");
        for (k, (c, p)) in self.cost.iter().zip(&self.psnr).enumerate() {
            let flag = self.diverged && k + 1 == self.cost.len();
            let _ = writeln!(out, "{},{:.9e},{:.6},{}", k + 1, c, p, u8::from(flag));
        }
        out
    }
}

/// `c = 1 / max(adjoint(1), eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationImage {
    c: ImageGrid,
}

impl NormalizationImage {
    pub fn new(adj: &ProjectorPair, epsilon: f64) -> Result<Self> {
        let ones = Sinogram::filled(adj.geometry(), 1.0);
        Ok(NormalizationImage { c: adj.adjoint(&ones)?.map(|v| 1.0 / v.max(epsilon)) })
    }

    pub fn image(&self) -> &ImageGrid {
        &self.c
    }
}

/// Clamps negatives to zero and zeroes everything outside the inscribed circle.
pub fn apply_constraints(img: &ImageGrid) -> ImageGrid {
    let mut out = img.clone();
    constrain_in_place(&mut out);
    out
}

fn constrain_in_place(img: &mut ImageGrid) {
    let mask = reconstruction_circle_mask(img.width());
    for (v, m) in img.data_mut().iter_mut().zip(mask.data()) {
        *v = v.max(0.0) * m;
    }
}

fn mask_in_place(img: &mut ImageGrid) {
    let mask = reconstruction_circle_mask(img.width());
    for (v, m) in img.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
}

/// Dispatches on `cfg.algorithm`. `weights` only matters for PWLS.
pub fn reconstruct(
    s: &Sinogram,
    fwd: &ProjectorPair,
    adj: &ProjectorPair,
    cfg: &SolverConfig,
    weights: Option<&Sinogram>,
    reference: Option<&ImageGrid>,
) -> Result<(ImageGrid, ConvergenceTrace)> {
    match cfg.algorithm {
        Algorithm::Admm => admm_tv(s, fwd, adj, cfg, reference),
        Algorithm::Pwls => pwls_huber(s, fwd, adj, cfg, weights, reference),
        Algorithm::Mlem => mlem(s, fwd, adj, cfg, reference),
        Algorithm::Sirt => sirt(s, fwd, adj, cfg, reference),
    }
}

fn check_pairing(s: &Sinogram, fwd: &ProjectorPair, adj: &ProjectorPair) -> Result<()> {
    if fwd.geometry() != adj.geometry() || s.geometry() != fwd.geometry() {
        return Err(Error::Shape("sinogram, forward and adjoint geometries differ".into()));
    }
    Ok(())
}

/// Cost/PSNR logging with divergence detection against the starting cost.
struct Recorder<'a> {
    trace: ConvergenceTrace,
    initial: f64,
    reference: Option<&'a ImageGrid>,
    mask: ImageGrid,
}

impl<'a> Recorder<'a> {
    fn new(initial_cost: f64, size: usize, reference: Option<&'a ImageGrid>) -> Self {
        Recorder { trace: ConvergenceTrace::default(), initial: initial_cost, reference, mask: reconstruction_circle_mask(size) }
    }

    /// Logs one iteration; returns false once the run has diverged.
    fn log(&mut self, cost: f64, img: &ImageGrid) -> Result<bool> {
        let limit = DIVERGENCE_FACTOR * self.initial.abs();
        let p = match self.reference {
            Some(r) if img.data().iter().all(|v| v.is_finite()) => psnr(img, r, Some(&self.mask))?,
            _ => f64::NAN,
        };
        self.trace.cost.push(cost);
        self.trace.psnr.push(p);
        if !cost.is_finite() || cost > limit {
            self.trace.diverged = true;
            return Ok(false);
        }
        Ok(true)
    }
}

/// Anisotropic forward differences with zero extension past the last row
/// and column: the first `P*P` entries are horizontal, the rest vertical.
fn gradient(f: &[f64], p: usize) -> Vec<f64> {
    let mut g = vec![0.0; 2 * p * p];
    let (gh, gv) = g.split_at_mut(p * p);
    for i in 0..p {
        for j in 0..p {
            let k = i * p + j;
            let right = if j + 1 < p { f[k + 1] } else { 0.0 };
            let below = if i + 1 < p { f[k + p] } else { 0.0 };
            gh[k] = right - f[k];
            gv[k] = below - f[k];
        }
    }
    g
}

/// Adjoint of [`gradient`].
fn gradient_adjoint(g: &[f64], p: usize) -> Vec<f64> {
    let (gh, gv) = g.split_at(p * p);
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let k = i * p + j;
            let left = if j > 0 { gh[k - 1] } else { 0.0 };
            let above = if i > 0 { gv[k - p] } else { 0.0 };
            out[k] = left - gh[k] + above - gv[k];
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Geometry, ProjectorKind, SeededRng};

    #[test]
    fn constraints_cases() {
        let neg = ImageGrid::filled(8, 8, -1.0);
        assert!(apply_constraints(&neg).data().iter().all(|&v| v == 0.0));
        let mask = reconstruction_circle_mask(8);
        let inside = mask.map(|m| 2.5 * m);
        assert_eq!(apply_constraints(&inside), inside);
        let mut rng = SeededRng::new(1);
        let r = ImageGrid::from_vec(9, 9, rng.uniform_sym_vec(81)).unwrap();
        let once = apply_constraints(&r);
        assert_eq!(apply_constraints(&once), once);
    }

    #[test]
    fn gradient_adjoint_identity() {
        let mut rng = SeededRng::new(2);
        let p = 11;
        let f = rng.uniform_sym_vec(p * p);
        let g = rng.uniform_sym_vec(2 * p * p);
        let lhs = dot(&gradient(&f, p), &g);
        let rhs = dot(&f, &gradient_adjoint(&g, p));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn gradient_of_constant_is_zero_inside() {
        let p = 5;
        let g = gradient(&vec![3.0; p * p], p);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[p - 1], -3.0);
        assert_eq!(g[p * p + (p - 1) * p], -3.0);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let mut cfg = SolverConfig::new(Algorithm::Admm);
        cfg.tv_weight = 0.25;
        cfg.constraints_enabled = false;
        let back = SolverConfig::from_key_values(&cfg.to_key_values()).unwrap();
        assert_eq!(back, cfg);
        assert!(SolverConfig::from_key_values("iterations=3").is_err());
        assert!(SolverConfig::from_key_values("algorithm=sirt\nfoo=1").is_err());
        assert!(SolverConfig::from_key_values("algorithm=sirt\niterations=0").is_err());
        assert!(SolverConfig::from_key_values("algorithm=pwls\ndelta=-1").is_err());
        assert!("ADMM".parse::<Algorithm>().is_ok());
    }

    #[test]
    fn wrong_algorithm_rejected() {
        let g = Geometry::new(4, 8).unwrap();
        let pair = ProjectorPair::new(ProjectorKind::Pd, &g).unwrap();
        let s = Sinogram::zeros(&g);
        let cfg = SolverConfig::new(Algorithm::Sirt);
        assert!(mlem(&s, &pair, &pair, &cfg, None).is_err());
    }

    #[test]
    fn trace_csv_shape() {
        let t = ConvergenceTrace { cost: vec![3.0, 2.0, 1.0], psnr: vec![f64::NAN; 3], diverged: false };
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("iter,cost,psnr,diverged\n1,"));
        assert_eq!(t.final_cost(), 1.0);
    }

    #[test]
    fn normalization_positive_inside_circle() {
        let g = Geometry::new(30, 16).unwrap();
        let mask = reconstruction_circle_mask(16);
        for kind in ProjectorKind::ALL {
            let pair = ProjectorPair::new(kind, &g).unwrap();
            let c = NormalizationImage::new(&pair, 1e-12).unwrap();
            for (v, m) in c.image().data().iter().zip(mask.data()) {
                if *m != 0.0 {
                    assert!(*v > 0.0 && v.is_finite(), "{kind}");
                }
            }
        }
    }
}
