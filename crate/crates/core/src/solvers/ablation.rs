//! ADMM with coupling, constraints and early stopping switched on or off.

use std::fmt;

use super::{admm_tv, Algorithm, SolverConfig};
use crate::{Error, ImageGrid, ProjectorKind, ProjectorPair, Result, Sinogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AblationCase {
    /// Matched adjoint, constraints, best iteration by PSNR.
    CoupledConstrainedOptimal,
    /// Matched adjoint only: no constraints, fixed iteration count.
    CoupledOnly,
    /// Mismatched adjoint with constraints and the best iteration.
    UncoupledConstrainedOptimal,
}

impl AblationCase {
    pub const ALL: [AblationCase; 3] =
        [AblationCase::CoupledConstrainedOptimal, AblationCase::CoupledOnly, AblationCase::UncoupledConstrainedOptimal];

    pub fn number(self) -> usize {
        match self {
            AblationCase::CoupledConstrainedOptimal => 1,
            AblationCase::CoupledOnly => 2,
            AblationCase::UncoupledConstrainedOptimal => 3,
        }
    }
}

impl fmt::Display for AblationCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case{}", self.number())
    }
}

#[derive(Debug, Clone)]
pub struct AblationSetup {
    pub forward: ProjectorKind,
    pub uncoupled_adjoint: ProjectorKind,
    /// ADMM settings; `iterations` is the fixed count of case 2 and the
    /// search horizon of cases 1 and 3.
    pub config: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOutcome {
    pub case: AblationCase,
    pub adjoint: ProjectorKind,
    pub psnr: f64,
    /// Iteration the PSNR was read at (1-based).
    pub iteration: usize,
    pub diverged: bool,
}

pub fn ablation_admm(
    s: &Sinogram,
    reference: &ImageGrid,
    setup: &AblationSetup,
    case: AblationCase,
) -> Result<AblationOutcome> {
    if setup.config.algorithm != Algorithm::Admm {
        return Err(Error::InvalidParameter("ablation runs ADMM only".into()));
    }
    if setup.uncoupled_adjoint == setup.forward {
        return Err(Error::InvalidParameter("uncoupled adjoint must differ from the forward kind".into()));
    }
    let adjoint = match case {
        AblationCase::UncoupledConstrainedOptimal => setup.uncoupled_adjoint,
        _ => setup.forward,
    };
    let mut cfg = setup.config.clone();
    cfg.constraints_enabled = case != AblationCase::CoupledOnly;

    let g = s.geometry();
    let mut fwd = ProjectorPair::new(setup.forward, g)?;
    fwd.precompute_weights();
    let (_, trace) = if adjoint == setup.forward {
        admm_tv(s, &fwd, &fwd, &cfg, Some(reference))?
    } else {
        let mut adj = ProjectorPair::new(adjoint, g)?;
        adj.precompute_weights();
        admm_tv(s, &fwd, &adj, &cfg, Some(reference))?
    };
    // the final entry of a diverged trace belongs to the discarded iterate
    let usable = if trace.diverged { trace.psnr.len().saturating_sub(1) } else { trace.psnr.len() };
    let (iteration, psnr) = match case {
        AblationCase::CoupledOnly => (usable, trace.psnr.get(usable.wrapping_sub(1)).copied().unwrap_or(f64::NAN)),
        _ => trace.psnr[..usable]
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k + 1, p) } else { best }),
    };
    Ok(AblationOutcome { case, adjoint, psnr, iteration, diverged: trace.diverged })
}
