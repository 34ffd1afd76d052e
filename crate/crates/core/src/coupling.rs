//! Randomized inner-product test of how closely a backprojector matches the
//! transpose of a forward projector.
//!
//! For random `x` (image) and `y` (sinogram) the ratio
//! `r = <adjoint(y), x> / <y, forward(x)>` is exactly 1 when the adjoint is
//! the transpose of the forward operator.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::{Error, Geometry, ImageGrid, ProjectorKind, ProjectorPair, Result, SeededRng, Sinogram};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inner-product ratio for arbitrary linear maps given as closures:
/// `forward` maps `n_in` samples to `n_out`, `adjoint` the other way.
/// A zero denominator triggers one fresh draw before giving up.
pub fn inner_product_ratio(
    forward: impl Fn(&[f64]) -> Result<Vec<f64>>,
    adjoint: impl Fn(&[f64]) -> Result<Vec<f64>>,
    n_in: usize,
    n_out: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    for _ in 0..2 {
        let x = rng.uniform_sym_vec(n_in);
        let y = rng.uniform_sym_vec(n_out);
        let den = dot(&y, &forward(&x)?);
        if den == 0.0 {
            continue;
        }
        return Ok(dot(&adjoint(&y)?, &x) / den);
    }
    Err(Error::ZeroDenominator)
}

/// `<adj.adjoint(y), x> / <y, fwd.forward(x)>` with `x`, `y` uniform on [-1, 1].
pub fn adjoint_ratio(fwd: &ProjectorPair, adj: &ProjectorPair, rng: &mut SeededRng) -> Result<f64> {
    let g = fwd.geometry();
    if g != adj.geometry() {
        return Err(Error::Shape("forward and adjoint projectors use different geometries".into()));
    }
    let p = fwd.image_size();
    inner_product_ratio(
        |x| Ok(fwd.forward(&ImageGrid::from_vec(p, p, x.to_vec())?)?.into_vec()),
        |y| Ok(adj.adjoint(&Sinogram::from_vec(g, y.to_vec())?)?.into_vec()),
        p * p,
        g.num_angles() * g.num_cells(),
        rng,
    )
}

/// Ratios of one forward/adjoint pairing over several seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub forward_kind: ProjectorKind,
    pub adjoint_kind: ProjectorKind,
    pub ratios: Vec<f64>,
    /// `-log10(max |r - 1|)`; infinite for an exact match.
    pub digits_of_agreement: f64,
}

impl CouplingReport {
    pub fn new(forward_kind: ProjectorKind, adjoint_kind: ProjectorKind, ratios: Vec<f64>) -> Self {
        let worst = ratios.iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
        CouplingReport { forward_kind, adjoint_kind, ratios, digits_of_agreement: -worst.log10() }
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.ratios.iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()))
    }
}

/// Stream for one pairing, independent of evaluation order.
fn pairing_rng(seed: u64, fwd: ProjectorKind, adj: ProjectorKind) -> SeededRng {
    SeededRng::new(seed).derive((fwd.index() * 6 + adj.index()) as u64 + 1)
}

/// Report for a single pairing with prebuilt projectors.
pub fn audit_pairing(fwd: &ProjectorPair, adj: &ProjectorPair, seeds: &[u64]) -> Result<CouplingReport> {
    let ratios = seeds
        .iter()
        .map(|&s| adjoint_ratio(fwd, adj, &mut pairing_rng(s, fwd.kind(), adj.kind())))
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingReport::new(fwd.kind(), adj.kind(), ratios))
}

/// All 36 pairings; `reports[f][a]` has forward kind `ProjectorKind::ALL[f]`.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub reports: Vec<Vec<CouplingReport>>,
}

/// Smallest number of seeds accepted by [`coupling_matrix`].
pub const MIN_SEEDS: usize = 3;

pub fn coupling_matrix(g: &Geometry, seeds: &[u64]) -> Result<CouplingMatrix> {
    if seeds.len() < MIN_SEEDS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_SEEDS} seeds, got {}", seeds.len())));
    }
    let pairs = ProjectorKind::ALL.iter().map(|&k| ProjectorPair::new(k, g)).collect::<Result<Vec<_>>>()?;
    let flat = (0..36)
        .into_par_iter()
        .map(|c| audit_pairing(&pairs[c / 6], &pairs[c % 6], seeds))
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingMatrix { reports: flat.chunks(6).map(|r| r.to_vec()).collect() })
}

impl CouplingMatrix {
    pub fn get(&self, fwd: ProjectorKind, adj: ProjectorKind) -> &CouplingReport {
        &self.reports[fwd.index()][adj.index()]
    }

    /// Kinds whose matched pairing has strictly the most digits in both its
    /// row and its column.
    pub fn dominant_diagonal(&self) -> Vec<ProjectorKind> {
        ProjectorKind::ALL
            .into_iter()
            .filter(|&k| {
                let d = self.get(k, k).digits_of_agreement;
                ProjectorKind::ALL.into_iter().filter(|&o| o != k).all(|o| {
                    self.get(k, o).digits_of_agreement < d && self.get(o, k).digits_of_agreement < d
                })
            })
            .collect()
    }

    /// CSV with header `fwd,adj,max_abs_r_minus_1,digits`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fwd,adj,max_abs_r_minus_1,digits\n");
        for row in &self.reports {
            for r in row {
                let _ = writeln!(
                    out,
                    "{},{},{:.6e},{:.3}",
                    r.forward_kind,
                    r.adjoint_kind,
                    r.max_abs_deviation(),
                    r.digits_of_agreement
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_matched_real_space_pairs() {
        let g = Geometry::new(20, 16).unwrap();
        for kind in ProjectorKind::ALL {
            let pair = ProjectorPair::new(kind, &g).unwrap();
            let r = adjoint_ratio(&pair, &pair, &mut SeededRng::new(4)).unwrap();
            assert!((r - 1.0).abs() < 1e-12, "{kind}: {r}");
        }
    }

    #[test]
    fn mismatch_is_visible() {
        let g = Geometry::new(20, 16).unwrap();
        let pd = ProjectorPair::new(ProjectorKind::Pd, &g).unwrap();
        let rd = ProjectorPair::new(ProjectorKind::Rd, &g).unwrap();
        let r = adjoint_ratio(&pd, &rd, &mut SeededRng::new(4)).unwrap();
        assert!((r - 1.0).abs() > 1e-4, "{r}");
    }

    #[test]
    fn deterministic_per_seed() {
        let g = Geometry::new(9, 12).unwrap();
        let a = ProjectorPair::new(ProjectorKind::Dd, &g).unwrap();
        let b = ProjectorPair::new(ProjectorKind::Ss, &g).unwrap();
        let r1 = audit_pairing(&a, &b, &[1, 2, 3]).unwrap();
        let r2 = audit_pairing(&a, &b, &[1, 2, 3]).unwrap();
        assert_eq!(r1, r2);
        assert_ne!(r1.ratios[0], r1.ratios[1]);
    }

    #[test]
    fn zero_operator_fails_after_resample() {
        let mut rng = SeededRng::new(0);
        let res = inner_product_ratio(|x| Ok(vec![0.0; x.len()]), |y| Ok(y.to_vec()), 4, 4, &mut rng);
        assert!(matches!(res, Err(Error::ZeroDenominator)));
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let a = ProjectorPair::new(ProjectorKind::Pd, &Geometry::new(4, 8).unwrap()).unwrap();
        let b = ProjectorPair::new(ProjectorKind::Pd, &Geometry::new(5, 8).unwrap()).unwrap();
        assert!(adjoint_ratio(&a, &b, &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn too_few_seeds() {
        assert!(coupling_matrix(&Geometry::new(4, 8).unwrap(), &[1, 2]).is_err());
    }

    #[test]
    fn small_matrix_has_dominant_diagonal_and_csv() {
        let g = Geometry::new(24, 16).unwrap();
        let m = coupling_matrix(&g, &[1, 2, 3]).unwrap();
        assert_eq!(m.dominant_diagonal(), ProjectorKind::ALL.to_vec());
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 37);
        assert!(csv.starts_with("fwd,adj,max_abs_r_minus_1,digits\npd,pd,"));
    }
}
