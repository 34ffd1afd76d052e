//! Discrete Radon transforms for parallel-beam geometry and their adjoints.
//!
//! The four real-space kinds enumerate `(pixel, cell, weight)` triples for a
//! view; forward gathers over the triples and the adjoint scatters over the
//! very same triples, so each adjoint is the transpose of its forward up to
//! floating-point summation order. The two gridding kinds chain explicit
//! linear stages whose adjoints are applied in reverse.

mod dense;
mod gridding;
mod kernels;
mod realspace;
mod sparse;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use dense::{assemble_dense, assemble_dense_adjoint, DenseMatrix, MAX_DENSE_ENTRIES};
pub use gridding::GriddingParams;
pub use kernels::{GriddingKernel, KernelFamily};
pub use sparse::MAX_CACHED_WEIGHTS;

use crate::{Error, Geometry, ImageGrid, Result, Sinogram};
use gridding::Gridding;
use sparse::SparseWeights;

/// Which discretization of the Radon transform a projector uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProjectorKind {
    /// Pixel-driven: splat each pixel onto the two bracketing cells.
    Pd,
    /// Ray-driven: Siddon traversal, intersection lengths.
    Rd,
    /// Distance-driven: overlap of projected pixel and cell boundaries.
    Dd,
    /// Slant stacking: linear interpolation along rows or columns.
    Ss,
    /// Gridding with a prolate spheroidal kernel, oversampling 2.
    Wf,
    /// Gridding with a Kaiser-Bessel kernel, oversampling 1.5.
    Kb,
}

impl ProjectorKind {
    pub const ALL: [ProjectorKind; 6] =
        [ProjectorKind::Pd, ProjectorKind::Rd, ProjectorKind::Dd, ProjectorKind::Ss, ProjectorKind::Wf, ProjectorKind::Kb];

    pub fn token(self) -> &'static str {
        match self {
            ProjectorKind::Pd => "pd",
            ProjectorKind::Rd => "rd",
            ProjectorKind::Dd => "dd",
            ProjectorKind::Ss => "ss",
            ProjectorKind::Wf => "wf",
            ProjectorKind::Kb => "kb",
        }
    }

    pub fn is_gridding(self) -> bool {
        matches!(self, ProjectorKind::Wf | ProjectorKind::Kb)
    }

    pub fn index(self) -> usize {
        ProjectorKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

impl fmt::Display for ProjectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ProjectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProjectorKind::ALL
            .into_iter()
            .find(|k| k.token().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown projector `{s}` (expected pd|rd|dd|ss|wf|kb)")))
    }
}

enum Backend {
    RealSpace(Option<Box<SparseWeights>>),
    Gridding(Box<Gridding>),
}

/// A forward projector and its adjoint sharing one geometry.
pub struct ProjectorPair {
    kind: ProjectorKind,
    geometry: Geometry,
    backend: Backend,
}

impl fmt::Debug for ProjectorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProjectorPair").field("kind", &self.kind).field("geometry", &self.geometry).finish()
    }
}

/// Views per adjoint accumulation buffer. Fixed so that the reduction order
/// does not depend on the thread count.
const ADJOINT_VIEW_CHUNK: usize = 32;

impl ProjectorPair {
    pub fn new(kind: ProjectorKind, geometry: &Geometry) -> Result<Self> {
        let backend = match kind {
            ProjectorKind::Wf => Backend::Gridding(Box::new(Gridding::new(geometry, GriddingParams::wf())?)),
            ProjectorKind::Kb => Backend::Gridding(Box::new(Gridding::new(geometry, GriddingParams::kb())?)),
            _ => Backend::RealSpace(None),
        };
        Ok(ProjectorPair { kind, geometry: geometry.clone(), backend })
    }

    /// Gridding projector with non-default kernel parameters.
    pub fn with_gridding(kind: ProjectorKind, geometry: &Geometry, params: GriddingParams) -> Result<Self> {
        if !kind.is_gridding() {
            return Err(Error::InvalidParameter(format!("{kind} is not a gridding projector")));
        }
        let g = Gridding::new(geometry, params)?;
        Ok(ProjectorPair { kind, geometry: geometry.clone(), backend: Backend::Gridding(Box::new(g)) })
    }

    /// Precomputes and stores the real-space weights so that repeated
    /// applications skip the geometry. Results are unchanged bit for bit.
    /// Returns whether a cache is in place; gridding kinds and geometries
    /// above [`MAX_CACHED_WEIGHTS`] stay streaming.
    pub fn precompute_weights(&mut self) -> bool {
        let p = self.geometry.image_size();
        let n = self.geometry.num_cells();
        let m = self.geometry.num_angles();
        let kind = self.kind;
        match &mut self.backend {
            Backend::Gridding(_) => false,
            Backend::RealSpace(Some(_)) => true,
            Backend::RealSpace(slot) => {
                if sparse::estimated_weights(kind, p, n, m) > MAX_CACHED_WEIGHTS {
                    return false;
                }
                let w = SparseWeights::build(kind, p, n, self.geometry.angles());
                debug_assert!(w.len() <= MAX_CACHED_WEIGHTS);
                *slot = Some(Box::new(w));
                true
            }
        }
    }

    /// Weight count a cache would hold; zero for gridding kinds.
    pub fn estimated_cache_weights(&self) -> usize {
        match self.backend {
            Backend::Gridding(_) => 0,
            Backend::RealSpace(_) => {
                let g = &self.geometry;
                sparse::estimated_weights(self.kind, g.image_size(), g.num_cells(), g.num_angles())
            }
        }
    }

    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn image_size(&self) -> usize {
        self.geometry.image_size()
    }

    fn check_image(&self, img: &ImageGrid) -> Result<()> {
        let p = self.image_size();
        if img.width() != p || img.height() != p {
            return Err(Error::Shape(format!(
                "{} projector expects a {p}x{p} image, got {}x{}",
                self.kind,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }

    fn check_sinogram(&self, sino: &Sinogram) -> Result<()> {
        let g = sino.geometry();
        if g != &self.geometry {
            return Err(Error::Shape(format!(
                "{} projector expects a {}x{} sinogram, got {}x{}",
                self.kind,
                self.geometry.num_angles(),
                self.geometry.num_cells(),
                g.num_angles(),
                g.num_cells()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, img: &ImageGrid) -> Result<Sinogram> {
        self.check_image(img)?;
        let mut sino = Sinogram::zeros(&self.geometry);
        match &self.backend {
            Backend::Gridding(g) => g.forward(img.data(), sino.data_mut()),
            Backend::RealSpace(Some(w)) => w.forward(img.data(), sino.data_mut()),
            Backend::RealSpace(None) => {
                let n = self.geometry.num_cells();
                let angles = self.geometry.angles();
                let p = self.image_size();
                let src = img.data();
                sino.data_mut().par_chunks_mut(n).enumerate().for_each(|(k, row)| {
                    realspace::for_each_weight(self.kind, p, n, angles[k], |pix, cell, w| {
                        row[cell] += w * src[pix];
                    });
                });
            }
        }
        Ok(sino)
    }

    pub fn adjoint(&self, sino: &Sinogram) -> Result<ImageGrid> {
        self.check_sinogram(sino)?;
        let p = self.image_size();
        let mut img = ImageGrid::zeros(p, p);
        match &self.backend {
            Backend::Gridding(g) => g.adjoint(sino.data(), img.data_mut()),
            Backend::RealSpace(Some(w)) => w.adjoint(sino.data(), img.data_mut()),
            Backend::RealSpace(None) => {
                let n = self.geometry.num_cells();
                let m = self.geometry.num_angles();
                let angles = self.geometry.angles();
                let chunks: Vec<Vec<f64>> = (0..m)
                    .step_by(ADJOINT_VIEW_CHUNK)
                    .collect::<Vec<_>>()
                    .into_par_iter()
                    .map(|start| {
                        let mut acc = vec![0.0; p * p];
                        for k in start..(start + ADJOINT_VIEW_CHUNK).min(m) {
                            let row = sino.row(k);
                            realspace::for_each_weight(self.kind, p, n, angles[k], |pix, cell, w| {
                                acc[pix] += w * row[cell];
                            });
                        }
                        acc
                    })
                    .collect();
                let out = img.data_mut();
                for acc in chunks {
                    for (o, a) in out.iter_mut().zip(acc) {
                        *o += a;
                    }
                }
            }
        }
        Ok(img)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SeededRng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn tokens_round_trip() {
        for k in ProjectorKind::ALL {
            assert_eq!(k.token().parse::<ProjectorKind>().unwrap(), k);
        }
        assert_eq!("KB".parse::<ProjectorKind>().unwrap(), ProjectorKind::Kb);
        assert!("xx".parse::<ProjectorKind>().is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let g = Geometry::new(9, 16).unwrap();
        for kind in ProjectorKind::ALL {
            let pair = ProjectorPair::new(kind, &g).unwrap();
            let s = pair.forward(&ImageGrid::zeros(16, 16)).unwrap();
            assert!(s.data().iter().all(|&v| v == 0.0), "{kind}");
            let img = pair.adjoint(&Sinogram::zeros(&g)).unwrap();
            assert!(img.data().iter().all(|&v| v == 0.0), "{kind}");
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let g = Geometry::new(5, 8).unwrap();
        let other = Geometry::new(6, 8).unwrap();
        for kind in ProjectorKind::ALL {
            let pair = ProjectorPair::new(kind, &g).unwrap();
            assert!(matches!(pair.forward(&ImageGrid::zeros(7, 8)), Err(Error::Shape(_))));
            assert!(matches!(pair.adjoint(&Sinogram::zeros(&other)), Err(Error::Shape(_))));
        }
    }

    #[test]
    fn linearity_and_small_adjoint_identity() {
        let g = Geometry::new(13, 24).unwrap();
        let mut rng = SeededRng::new(3);
        for kind in ProjectorKind::ALL {
            let pair = ProjectorPair::new(kind, &g).unwrap();
            let x = ImageGrid::from_vec(24, 24, rng.uniform_sym_vec(576)).unwrap();
            let y = ImageGrid::from_vec(24, 24, rng.uniform_sym_vec(576)).unwrap();
            let (a, b) = (0.7, -1.9);
            let combo = ImageGrid::from_vec(
                24,
                24,
                x.data().iter().zip(y.data()).map(|(u, v)| a * u + b * v).collect(),
            )
            .unwrap();
            let lhs = pair.forward(&combo).unwrap();
            let fx = pair.forward(&x).unwrap();
            let fy = pair.forward(&y).unwrap();
            let scale = lhs.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for ((l, u), v) in lhs.data().iter().zip(fx.data()).zip(fy.data()) {
                assert!((l - (a * u + b * v)).abs() <= 1e-12 * scale.max(1.0), "{kind}");
            }
            let s = Sinogram::from_vec(&g, rng.uniform_sym_vec(13 * 24)).unwrap();
            let lhs = dot(pair.adjoint(&s).unwrap().data(), x.data());
            let rhs = dot(s.data(), fx.data());
            assert!((lhs / rhs - 1.0).abs() < 1e-10, "{kind}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn cached_weights_are_bit_identical() {
        let g = Geometry::new(70, 33).unwrap();
        let mut rng = SeededRng::new(21);
        let x = ImageGrid::from_vec(33, 33, rng.uniform_sym_vec(33 * 33)).unwrap();
        let s = Sinogram::from_vec(&g, rng.uniform_sym_vec(70 * 33)).unwrap();
        for kind in ProjectorKind::ALL {
            let plain = ProjectorPair::new(kind, &g).unwrap();
            let mut cached = ProjectorPair::new(kind, &g).unwrap();
            assert_eq!(cached.precompute_weights(), !kind.is_gridding());
            assert_eq!(plain.forward(&x).unwrap(), cached.forward(&x).unwrap(), "{kind}");
            assert_eq!(plain.adjoint(&s).unwrap(), cached.adjoint(&s).unwrap(), "{kind}");
        }
    }
}
