//! Precomputed real-space weights stored per ray.
//!
//! Within a view the weights are a stable reordering of the on-the-fly
//! enumeration grouped by cell. Every pixel meets its cells in ascending
//! order in both, and the adjoint scatters over the same fixed view chunks
//! as the streaming path, so cached and streaming operators agree bit for
//! bit.

use rayon::prelude::*;

use super::{realspace, ProjectorKind, ADJOINT_VIEW_CHUNK};

/// Upper bound on cached weights (12 bytes each).
pub const MAX_CACHED_WEIGHTS: usize = 96 << 20;

pub(super) struct SparseWeights {
    size: usize,
    cells: usize,
    views: usize,
    row_ptr: Vec<usize>,
    pix: Vec<u32>,
    w: Vec<f64>,
}

/// Rough weight count used to decide whether caching is affordable.
pub(super) fn estimated_weights(kind: ProjectorKind, size: usize, cells: usize, views: usize) -> usize {
    let per_view = match kind {
        ProjectorKind::Pd => 2 * size * size,
        ProjectorKind::Dd => 3 * size * size,
        _ => 2 * size * cells,
    };
    per_view.saturating_mul(views)
}

impl SparseWeights {
    pub(super) fn build(kind: ProjectorKind, size: usize, cells: usize, angles: &[f64]) -> Self {
        let mut row_ptr = Vec::with_capacity(angles.len() * cells + 1);
        row_ptr.push(0);
        let mut pix = Vec::new();
        let mut w = Vec::new();
        let mut view: Vec<(u32, u32, f64)> = Vec::new();
        let mut counts = vec![0usize; cells + 1];
        for &theta in angles {
            view.clear();
            realspace::for_each_weight(kind, size, cells, theta, |p, c, v| view.push((c as u32, p as u32, v)));
            counts.iter_mut().for_each(|c| *c = 0);
            for &(c, _, _) in &view {
                counts[c as usize + 1] += 1;
            }
            for c in 0..cells {
                counts[c + 1] += counts[c];
            }
            let base = pix.len();
            pix.resize(base + view.len(), 0);
            w.resize(base + view.len(), 0.0);
            for c in 0..cells {
                row_ptr.push(base + counts[c + 1]);
            }
            for &(c, p, v) in &view {
                let slot = base + counts[c as usize];
                pix[slot] = p;
                w[slot] = v;
                counts[c as usize] += 1;
            }
        }
        SparseWeights { size, cells, views: angles.len(), row_ptr, pix, w }
    }

    pub(super) fn len(&self) -> usize {
        self.w.len()
    }

    fn ray(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.pix[span.clone()], &self.w[span])
    }

    pub(super) fn forward(&self, src: &[f64], dst: &mut [f64]) {
        dst.par_chunks_mut(self.cells).enumerate().for_each(|(k, row)| {
            for (cell, out) in row.iter_mut().enumerate() {
                let (pix, w) = self.ray(k * self.cells + cell);
                let mut acc = 0.0;
                for (p, v) in pix.iter().zip(w) {
                    acc += v * src[*p as usize];
                }
                *out = acc;
            }
        });
    }

    pub(super) fn adjoint(&self, src: &[f64], dst: &mut [f64]) {
        let n = self.cells;
        let chunks: Vec<Vec<f64>> = (0..self.views)
            .step_by(ADJOINT_VIEW_CHUNK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let mut acc = vec![0.0; self.size * self.size];
                for r in start * n..(start + ADJOINT_VIEW_CHUNK).min(self.views) * n {
                    let y = src[r];
                    let (pix, w) = self.ray(r);
                    for (p, v) in pix.iter().zip(w) {
                        acc[*p as usize] += v * y;
                    }
                }
                acc
            })
            .collect();
        for acc in chunks {
            for (o, a) in dst.iter_mut().zip(acc) {
                *o += a;
            }
        }
    }
}
