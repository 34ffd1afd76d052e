//! Dense matrix assembly by unit-basis probing, for small-instance oracles.

use super::ProjectorPair;
use crate::{Error, ImageGrid, Result, Sinogram};

/// Largest `rows * cols` accepted by the dense assemblers.
pub const MAX_DENSE_ENTRIES: usize = 1 << 26;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        DenseMatrix { rows: self.cols, cols: self.rows, data }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks(self.cols).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.data[r * self.cols..(r + 1) * self.cols].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> f64 {
        (0..self.rows).map(|r| self.get(r, c)).sum()
    }
}

fn guard(pair: &ProjectorPair) -> Result<(usize, usize)> {
    let g = pair.geometry();
    let rows = g.num_angles() * g.num_cells();
    let cols = pair.image_size() * pair.image_size();
    let entries = rows.saturating_mul(cols);
    if entries > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge(entries));
    }
    Ok((rows, cols))
}

/// Matrix of the forward operator: column `j` is `forward(e_j)` flattened.
pub fn assemble_dense(pair: &ProjectorPair) -> Result<DenseMatrix> {
    let (rows, cols) = guard(pair)?;
    let p = pair.image_size();
    let mut data = vec![0.0; rows * cols];
    let mut basis = ImageGrid::zeros(p, p);
    for j in 0..cols {
        basis.data_mut()[j] = 1.0;
        let col = pair.forward(&basis)?;
        basis.data_mut()[j] = 0.0;
        for (r, v) in col.data().iter().enumerate() {
            data[r * cols + j] = *v;
        }
    }
    Ok(DenseMatrix { rows, cols, data })
}

/// Matrix of the adjoint operator (`P*P x M*N`), probed with unit sinograms.
pub fn assemble_dense_adjoint(pair: &ProjectorPair) -> Result<DenseMatrix> {
    let (sino_len, img_len) = guard(pair)?;
    let mut data = vec![0.0; sino_len * img_len];
    let mut basis = Sinogram::zeros(pair.geometry());
    for i in 0..sino_len {
        basis.data_mut()[i] = 1.0;
        let col = pair.adjoint(&basis)?;
        basis.data_mut()[i] = 0.0;
        for (r, v) in col.data().iter().enumerate() {
            data[r * sino_len + i] = *v;
        }
    }
    Ok(DenseMatrix { rows: img_len, cols: sino_len, data })
}
