//! Randomized truncated SVD of a sparse document-term matrix.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tfidf::SparseVec;
use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::par;

pub const OVERSAMPLING: usize = 10;
pub const POWER_ITERATIONS: usize = 4;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_rows(rows: &[SparseVec], cols: usize) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for &(c, v) in row {
                if c >= cols {
                    return Err(Error::invalid(format!("column {c} out of range {cols}")));
                }
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Row-major dense input.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        let sparse: Vec<SparseVec> = (0..rows)
            .map(|r| {
                (0..cols)
                    .filter(|&c| data[r * cols + c] != 0.0)
                    .map(|c| (c, data[r * cols + c]))
                    .collect()
            })
            .collect();
        Self::from_rows(&sparse, cols).expect("columns in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `self * x` for a dense `cols × k` matrix.
    fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let k = x.ncols();
        let rows = par::map_range(self.rows, |r| {
            let mut out = vec![0.0; k];
            for (c, v) in self.row(r) {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += v * x[(c, j)];
                }
            }
            out
        });
        DMatrix::from_fn(self.rows, k, |r, j| rows[r][j])
    }

    /// `selfᵀ * y` for a dense `rows × k` matrix. Partial sums are taken over
    /// fixed row blocks and folded in block order.
    fn tr_mul_dense(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        const BLOCK: usize = 256;
        let k = y.ncols();
        let starts: Vec<usize> = (0..self.rows).step_by(BLOCK).collect();
        let partials = par::map(&starts, |&start| {
            let mut acc = vec![0.0; self.cols * k];
            for r in start..(start + BLOCK).min(self.rows) {
                for (c, v) in self.row(r) {
                    for j in 0..k {
                        acc[c * k + j] += v * y[(r, j)];
                    }
                }
            }
            acc
        });
        let mut total = vec![0.0; self.cols * k];
        for p in partials {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        DMatrix::from_fn(self.cols, k, |c, j| total[c * k + j])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Top right singular vectors (as rows) and singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdModel {
    rank: usize,
    cols: usize,
    components: Vec<f64>,
    singular_values: Vec<f64>,
}

fn orthonormal_basis(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Rank-`rank` truncated SVD by randomized subspace iteration with
/// [`OVERSAMPLING`] extra samples and [`POWER_ITERATIONS`] power steps.
pub fn truncated_svd(matrix: &CsrMatrix, rank: usize, seed: u64) -> Result<SvdModel> {
    let min_dim = matrix.rows.min(matrix.cols);
    if rank == 0 || rank > min_dim {
        return Err(Error::invalid(format!(
            "svd rank {rank} outside 1..={min_dim} for a {}x{} matrix",
            matrix.rows, matrix.cols
        )));
    }
    if matrix.nnz() == 0 || matrix.frobenius_norm() == 0.0 {
        return Err(Error::invalid("svd of an all-zero matrix"));
    }
    let samples = (rank + OVERSAMPLING).min(min_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(matrix.cols, samples, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormal_basis(matrix.mul_dense(&omega));
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormal_basis(matrix.tr_mul_dense(&q));
        q = orthonormal_basis(matrix.mul_dense(&z));
    }

    // Bᵀ = Aᵀ Q, so the left singular vectors of Bᵀ are the right singular
    // vectors of A restricted to the sampled range.
    let bt = matrix.tr_mul_dense(&q);
    let svd = bt.svd(true, false);
    let u = svd.u.expect("requested u");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut components = Vec::with_capacity(rank * matrix.cols);
    let mut singular_values = Vec::with_capacity(rank);
    for &j in order.iter().take(rank) {
        let col = u.column(j);
        // sign convention: largest-magnitude entry positive
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        components.extend(col.iter().map(|v| v * sign));
        singular_values.push(svd.singular_values[j].max(0.0));
    }
    Ok(SvdModel {
        rank,
        cols: matrix.cols,
        components,
        singular_values,
    })
}

impl SvdModel {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.cols..(i + 1) * self.cols]
    }

    /// `components · v` for a sparse vector over the same columns.
    pub fn project(&self, v: &SparseVec) -> Vec<f64> {
        (0..self.rank)
            .map(|i| {
                let comp = self.component(i);
                v.iter().map(|&(c, x)| comp[c] * x).sum()
            })
            .collect()
    }

    /// Maps projected coordinates back to column space.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &a) in coords.iter().enumerate() {
            for (o, &c) in out.iter_mut().zip(self.component(i)) {
                *o += a * c;
            }
        }
        out
    }

    pub(crate) fn encode(&self, w: &mut ByteWriter) {
        w.u64(self.rank as u64)
            .u64(self.cols as u64)
            .f64s(&self.singular_values)
            .f64s(&self.components);
    }

    pub(crate) fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let rank = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let singular_values = r.f64s()?;
        let components = r.f64s()?;
        if singular_values.len() != rank || components.len() != rank * cols {
            return Err(Error::Container("svd section shape mismatch".into()));
        }
        Ok(SvdModel {
            rank,
            cols,
            components,
            singular_values,
        })
    }
}

/// Projects a tokenized text onto the SVD components through the TF-IDF model.
pub fn svd_project<S: AsRef<str>>(tokens: &[S], tfidf: &super::TfIdfModel, svd: &SvdModel) -> Vec<f64> {
    svd.project(&tfidf.transform(tokens))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_rows(m: &CsrMatrix) -> Vec<Vec<f64>> {
        (0..m.rows)
            .map(|r| {
                let mut row = vec![0.0; m.cols];
                for (c, v) in m.row(r) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }

    fn reconstruction_error(m: &CsrMatrix, svd: &SvdModel) -> f64 {
        let mut err = 0.0;
        for row in dense_rows(m) {
            let sparse: SparseVec = row.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
            let back = svd.reconstruct(&svd.project(&sparse));
            err += row.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        err.sqrt()
    }

    #[test]
    fn rank_one_outer_product() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [0.2, 0.0, -1.0, 4.0, 1.5];
        let data: Vec<f64> = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        let m = CsrMatrix::from_dense(4, 5, &data);
        let svd = truncated_svd(&m, 1, 7).unwrap();
        assert!((svd.singular_values()[0] - m.frobenius_norm()).abs() < 1e-10);
        assert!(reconstruction_error(&m, &svd) < 1e-8);
    }

    #[test]
    fn full_rank_reconstructs_exactly() {
        let data: Vec<f64> = (0..24).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let m = CsrMatrix::from_dense(6, 4, &data);
        let svd = truncated_svd(&m, 4, 1).unwrap();
        assert!(reconstruction_error(&m, &svd) < 1e-8);
        let s = svd.singular_values();
        assert!(s.windows(2).all(|w| w[0] >= w[1]) && s.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn rows_orthonormal() {
        let data: Vec<f64> = (0..120).map(|i| ((i * 13 % 17) as f64).sin()).collect();
        let m = CsrMatrix::from_dense(12, 10, &data);
        let svd = truncated_svd(&m, 5, 3).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = svd.component(i).iter().zip(svd.component(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "({i},{j}) = {dot}");
            }
        }
    }

    #[test]
    fn rank_out_of_range() {
        let m = CsrMatrix::from_dense(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(truncated_svd(&m, 0, 0).is_err());
        assert!(truncated_svd(&m, 3, 0).is_err());
        let zero = CsrMatrix::from_dense(2, 2, &[0.0; 4]);
        assert!(truncated_svd(&zero, 1, 0).is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let data: Vec<f64> = (0..300).map(|i| ((i * 31 % 23) as f64).cos()).collect();
        let m = CsrMatrix::from_dense(20, 15, &data);
        assert_eq!(truncated_svd(&m, 5, 11).unwrap(), truncated_svd(&m, 5, 11).unwrap());
    }
}
