//! Dense row-major matrices and the handful of kernels everything else
//! builds on.
//!
//! All heavy products go through `matrixmultiply::dgemm` on fixed 128-row
//! chunks; chunks are farmed out with rayon. Because the chunk
//! decomposition does not depend on the number of worker threads, results
//! are bit-identical no matter how the work is scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Rows processed per GEMM task.
const ROW_CHUNK: usize = 128;

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("matrix constructed from non-finite values".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged row lengths".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy of the selected rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(indices.len(), self.cols);
        for (dst, &src) in indices.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn ensure_finite(self, op: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::Numerical(format!("non-finite values after {op}")))
        }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let out = gemm_chunked(
            self.rows,
            self.cols,
            other.cols,
            &self.data,
            [self.cols as isize, 1],
            &other.data,
            [other.cols as isize, 1],
        );
        out.ensure_finite("matmul")
    }

    /// `self * other^T`. `other` is `n x k` with `k == self.cols`.
    pub fn matmul_nt(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "matmul_nt {}x{} * ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let out = gemm_chunked(
            self.rows,
            self.cols,
            other.rows,
            &self.data,
            [self.cols as isize, 1],
            &other.data,
            [1, other.cols as isize],
        );
        out.ensure_finite("matmul_nt")
    }

    /// `self^T * other`. `self` is `k x m`, `other` is `k x n`.
    pub fn matmul_tn(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "matmul_tn ({}x{})^T * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        // The transposed left operand has column-major layout, so row
        // chunking would stride; m = self.cols is small in practice
        // (layer widths), run it as a single GEMM.
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        unsafe {
            matrixmultiply::dgemm(
                self.cols,
                self.rows,
                other.cols,
                1.0,
                self.data.as_ptr(),
                1,
                self.cols as isize,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        out.ensure_finite("matmul_tn")
    }

    /// In-place `self += other * scale`.
    pub fn add_scaled(&mut self, other: &DenseMatrix, scale: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape("add_scaled shape mismatch".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * scale;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Sum of squared entries.
    pub fn sq_sum(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Chunk the output rows of `C = A(view) * B(view)` and run one GEMM per
/// chunk. Views are (ptr, [row stride, col stride]) so transposed operands
/// cost nothing.
fn gemm_chunked(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    astr: [isize; 2],
    b: &[f64],
    bstr: [isize; 2],
) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m, n);
    if m == 0 || n == 0 {
        return out;
    }
    if k == 0 {
        return out;
    }
    let a_ptr = ImmutablePtr(a.as_ptr());
    let b_ptr = ImmutablePtr(b.as_ptr());
    out.data
        .par_chunks_mut(ROW_CHUNK * n)
        .enumerate()
        .for_each(move |(chunk_idx, c_chunk)| {
            let row0 = chunk_idx * ROW_CHUNK;
            let rows_here = c_chunk.len() / n;
            unsafe {
                matrixmultiply::dgemm(
                    rows_here,
                    k,
                    n,
                    1.0,
                    a_ptr.get().offset(row0 as isize * astr[0]),
                    astr[0],
                    astr[1],
                    b_ptr.get(),
                    bstr[0],
                    bstr[1],
                    0.0,
                    c_chunk.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        });
    out
}

#[derive(Clone, Copy)]
struct ImmutablePtr(*const f64);

impl ImmutablePtr {
    fn get(self) -> *const f64 {
        self.0
    }
}

// Read-only view shared across the chunk tasks.
unsafe impl Send for ImmutablePtr {}
unsafe impl Sync for ImmutablePtr {}

/// Squared Euclidean distances between every point (row of `points`) and
/// every center (row of `centers`): entry (i, j) = ||p_i - c_j||^2.
pub fn pairwise_sq_dists(points: &DenseMatrix, centers: &DenseMatrix) -> Result<DenseMatrix> {
    if points.cols() != centers.cols() {
        return Err(Error::Shape(format!(
            "pairwise_sq_dists: point dim {} vs center dim {}",
            points.cols(),
            centers.cols()
        )));
    }
    let n = points.rows();
    let k = centers.rows();
    let d = points.cols();
    let mut out = DenseMatrix::zeros(n, k);
    out.data
        .par_chunks_mut(k.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let p = points.row(i);
            for (j, slot) in row.iter_mut().enumerate() {
                let c = centers.row(j);
                let mut s = 0.0;
                for t in 0..d {
                    let diff = p[t] - c[t];
                    s += diff * diff;
                }
                // Guard tiny negative drift; distances are sums of squares
                // so only exact-zero cancellation is possible anyway.
                *slot = s.max(0.0);
            }
        });
    Ok(out)
}

/// Matrix of i.i.d. normal draws; deterministic in `rng`.
pub fn sample_gaussian(
    rng: &mut SeededRng,
    rows: usize,
    cols: usize,
    mean: f64,
    std: f64,
) -> DenseMatrix {
    assert!(std >= 0.0, "sample_gaussian requires std >= 0");
    let mut out = DenseMatrix::zeros(rows, cols);
    for v in out.data.iter_mut() {
        *v = mean + std * rng.next_gaussian();
    }
    out
}

#[cfg(test)]
pub(crate) fn matmul_naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for t in 0..a.cols() {
                s += a.get(i, t) * b.get(t, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = rng.next_uniform(-1.0, 1.0);
        }
        m
    }

    fn assert_close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        for (x, y) in a.data().iter().zip(b.data()) {
            let scale = x.abs().max(y.abs()).max(1.0);
            assert!((x - y).abs() <= tol * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn matmul_identity() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let eye = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(eye.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_hand_case() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = SeededRng::new(17);
        let a = random_matrix(&mut rng, 5, 7);
        let b = random_matrix(&mut rng, 7, 3);
        assert_close(&a.matmul(&b).unwrap(), &matmul_naive(&a, &b), 1e-12);
    }

    #[test]
    fn matmul_large_matches_triple_loop_across_chunks() {
        let mut rng = SeededRng::new(18);
        let a = random_matrix(&mut rng, 300, 40); // spans two row chunks
        let b = random_matrix(&mut rng, 40, 50);
        assert_close(&a.matmul(&b).unwrap(), &matmul_naive(&a, &b), 1e-12);
    }

    #[test]
    fn matmul_shape_error() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn matmul_nt_and_tn_match_explicit_transpose() {
        let mut rng = SeededRng::new(19);
        let a = random_matrix(&mut rng, 9, 6);
        let b = random_matrix(&mut rng, 11, 6);
        assert_close(&a.matmul_nt(&b).unwrap(), &a.matmul(&b.transpose()).unwrap(), 1e-12);
        let c = random_matrix(&mut rng, 9, 4);
        assert_close(&a.matmul_tn(&c).unwrap(), &a.transpose().matmul(&c).unwrap(), 1e-12);
    }

    #[test]
    fn pairwise_hand_cases() {
        let p = DenseMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let c = DenseMatrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        let d = pairwise_sq_dists(&p, &c).unwrap();
        assert_eq!(d.get(0, 0), 25.0);
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn pairwise_matches_loop_oracle() {
        let mut rng = SeededRng::new(23);
        let p = random_matrix(&mut rng, 6, 3);
        let c = random_matrix(&mut rng, 4, 3);
        let d = pairwise_sq_dists(&p, &c).unwrap();
        for i in 0..6 {
            for j in 0..4 {
                let mut s = 0.0;
                for t in 0..3 {
                    s += (p.get(i, t) - c.get(j, t)).powi(2);
                }
                assert!((d.get(i, j) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sample_gaussian_zero_std_and_determinism() {
        let mut rng = SeededRng::new(7);
        let m = sample_gaussian(&mut rng, 4, 3, 2.5, 0.0);
        assert!(m.data().iter().all(|&v| v == 2.5));
        let a = sample_gaussian(&mut SeededRng::new(40), 10, 10, 0.0, 1.0);
        let b = sample_gaussian(&mut SeededRng::new(40), 10, 10, 0.0, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn sample_gaussian_moments() {
        let mut rng = SeededRng::new(8);
        let m = sample_gaussian(&mut rng, 1000, 100, 0.0, 1.0);
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02);
        assert!((var.sqrt() - 1.0).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn matmul_associative(seed in 0u64..500) {
            let mut rng = SeededRng::new(seed);
            let a = random_matrix(&mut rng, 4, 5);
            let b = random_matrix(&mut rng, 5, 6);
            let c = random_matrix(&mut rng, 6, 3);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                let scale = x.abs().max(y.abs()).max(1.0);
                prop_assert!((x - y).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn pairwise_symmetric_on_self(seed in 0u64..200) {
            let mut rng = SeededRng::new(seed);
            let p = random_matrix(&mut rng, 7, 4);
            let d = pairwise_sq_dists(&p, &p).unwrap();
            for i in 0..7 {
                prop_assert_eq!(d.get(i, i), 0.0);
                for j in 0..7 {
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                }
            }
        }
    }
}
