//! Doubly block-Toeplitz kernel reshaping: builds the sparse matrix Kt of
//! size EFM x HWC so that Kt * flatten(X) reproduces the convolution output,
//! plus the prior-work Toeplitz input-patch matrix kept as a baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ConvShape, DenseMatrix, InputBatch, KernelBank, OutputBatch};

/// Row-major sparse real matrix. Entries in each row are ordered by strictly
/// increasing column index and are all nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_entries: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            row_entries: vec![Vec::new(); rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.row_entries[r]
    }

    /// Append an entry; column indices must arrive in increasing order and
    /// values must be nonzero.
    pub fn push(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::shape(format!(
                "entry ({row}, {col}) outside {}x{} matrix",
                self.rows, self.cols
            )));
        }
        if value == 0.0 {
            return Err(Error::shape("sparse entries must be nonzero"));
        }
        if let Some(&(last, _)) = self.row_entries[row].last() {
            if col <= last {
                return Err(Error::shape(format!(
                    "column {col} not strictly increasing after {last} in row {row}"
                )));
            }
        }
        self.row_entries[row].push((col, value));
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.row_entries.iter().map(Vec::len).sum()
    }

    /// Densified row, length `cols`.
    pub fn row_dense(&self, r: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for &(c, v) in &self.row_entries[r] {
            out[c] = v;
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimMismatch {
                left: self.cols,
                right: x.len(),
            });
        }
        Ok(self
            .row_entries
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect())
    }

    /// Sparse-times-dense product; `x` has one flattened input per column.
    pub fn matmul(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows != self.cols {
            return Err(Error::DimMismatch {
                left: self.cols,
                right: x.rows,
            });
        }
        let mut y = DenseMatrix::zeros(self.rows, x.cols);
        for (r, row) in self.row_entries.iter().enumerate() {
            for q in 0..x.cols {
                let mut acc = 0.0;
                for &(c, v) in row {
                    acc += v * x.get(c, q);
                }
                y.set(r, q, acc);
            }
        }
        Ok(y)
    }

    pub fn to_dump(&self) -> SparseDump {
        let mut entries = Vec::with_capacity(self.nnz());
        for (r, row) in self.row_entries.iter().enumerate() {
            for &(c, v) in row {
                entries.push((r, c, v));
            }
        }
        SparseDump {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn from_dump(dump: &SparseDump) -> Result<Self> {
        let mut m = SparseMatrix::new(dump.rows, dump.cols);
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &dump.entries {
            if let Some(prev) = last {
                if (r, c) <= prev {
                    return Err(Error::parse("sparse dump entries not sorted by (row, col)"));
                }
            }
            last = Some((r, c));
            m.push(r, c, v)?;
        }
        Ok(m)
    }
}

/// Serialized form of a sparse matrix: entries sorted by (row, col).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SparseDump {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

/// Sparsity statistics for the CLI report.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NnzStats {
    pub nnz: usize,
    pub row_nnz_max: usize,
    pub density: f64,
}

pub fn nnz_stats(m: &SparseMatrix) -> NnzStats {
    let nnz = m.nnz();
    let row_nnz_max = (0..m.rows()).map(|r| m.row(r).len()).max().unwrap_or(0);
    let cells = m.rows() * m.cols();
    NnzStats {
        nnz,
        row_nnz_max,
        density: if cells == 0 {
            0.0
        } else {
            nnz as f64 / cells as f64
        },
    }
}

fn check_kernel(k: &KernelBank, shape: &ConvShape) -> Result<()> {
    if k.r() != shape.r || k.s() != shape.s || k.c() != shape.c || k.m() != shape.m {
        return Err(Error::shape(format!(
            "kernel shape {:?} inconsistent with configuration (R={}, S={}, C={}, M={})",
            k.0.shape, shape.r, shape.s, shape.c, shape.m
        )));
    }
    Ok(())
}

/// Build the doubly block-Toeplitz kernel matrix Kt (EFM x HWC). Row p carries
/// one entry per in-bounds kernel tap of output position p; taps landing in
/// padding are omitted, and zero kernel values are dropped.
pub fn build_dbt_kernel(k: &KernelBank, shape: &ConvShape) -> Result<SparseMatrix> {
    check_kernel(k, shape)?;
    let mut kt = SparseMatrix::new(shape.efm(), shape.hwc());
    for dm in 0..shape.m {
        for ie in 0..shape.e {
            for jf in 0..shape.f {
                let p = shape.output_index(ie, jf, dm);
                for i in 0..shape.r {
                    let ii = (ie * shape.stride_h + i) as isize - shape.pad_h as isize;
                    if ii < 0 || ii as usize >= shape.h {
                        continue;
                    }
                    for j in 0..shape.s {
                        let jj = (jf * shape.stride_w + j) as isize - shape.pad_w as isize;
                        if jj < 0 || jj as usize >= shape.w {
                            continue;
                        }
                        for kc in 0..shape.c {
                            let value = k.get(i, j, kc, dm);
                            if value != 0.0 {
                                let col = shape.input_index(ii as usize, jj as usize, kc);
                                kt.push(p, col, value)?;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(kt)
}

/// Prior-work Toeplitz baseline for one image: row t of the EF x RSC matrix
/// holds the vectorized input patch at output position t, so that
/// Xt * vec(filter d) is the feature map of filter d.
pub fn build_toeplitz_input_image(
    x: &InputBatch,
    shape: &ConvShape,
    image: usize,
) -> Result<SparseMatrix> {
    if x.h() != shape.h || x.w() != shape.w || x.c() != shape.c {
        return Err(Error::shape(format!(
            "input shape {:?} inconsistent with configuration (H={}, W={}, C={})",
            x.0.shape, shape.h, shape.w, shape.c
        )));
    }
    if image >= x.n() {
        return Err(Error::shape(format!(
            "image index {image} out of range for batch of {}",
            x.n()
        )));
    }
    let rsc = shape.r * shape.s * shape.c;
    let mut xt = SparseMatrix::new(shape.e * shape.f, rsc);
    for ie in 0..shape.e {
        for jf in 0..shape.f {
            let t = ie * shape.f + jf;
            for i in 0..shape.r {
                for j in 0..shape.s {
                    for kc in 0..shape.c {
                        let ii = (ie * shape.stride_h + i) as isize - shape.pad_h as isize;
                        let jj = (jf * shape.stride_w + j) as isize - shape.pad_w as isize;
                        let value = x.get_padded(image, ii, jj, kc);
                        if value != 0.0 {
                            xt.push(t, i * shape.s * shape.c + j * shape.c + kc, value)?;
                        }
                    }
                }
            }
        }
    }
    Ok(xt)
}

/// Single-image convenience wrapper around [`build_toeplitz_input_image`].
pub fn build_toeplitz_input(x: &InputBatch, shape: &ConvShape) -> Result<SparseMatrix> {
    if x.n() != 1 {
        return Err(Error::shape(
            "Toeplitz baseline expects a single image; build batches image-by-image",
        ));
    }
    build_toeplitz_input_image(x, shape, 0)
}

/// Inverse of the output flattening: turn an EFM x N matrix back into the
/// (N, E, F, M) output tensor.
pub fn reshape_output(y_flat: &DenseMatrix, shape: &ConvShape) -> Result<OutputBatch> {
    if y_flat.rows != shape.efm() {
        return Err(Error::shape(format!(
            "flat output has {} rows, expected EFM = {}",
            y_flat.rows,
            shape.efm()
        )));
    }
    if y_flat.cols != shape.n {
        return Err(Error::shape(format!(
            "flat output has {} columns, expected N = {}",
            y_flat.cols, shape.n
        )));
    }
    let mut y = OutputBatch::zeros(shape.n, shape.e, shape.f, shape.m);
    for q in 0..shape.n {
        for p in 0..shape.efm() {
            let (ie, jf, dm) = shape.output_coords(p);
            y.set(q, ie, jf, dm, y_flat.get(p, q));
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{conv_reference, flatten_input, flatten_output};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_vec(rng: &mut ChaCha12Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn dbt_worked_example() {
        // H=W=3, R=S=2, stride 1, no padding: Kt is 4x9 with 4 taps per row.
        let shape = ConvShape::unit_stride(1, 3, 3, 1, 2, 2, 1).unwrap();
        let k = KernelBank::new([2, 2, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let kt = build_dbt_kernel(&k, &shape).unwrap();
        assert_eq!((kt.rows(), kt.cols()), (4, 9));
        for p in 0..4 {
            assert_eq!(kt.row(p).len(), 4);
        }
        // Row 0 covers the top-left window: columns 0, 1, 3, 4.
        assert_eq!(
            kt.row(0),
            &[(0, 1.0), (1, 2.0), (3, 3.0), (4, 4.0)]
        );
        let stats = nnz_stats(&kt);
        assert_eq!(stats.nnz, 16);
        assert_eq!(stats.row_nnz_max, 4);
        assert!((stats.density - 16.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn dbt_identity_for_unit_kernel() {
        let shape = ConvShape::unit_stride(1, 3, 3, 1, 1, 1, 1).unwrap();
        let k = KernelBank::new([1, 1, 1, 1], vec![1.0]).unwrap();
        let kt = build_dbt_kernel(&k, &shape).unwrap();
        assert_eq!((kt.rows(), kt.cols()), (9, 9));
        for p in 0..9 {
            assert_eq!(kt.row(p), &[(p, 1.0)]);
        }
    }

    #[test]
    fn dbt_matches_oracle_many_seeds() {
        for seed in 0..50u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let shape = ConvShape::unit_stride(2, 4, 5, 2, 2, 3, 2).unwrap();
            let x = InputBatch::new([2, 4, 5, 2], random_vec(&mut rng, 2 * 4 * 5 * 2)).unwrap();
            let k = KernelBank::new([2, 3, 2, 2], random_vec(&mut rng, 2 * 3 * 2 * 2)).unwrap();
            let kt = build_dbt_kernel(&k, &shape).unwrap();
            let y_flat = kt.matmul(&flatten_input(&x)).unwrap();
            let y = reshape_output(&y_flat, &shape).unwrap();
            let oracle = conv_reference(&x, &k, &shape).unwrap();
            let max_err = y
                .0
                .data
                .iter()
                .zip(&oracle.0.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_err <= 1e-12, "seed {seed}: max error {max_err}");
        }
    }

    #[test]
    fn dbt_with_stride_and_padding_matches_oracle() {
        for seed in 0..20u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + seed);
            let shape = ConvShape::new(1, 5, 6, 2, 3, 2, 2, 2, 2, 1, 1).unwrap();
            let x = InputBatch::new([1, 5, 6, 2], random_vec(&mut rng, 5 * 6 * 2)).unwrap();
            let k = KernelBank::new([3, 2, 2, 2], random_vec(&mut rng, 3 * 2 * 2 * 2)).unwrap();
            let kt = build_dbt_kernel(&k, &shape).unwrap();
            let y = reshape_output(&kt.matmul(&flatten_input(&x)).unwrap(), &shape).unwrap();
            let oracle = conv_reference(&x, &k, &shape).unwrap();
            for (a, b) in y.0.data.iter().zip(&oracle.0.data) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn row_nnz_bounded_by_rsc() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let shape = ConvShape::new(1, 4, 4, 2, 3, 3, 1, 1, 1, 1, 1).unwrap();
        let k = KernelBank::new([3, 3, 2, 1], random_vec(&mut rng, 18)).unwrap();
        let kt = build_dbt_kernel(&k, &shape).unwrap();
        for p in 0..kt.rows() {
            assert!(kt.row(p).len() <= shape.r * shape.s * shape.c);
        }
    }

    #[test]
    fn toeplitz_figure_case() {
        let shape = ConvShape::unit_stride(1, 3, 3, 1, 2, 2, 1).unwrap();
        let x = InputBatch::new([1, 3, 3, 1], (1..=9).map(f64::from).collect()).unwrap();
        let xt = build_toeplitz_input(&x, &shape).unwrap();
        assert_eq!((xt.rows(), xt.cols()), (4, 4));
        // Row 0 is the top-left 2x2 patch (1, 2, 4, 5).
        assert_eq!(xt.row_dense(0), vec![1.0, 2.0, 4.0, 5.0]);
        assert_eq!(xt.row_dense(3), vec![5.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn toeplitz_zero_image() {
        let shape = ConvShape::unit_stride(1, 3, 3, 1, 2, 2, 1).unwrap();
        let x = InputBatch::new([1, 3, 3, 1], vec![0.0; 9]).unwrap();
        let xt = build_toeplitz_input(&x, &shape).unwrap();
        assert_eq!(xt.nnz(), 0);
    }

    #[test]
    fn toeplitz_matches_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let shape = ConvShape::unit_stride(1, 4, 4, 2, 2, 2, 3).unwrap();
        let x = InputBatch::new([1, 4, 4, 2], random_vec(&mut rng, 32)).unwrap();
        let k = KernelBank::new([2, 2, 2, 3], random_vec(&mut rng, 24)).unwrap();
        let xt = build_toeplitz_input(&x, &shape).unwrap();
        let oracle = conv_reference(&x, &k, &shape).unwrap();
        for dm in 0..shape.m {
            let filt: Vec<f64> = (0..shape.r)
                .flat_map(|i| {
                    (0..shape.s).flat_map(move |j| (0..shape.c).map(move |kc| (i, j, kc)))
                })
                .map(|(i, j, kc)| k.get(i, j, kc, dm))
                .collect();
            let fm = xt.matvec(&filt).unwrap();
            for ie in 0..shape.e {
                for jf in 0..shape.f {
                    assert!((fm[ie * shape.f + jf] - oracle.get(0, ie, jf, dm)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn reshape_output_trivial() {
        let shape = ConvShape::unit_stride(1, 3, 3, 1, 2, 2, 1).unwrap();
        let flat = DenseMatrix {
            rows: 4,
            cols: 1,
            data: vec![1.0, 2.0, 3.0, 4.0],
        };
        let y = reshape_output(&flat, &shape).unwrap();
        assert_eq!(y.get(0, 0, 0, 0), 1.0);
        assert_eq!(y.get(0, 0, 1, 0), 2.0);
        assert_eq!(y.get(0, 1, 0, 0), 3.0);
        assert_eq!(y.get(0, 1, 1, 0), 4.0);
    }

    #[test]
    fn reshape_output_filter_blocks_contiguous() {
        let shape = ConvShape::unit_stride(1, 3, 3, 1, 2, 2, 2).unwrap();
        let flat = DenseMatrix {
            rows: 8,
            cols: 1,
            data: (1..=8).map(f64::from).collect(),
        };
        let y = reshape_output(&flat, &shape).unwrap();
        // first E*F entries are filter 0's map, next E*F filter 1's
        assert_eq!(y.get(0, 0, 0, 0), 1.0);
        assert_eq!(y.get(0, 1, 1, 0), 4.0);
        assert_eq!(y.get(0, 0, 0, 1), 5.0);
        assert_eq!(y.get(0, 1, 1, 1), 8.0);
    }

    #[test]
    fn reshape_output_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let shape = ConvShape::unit_stride(2, 4, 4, 1, 2, 2, 2).unwrap();
        let y = OutputBatch::new(
            [2, shape.e, shape.f, 2],
            random_vec(&mut rng, 2 * shape.e * shape.f * 2),
        )
        .unwrap();
        let back = reshape_output(&flatten_output(&y, &shape), &shape).unwrap();
        assert_eq!(back, y);
    }

    #[test]
    fn nnz_stats_identity_and_empty() {
        let shape = ConvShape::unit_stride(1, 3, 3, 1, 1, 1, 1).unwrap();
        let k = KernelBank::new([1, 1, 1, 1], vec![1.0]).unwrap();
        let kt = build_dbt_kernel(&k, &shape).unwrap();
        let stats = nnz_stats(&kt);
        assert_eq!(stats.nnz, 9);
        assert!((stats.density - 1.0 / 9.0).abs() < 1e-15);

        let empty = SparseMatrix::new(3, 3);
        assert_eq!(nnz_stats(&empty).nnz, 0);
    }

    #[test]
    fn dump_roundtrip() {
        let shape = ConvShape::unit_stride(1, 3, 3, 1, 2, 2, 1).unwrap();
        let k = KernelBank::new([2, 2, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let kt = build_dbt_kernel(&k, &shape).unwrap();
        let dump = kt.to_dump();
        let back = SparseMatrix::from_dump(&dump).unwrap();
        assert_eq!(back, kt);
    }
}
