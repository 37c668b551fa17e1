use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Compressed-row sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::shape(format!("entry ({r}, {c}) outside {rows}x{cols} matrix")));
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self { rows, cols, indptr, indices, values })
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

    /// Column indices and values of row `r`, columns ascending.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            triplets.extend(cols.iter().zip(vals).map(|(&c, &v)| (c, r, v)));
        }
        CsrMatrix::from_triplets(self.cols, self.rows, triplets).expect("transposed entries in range")
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[[r, c]] = v;
            }
        }
        out
    }

    /// Block-diagonal composition; block `k` occupies rows/cols after all earlier blocks.
    pub fn block_diagonal(blocks: &[&CsrMatrix]) -> CsrMatrix {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::with_capacity(blocks.iter().map(|b| b.nnz()).sum());
        let mut values = Vec::with_capacity(indices.capacity());
        indptr.push(0);
        let mut col_offset = 0;
        for b in blocks {
            for r in 0..b.rows {
                let (cs, vs) = b.row(r);
                indices.extend(cs.iter().map(|c| c + col_offset));
                values.extend_from_slice(vs);
                indptr.push(indices.len());
            }
            col_offset += b.cols;
        }
        CsrMatrix { rows, cols, indptr, indices, values }
    }

    /// `self · x`.
    ///
    /// Each output entry sums its terms in ascending value order, so the result
    /// does not depend on how rows and columns are labelled.
    pub fn matmul_dense(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.cols {
            return Err(Error::shape(format!(
                "sparse {}x{} times dense {}x{}",
                self.rows,
                self.cols,
                x.nrows(),
                x.ncols()
            )));
        }
        let width = x.ncols();
        let mut out = Array2::<f64>::zeros((self.rows, width));
        let mut terms: Vec<f64> = Vec::new();
        for (r, mut out_row) in out.rows_mut().into_iter().enumerate() {
            let (cols, vals) = self.row(r);
            match cols.len() {
                0 => {}
                1 => {
                    let src = x.row(cols[0]);
                    out_row.zip_mut_with(&src, |o, &s| *o = vals[0] * s);
                }
                _ => {
                    for c in 0..width {
                        terms.clear();
                        terms.extend(cols.iter().zip(vals).map(|(&j, &w)| w * x[[j, c]]));
                        terms.sort_unstable_by(f64::total_cmp);
                        out_row[c] = terms.iter().sum();
                    }
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · x` without forming the transpose.
    pub fn transpose_matmul_dense(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.rows {
            return Err(Error::shape(format!(
                "transposed sparse {}x{} times dense {}x{}",
                self.cols,
                self.rows,
                x.nrows(),
                x.ncols()
            )));
        }
        let mut out = Array2::<f64>::zeros((self.cols, x.ncols()));
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let src = x.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.row_mut(c).scaled_add(v, &src);
            }
        }
        Ok(out)
    }
}
