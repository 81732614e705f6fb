//! Compressed sparse row matrices sized for DG operators.
//!
//! Assembly accumulates (row, col, value) triplets element by element;
//! `from_triplets` sorts them once and sums duplicates. Entries pushed with
//! value zero are kept, which lets repeated assemblies of the same operator
//! family share an identical sparsity pattern (the time stepper relies on
//! this to reuse a symbolic factorization across Picard iterations).

use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("triplet ({row}, {col}) outside a {nrows} x {ncols} matrix")]
    TripletOutOfRange { row: usize, col: usize, nrows: usize, ncols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// `add_scaled_from` requires the other matrix's pattern to be a subset.
    #[error("entry ({0}, {1}) missing from target sparsity pattern")]
    PatternMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from unordered triplets, summing duplicates.
    /// Explicit zeros are retained in the pattern.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(SparseError::TripletOutOfRange { row: r, col: c, nrows, ncols });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
                continue;
            }
            col_indices.push(c);
            values.push(v);
            row_offsets[r + 1] = col_indices.len();
            last = Some((r, c));
        }
        // `row_offsets[r + 1]` is only written when row r receives entries;
        // forward-fill the gaps left by empty rows.
        for r in 0..nrows {
            if row_offsets[r + 1] < row_offsets[r] {
                row_offsets[r + 1] = row_offsets[r];
            }
        }
        Ok(SparseMatrix { nrows, ncols, row_offsets, col_indices, values })
    }

    pub fn zero(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_offsets[r]..self.row_offsets[r + 1])
                .map(move |idx| (r, self.col_indices[idx], self.values[idx]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match self.position(row, col) {
            Some(idx) => self.values[idx],
            None => 0.0,
        }
    }

    /// Index into `values()` of the stored entry at (row, col), if present
    /// in the pattern.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_offsets[row];
        let hi = self.row_offsets[row + 1];
        self.col_indices[lo..hi].binary_search(&col).ok().map(|pos| lo + pos)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        assert_eq!(y.len(), self.nrows, "matvec dimension mismatch");
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for idx in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[idx] * x[self.col_indices[idx]];
            }
            y[r] = acc;
        }
    }

    /// Bilinear form v^T A u.
    pub fn bilinear(&self, v: &[f64], u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.ncols);
        assert_eq!(v.len(), self.nrows);
        let mut acc = 0.0;
        for r in 0..self.nrows {
            let mut row = 0.0;
            for idx in self.row_offsets[r]..self.row_offsets[r + 1] {
                row += self.values[idx] * u[self.col_indices[idx]];
            }
            acc += v[r] * row;
        }
        acc
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut row_offsets = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for idx in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[idx];
                let slot = row_offsets[c];
                col_indices[slot] = r;
                values[slot] = self.values[idx];
                row_offsets[c] += 1;
            }
        }
        // row_offsets has been advanced by the scatter; shift back
        for c in (1..=self.ncols).rev() {
            row_offsets[c] = row_offsets[c - 1];
        }
        row_offsets[0] = 0;
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += scale * other`, requiring every entry of `other` to exist in
    /// `self`'s pattern (so the pattern of `self` never changes).
    pub fn add_scaled_from(&mut self, other: &SparseMatrix, scale: f64) -> Result<(), SparseError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(SparseError::DimensionMismatch(format!(
                "{}x{} += {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        for r in 0..other.nrows {
            let lo = self.row_offsets[r];
            let hi = self.row_offsets[r + 1];
            for idx in other.row_offsets[r]..other.row_offsets[r + 1] {
                let c = other.col_indices[idx];
                match self.col_indices[lo..hi].binary_search(&c) {
                    Ok(pos) => self.values[lo + pos] += scale * other.values[idx],
                    Err(_) => return Err(SparseError::PatternMismatch(r, c)),
                }
            }
        }
        Ok(())
    }

    /// General linear combination via the triplet route; the result's pattern
    /// is the union of all terms' patterns.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix, SparseError> {
        let (nrows, ncols) = match terms.first() {
            Some((_, m)) => (m.nrows, m.ncols),
            None => return Ok(SparseMatrix::zero(0, 0)),
        };
        let mut triplets = Vec::new();
        for &(c, m) in terms {
            if m.nrows != nrows || m.ncols != ncols {
                return Err(SparseError::DimensionMismatch(format!(
                    "{}x{} combined with {}x{}",
                    nrows, ncols, m.nrows, m.ncols
                )));
            }
            triplets.extend(m.entries().map(|(r, col, v)| (r, col, c * v)));
        }
        SparseMatrix::from_triplets(nrows, ncols, &triplets)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - A^T|, zero (to rounding) for symmetric operators.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut defect: f64 = 0.0;
        for (r, c, v) in self.entries() {
            defect = defect.max((v - t.get(r, c)).abs());
        }
        for (r, c, v) in t.entries() {
            defect = defect.max((v - self.get(r, c)).abs());
        }
        defect
    }

    /// Coordinate-format text dump: one `row col value` line per entry.
    pub fn write_coordinate_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (r, c, v) in self.entries() {
            writeln!(w, "{} {} {:.15e}", r, c, v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn duplicate_triplets_are_summed() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 1.0), (0, 1, 2.0), (0, 0, 3.0), (1, 1, -1.0)],
        )
        .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_relative_eq!(m.get(0, 0), 4.0);
        assert_relative_eq!(m.get(0, 1), 2.0);
        assert_relative_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn explicit_zeros_stay_in_pattern() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 1, 0.0), (1, 0, 5.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn empty_rows_are_handled() {
        let m = SparseMatrix::from_triplets(4, 4, &[(3, 1, 2.0)]).unwrap();
        assert_eq!(m.matvec(&[0.0, 1.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn matvec_matches_dense() {
        let m = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (0, 2, -1.0), (1, 1, 3.0), (2, 0, 1.0), (2, 2, 4.0)],
        )
        .unwrap();
        let y = m.matvec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![-1.0, 6.0, 13.0]);
        assert_relative_eq!(m.bilinear(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), -1.0 + 6.0 + 13.0);
    }

    #[test]
    fn transpose_round_trips() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)],
        )
        .unwrap();
        let t = m.transpose();
        assert_eq!(t.nrows(), 3);
        assert_relative_eq!(t.get(2, 0), 2.0);
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let sym = SparseMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 2.0)]).unwrap();
        assert_relative_eq!(sym.symmetry_defect(), 0.0);
        let asym = SparseMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 1.0)]).unwrap();
        assert_relative_eq!(asym.symmetry_defect(), 1.0);
    }

    #[test]
    fn add_scaled_respects_pattern() {
        let mut a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 0.0), (1, 1, 1.0)])
            .unwrap();
        let b = SparseMatrix::from_triplets(2, 2, &[(0, 1, 2.0)]).unwrap();
        a.add_scaled_from(&b, 0.5).unwrap();
        assert_relative_eq!(a.get(0, 1), 1.0);
        let c = SparseMatrix::from_triplets(2, 2, &[(1, 0, 1.0)]).unwrap();
        assert!(matches!(
            a.add_scaled_from(&c, 1.0),
            Err(SparseError::PatternMismatch(1, 0))
        ));
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 2, &[(1, 1, 4.0)]).unwrap();
        let c = SparseMatrix::linear_combination(&[(2.0, &a), (-0.25, &b)]).unwrap();
        assert_relative_eq!(c.get(0, 0), 2.0);
        assert_relative_eq!(c.get(1, 1), -1.0);
    }

    #[test]
    fn coordinate_dump_lists_all_entries() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.5), (1, 0, -2.0)]).unwrap();
        let mut buf = Vec::new();
        m.write_coordinate_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().starts_with("0 0 "));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// (A^T)^T = A and matvec agrees with the transpose-matvec identity
        /// y^T (A x) = x^T (A^T y).
        #[test]
        fn transpose_identities(
            entries in prop::collection::vec((0usize..6, 0usize..6, -5.0f64..5.0), 1..30),
            x in prop::collection::vec(-2.0f64..2.0, 6),
            y in prop::collection::vec(-2.0f64..2.0, 6),
        ) {
            let a = SparseMatrix::from_triplets(6, 6, &entries).unwrap();
            prop_assert_eq!(a.transpose().transpose(), a.clone());
            let lhs: f64 = y.iter().zip(a.matvec(&x)).map(|(yi, axi)| yi * axi).sum();
            let rhs: f64 = x.iter().zip(a.transpose().matvec(&y)).map(|(xi, atyi)| xi * atyi).sum();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
