//! Sparse spatial weight matrices built from lattice contiguity or read
//! from text files.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contiguity {
    /// Shared edge (4 neighbours).
    Rook,
    /// Shared edge or corner (8 neighbours).
    Queen,
}

impl std::str::FromStr for Contiguity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rook" => Ok(Contiguity::Rook),
            "queen" => Ok(Contiguity::Queen),
            other => Err(Error::InvalidWeights(format!("unknown contiguity scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsFormat {
    /// Header `n=<int>` followed by `row col weight` lines, 0-based.
    CoordinateList,
    /// `n` lines of `n` comma-separated values.
    DenseCsv,
}

/// Sparse `n x n` spatial weight matrix in sorted coordinate form.
#[derive(Debug, Clone)]
pub struct SpatialWeights<T: Real> {
    n: usize,
    entries: Vec<(usize, usize, T)>,
    row_ptr: Vec<usize>,
    standardized: bool,
    max_abs_row_sum: T,
    max_abs_col_sum: T,
    // Row sums removed by standardisation; lets a standardised symmetric
    // matrix be symmetrised for the eigen decomposition.
    row_scale: Option<Vec<T>>,
    spectrum: OnceLock<Option<Vec<Complex<T>>>>,
}

impl<T: Real> PartialEq for SpatialWeights<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries == other.entries && self.standardized == other.standardized
    }
}

impl<T: Real> SpatialWeights<T> {
    /// Builds a matrix from `(row, col, weight)` triples. Explicit zeros are
    /// dropped; duplicates and out-of-range indices are rejected.
    pub fn from_triples(n: usize, triples: Vec<(usize, usize, T)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWeights("weight matrix must have n >= 1".into()));
        }
        let mut seen = HashSet::with_capacity(triples.len());
        for &(i, j, w) in &triples {
            if i >= n || j >= n {
                return Err(Error::InvalidWeights(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if !w.finite() {
                return Err(Error::InvalidWeights(format!("non-finite weight at ({i}, {j})")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidWeights(format!("duplicate entry ({i}, {j})")));
            }
        }
        let mut entries: Vec<_> = triples.into_iter().filter(|e| e.2 != T::zero()).collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Ok(Self::assemble(n, entries, false, None))
    }

    pub fn from_dense(m: &DMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidWeights(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let mut triples = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != T::zero() {
                    triples.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triples(n, triples)
    }

    fn assemble(n: usize, entries: Vec<(usize, usize, T)>, standardized: bool, row_scale: Option<Vec<T>>) -> Self {
        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut rows = vec![T::zero(); n];
        let mut cols = vec![T::zero(); n];
        for &(i, j, w) in &entries {
            rows[i] += w.abs();
            cols[j] += w.abs();
        }
        let max = |v: &[T]| v.iter().copied().fold(T::zero(), |a, b| if b > a { b } else { a });
        Self {
            n,
            max_abs_row_sum: max(&rows),
            max_abs_col_sum: max(&cols),
            entries,
            row_ptr,
            standardized,
            row_scale,
            spectrum: OnceLock::new(),
        }
    }

    /// Binary contiguity on a `rows x cols` lattice. Cell `(r, c)` is
    /// location `r * cols + c`.
    pub fn grid_contiguity(rows: usize, cols: usize, scheme: Contiguity) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols < 2 {
            return Err(Error::InvalidWeights(format!(
                "a {rows}x{cols} grid has fewer than 2 cells"
            )));
        }
        let offsets: &[(isize, isize)] = match scheme {
            Contiguity::Rook => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Contiguity::Queen => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        };
        let mut triples = Vec::new();
        for r in 0..rows as isize {
            for c in 0..cols as isize {
                for &(dr, dc) in offsets {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr >= 0 && cc >= 0 && rr < rows as isize && cc < cols as isize {
                        let i = (r * cols as isize + c) as usize;
                        let j = (rr * cols as isize + cc) as usize;
                        triples.push((i, j, T::one()));
                    }
                }
            }
        }
        Self::from_triples(rows * cols, triples)
    }

    /// Divides every nonzero row by its sum. Rows of zeros stay zero.
    pub fn row_standardize(&self) -> Result<Self> {
        if let Some(&(i, j, _)) = self.entries.iter().find(|e| e.2 < T::zero()) {
            return Err(Error::InvalidWeights(format!("negative weight at ({i}, {j})")));
        }
        let sums = self.row_sums();
        let entries = self
            .entries
            .iter()
            .map(|&(i, j, w)| (i, j, w / sums[i]))
            .collect();
        let scale = match &self.row_scale {
            Some(prev) => prev.iter().zip(&sums).map(|(&a, &b)| if b > T::zero() { a * b } else { a }).collect(),
            None => sums.iter().map(|&s| if s > T::zero() { s } else { T::one() }).collect(),
        };
        Ok(Self::assemble(self.n, entries, true, Some(scale)))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn max_abs_row_sum(&self) -> T {
        self.max_abs_row_sum
    }

    pub fn max_abs_col_sum(&self) -> T {
        self.max_abs_col_sum
    }

    pub fn row_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.n];
        for &(i, _, w) in &self.entries {
            sums[i] += w;
        }
        sums
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.n];
        for &(_, j, w) in &self.entries {
            sums[j] += w;
        }
        sums
    }

    /// Entries of row `i` as `(col, weight)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.entries[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(|&(_, j, w)| (j, w))
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, w) in &self.entries {
            m[(i, j)] = w;
        }
        m
    }

    /// `W x` for a single `n`-vector, written into `out`.
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let mut acc = T::zero();
            for (j, w) in self.row(i) {
                acc += w * x[j];
            }
            *o = acc;
        }
    }

    /// Spatial lag `W X` of an `n x k` matrix.
    pub fn lag(&self, x: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(x.nrows(), self.n, "spatial lag dimension mismatch");
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let src = x.column(c);
            for i in 0..self.n {
                let mut acc = T::zero();
                for (j, w) in self.row(i) {
                    acc += w * src[j];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        let d = self.to_dense();
        (0..self.n).all(|i| (0..i).all(|j| (d[(i, j)] - d[(j, i)]).abs() <= tol))
    }

    /// Relabels locations: new location `k` is old location `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Shape("permutation length differs from n".into()));
        }
        let mut inv = vec![usize::MAX; self.n];
        for (k, &old) in perm.iter().enumerate() {
            if old >= self.n || inv[old] != usize::MAX {
                return Err(Error::Shape("not a permutation".into()));
            }
            inv[old] = k;
        }
        let mut entries: Vec<_> = self.entries.iter().map(|&(i, j, w)| (inv[i], inv[j], w)).collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let scale = self.row_scale.as_ref().map(|s| perm.iter().map(|&o| s[o]).collect());
        Ok(Self::assemble(self.n, entries, self.standardized, scale))
    }

    /// Complex spectrum of `W`, or `None` if the eigen solver did not converge.
    /// Computed once and cached.
    ///
    /// Symmetric matrices, and row-standardised versions of symmetric
    /// matrices (similar to a symmetric one), use the symmetric solver.
    pub fn eigenvalues(&self) -> Option<Vec<Complex<T>>> {
        self.spectrum.get_or_init(|| self.compute_eigenvalues()).clone()
    }

    fn compute_eigenvalues(&self) -> Option<Vec<Complex<T>>> {
        let dense = self.to_dense();
        let tol = T::of(1e-12);
        if let Some(sym) = self.symmetrized(&dense, tol) {
            let eig = SymmetricEigen::try_new(sym, T::default_epsilon(), 1_000_000)?;
            return Some(eig.eigenvalues.iter().map(|&v| Complex::new(v, T::zero())).collect());
        }
        let schur = crate::linalg::real_schur(&dense)?;
        Some(schur.complex_eigenvalues().iter().copied().collect())
    }

    fn symmetrized(&self, dense: &DMatrix<T>, tol: T) -> Option<DMatrix<T>> {
        let n = self.n;
        let is_sym = |m: &DMatrix<T>| (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol));
        if is_sym(dense) {
            return Some(dense.clone());
        }
        let scale = self.row_scale.as_ref()?;
        // D^{1/2} W D^{-1/2}
        let s = DMatrix::from_fn(n, n, |i, j| dense[(i, j)] * (scale[i] / scale[j]).sqrt());
        is_sym(&s).then_some(s)
    }

    pub fn save(&self, path: impl AsRef<Path>, format: WeightsFormat) -> Result<()> {
        fs::write(path, self.to_text(format))?;
        Ok(())
    }

    pub fn to_text(&self, format: WeightsFormat) -> String {
        let mut s = String::new();
        match format {
            WeightsFormat::CoordinateList => {
                let _ = writeln!(s, "n={}", self.n);
                for &(i, j, w) in &self.entries {
                    let _ = writeln!(s, "{i} {j} {:.16e}", w.to_f64_lossy());
                }
            }
            WeightsFormat::DenseCsv => {
                let d = self.to_dense();
                for i in 0..self.n {
                    let row: Vec<String> = (0..self.n)
                        .map(|j| {
                            let v = d[(i, j)].to_f64_lossy();
                            if v == 0.0 { "0".to_string() } else { format!("{v:.16e}") }
                        })
                        .collect();
                    let _ = writeln!(s, "{}", row.join(","));
                }
            }
        }
        s
    }

    pub fn load(path: impl AsRef<Path>, format: WeightsFormat) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, format)
    }

    /// Parses either text format. Negative weights are rejected.
    pub fn parse(text: &str, format: WeightsFormat) -> Result<Self> {
        let w = match format {
            WeightsFormat::CoordinateList => parse_coordinate_list(text)?,
            WeightsFormat::DenseCsv => parse_dense_csv(text)?,
        };
        if let Some(&(i, j, _)) = w.entries.iter().find(|e| e.2 < T::zero()) {
            return Err(Error::InvalidWeights(format!("negative weight at ({i}, {j})")));
        }
        Ok(w)
    }

    /// Guesses the format from the first meaningful line.
    pub fn load_auto(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).unwrap_or("");
        let format = if first.starts_with("n=") { WeightsFormat::CoordinateList } else { WeightsFormat::DenseCsv };
        Self::parse(&text, format)
    }
}

fn parse_num<T: Real>(tok: &str, line: usize) -> Result<T> {
    tok.trim()
        .parse::<f64>()
        .map(T::of)
        .map_err(|_| Error::Parse { line, msg: format!("'{tok}' is not a number") })
}

fn parse_coordinate_list<T: Real>(text: &str) -> Result<SpatialWeights<T>> {
    let mut n = None;
    let mut triples = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if n.is_none() {
            let v = line
                .strip_prefix("n=")
                .ok_or(Error::Parse { line: line_no, msg: "expected header 'n=<int>'".into() })?;
            n = Some(v.trim().parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad location count '{v}'"),
            })?);
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse { line: line_no, msg: "expected 'row col weight'".into() });
        }
        let i = toks[0].parse::<usize>().map_err(|_| Error::Parse { line: line_no, msg: "bad row index".into() })?;
        let j = toks[1].parse::<usize>().map_err(|_| Error::Parse { line: line_no, msg: "bad column index".into() })?;
        triples.push((i, j, parse_num(toks[2], line_no)?));
    }
    let n = n.ok_or(Error::Parse { line: 1, msg: "missing header 'n=<int>'".into() })?;
    SpatialWeights::from_triples(n, triples)
}

fn parse_dense_csv<T: Real>(text: &str) -> Result<SpatialWeights<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rows.push(line.split(',').map(|t| parse_num(t, k + 1)).collect::<Result<_>>()?);
    }
    let n = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::InvalidWeights(format!(
            "dense matrix is not square: {n} rows but row {bad} has {} values",
            rows[bad].len()
        )));
    }
    let mut triples = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        for (j, &w) in r.iter().enumerate() {
            if w != T::zero() {
                triples.push((i, j, w));
            }
        }
    }
    SpatialWeights::from_triples(n, triples)
}

/// Result of [`validate_weights`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub zero_diagonal: bool,
    pub diagonal_violations: Vec<usize>,
    pub nonnegative: bool,
    pub negative_entries: usize,
    pub max_abs_row_sum: f64,
    pub max_abs_col_sum: f64,
    pub bound: f64,
    pub row_sum_within_bound: bool,
    pub col_sum_within_bound: bool,
    pub standardized: bool,
    pub isolated_locations: Vec<usize>,
}

impl ValidationReport {
    /// True when the diagonal is zero, entries are nonnegative and every absolute
    /// row sum is within the bound.
    pub fn passes(&self) -> bool {
        self.zero_diagonal && self.nonnegative && self.row_sum_within_bound
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "locations            {}", self.n);
        let _ = writeln!(s, "zero diagonal        {}", self.zero_diagonal);
        if !self.diagonal_violations.is_empty() {
            let _ = writeln!(s, "  nonzero diagonal at {:?}", self.diagonal_violations);
        }
        let _ = writeln!(s, "nonnegative          {} ({} negative entries)", self.nonnegative, self.negative_entries);
        let _ = writeln!(s, "bound                {}", self.bound);
        let _ = writeln!(s, "max |row sum|        {} (within bound: {})", self.max_abs_row_sum, self.row_sum_within_bound);
        let _ = writeln!(s, "max |col sum|        {} (within bound: {})", self.max_abs_col_sum, self.col_sum_within_bound);
        let _ = writeln!(s, "row standardized     {}", self.standardized);
        let _ = writeln!(s, "isolated locations   {}", self.isolated_locations.len());
        let _ = writeln!(s, "result               {}", if self.passes() { "PASS" } else { "FAIL" });
        s
    }
}

/// Checks the boundedness conditions on `W`. Never fails; callers decide.
pub fn validate_weights<T: Real>(w: &SpatialWeights<T>, bound: f64) -> ValidationReport {
    let diagonal_violations: Vec<usize> =
        w.entries().iter().filter(|&&(i, j, _)| i == j).map(|&(i, _, _)| i).collect();
    let negative_entries = w.entries().iter().filter(|e| e.2 < T::zero()).count();
    let mut degree = vec![0usize; w.n()];
    for &(i, _, _) in w.entries() {
        degree[i] += 1;
    }
    let isolated_locations = degree.iter().enumerate().filter(|(_, &d)| d == 0).map(|(i, _)| i).collect();
    let slack = 1e-12 * bound.abs().max(1.0);
    let max_row = w.max_abs_row_sum().to_f64_lossy();
    let max_col = w.max_abs_col_sum().to_f64_lossy();
    ValidationReport {
        n: w.n(),
        zero_diagonal: diagonal_violations.is_empty(),
        diagonal_violations,
        nonnegative: negative_entries == 0,
        negative_entries,
        max_abs_row_sum: max_row,
        max_abs_col_sum: max_col,
        bound,
        row_sum_within_bound: max_row <= bound + slack,
        col_sum_within_bound: max_col <= bound + slack,
        standardized: w.is_standardized(),
        isolated_locations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type W = SpatialWeights<f64>;

    fn degree(w: &W, i: usize) -> usize {
        w.row(i).count()
    }

    #[test]
    fn queen_3x3_degrees() {
        let w = W::grid_contiguity(3, 3, Contiguity::Queen).unwrap();
        assert_eq!(degree(&w, 0), 3);
        assert_eq!(degree(&w, 1), 5);
        assert_eq!(degree(&w, 4), 8);
    }

    #[test]
    fn rook_2x1_is_a_swap() {
        let w = W::grid_contiguity(2, 1, Contiguity::Rook).unwrap();
        assert_eq!(w.entries(), &[(0, 1, 1.0), (1, 0, 1.0)]);
    }

    #[test]
    fn rook_5x5_link_count_matches_enumeration() {
        let w = W::grid_contiguity(5, 5, Contiguity::Rook).unwrap();
        // brute force: count ordered pairs at Manhattan distance 1
        let mut count = 0;
        for a in 0..25 {
            for b in 0..25 {
                let (ra, ca, rb, cb) = (a / 5, a % 5, b / 5, b % 5);
                if (ra as i32 - rb as i32).abs() + (ca as i32 - cb as i32).abs() == 1 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 80);
        assert_eq!(w.nnz(), count);
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(W::grid_contiguity(1, 1, Contiguity::Queen).is_err());
        assert!(W::grid_contiguity(0, 4, Contiguity::Rook).is_err());
    }

    #[test]
    fn grids_are_symmetric_before_standardization() {
        for (r, c) in [(2, 3), (4, 4), (7, 5)] {
            for s in [Contiguity::Rook, Contiguity::Queen] {
                assert!(W::grid_contiguity(r, c, s).unwrap().is_symmetric(0.0));
            }
        }
    }

    #[test]
    fn standardize_examples() {
        let w = W::grid_contiguity(2, 1, Contiguity::Rook).unwrap().row_standardize().unwrap();
        assert_eq!(w.to_dense(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let w = W::from_triples(3, vec![(0, 0, 1.0), (0, 2, 1.0), (1, 0, 2.0)]).unwrap();
        let s = w.row_standardize().unwrap().to_dense();
        assert_eq!(s.row(0).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.0, 0.5]);
        assert_eq!(s.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn standardize_rejects_negative() {
        let w = W::from_triples(2, vec![(0, 1, -1.0), (1, 0, 1.0)]).unwrap();
        assert!(w.row_standardize().is_err());
    }

    #[test]
    fn standardized_queen_rows_sum_to_one() {
        let w = W::grid_contiguity(7, 7, Contiguity::Queen).unwrap().row_standardize().unwrap();
        assert!(w.is_standardized());
        for s in w.row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn validation_examples() {
        let w = W::grid_contiguity(3, 3, Contiguity::Queen).unwrap().row_standardize().unwrap();
        let r = validate_weights(&w, 1.0);
        assert!((r.max_abs_row_sum - 1.0).abs() < 1e-12);
        assert!(r.passes());

        let d = W::from_triples(2, vec![(0, 0, 0.1), (0, 1, 0.9), (1, 0, 1.0)]).unwrap();
        let r = validate_weights(&d, 1.0);
        assert!(!r.zero_diagonal);
        assert_eq!(r.diagonal_violations, vec![0]);
        assert!(!r.passes());

        let q = W::grid_contiguity(10, 10, Contiguity::Queen).unwrap();
        let r = validate_weights(&q, 8.0);
        assert_eq!(r.max_abs_row_sum, 8.0);
        assert!(r.isolated_locations.is_empty());
    }

    #[test]
    fn validation_reports_islands() {
        let w = W::from_triples(3, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap().row_standardize().unwrap();
        let r = validate_weights(&w, 1.0 + 1e-9);
        assert_eq!(r.isolated_locations, vec![2]);
        assert!(r.passes());
    }

    #[test]
    fn standardized_grids_pass_validation_and_have_unit_spectral_radius() {
        for side in [2usize, 5, 9, 14, 20] {
            for s in [Contiguity::Rook, Contiguity::Queen] {
                let w = W::grid_contiguity(side, side, s).unwrap().row_standardize().unwrap();
                assert!(validate_weights(&w, 1.0 + 1e-9).passes());
                let rho = w.eigenvalues().unwrap().iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(rho <= 1.0 + 1e-9, "side {side}: {rho}");
            }
        }
    }

    #[test]
    fn symmetrized_spectrum_matches_general_solver() {
        let w = W::grid_contiguity(4, 5, Contiguity::Queen).unwrap().row_standardize().unwrap();
        let mut fast: Vec<f64> = w.eigenvalues().unwrap().iter().map(|z| z.re).collect();
        let mut slow: Vec<f64> = w.to_dense().complex_eigenvalues().iter().map(|z| z.re).collect();
        fast.sort_by(f64::total_cmp);
        slow.sort_by(f64::total_cmp);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let w = W::grid_contiguity(3, 3, Contiguity::Rook).unwrap().row_standardize().unwrap();
        for (fmt, name) in [(WeightsFormat::CoordinateList, "w.txt"), (WeightsFormat::DenseCsv, "w.csv")] {
            let path = dir.path().join(name);
            w.save(&path, fmt).unwrap();
            let back = W::load(&path, fmt).unwrap();
            assert_eq!(back.entries(), w.entries());
            assert_eq!(W::load_auto(&path).unwrap().entries(), w.entries());
        }
    }

    #[test]
    fn dense_csv_of_two_cells() {
        let w = W::parse("0,1\n1,0\n", WeightsFormat::DenseCsv).unwrap();
        assert_eq!(w.entries(), &[(0, 1, 1.0), (1, 0, 1.0)]);
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(matches!(
            W::parse("n=2\n0 1 1\n0 1 0.5\n", WeightsFormat::CoordinateList),
            Err(Error::InvalidWeights(_))
        ));
        assert!(W::parse("0,1,0\n1,0\n", WeightsFormat::DenseCsv).is_err());
        assert!(W::parse("0,1\n-1,0\n", WeightsFormat::DenseCsv).is_err());
        assert!(matches!(W::parse("0 1 1\n", WeightsFormat::CoordinateList), Err(Error::Parse { line: 1, .. })));
        assert!(W::parse("n=2\n0 x 1\n", WeightsFormat::CoordinateList).is_err());
    }

    #[test]
    fn lag_matches_dense_product() {
        let w = W::grid_contiguity(3, 4, Contiguity::Queen).unwrap().row_standardize().unwrap();
        let x = DMatrix::from_fn(12, 2, |i, j| (i as f64 + 1.0) * (j as f64 - 0.5));
        assert!((w.lag(&x) - w.to_dense() * &x).norm() < 1e-13);
    }
}
