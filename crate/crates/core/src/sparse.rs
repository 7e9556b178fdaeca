//! Row-compressed sparse matrices and a direct LU factorization backed by `faer`.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::Solve;
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::{LuError, SupernodalThreshold};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Col, Conj, MatMut, Par, Side};

use crate::error::{Error, Result};

/// Square CSR matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Zero matrix on the given pattern; `rows[i]` lists the columns of row `i`.
    pub fn from_pattern(rows: &[Vec<usize>]) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows {
            let mut cols = r.clone();
            cols.sort_unstable();
            cols.dedup();
            debug_assert!(cols.iter().all(|&c| c < n));
            col_idx.extend_from_slice(&cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// Dense-to-sparse conversion dropping exact zeros (test helper scale).
    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let rows: Vec<Vec<usize>> = a
            .iter()
            .map(|r| (0..r.len()).filter(|&j| r[j] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(&rows);
        for (i, r) in a.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    m.add(i, j, v);
                }
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut m = Self::from_pattern(&rows);
        m.values.fill(1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    #[inline]
    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    /// Adds `v` to entry `(i, j)`, which must be part of the pattern.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn fill_zero(&mut self) {
        self.values.fill(0.0);
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                rows[j].push(i);
            }
        }
        let mut t = SparseMatrix::from_pattern(&rows);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.add(j, i, v);
            }
        }
        t
    }

    /// Multiplies row `i` by `s(i)`.
    pub fn scale_rows<S: Fn(usize) -> f64>(&mut self, s: S) {
        for i in 0..self.n {
            let f = s(i);
            for v in &mut self.values[self.row_ptr[i]..self.row_ptr[i + 1]] {
                *v *= f;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|`
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, _)| self.position(j, i).is_some()))
    }

    /// Row-major dense copy, for small matrices in tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Column-compressed copy for `faer`; the CSR arrays of `A` are the CSC arrays of `A^T`.
    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t = self.transpose();
        let symbolic = SymbolicSparseColMat::new_checked(
            self.n,
            self.n,
            t.row_ptr.clone(),
            None,
            t.col_idx.clone(),
        );
        Ok(SparseColMat::new(symbolic, t.values))
    }
}

/// Fill-reducing analysis of a symmetric sparsity pattern, reusable across
/// matrices with the same pattern.
#[derive(Clone)]
pub struct SymmetricAnalysis {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: Arc<SymbolicCholesky<usize>>,
}

impl std::fmt::Debug for SymmetricAnalysis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymmetricAnalysis").field("n", &self.n).field("factor_nnz", &self.symbolic.len_val()).finish()
    }
}

impl SparseMatrix {
    /// Lower triangle as column-compressed arrays (equal to the upper triangle of the
    /// CSR arrays read as CSC).
    fn lower_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut col_ptr = Vec::with_capacity(self.n + 1);
        col_ptr.push(0);
        let (mut rows, mut vals) = (Vec::new(), Vec::new());
        // Column j of the lower triangle of a symmetric matrix = row j, entries i >= j.
        for j in 0..self.n {
            for (i, v) in self.row(j) {
                if i >= j {
                    rows.push(i);
                    vals.push(v);
                }
            }
            col_ptr.push(rows.len());
        }
        (col_ptr, rows, vals)
    }
}

/// Whether a symmetric matrix admits a sparse Cholesky factorization (lower triangle read).
pub fn is_positive_definite(a: &SparseMatrix) -> bool {
    if a.dim() == 0 || !a.is_structurally_symmetric() {
        return false;
    }
    let (col_ptr, row_idx, vals) = a.lower_csc();
    let pattern = SymbolicSparseColMat::new_checked(a.n, a.n, col_ptr, None, row_idx);
    SparseColMat::new(pattern, vals).sp_cholesky(Side::Lower).is_ok()
}

/// Symbolic analysis (AMD ordering, supernodal structure) of a structurally symmetric matrix.
pub fn analyze_symmetric(a: &SparseMatrix) -> Result<SymmetricAnalysis> {
    if a.dim() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if !a.is_structurally_symmetric() {
        return Err(Error::InvalidArgument("pattern is not symmetric".into()));
    }
    let (col_ptr, row_idx, _) = a.lower_csc();
    let pattern = SymbolicSparseColMat::new_checked(a.n, a.n, col_ptr, None, row_idx);
    let params = CholeskySymbolicParams {
        supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
        ..Default::default()
    };
    let symbolic = factorize_symbolic_cholesky(pattern.as_ref(), Side::Lower, SymmetricOrdering::Amd, params)
        .map_err(|e| Error::SingularMatrix { stage: 0, reason: format!("{e:?}") })?;
    Ok(SymmetricAnalysis { n: a.n, row_ptr: a.row_ptr.clone(), col_idx: a.col_idx.clone(), symbolic: Arc::new(symbolic) })
}

impl SymmetricAnalysis {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the triangular factor.
    pub fn factor_nnz(&self) -> usize {
        self.symbolic.len_val()
    }

    pub fn matches(&self, a: &SparseMatrix) -> bool {
        a.n == self.n && a.row_ptr == self.row_ptr && a.col_idx == self.col_idx
    }
}

/// `L B Lᵀ` factorization of a symmetric (possibly indefinite) matrix with
/// Bunch–Kaufman pivoting inside supernodes.
pub struct SymmetricFactorization {
    analysis: SymmetricAnalysis,
    values: Vec<f64>,
    subdiag: Vec<f64>,
    fwd: Vec<usize>,
    inv: Vec<usize>,
}

impl std::fmt::Debug for SymmetricFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymmetricFactorization").field("analysis", &self.analysis).finish()
    }
}

/// Factorizes a symmetric matrix; only its lower triangle is read.
pub fn factorize_symmetric(a: &SparseMatrix, analysis: Option<&SymmetricAnalysis>) -> Result<SymmetricFactorization> {
    let analysis = match analysis {
        Some(an) if an.matches(a) => an.clone(),
        Some(_) => return Err(Error::InvalidArgument("analysis belongs to a different pattern".into())),
        None => analyze_symmetric(a)?,
    };
    let n = a.n;
    let (col_ptr, row_idx, vals) = a.lower_csc();
    let pattern = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
    let mat = SparseColMat::new(pattern, vals);
    let sym = &*analysis.symbolic;
    let mut values = vec![0.0; sym.len_val()];
    let mut subdiag = vec![0.0; n];
    let mut fwd = vec![0usize; n];
    let mut inv = vec![0usize; n];
    let params = Default::default();
    let mut mem = MemBuffer::new(sym.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, params));
    sym.factorize_numeric_intranode_lblt(
        &mut values,
        &mut subdiag,
        &mut fwd,
        &mut inv,
        mat.as_ref(),
        Side::Lower,
        Par::Seq,
        MemStack::new(&mut mem),
        params,
    );
    if values.iter().chain(&subdiag).any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix { stage: 0, reason: "non-finite entry in symmetric factor".into() });
    }
    Ok(SymmetricFactorization { analysis, values, subdiag, fwd, inv })
}

impl SymmetricFactorization {
    pub fn dim(&self) -> usize {
        self.analysis.n
    }

    pub fn analysis(&self) -> &SymmetricAnalysis {
        &self.analysis
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let sym = &*self.analysis.symbolic;
        let perm = PermRef::new_checked(&self.fwd, &self.inv, n);
        let f = IntranodeLbltRef::new(sym, &self.values, &self.subdiag, perm);
        let mut x = Col::from_fn(n, |i| b[i]);
        let mut mem = MemBuffer::new(sym.solve_in_place_scratch::<f64>(1, Par::Seq));
        f.solve_in_place_with_conj(Conj::No, x.as_mat_mut(), Par::Seq, MemStack::new(&mut mem));
        finite_or_singular((0..n).map(|i| x[i]).collect())
    }
}

/// LU factorization with partial pivoting, reusable across right-hand sides.
pub struct Factorization {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    norm_inf: f64,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("n", &self.n).finish()
    }
}

pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let m = a.to_faer()?;
    let lu = m.sp_lu().map_err(|e| match e {
        LuError::SymbolicSingular { index } => Error::SingularMatrix {
            stage: index,
            reason: "no admissible pivot in column".into(),
        },
        LuError::Generic(g) => Error::SingularMatrix { stage: 0, reason: format!("{g:?}") },
    })?;
    let norm_inf = (0..n)
        .map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let f = Factorization { n, lu, norm_inf };
    // A zero pivot surfaces as non-finite output; probe once with a generic vector.
    let probe: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
    let x = f.solve_raw(&probe, false);
    if let Some(k) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix { stage: k, reason: "zero pivot in numeric factorization".into() });
    }
    Ok(f)
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Infinity norm of the factorized matrix.
    pub fn norm_inf(&self) -> f64 {
        self.norm_inf
    }

    fn solve_raw(&self, b: &[f64], transpose: bool) -> Vec<f64> {
        let mut x = Col::from_fn(self.n, |i| b[i]);
        let rhs: MatMut<'_, f64> = x.as_mat_mut();
        if transpose {
            self.lu.solve_transpose_in_place(rhs);
        } else {
            self.lu.solve_in_place(rhs);
        }
        (0..self.n).map(|i| x[i]).collect()
    }

    fn check(&self, b: &[f64]) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        Ok(())
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b)?;
        let x = self.solve_raw(b, false);
        finite_or_singular(x)
    }

    /// Solves `A^T x = b` with the same factors.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b)?;
        let x = self.solve_raw(b, true);
        finite_or_singular(x)
    }
}

fn finite_or_singular(x: Vec<f64>) -> Result<Vec<f64>> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::SingularMatrix { stage: k, reason: "non-finite solution entry".into() }),
        None => Ok(x),
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
