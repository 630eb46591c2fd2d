//! Minimal sparse linear algebra: triplet assembly, CSR storage, a
//! preconditioned conjugate gradient and coordinate-format text export.

use std::io::Write;

use crate::Result;

/// Triplet (assembly) form. Duplicate entries are summed on conversion.
#[derive(Clone, Debug)]
pub struct Coo {
    nrows: usize,
    ncols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl Coo {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Coo { nrows, ncols, triplets: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            self.triplets.push((i, j, v));
        }
    }

    pub fn to_csr(&self) -> Csr {
        let mut t = self.triplets.clone();
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices: Vec<usize> = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut prev: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if prev == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] = indices.len();
                prev = Some((i, j));
            }
        }
        for i in 1..=self.nrows {
            indptr[i] = indptr[i].max(indptr[i - 1]);
        }
        Csr { nrows: self.nrows, ncols: self.ncols, indptr, indices, values }
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    /// `y += s * A' x`.
    pub fn matvec_transpose_add(&self, x: &[f64], s: f64, y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for i in 0..self.nrows {
            let xi = s * x[i];
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut row = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                row += v * x[j];
            }
            acc += x[i] * row;
        }
        acc
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `max_i sum_j |a_ij|`.
    pub fn inf_norm(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[i][j] = v;
            }
        }
        d
    }

    /// Keeps the listed rows (in order); used for restricting constraint sets.
    pub fn select_rows(&self, rows: &[usize]) -> Csr {
        let mut coo = Coo::new(rows.len(), self.ncols);
        for (new_i, &i) in rows.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                coo.push(new_i, j, v);
            }
        }
        coo.to_csr()
    }

    /// Keeps the listed columns (mapped to 0..k in order). Entries in other
    /// columns are dropped; the caller accounts for them separately.
    pub fn select_cols(&self, col_map: &[Option<usize>], new_ncols: usize) -> Csr {
        let mut coo = Coo::new(self.nrows, new_ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if let Some(nj) = col_map[j] {
                    coo.push(i, nj, v);
                }
            }
        }
        coo.to_csr()
    }

    /// Coordinate-format text: one `i j value` line per entry, row-major.
    pub fn write_coordinate_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.16e}", i, j, v)?;
            }
        }
        Ok(())
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Copy, Debug)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradient for an SPD operator given matrix-free.
///
/// `apply(x, y)` computes `y = A x`; `precond_diag` is the Jacobi diagonal
/// (entries clamped away from zero by the caller). Iterates on `x` in place,
/// starting from its current content.
pub fn cg_solve<F>(
    mut apply: F,
    b: &[f64],
    x: &mut [f64],
    precond_diag: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_iter: usize,
) -> CgOutcome
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = (rel_tol * b_norm).max(abs_tol);

    for i in 0..n {
        z[i] = r[i] / precond_diag[i];
    }
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    p.copy_from_slice(&z);

    let mut res_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if res_norm <= target {
        return CgOutcome { iterations: 0, residual_norm: res_norm, converged: true };
    }

    for k in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            // loss of positive definiteness (round-off); return best iterate
            return CgOutcome { iterations: k, residual_norm: res_norm, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res_norm <= target {
            return CgOutcome { iterations: k + 1, residual_norm: res_norm, converged: true };
        }
        for i in 0..n {
            z[i] = r[i] / precond_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome { iterations: max_iter, residual_norm: res_norm, converged: false }
}
