//! Minimal sparse symmetric positive-definite toolkit: CSR storage,
//! incomplete-Cholesky and Jacobi preconditioners, and conjugate gradients.
//! Everything is sequential and deterministic; solver tolerances are
//! relative residuals.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
/// Symmetric matrices store the full pattern.
#[derive(Clone, Debug)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Build from an adjacency list (sorted, deduplicated per row); values
    /// start at zero.
    pub fn from_adjacency(adj: &[Vec<u32>]) -> Csr {
        let n = adj.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0usize);
        let mut col_idx = Vec::new();
        for row in adj {
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Csr {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Add `v` at `(i, j)`; the entry must exist in the pattern.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        let row = &self.col_idx[lo..hi];
        let k = row
            .binary_search(&(j as u32))
            .expect("entry outside assembled sparsity pattern");
        self.values[lo + k] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] as usize == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }
}

/// Preconditioner interface: application of an SPD approximation of A^-1.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Diagonal (Jacobi) preconditioner.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &Csr) -> Jacobi {
        let inv_diag = a
            .diagonal()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        Jacobi { inv_diag }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for i in 0..r.len() {
            z[i] = r[i] * self.inv_diag[i];
        }
    }
}

/// Zero-fill incomplete Cholesky factor (pattern of the lower triangle of A).
pub struct IncompleteCholesky {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl IncompleteCholesky {
    /// Factor `A ~ L L^T` on the lower-triangular pattern of `A`. Returns
    /// `None` if a pivot loses positivity (caller falls back to Jacobi).
    pub fn new(a: &Csr) -> Option<IncompleteCholesky> {
        let n = a.n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx: Vec<u32> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        row_ptr.push(0usize);
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                if (a.col_idx[k] as usize) <= i {
                    col_idx.push(a.col_idx[k]);
                    values.push(a.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut diag_pos = vec![0usize; n];
        for i in 0..n {
            let last = row_ptr[i + 1] - 1;
            if col_idx[last] as usize != i {
                return None; // structurally missing diagonal
            }
            diag_pos[i] = last;
        }
        // Up-looking IC(0): row i of L from rows < i.
        for i in 0..n {
            let (ri0, ri1) = (row_ptr[i], row_ptr[i + 1]);
            for kk in ri0..ri1 {
                let j = col_idx[kk] as usize;
                // Sparse dot of L[i, :j] and L[j, :j].
                let mut s = values[kk];
                let mut p = ri0;
                let mut q = row_ptr[j];
                let pj_end = diag_pos[j];
                while p < kk && q < pj_end {
                    let cp = col_idx[p];
                    let cq = col_idx[q];
                    if cp == cq {
                        s -= values[p] * values[q];
                        p += 1;
                        q += 1;
                    } else if cp < cq {
                        p += 1;
                    } else {
                        q += 1;
                    }
                }
                if j < i {
                    values[kk] = s / values[diag_pos[j]];
                } else {
                    // Diagonal entry.
                    if s <= 0.0 {
                        return None;
                    }
                    values[kk] = s.sqrt();
                }
            }
        }
        Some(IncompleteCholesky {
            n,
            row_ptr,
            col_idx,
            values,
            diag_pos,
        })
    }
}

impl Preconditioner for IncompleteCholesky {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.n;
        // Forward solve L y = r (y stored in z).
        for i in 0..n {
            let mut s = r[i];
            for k in self.row_ptr[i]..self.diag_pos[i] {
                s -= self.values[k] * z[self.col_idx[k] as usize];
            }
            z[i] = s / self.values[self.diag_pos[i]];
        }
        // Backward solve L^T x = y, traversing columns in reverse.
        for i in (0..n).rev() {
            let zi = z[i] / self.values[self.diag_pos[i]];
            z[i] = zi;
            for k in self.row_ptr[i]..self.diag_pos[i] {
                z[self.col_idx[k] as usize] -= self.values[k] * zi;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients to relative residual `tol`.
/// Starts from `x` (warm start allowed). Deterministic.
pub fn pcg(
    a: &Csr,
    b: &[f64],
    x: &mut [f64],
    prec: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = a.n;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    prec.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let threshold = tol * b_norm;
    if norm(&r) <= threshold {
        return Ok(0);
    }
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolveFailure(format!(
                "PCG lost positive definiteness at iteration {it} (pAp = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= threshold {
            return Ok(it);
        }
        prec.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolveFailure(format!(
        "PCG stagnated: residual {:.3e} of {:.3e} after {max_iter} iterations",
        norm(&r),
        threshold
    )))
}

/// Factor-if-possible wrapper: IC(0) when it succeeds, Jacobi otherwise.
pub fn default_preconditioner(a: &Csr) -> Box<dyn Preconditioner + Send + Sync> {
    match IncompleteCholesky::new(a) {
        Some(ic) => Box::new(ic),
        None => Box::new(Jacobi::new(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// 1-d Laplacian with Dirichlet ends: tridiagonal (2, -1).
    fn laplacian_1d(n: usize) -> Csr {
        let adj: Vec<Vec<u32>> = (0..n)
            .map(|i| {
                let mut row = Vec::new();
                if i > 0 {
                    row.push((i - 1) as u32);
                }
                row.push(i as u32);
                if i + 1 < n {
                    row.push((i + 1) as u32);
                }
                row
            })
            .collect();
        let mut a = Csr::from_adjacency(&adj);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn pcg_solves_laplacian() {
        let n = 200;
        let a = laplacian_1d(n);
        // Exact solution of the (2,-1) tridiagonal with unit rhs: a parabola.
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let prec = Jacobi::new(&a);
        let iters = pcg(&a, &b, &mut x, &prec, 1e-12, 10 * n).unwrap();
        assert!(iters > 0);
        // u_i = (i+1)(n-i)/2 solves the discrete problem exactly.
        for i in 0..n {
            let exact = (i + 1) as f64 * (n - i) as f64 / 2.0;
            assert_relative_eq!(x[i], exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn ic0_agrees_with_jacobi() {
        let n = 300;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut x1 = vec![0.0; n];
        let mut x2 = vec![0.0; n];
        let jac = Jacobi::new(&a);
        let ic = IncompleteCholesky::new(&a).expect("IC(0) on SPD tridiagonal");
        let it_j = pcg(&a, &b, &mut x1, &jac, 1e-13, 10 * n).unwrap();
        let it_ic = pcg(&a, &b, &mut x2, &ic, 1e-13, 10 * n).unwrap();
        // IC(0) on a tridiagonal is an exact factorization: converges almost
        // immediately.
        assert!(it_ic < it_j);
        for i in 0..n {
            assert_relative_eq!(x1[i], x2[i], max_relative = 1e-7, epsilon = 1e-9);
        }
    }
}
