//! Compressed sparse rows and a Jacobi-preconditioned conjugate gradient.

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Builds from per-row `(col, value)` lists, summing duplicates and keeping
    /// columns sorted.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Csr { nrows, ncols, indptr, indices, data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.indptr[i]..self.indptr[i + 1] {
            s += self.data[k] * x[self.indices[k]];
        }
        s
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            *yi = self.row_dot(i, x);
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).find(|&(c, _)| c == i).map(|(_, v)| v).unwrap_or(0.0))
            .collect()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let t = self.row(j).find(|&(c, _)| c == i).map(|(_, w)| w).unwrap_or(0.0);
                worst = worst.max((v - t).abs());
            }
        }
        worst
    }

    /// Splits rows `rows` into the block on columns `keep` (renumbered through
    /// `local`) and the block on every other column (original numbering).
    pub fn split(&self, rows: &[usize], local: &[usize]) -> (Csr, Csr) {
        let mut inner = Vec::with_capacity(rows.len());
        let mut outer = Vec::with_capacity(rows.len());
        for &r in rows {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (c, v) in self.row(r) {
                match local[c] {
                    usize::MAX => b.push((c, v)),
                    lc => a.push((lc, v)),
                }
            }
            inner.push(a);
            outer.push(b);
        }
        (Csr::from_rows(rows.len(), inner), Csr::from_rows(self.ncols, outer))
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(A + diag(shift)) x = b` for SPD `A` with Jacobi preconditioning,
/// starting from the contents of `x`. Converged when `‖r‖ ≤ tol ‖b‖`.
pub fn pcg(a: &Csr, shift: Option<&[f64]>, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        a.matvec(v, out);
        if let Some(s) = shift {
            for i in 0..n {
                out[i] += s[i] * v[i];
            }
        }
    };
    let mut inv_diag = a.diagonal();
    for i in 0..n {
        let d = inv_diag[i] + shift.map(|s| s[i]).unwrap_or(0.0);
        inv_diag[i] = if d > 0.0 { 1.0 / d } else { 1.0 };
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if rel <= tol {
            return Ok(CgStats { iterations: it, relative_residual: rel });
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::LinearSolve { iterations: it, residual: rel, history });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        // recompute the true residual now and then to avoid drift at tight tolerances
        if it % 200 == 199 {
            apply(x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        history.push(rel);
        if history.len() > 8 {
            history.remove(0);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rel <= tol {
        return Ok(CgStats { iterations: max_iter, relative_residual: rel });
    }
    Err(Error::LinearSolve { iterations: max_iter, residual: rel, history })
}
