//! Small dense complex linear-algebra helpers shared by the solvers.
//!
//! Matrix norms follow the convention used throughout the crate: `opnorm`
//! is the largest singular value.

use crate::{CMat, CVec, Cx};

/// Largest singular value.
pub fn opnorm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let svd = a.clone().svd(false, false);
    svd.singular_values.max()
}

/// Smallest singular value.
pub fn sigma_min(a: &CMat) -> f64 {
    let svd = a.clone().svd(false, false);
    svd.singular_values.min()
}

/// All singular values, descending.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let svd = a.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Operator-norm distance of `a` from its own adjoint.
pub fn hermitian_defect(a: &CMat) -> f64 {
    opnorm(&(a - a.adjoint()))
}

/// Hermitian part `(a + a*) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Cx::new(0.5, 0.0)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn lambda_min_hermitian(a: &CMat) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(a));
    eig.eigenvalues.min()
}

/// Inverse square root of a Hermitian positive definite matrix.
pub fn inv_sqrt_hermitian(a: &CMat) -> crate::Result<CMat> {
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(a));
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        return Err(crate::Error::invalid(format!(
            "matrix is not positive definite (smallest eigenvalue {min:.3e})"
        )));
    }
    let n = a.nrows();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = Cx::new(1.0 / eig.eigenvalues[i].sqrt(), 0.0);
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// Orthonormal basis of the numerical kernel: right singular vectors whose
/// singular values fall below `tol`.
pub fn kernel_basis(a: &CMat, tol: f64) -> Vec<CVec> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut out = Vec::new();
    for (j, s) in svd.singular_values.iter().enumerate() {
        if *s < tol {
            out.push(v_t.row(j).adjoint());
        }
    }
    out
}

/// Column-sum norm of a square matrix.
pub fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense LU factorization with partial pivoting that keeps enough state to
/// solve with the matrix and with its adjoint, which the 1-norm condition
/// estimator needs.
pub struct PivotedLu {
    n: usize,
    lu: CMat,
    perm: Vec<usize>,
    singular: bool,
}

impl PivotedLu {
    pub fn new(a: CMat) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU requires a square matrix");
        let mut lu = a;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in (k + 1)..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    let upd = lu[(k, j)] * factor;
                    lu[(i, j)] -= upd;
                }
            }
        }
        PivotedLu {
            n,
            lu,
            perm,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solve `A X = B` in place (column-wise).
    pub fn solve_in_place(&self, b: &mut CMat) {
        assert_eq!(b.nrows(), self.n);
        for c in 0..b.ncols() {
            // apply the row permutation
            let mut col: Vec<Cx> = (0..self.n).map(|i| b[(i, c)]).collect();
            let mut y = vec![Cx::new(0.0, 0.0); self.n];
            for i in 0..self.n {
                y[i] = col[self.perm_source(i)];
            }
            col.copy_from_slice(&y);
            // forward substitution with unit lower triangle
            for i in 1..self.n {
                let mut acc = col[i];
                for j in 0..i {
                    acc -= self.lu[(i, j)] * col[j];
                }
                col[i] = acc;
            }
            // back substitution
            for i in (0..self.n).rev() {
                let mut acc = col[i];
                for j in (i + 1)..self.n {
                    acc -= self.lu[(i, j)] * col[j];
                }
                col[i] = acc / self.lu[(i, i)];
            }
            for i in 0..self.n {
                b[(i, c)] = col[i];
            }
        }
    }

    /// Solve `A* X = B` in place using the same factors.
    pub fn solve_adjoint_in_place(&self, b: &mut CMat) {
        assert_eq!(b.nrows(), self.n);
        // A = P^T L U  =>  A* = U* L* P, so solve U* w = b, L* z = w, x = P^T z.
        for c in 0..b.ncols() {
            let mut col: Vec<Cx> = (0..self.n).map(|i| b[(i, c)]).collect();
            // U* is lower triangular
            for i in 0..self.n {
                let mut acc = col[i];
                for j in 0..i {
                    acc -= self.lu[(j, i)].conj() * col[j];
                }
                col[i] = acc / self.lu[(i, i)].conj();
            }
            // L* is unit upper triangular
            for i in (0..self.n).rev() {
                let mut acc = col[i];
                for j in (i + 1)..self.n {
                    acc -= self.lu[(j, i)].conj() * col[j];
                }
                col[i] = acc;
            }
            for i in 0..self.n {
                b[(self.perm_source(i), c)] = col[i];
            }
        }
    }

    fn perm_source(&self, row: usize) -> usize {
        self.perm[row]
    }

    /// Hager-style estimate of the 1-norm condition number, given the
    /// 1-norm of the original matrix.
    pub fn condition_estimate(&self, a_norm1: f64) -> f64 {
        if self.singular {
            return f64::INFINITY;
        }
        let n = self.n;
        let mut x = CMat::from_element(n, 1, Cx::new(1.0 / n as f64, 0.0));
        let mut est = 0.0_f64;
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            let y_norm1: f64 = y.iter().map(|z| z.norm()).sum();
            est = est.max(y_norm1);
            let mut xi = CMat::from_fn(n, 1, |i, _| {
                let v = y[(i, 0)];
                if v.norm() == 0.0 {
                    Cx::new(1.0, 0.0)
                } else {
                    v / v.norm()
                }
            });
            self.solve_adjoint_in_place(&mut xi);
            let (jmax, zmax) = (0..n)
                .map(|i| (i, xi[(i, 0)].norm()))
                .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            let zx: f64 = (0..n)
                .map(|i| (xi[(i, 0)].conj() * x[(i, 0)]).re)
                .sum();
            if zmax <= zx {
                break;
            }
            x = CMat::zeros(n, 1);
            x[(jmax, 0)] = Cx::new(1.0, 0.0);
        }
        a_norm1 * est
    }
}

/// Composite trapezoid rule over a uniform grid for scalar samples.
pub fn trapezoid_scalar(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    step * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}

/// Composite trapezoid rule for matrix samples on a uniform grid.
pub fn trapezoid_matrix(values: &[CMat], step: f64) -> CMat {
    assert!(values.len() >= 2);
    let mut acc = (&values[0] + &values[values.len() - 1]) * Cx::new(0.5, 0.0);
    for v in &values[1..values.len() - 1] {
        acc += v;
    }
    acc * Cx::new(step, 0.0)
}

/// Cumulative trapezoid antiderivative sampled on the same grid, starting
/// from the supplied value at the first node.
pub fn cumulative_trapezoid(values: &[CMat], step: f64, start: CMat) -> Vec<CMat> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = start;
    out.push(acc.clone());
    for w in values.windows(2) {
        acc += (&w[0] + &w[1]) * Cx::new(0.5 * step, 0.0);
        out.push(acc.clone());
    }
    out
}
