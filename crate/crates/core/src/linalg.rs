//! Small dense solvers used by the baseline fit and the natural-gradient step,
//! plus a bounds-checked strided matrix product.

use crate::error::{Error, Result};
use crate::scalar::{all_finite, axpy, dot, Scalar};

/// Solves `A x = b` for symmetric positive definite `A` (row-major, `n × n`)
/// by Cholesky factorization. Returns `None` if `A` is not numerically SPD.
pub fn cholesky_solve<S: Scalar>(a: &[S], b: &[S]) -> Option<Vec<S>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![S::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > S::zero()) {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let s = b[i] - dot(&l[i * n..i * n + i], &y[..i]);
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Conjugate gradient for `A x = g` where `A` is only available through
/// matrix-vector products. Stops when the residual norm drops to `tolerance`
/// or after `iterations` steps.
pub fn conjugate_gradient<S: Scalar>(
    mut matvec: impl FnMut(&[S]) -> Result<Vec<S>>,
    g: &[S],
    iterations: usize,
    tolerance: S,
) -> Result<Vec<S>> {
    let n = g.len();
    let mut x = vec![S::zero(); n];
    let mut r = g.to_vec();
    let mut p = g.to_vec();
    let mut rr = dot(&r, &r);
    if !rr.is_finite() {
        return Err(Error::NonFinite("conjugate gradient input"));
    }
    for _ in 0..iterations {
        if rr.sqrt() <= tolerance {
            break;
        }
        let ap = matvec(&p)?;
        let pap = dot(&p, &ap);
        if !(pap.is_finite() && pap > S::zero()) {
            return Err(Error::NonFinite("conjugate gradient curvature"));
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = *ri + beta * *pi;
        }
        rr = rr_next;
    }
    if !all_finite(&x) {
        return Err(Error::NonFinite("conjugate gradient solution"));
    }
    Ok(x)
}

/// Read-only strided view of a dense matrix.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MatRef<'a, S> {
    data: &'a [S],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a, S> MatRef<'a, S> {
    pub(crate) fn row_major(data: &'a [S], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            rs: cols,
            cs: 1,
        }
    }

    pub(crate) fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    fn in_bounds(&self) -> bool {
        self.rows == 0 || self.cols == 0 || (self.rows - 1) * self.rs + (self.cols - 1) * self.cs < self.data.len()
    }
}

/// `C ← A·B + β·C` with `C` row-major of shape `A.rows × B.cols`.
pub(crate) fn gemm<S: Scalar>(a: MatRef<'_, S>, b: MatRef<'_, S>, beta: S, c: &mut [S]) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(k, b.rows, "gemm inner dimension");
    assert_eq!(c.len(), m * n, "gemm output size");
    assert!(a.in_bounds() && b.in_bounds(), "gemm view out of bounds");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // SAFETY: all three views were bounds-checked above and `c` is a unique
    // borrow, so it cannot alias the shared inputs.
    unsafe {
        S::gemm_raw(
            m,
            k,
            n,
            S::one(),
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}
