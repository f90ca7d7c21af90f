//! Dense Cholesky factorization with adaptive jitter, and triangular solves.
//!
//! The factorization is the numerical backbone of every surrogate: kernel
//! matrices are positive definite only up to round-off, so a failed
//! factorization escalates a diagonal jitter through the ladder
//! `{0, base, 10*base, ..., max}` until it succeeds.

use ndarray::{Array1, Array2};

use crate::error::{GnboError, Result};

/// Plain lower Cholesky (dot-product form). Returns `None` when the matrix is
/// not numerically positive definite.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = vec![0.0f64; n * n];
    let src = a.as_slice().expect("row-major matrix");
    for j in 0..n {
        let (head, tail) = l.split_at_mut(j * n + j);
        let rowj = &head[j * n..];
        let mut d = src[j * n + j] - rowj.iter().map(|v| v * v).sum::<f64>();
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        d = d.sqrt();
        tail[0] = d;
        for i in (j + 1)..n {
            let (left, right) = l.split_at_mut(i * n);
            let rowj = &left[j * n..j * n + j];
            let rowi = &right[..j];
            let dot: f64 = rowi.iter().zip(rowj).map(|(a, b)| a * b).sum();
            right[j] = (src[i * n + j] - dot) / d;
        }
    }
    Some(Array2::from_shape_vec((n, n), l).expect("shape"))
}

/// Cholesky with the adaptive jitter ladder from `base_jitter` to
/// `max_jitter`. Returns the factor and the jitter that was actually added.
///
/// The ladder is `{0, base, 10*base, ...}` capped at `max_jitter`; the
/// smallest entry that factorizes wins.
pub fn adaptive_cholesky(
    k: &Array2<f64>,
    base_jitter: f64,
    max_jitter: f64,
) -> Result<(Array2<f64>, f64)> {
    debug_assert!(base_jitter > 0.0 && base_jitter <= max_jitter);
    let n = k.nrows();
    let mut jitter = 0.0f64;
    loop {
        let trial = if jitter == 0.0 {
            cholesky(k)
        } else {
            let mut kj = k.clone();
            for i in 0..n {
                kj[[i, i]] += jitter;
            }
            cholesky(&kj)
        };
        if let Some(l) = trial {
            return Ok((l, jitter));
        }
        if jitter == 0.0 {
            jitter = base_jitter;
        } else if jitter >= max_jitter {
            return Err(GnboError::FactorizationFailed { max_jitter });
        } else {
            jitter = (jitter * 10.0).min(max_jitter);
        }
    }
}

/// Solve `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let ls = l.as_slice().expect("row-major");
    let mut x = b.to_vec();
    for i in 0..n {
        let row = &ls[i * n..i * n + i];
        let dot: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - dot) / ls[i * n + i];
    }
    Array1::from_vec(x)
}

/// Solve `L^T x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let ls = l.as_slice().expect("row-major");
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= ls[j * n + i] * x[j];
        }
        x[i] = s / ls[i * n + i];
    }
    Array1::from_vec(x)
}

/// Solve `(L L^T) x = b`.
pub fn solve_spd(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// Forward-substitute `L V = B` column-by-column for an `n x m` right-hand
/// side, overwriting `B` in place (used for joint posterior covariance).
pub fn solve_lower_multi(l: &Array2<f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    let m = b.ncols();
    let ls = l.as_slice().expect("row-major");
    // Row-oriented forward substitution keeps the RHS accesses contiguous.
    for i in 0..n {
        let (done, mut rest) = b.view_mut().split_at(ndarray::Axis(0), i);
        let mut rowi = rest.row_mut(0);
        for j in 0..i {
            let lij = ls[i * n + j];
            if lij != 0.0 {
                let rowj = done.row(j);
                let (ri, rj) = (rowi.as_slice_mut().unwrap(), rowj.as_slice().unwrap());
                for c in 0..m {
                    ri[c] -= lij * rj[c];
                }
            }
        }
        let inv = 1.0 / ls[i * n + i];
        rowi.mapv_inplace(|v| v * inv);
    }
}
