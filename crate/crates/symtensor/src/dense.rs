//! Row-major dense kernels used inside blocks. Everything here runs
//! sequentially; block-level results never depend on thread scheduling.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};

use crate::error::{Result, TensorError};
use crate::C64;

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Transposes a row-major array so that output axis `k` is input axis `perm[k]`.
pub(crate) fn permute(data: &[C64], shape: &[usize], perm: &[usize]) -> Vec<C64> {
    let rank = shape.len();
    if perm.iter().enumerate().all(|(i, &p)| i == p) || data.len() <= 1 {
        return data.to_vec();
    }
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let step: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = Vec::with_capacity(data.len());
    let last = rank - 1;
    let n_last = out_shape[last];
    let s_last = step[last];
    let mut idx = vec![0usize; rank];
    let mut base = 0usize;
    loop {
        let mut off = base;
        for _ in 0..n_last {
            out.push(data[off]);
            off += s_last;
        }
        // advance the odometer over all but the last axis
        let mut ax = last;
        loop {
            if ax == 0 {
                return out;
            }
            ax -= 1;
            idx[ax] += 1;
            base += step[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            base -= step[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
}

/// Writes `src` (shape `box_shape`) into `dst` (shape `dst_shape`) at `offsets`.
pub(crate) fn write_box(dst: &mut [C64], dst_shape: &[usize], offsets: &[usize], src: &[C64], box_shape: &[usize]) {
    box_walk(dst_shape, offsets, box_shape, |d, s, n| {
        dst[d..d + n].copy_from_slice(&src[s..s + n]);
    });
}

/// Reads the sub-array of `src` (shape `src_shape`) at `offsets` with shape `box_shape`.
pub(crate) fn read_box(src: &[C64], src_shape: &[usize], offsets: &[usize], box_shape: &[usize]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); box_shape.iter().product()];
    box_walk(src_shape, offsets, box_shape, |big, small, n| {
        out[small..small + n].copy_from_slice(&src[big..big + n]);
    });
    out
}

fn box_walk(big_shape: &[usize], offsets: &[usize], box_shape: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let rank = big_shape.len();
    if box_shape.iter().any(|&d| d == 0) {
        return;
    }
    if rank == 0 {
        f(0, 0, 1);
        return;
    }
    let bs = strides(big_shape);
    let last = rank - 1;
    let n = box_shape[last];
    let mut idx = vec![0usize; rank];
    let mut small = 0usize;
    loop {
        let big: usize = (0..rank).map(|a| (offsets[a] + idx[a]) * bs[a]).sum();
        f(big, small, n);
        small += n;
        let mut ax = last;
        loop {
            if ax == 0 {
                return;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < box_shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}

/// `out (m×n) += a (m×k) · b (k×n)`, all row-major.
pub(crate) fn gemm_acc(out: &mut [C64], a: &[C64], b: &[C64], m: usize, k: usize, n: usize) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let lhs = MatRef::from_row_major_slice(a, m, k);
    let rhs = MatRef::from_row_major_slice(b, k, n);
    let dst = MatMut::from_row_major_slice_mut(out, m, n);
    matmul(dst, Accum::Add, lhs, rhs, C64::new(1.0, 0.0), Par::Seq);
}

fn to_mat(data: &[C64], m: usize, n: usize) -> Mat<C64> {
    Mat::from_fn(m, n, |i, j| data[i * n + j])
}

fn from_mat(mat: MatRef<'_, C64>) -> Vec<C64> {
    let (m, n) = (mat.nrows(), mat.ncols());
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            out.push(mat[(i, j)]);
        }
    }
    out
}

/// Thin SVD `a = u · diag(s) · v` with `u: m×k`, `v: k×n`, `k = min(m, n)`,
/// singular values in nonincreasing order.
pub(crate) fn svd(a: &[C64], m: usize, n: usize) -> Result<(Vec<C64>, Vec<f64>, Vec<C64>)> {
    let mat = to_mat(a, m, n);
    let dec = mat.thin_svd().map_err(|e| TensorError::Linalg(format!("svd: {e:?}")))?;
    let k = m.min(n);
    let u = from_mat(dec.U());
    let s: Vec<f64> = (0..k).map(|i| dec.S().column_vector()[i].re.max(0.0)).collect();
    let vmat = dec.V();
    let mut v = Vec::with_capacity(k * n);
    for i in 0..k {
        for j in 0..n {
            v.push(vmat[(j, i)].conj());
        }
    }
    Ok((u, s, v))
}

/// Thin QR `a = q · r` with `q: m×k`, `r: k×n`, `k = min(m, n)`.
pub(crate) fn qr(a: &[C64], m: usize, n: usize) -> (Vec<C64>, Vec<C64>) {
    let mat = to_mat(a, m, n);
    let dec = mat.qr();
    let q = from_mat(dec.compute_thin_Q().as_ref());
    let r = from_mat(dec.thin_R());
    (q, r)
}

/// Eigendecomposition of a Hermitian `n×n` matrix: ascending eigenvalues and
/// eigenvectors as the columns of a row-major `n×n` array.
pub(crate) fn eigh(a: &[C64], n: usize) -> Result<(Vec<f64>, Vec<C64>)> {
    let mat = Mat::from_fn(n, n, |i, j| (a[i * n + j] + a[j * n + i].conj()) * 0.5);
    let dec = mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| TensorError::Linalg(format!("eigh: {e:?}")))?;
    let vals = (0..n).map(|i| dec.S().column_vector()[i].re).collect();
    Ok((vals, from_mat(dec.U())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn permute_matches_index_formula() {
        let shape = [2, 3, 4];
        let data: Vec<C64> = (0..24).map(|i| c(i as f64)).collect();
        let perm = [2, 0, 1];
        let out = permute(&data, &shape, &perm);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    let src = data[i * 12 + j * 4 + k];
                    let dst = out[k * 6 + i * 3 + j];
                    assert_eq!(src, dst);
                }
            }
        }
    }

    #[test]
    fn box_round_trip() {
        let big_shape = [3, 4];
        let mut big = vec![c(0.0); 12];
        let small: Vec<C64> = (1..=4).map(|i| c(i as f64)).collect();
        write_box(&mut big, &big_shape, &[1, 2], &small, &[2, 2]);
        assert_eq!(big[6], c(1.0));
        assert_eq!(big[7], c(2.0));
        assert_eq!(big[10], c(3.0));
        assert_eq!(big[11], c(4.0));
        assert_eq!(read_box(&big, &big_shape, &[1, 2], &[2, 2]), small);
    }

    #[test]
    fn gemm_small() {
        let a = vec![c(1.0), c(2.0), c(3.0), c(4.0)];
        let b = vec![c(5.0), c(6.0), c(7.0), c(8.0)];
        let mut out = vec![c(1.0); 4];
        gemm_acc(&mut out, &a, &b, 2, 2, 2);
        assert_eq!(out, vec![c(20.0), c(23.0), c(44.0), c(51.0)]);
    }

    #[test]
    fn svd_reconstructs() {
        let a: Vec<C64> = (0..6).map(|i| C64::new(i as f64 * 0.3 - 1.0, (i * i) as f64 * 0.1)).collect();
        let (u, s, v) = svd(&a, 2, 3).unwrap();
        assert!(s[0] >= s[1]);
        for i in 0..2 {
            for j in 0..3 {
                let x: C64 = (0..2).map(|k| u[i * 2 + k] * s[k] * v[k * 3 + j]).sum();
                assert!((x - a[i * 3 + j]).norm() < 1e-12);
            }
        }
    }
}
