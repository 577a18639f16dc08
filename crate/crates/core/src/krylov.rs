//! Lanczos ground states and Krylov propagation `exp(-i dt H) v` for any
//! vector type with an inner product.

use faer::{Mat, Side};
use symtensor::{SymTensor, C64};

use crate::error::{Error, Result};

pub trait KrylovVec: Clone {
    /// `⟨self, other⟩`, antilinear in `self`.
    fn dot(&self, other: &Self) -> C64;
    /// `self += a * x`.
    fn axpy(&mut self, a: C64, x: &Self);
    fn scale(&mut self, a: C64);

    fn norm(&self) -> f64 {
        self.dot(self).re.max(0.0).sqrt()
    }
}

impl KrylovVec for Vec<C64> {
    fn dot(&self, other: &Self) -> C64 {
        self.iter().zip(other).map(|(a, b)| a.conj() * b).sum()
    }

    fn axpy(&mut self, a: C64, x: &Self) {
        for (y, v) in self.iter_mut().zip(x) {
            *y += a * v;
        }
    }

    fn scale(&mut self, a: C64) {
        for y in self.iter_mut() {
            *y *= a;
        }
    }
}

impl KrylovVec for SymTensor {
    fn dot(&self, other: &Self) -> C64 {
        self.inner(other).expect("Krylov vectors share structure")
    }

    fn axpy(&mut self, a: C64, x: &Self) {
        SymTensor::axpy(self, a, x).expect("Krylov vectors share structure")
    }

    fn scale(&mut self, a: C64) {
        self.scale_mut(a)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOpts {
    /// Krylov dimension before a restart.
    pub max_krylov: usize,
    pub max_restarts: usize,
    /// Target residual `‖Hv - Ev‖`.
    pub tol: f64,
}

impl Default for LanczosOpts {
    fn default() -> Self {
        Self {
            max_krylov: 40,
            max_restarts: 50,
            tol: 1e-10,
        }
    }
}

/// Eigen-decomposition of a real symmetric tridiagonal matrix, returned as
/// ascending eigenvalues and row-major eigenvectors (columns).
fn tridiag_eigh(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let dec = t.self_adjoint_eigen(Side::Lower).expect("tridiagonal eigensolver");
    let vals = (0..m).map(|i| dec.S().column_vector()[i]).collect();
    let u = dec.U();
    let mut vecs = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            vecs[i * m + j] = u[(i, j)];
        }
    }
    (vals, vecs)
}

fn project_out<V: KrylovVec>(v: &mut V, basis: &[V]) {
    for b in basis {
        let c = b.dot(v);
        v.axpy(-c, b);
    }
}

/// Lowest eigenpair of the Hermitian map `apply`, starting from `v0` and kept
/// orthogonal to `deflate` (which must be orthonormal).
///
/// Returns the eigenvalue, the normalized eigenvector and the final residual.
pub fn lanczos_ground<V: KrylovVec>(
    apply: impl FnMut(&V) -> V,
    v0: &V,
    deflate: &[V],
    opts: LanczosOpts,
) -> Result<(f64, V, f64)> {
    let (e, v, r) = lanczos_best(apply, v0, deflate, opts)?;
    if r < opts.tol * 10.0 {
        return Ok((e, v, r));
    }
    Err(Error::Convergence {
        what: "Lanczos eigensolver".into(),
        metric: r,
    })
}

/// Like [`lanczos_ground`] but returns the best Ritz pair found within the
/// iteration budget together with its true residual, converged or not.
pub fn lanczos_best<V: KrylovVec>(
    mut apply: impl FnMut(&V) -> V,
    v0: &V,
    deflate: &[V],
    opts: LanczosOpts,
) -> Result<(f64, V, f64)> {
    let mut v = v0.clone();
    project_out(&mut v, deflate);
    let n0 = v.norm();
    if n0 == 0.0 {
        return Err(Error::Numerical("Lanczos start vector is zero".into()));
    }
    v.scale(C64::new(1.0 / n0, 0.0));
    let mut energy = f64::NAN;
    let mut residual;
    for _ in 0..opts.max_restarts {
        let mut basis: Vec<V> = vec![v.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let k = basis.len() - 1;
            let mut w = apply(&basis[k]);
            project_out(&mut w, deflate);
            let a = basis[k].dot(&w).re;
            alpha.push(a);
            // full reorthogonalization, twice for stability
            project_out(&mut w, &basis);
            project_out(&mut w, &basis);
            let b = w.norm();
            let (vals, vecs) = tridiag_eigh(&alpha, &beta);
            let m = alpha.len();
            residual = b * vecs[(m - 1) * m].abs();
            energy = vals[0];
            let scale_ref = vals.iter().fold(1.0f64, |s, x| s.max(x.abs()));
            if residual < opts.tol || b < 1e-14 * scale_ref || m >= opts.max_krylov {
                // Ritz vector of the lowest value
                let mut ritz = basis[0].clone();
                ritz.scale(C64::new(vecs[0], 0.0));
                for (i, bv) in basis.iter().enumerate().skip(1) {
                    ritz.axpy(C64::new(vecs[i * m], 0.0), bv);
                }
                project_out(&mut ritz, deflate);
                let nr = ritz.norm();
                ritz.scale(C64::new(1.0 / nr, 0.0));
                v = ritz;
                if b < 1e-14 * scale_ref {
                    residual = 0.0;
                }
                break;
            }
            beta.push(b);
            w.scale(C64::new(1.0 / b, 0.0));
            basis.push(w);
        }
        if residual < opts.tol {
            return Ok((energy, v, residual));
        }
    }
    // true residual of the final Ritz vector
    let mut hv = apply(&v);
    project_out(&mut hv, deflate);
    hv.axpy(C64::new(-energy, 0.0), &v);
    Ok((energy, v, hv.norm()))
}

/// `exp(-i dt H) v` for Hermitian `H` given by `apply`.
///
/// The Krylov space grows until the a-posteriori error estimate drops below
/// `tol · ‖v‖`; if `max_krylov` is reached first the interval is split in two.
pub fn expm_krylov<V: KrylovVec>(mut apply: impl FnMut(&V) -> V, v: &V, dt: f64, tol: f64, max_krylov: usize) -> V {
    expm_inner(&mut apply, v, dt, tol, max_krylov, 0)
}

fn expm_inner<V: KrylovVec>(apply: &mut impl FnMut(&V) -> V, v: &V, dt: f64, tol: f64, max_krylov: usize, depth: usize) -> V {
    let nv = v.norm();
    if nv == 0.0 || dt == 0.0 {
        return v.clone();
    }
    let mut q0 = v.clone();
    q0.scale(C64::new(1.0 / nv, 0.0));
    let mut basis = vec![q0];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    loop {
        let k = basis.len() - 1;
        let mut w = apply(&basis[k]);
        let a = basis[k].dot(&w).re;
        alpha.push(a);
        project_out(&mut w, &basis);
        project_out(&mut w, &basis);
        let b = w.norm();
        let m = alpha.len();
        let (vals, vecs) = tridiag_eigh(&alpha, &beta);
        // c = exp(-i dt T) e_0
        let mut c = vec![C64::new(0.0, 0.0); m];
        for (j, &lam) in vals.iter().enumerate() {
            let ph = C64::from_polar(vecs[j], -dt * lam);
            for i in 0..m {
                c[i] += ph * vecs[i * m + j];
            }
        }
        let err = b * c[m - 1].norm();
        let exhausted = b <= 1e-13 * vals.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        if err < tol || exhausted {
            let mut out = basis[0].clone();
            out.scale(c[0] * nv);
            for (i, bv) in basis.iter().enumerate().skip(1) {
                out.axpy(c[i] * nv, bv);
            }
            return out;
        }
        if m >= max_krylov {
            assert!(depth < 30, "Krylov propagation failed to converge");
            let half = expm_inner(apply, v, 0.5 * dt, tol, max_krylov, depth + 1);
            return expm_inner(apply, &half, 0.5 * dt, tol, max_krylov, depth + 1);
        }
        beta.push(b);
        w.scale(C64::new(1.0 / b, 0.0));
        basis.push(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut h = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i..n {
                let x = C64::new(rng.gen_range(-1.0..1.0), if i == j { 0.0 } else { rng.gen_range(-1.0..1.0) });
                h[i * n + j] = x;
                h[j * n + i] = x.conj();
            }
        }
        h
    }

    fn matvec(h: &[C64], v: &Vec<C64>) -> Vec<C64> {
        let n = v.len();
        (0..n).map(|i| (0..n).map(|j| h[i * n + j] * v[j]).sum()).collect()
    }

    fn dense_eig(h: &[C64], n: usize) -> (Vec<f64>, Mat<C64>) {
        let m = Mat::<C64>::from_fn(n, n, |i, j| h[i * n + j]);
        let d = m.self_adjoint_eigen(Side::Lower).unwrap();
        ((0..n).map(|i| d.S().column_vector()[i].re).collect(), d.U().to_owned())
    }

    #[test]
    fn ground_state_matches_dense() {
        let n = 60;
        let h = random_hermitian(n, 1);
        let (vals, _) = dense_eig(&h, n);
        let v0: Vec<C64> = (0..n).map(|i| C64::new(1.0 + i as f64 * 0.01, 0.0)).collect();
        let (e, v, r) = lanczos_ground(|x| matvec(&h, x), &v0, &[], LanczosOpts::default()).unwrap();
        assert!((e - vals[0]).abs() < 1e-10);
        assert!(r < 1e-9);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        let (e1, _, _) = lanczos_ground(|x| matvec(&h, x), &v0, &[v], LanczosOpts::default()).unwrap();
        assert!((e1 - vals[1]).abs() < 1e-9);
    }

    #[test]
    fn propagator_matches_dense() {
        let n = 40;
        let h = random_hermitian(n, 2);
        let (vals, u) = dense_eig(&h, n);
        let v: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let dt = 0.7;
        let got = expm_krylov(|x| matvec(&h, x), &v, dt, 1e-13, 30);
        // dense: U exp(-i dt Λ) U† v
        let mut want = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let ck: C64 = (0..n).map(|j| u[(j, k)].conj() * v[j]).sum::<C64>() * C64::from_polar(1.0, -dt * vals[k]);
            for i in 0..n {
                want[i] += u[(i, k)] * ck;
            }
        }
        let err: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-10, "err {err}");
        // a tiny Krylov limit forces interval splitting and must still agree
        let split = expm_krylov(|x| matvec(&h, x), &v, dt, 1e-13, 6);
        let err2: f64 = split.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err2 < 1e-9, "err {err2}");
    }
}
