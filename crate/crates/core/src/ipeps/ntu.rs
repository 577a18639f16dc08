//! Neighbourhood tensor update with the NN+ cluster.
//!
//! The gated bond is always handled in the horizontal frame: vertical bonds
//! are rotated by a quarter turn first. In that frame the left site `X` sits
//! at `(0, 0)` and the right site `Y` at `(1, 0)`; the cluster holds their six
//! nearest neighbours exactly and the four diagonal corners as rank-1 factors
//! of their double tensors.

use symtensor::{contract, pinv_hermitian, qr, truncated_svd, ChargeLeg, SymTensor, Truncation, C64};

use super::{BondKind, IpepsState, Sub, B, L, P, R, T};
use crate::error::{Error, Result};

/// Double tensor of `t` with physical leg and the `traced` virtual legs
/// contracted against the conjugate. Remaining virtual legs come out as
/// interleaved `(ket, bra)` pairs in their original order.
pub(crate) fn double(t: &SymTensor, traced: &[usize]) -> Result<SymTensor> {
    let mut pairs = vec![(P, P)];
    pairs.extend(traced.iter().map(|&i| (i, i)));
    let d = contract(t, &t.conj(), &pairs)?;
    let n = (d.rank()) / 2;
    let perm: Vec<usize> = (0..n).flat_map(|i| [i, n + i]).collect();
    Ok(d.permute(&perm))
}

fn unit(leg: &ChargeLeg) -> Result<SymTensor> {
    if leg.dim() != 1 {
        return Err(Error::Numerical(format!("expected a unit leg, found dimension {}", leg.dim())));
    }
    let q = leg.sectors()[0].0;
    let mut t = SymTensor::zeros(vec![leg.clone()], leg.dir().sign() * q);
    t.insert_block(vec![q], vec![C64::new(1.0, 0.0)])?;
    Ok(t)
}

/// Rank-1 factorization of a corner double `m` with legs
/// `[a_k, a_b, c_k, c_b]`, restricted to the neutral sector of the `a` pair.
/// Returns `(u [a_k, a_b], v [c_k, c_b], discarded relative weight)`.
pub(crate) fn svd1(m: &SymTensor) -> Result<(SymTensor, SymTensor, f64)> {
    let mut neutral = SymTensor::zeros(m.legs().to_vec(), m.total_charge());
    for (k, data) in m.blocks() {
        if k[0] == k[1] {
            neutral.insert_block(k.clone(), data.to_vec())?;
        }
    }
    let full = truncated_svd(m, 2, Truncation::keep_all(None))?;
    let total: f64 = full.spectrum().iter().map(|s| s * s).sum();
    let svd = truncated_svd(&neutral, 2, Truncation { max_dim: Some(1), cutoff: 0.0, multiplet_tol: 0.0 })?;
    let s1 = svd.spectrum().first().copied().unwrap_or(0.0);
    if !(s1 > 0.0) {
        return Err(Error::Numerical("corner double has no neutral component".into()));
    }
    let root: Vec<(i32, Vec<f64>)> = svd.s.iter().map(|(q, v)| (*q, v.iter().map(|x| x.sqrt()).collect())).collect();
    let u = svd.u.scale_leg(2, &root);
    let v = svd.v.scale_leg(0, &root);
    let u = contract(&u, &unit(&u.leg(2).dual())?, &[(2, 0)])?;
    let v = contract(&unit(&v.leg(0).dual())?, &v, &[(0, 0)])?;
    let discarded = ((total - s1 * s1).max(0.0) / total).sqrt();
    Ok((u, v, discarded))
}

/// Environment pieces of the NN+ cluster around a horizontal `X–Y` bond, with
/// the centre tensors left open.
pub(crate) struct ClusterEnv {
    /// `[r_k, r_b]` attached to `X.l`.
    pub left: SymTensor,
    /// `[l_k, l_b]` attached to `Y.r`.
    pub right: SymTensor,
    /// `[xt_k, xt_b, yt_k, yt_b]` attached to `X.t`, `Y.t`.
    pub top: SymTensor,
    /// `[xb_k, xb_b, yb_k, yb_b]` attached to `X.b`, `Y.b`.
    pub bottom: SymTensor,
    /// Largest relative weight discarded by the four corner factorizations.
    pub corner_discarded: f64,
}

/// Builds the environment of the bond with left tensor `x` and right tensor
/// `y` (horizontal frame).
pub(crate) fn cluster_env(x: &SymTensor, y: &SymTensor) -> Result<ClusterEnv> {
    // corners: (-1,-1) and (-1,1) are X-type, (2,-1) and (2,1) are Y-type
    let c_tl = double(x, &[T, L])?; // [r, b]
    let c_tr = double(y, &[T, R])?.permute(&[2, 3, 0, 1]); // [l, b]
    let c_bl = double(x, &[B, L])?; // [t, r]
    let c_br = double(y, &[R, B])?; // [t, l]
    let (tl_r, tl_b, w1) = svd1(&c_tl)?;
    let (tr_l, tr_b, w2) = svd1(&c_tr)?;
    let (bl_t, bl_r, w3) = svd1(&c_bl)?;
    let (br_t, br_l, w4) = svd1(&c_br)?;

    // (-1,0): Y-type, left traced; legs [t, r, b]
    let n_l = double(y, &[L])?;
    let n_l = contract(&n_l, &tl_b, &[(0, 0), (1, 1)])?; // [r, b]
    let left = contract(&n_l, &bl_t, &[(2, 0), (3, 1)])?; // [r]
    // (2,0): X-type, right traced; legs [t, b, l]
    let n_r = double(x, &[R])?;
    let n_r = contract(&n_r, &tr_b, &[(0, 0), (1, 1)])?; // [b, l]
    let right = contract(&n_r, &br_t, &[(0, 0), (1, 1)])?; // [l]
    // (0,-1): Y-type, top traced; legs [r, b, l]
    let n_t0 = double(y, &[T])?;
    let n_t0 = contract(&n_t0, &tl_r, &[(4, 0), (5, 1)])?; // [r, b]
    // (1,-1): X-type, top traced; legs [r, b, l]
    let n_t1 = double(x, &[T])?;
    let n_t1 = contract(&n_t1, &tr_l, &[(0, 0), (1, 1)])?; // [b, l]
    let top = contract(&n_t0, &n_t1, &[(0, 2), (1, 3)])?; // [b0, b1]
    // (0,1): Y-type, bottom traced; legs [t, r, l]
    let n_b0 = double(y, &[B])?;
    let n_b0 = contract(&n_b0, &bl_r, &[(4, 0), (5, 1)])?; // [t, r]
    // (1,1): X-type, bottom traced; legs [t, r, l]
    let n_b1 = double(x, &[B])?;
    let n_b1 = contract(&n_b1, &br_l, &[(2, 0), (3, 1)])?; // [t, l]
    let bottom = contract(&n_b0, &n_b1, &[(2, 2), (3, 3)])?; // [t0, t1]
    Ok(ClusterEnv {
        left,
        right,
        top,
        bottom,
        corner_discarded: w1.max(w2).max(w3).max(w4),
    })
}

/// Metric of the NN+ cluster on the reduced bond tensors, with legs
/// `[x_bra, y_bra, x_ket, y_ket]` in operator convention: `⟨φ|g|ψ⟩` is the
/// cluster overlap of the pairs `φ`, `ψ` (legs `[x, p_x, y, p_y]`).
#[derive(Clone, Debug)]
pub struct NtuCluster {
    pub bond: BondKind,
    pub metric: SymTensor,
    /// Isometric parts `[t, b, l, x]` and `[t, r, b, y]` of the two sites.
    pub qx: SymTensor,
    pub qy: SymTensor,
    /// Reduced parts `[x, p, r]` and `[y, p, l]`.
    pub rx: SymTensor,
    pub ry: SymTensor,
    /// `λ_min / λ_max` of the Hermitian metric before any regularization.
    pub min_eig_ratio: f64,
    /// Negative eigenvalues were clipped.
    pub regularized: bool,
    pub corner_discarded: f64,
}

/// Tensors of the bond in its horizontal frame, left then right.
fn frame(state: &IpepsState, bond: BondKind) -> (Sub, IpepsState) {
    let s = if bond.is_vertical() { state.rotated_ccw() } else { state.clone() };
    (bond.left(), s)
}

pub fn build_ntu_metric(state: &IpepsState, bond: BondKind) -> Result<NtuCluster> {
    let (left, s) = frame(state, bond);
    metric_in_frame(s.tensor(left), s.tensor(left.other()), bond)
}

pub(crate) fn metric_in_frame(x: &SymTensor, y: &SymTensor, bond: BondKind) -> Result<NtuCluster> {
    let env = cluster_env(x, y)?;
    let (qx, rx) = qr(&x.permute(&[T, B, L, P, R]), 3)?;
    let (qy, ry) = qr(&y.permute(&[T, R, B, P, L]), 3)?;
    // X side: [t, b, l, x] ⊗ conj
    let lx = contract(&qx, &env.left, &[(2, 0)])?; // [t, b, x, lb]
    let lx = contract(&lx, &qx.conj(), &[(3, 2)])?; // [t, b, x, t*, b*, x*]
    let lx = contract(&lx, &env.top, &[(0, 0), (3, 1)])?; // [b, x, b*, x*, yt, yt*]
    let lx = contract(&lx, &env.bottom, &[(0, 0), (2, 1)])?; // [x, x*, yt, yt*, yb, yb*]
    let ry_env = contract(&qy, &env.right, &[(1, 0)])?; // [t, b, y, rb]
    let ry_env = contract(&ry_env, &qy.conj(), &[(3, 1)])?; // [t, b, y, t*, b*, y*]
    let g = contract(&lx, &ry_env, &[(2, 0), (3, 3), (4, 1), (5, 4)])?; // [x, x*, y, y*]
    let g = g.permute(&[1, 3, 0, 2]);
    let gh = g.add(&g.conj().permute(&[2, 3, 0, 1]))?.scale_real(0.5);
    let (metric, min_eig_ratio, regularized) = regularize(gh)?;
    Ok(NtuCluster {
        bond,
        metric,
        qx,
        qy,
        rx,
        ry,
        min_eig_ratio,
        regularized,
        corner_discarded: env.corner_discarded,
    })
}

/// Clips eigenvalues below `-1e-10 λ_max` to zero.
fn regularize(g: SymTensor) -> Result<(SymTensor, f64, bool)> {
    let (vals, w) = symtensor::eigh(&g, 2)?;
    let lmax = vals.iter().flat_map(|(_, v)| v.iter()).fold(0.0f64, |a, &x| a.max(x.abs()));
    let lmin = vals.iter().flat_map(|(_, v)| v.iter()).fold(f64::INFINITY, |a, &x| a.min(x));
    if !(lmax > 0.0) {
        return Err(Error::Numerical("vanishing NTU metric".into()));
    }
    let ratio = lmin / lmax;
    if ratio >= -1e-10 {
        return Ok((g, ratio, false));
    }
    let clipped: Vec<(i32, Vec<f64>)> = vals.iter().map(|(q, v)| (*q, v.iter().map(|&x| x.max(0.0)).collect())).collect();
    let g = contract(&w.scale_leg(2, &clipped), &w.conj(), &[(2, 2)])?;
    Ok((g, ratio, true))
}

impl NtuCluster {
    /// `⟨φ|g|ψ⟩` for pairs with legs `[x, p_x, y, p_y]`.
    pub fn inner(&self, phi: &SymTensor, psi: &SymTensor) -> Result<C64> {
        let gp = contract(&self.metric, psi, &[(2, 0), (3, 2)])?; // [xb, yb, px, py]
        let v = contract(&gp, &phi.conj(), &[(0, 0), (1, 2), (2, 1), (3, 3)])?;
        Ok(v.scalar().unwrap_or(C64::new(0.0, 0.0)))
    }

    /// The current (ungated) pair `[x, p_x, y, p_y]`.
    pub fn pair(&self) -> Result<SymTensor> {
        Ok(contract(&self.rx, &self.ry, &[(2, 2)])?)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NtuOpts {
    pub d_max: usize,
    /// ALS stops when the relative error improves by less than this.
    pub als_tol: f64,
    pub max_iter: usize,
    /// Eigenvalue floor of the pseudo-inverse, relative to `λ_max`.
    pub pinv_floor: f64,
}

impl NtuOpts {
    pub fn new(d_max: usize) -> Self {
        Self {
            d_max,
            als_tol: 1e-10,
            max_iter: 100,
            pinv_floor: 1e-12,
        }
    }
}

/// Outcome of one gate application.
#[derive(Clone, Copy, Debug, Default)]
pub struct GateReport {
    /// Relative truncation error in the cluster metric.
    pub delta: f64,
    pub regularized: bool,
    pub als_iterations: usize,
    pub bond_dim: usize,
}

/// Applies a two-site gate `[out_x, out_y, in_x, in_y]` on `bond` and
/// truncates the bond to `opts.d_max` in the NN+ metric.
pub fn apply_gate_ntu(state: &IpepsState, bond: BondKind, gate: &SymTensor, opts: &NtuOpts) -> Result<(IpepsState, GateReport)> {
    let (left, mut s) = frame(state, bond);
    let (x, y) = (s.tensor(left).clone(), s.tensor(left.other()).clone());
    let cl = metric_in_frame(&x, &y, bond)?;
    let theta = cl.pair()?;
    let theta = contract(gate, &theta, &[(2, 1), (3, 3)])?.permute(&[2, 0, 3, 1]);
    let norm2 = cl.inner(&theta, &theta)?.re;
    if !(norm2 > 0.0) {
        return Err(Error::Numerical(format!("gated pair has metric norm {norm2:.3e}")));
    }
    let svd = truncated_svd(&theta, 2, Truncation::max_dim(opts.d_max))?;
    let root: Vec<(i32, Vec<f64>)> = svd.s.iter().map(|(q, v)| (*q, v.iter().map(|x| x.sqrt()).collect())).collect();
    let mut rx = svd.u.scale_leg(2, &root); // [x, px, k]
    let mut ry = svd.v.scale_leg(0, &root); // [k, y, py]
    let err = |rx: &SymTensor, ry: &SymTensor| -> Result<f64> {
        let diff = contract(rx, ry, &[(2, 0)])?.sub(&theta)?;
        Ok((cl.inner(&diff, &diff)?.re.max(0.0) / norm2).sqrt())
    };
    let mut delta = err(&rx, &ry)?;
    let mut iters = 0;
    if svd.rel_err > 0.0 {
        let gt = contract(&cl.metric, &theta, &[(2, 0), (3, 2)])?; // [xb, yb, px, py]
        while iters < opts.max_iter {
            iters += 1;
            rx = solve_x(&cl.metric, &gt, &ry, opts.pinv_floor)?;
            ry = solve_y(&cl.metric, &gt, &rx, opts.pinv_floor)?;
            let d = err(&rx, &ry)?;
            let improvement = delta - d;
            delta = d.min(delta);
            if improvement.abs() < opts.als_tol {
                break;
            }
        }
    }
    // balance the two halves
    let psi = contract(&rx, &ry, &[(2, 0)])?;
    let bal = truncated_svd(&psi, 2, Truncation { max_dim: Some(opts.d_max), cutoff: 1e-15, multiplet_tol: 0.0 })?;
    let root: Vec<(i32, Vec<f64>)> = bal.s.iter().map(|(q, v)| (*q, v.iter().map(|x| x.sqrt()).collect())).collect();
    let rx = bal.u.scale_leg(2, &root);
    let ry = bal.v.scale_leg(0, &root);
    let mut nx = contract(&cl.qx, &rx, &[(3, 0)])?.permute(&[3, 0, 4, 1, 2]);
    let mut ny = contract(&cl.qy, &ry, &[(3, 1)])?.permute(&[4, 0, 1, 2, 3]);
    if nx.leg(R).dir() != x.leg(R).dir() {
        nx = nx.flip_leg(R);
        ny = ny.flip_leg(L);
    }
    let bond_dim = nx.leg(R).dim();
    *s.tensor_mut(left) = nx;
    *s.tensor_mut(left.other()) = ny;
    s.normalize();
    let out = if bond.is_vertical() { s.rotated_cw() } else { s };
    Ok((
        out,
        GateReport {
            delta,
            regularized: cl.regularized,
            als_iterations: iters,
            bond_dim,
        },
    ))
}

/// Minimizes the metric error over `rx [x, px, k]` at fixed `ry [k, y, py]`.
fn solve_x(g: &SymTensor, gt: &SymTensor, ry: &SymTensor, floor: f64) -> Result<SymTensor> {
    let g1 = contract(g, ry, &[(3, 1)])?; // [xb, yb, xk, kk, py]
    let g2 = contract(&g1, &ry.conj(), &[(1, 1), (4, 2)])?; // [xb, xk, kk, kb]
    let p = ry.leg(2).clone();
    let n = contract(&g2, &SymTensor::identity(&p), &[])?; // [xb, xk, kk, kb, p, p*]
    let n = n.permute(&[0, 4, 3, 1, 5, 2]);
    let b = contract(gt, &ry.conj(), &[(1, 1), (3, 2)])?; // [xb, px, kb]
    let inv = pinv_hermitian(&n, 3, floor)?;
    Ok(contract(&inv, &b, &[(3, 0), (4, 1), (5, 2)])?)
}

/// Minimizes the metric error over `ry [k, y, py]` at fixed `rx [x, px, k]`.
fn solve_y(g: &SymTensor, gt: &SymTensor, rx: &SymTensor, floor: f64) -> Result<SymTensor> {
    let h1 = contract(g, rx, &[(2, 0)])?; // [xb, yb, yk, px, kk]
    let h2 = contract(&h1, &rx.conj(), &[(0, 0), (3, 1)])?; // [yb, yk, kk, kb]
    let p = rx.leg(1).clone();
    let n = contract(&h2, &SymTensor::identity(&p), &[])?; // [yb, yk, kk, kb, p, p*]
    let n = n.permute(&[3, 0, 4, 2, 1, 5]);
    let b = contract(gt, &rx.conj(), &[(0, 0), (2, 1)])?.permute(&[2, 0, 1]); // [kb, yb, py]
    let inv = pinv_hermitian(&n, 3, floor)?;
    Ok(contract(&inv, &b, &[(3, 0), (4, 1), (5, 2)])?)
}
