//! Block-wise factorizations. In every routine the first `split_at` legs form
//! the rows and the remaining legs form the columns; permute beforehand to
//! choose a different bipartition.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::dense;
use crate::error::{Result, TensorError};
use crate::fuse::{matricize, split};
use crate::leg::{ChargeLeg, Direction};
use crate::tensor::SymTensor;
use crate::C64;

/// Truncation policy for [`truncated_svd`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    /// Largest number of singular values kept across all sectors.
    pub max_dim: Option<usize>,
    /// Singular values with `s / s_max` below this are dropped.
    pub cutoff: f64,
    /// When positive and `max_dim` cuts the spectrum, the cut moves down to
    /// the nearest gap so that no multiplet (values within this relative
    /// distance of each other) is split.
    pub multiplet_tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            max_dim: None,
            cutoff: 1e-14,
            multiplet_tol: 0.0,
        }
    }
}

impl Truncation {
    pub fn max_dim(d: usize) -> Self {
        Self {
            max_dim: Some(d),
            ..Self::default()
        }
    }

    /// Keeps exact zeros, so that the bond basis stays as large as allowed.
    pub fn keep_all(max_dim: Option<usize>) -> Self {
        Self {
            max_dim,
            cutoff: 0.0,
            multiplet_tol: 0.0,
        }
    }
}

/// `t ≈ u · diag(s) · v`.
///
/// `u` has the row legs plus a bond leg (`In`) and total charge 0; `v` has the
/// bond leg (`Out`) plus the column legs and carries the total charge of `t`.
/// The bond charge of a sector equals the signed charge sum of the row legs.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: SymTensor,
    pub s: Vec<(i32, Vec<f64>)>,
    pub v: SymTensor,
    /// `sqrt(Σ discarded s²) / ‖t‖`.
    pub rel_err: f64,
}

impl SvdResult {
    /// The bond leg as it appears on `u` (direction `In`).
    pub fn bond(&self) -> &ChargeLeg {
        self.u.leg(self.u.rank() - 1)
    }

    pub fn bond_dim(&self) -> usize {
        self.s.iter().map(|(_, v)| v.len()).sum()
    }

    /// Diagonal matrix of singular values with legs `[bond Out, bond In]`.
    pub fn s_tensor(&self) -> SymTensor {
        let b = self.bond().clone();
        let mut t = SymTensor::zeros(vec![b.dual(), b], 0);
        for (q, vals) in &self.s {
            let d = vals.len();
            let mut blk = vec![C64::new(0.0, 0.0); d * d];
            for (i, &x) in vals.iter().enumerate() {
                blk[i * d + i] = C64::new(x, 0.0);
            }
            t.insert_block(vec![*q, *q], blk).expect("diagonal block");
        }
        t
    }

    /// All singular values in nonincreasing order.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.s.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        all.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        all
    }

    /// `u · s`, legs of `u`.
    pub fn us(&self) -> SymTensor {
        self.u.scale_leg(self.u.rank() - 1, &self.s)
    }

    /// `s · v`, legs of `v`.
    pub fn sv(&self) -> SymTensor {
        self.v.scale_leg(0, &self.s)
    }
}

fn block_dims(mat: &SymTensor, key: &[i32]) -> (usize, usize) {
    let s = mat.shape_of(key);
    (s[0], s[1])
}

/// Truncated singular value decomposition of `t` split after `split_at` legs.
///
/// Singular values from all sectors are ranked by value (descending), then
/// sector charge (ascending), then index within the sector; the first
/// `max_dim` that pass the cutoff are kept.
pub fn truncated_svd(t: &SymTensor, split_at: usize, trunc: Truncation) -> Result<SvdResult> {
    let m = matricize(t, split_at)?;
    let total = t.total_charge();
    let mut per_sector: BTreeMap<i32, (Vec<C64>, Vec<f64>, Vec<C64>, usize, usize)> = BTreeMap::new();
    let mut s_max: f64 = 0.0;
    for (key, data) in m.mat.blocks() {
        let (rows, cols) = block_dims(&m.mat, key);
        let (u, s, v) = dense::svd(data, rows, cols)?;
        s_max = s_max.max(s.first().copied().unwrap_or(0.0));
        per_sector.insert(key[0], (u, s, v, rows, cols));
    }
    if s_max == 0.0 {
        return Err(TensorError::ZeroTensor);
    }

    let mut ranked: Vec<(f64, i32, usize)> = per_sector
        .iter()
        .flat_map(|(&q, (_, s, _, _, _))| s.iter().enumerate().map(move |(i, &x)| (x, q, i)))
        .collect();
    ranked.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut limit = trunc.max_dim.unwrap_or(usize::MAX).max(1);
    if trunc.multiplet_tol > 0.0 && limit < ranked.len() {
        let mut k = limit;
        while k > 1 && ranked[k].0 >= ranked[k - 1].0 * (1.0 - trunc.multiplet_tol) {
            k -= 1;
        }
        limit = k;
    }
    let mut keep: BTreeMap<i32, usize> = BTreeMap::new();
    let mut discarded = 0.0;
    for (n, &(x, q, _)) in ranked.iter().enumerate() {
        if n < limit && x / s_max >= trunc.cutoff {
            *keep.entry(q).or_insert(0) += 1;
        } else {
            discarded += x * x;
        }
    }

    let bond = ChargeLeg::new(Direction::In, keep.iter().map(|(&q, &d)| (q, d)).collect())?;
    let mut umat = SymTensor::zeros(vec![m.rows.fused().clone(), bond.clone()], 0);
    let mut vmat = SymTensor::zeros(vec![bond.dual(), m.cols.fused().clone()], total);
    let mut s_out = Vec::new();
    for (&q, &k) in &keep {
        let (u, s, v, rows, cols) = &per_sector[&q];
        let kk = s.len();
        let mut ub = Vec::with_capacity(rows * k);
        for i in 0..*rows {
            ub.extend_from_slice(&u[i * kk..i * kk + k]);
        }
        umat.insert_block(vec![q, q], ub)?;
        vmat.insert_block(vec![q, total - q], v[..k * cols].to_vec())?;
        s_out.push((q, s[..k].to_vec()));
    }
    let u = split(&umat, 0, &m.rows)?;
    let v = split(&vmat, 1, &m.cols)?;
    Ok(SvdResult {
        u,
        s: s_out,
        v,
        rel_err: discarded.sqrt() / t.norm(),
    })
}

/// Thin QR: `t = q · r` with `q` (row legs + bond `In`, charge 0) having
/// orthonormal columns in every sector and `r` (bond `Out` + column legs)
/// carrying the total charge. Every allowed sector is factored, including
/// empty ones, so the bond is as large as the block shapes permit.
pub fn qr(t: &SymTensor, split_at: usize) -> Result<(SymTensor, SymTensor)> {
    let full = t.with_all_blocks();
    let m = matricize(&full, split_at)?;
    let total = t.total_charge();
    let mut factors = Vec::new();
    for (key, data) in m.mat.blocks() {
        let (rows, cols) = block_dims(&m.mat, key);
        if rows == 0 || cols == 0 {
            continue;
        }
        let (q, r) = dense::qr(data, rows, cols);
        factors.push((key[0], rows.min(cols), q, r));
    }
    if factors.is_empty() {
        return Err(TensorError::Structure("no allowed blocks to factor".into()));
    }
    let bond = ChargeLeg::new(Direction::In, factors.iter().map(|f| (f.0, f.1)).collect())?;
    let mut qm = SymTensor::zeros(vec![m.rows.fused().clone(), bond.clone()], 0);
    let mut rm = SymTensor::zeros(vec![bond.dual(), m.cols.fused().clone()], total);
    for (q, _, qd, rd) in factors {
        qm.insert_block(vec![q, q], qd)?;
        rm.insert_block(vec![q, total - q], rd)?;
    }
    Ok((split(&qm, 0, &m.rows)?, split(&rm, 1, &m.cols)?))
}

fn adjoint(a: &[C64], m: usize, n: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            out.push(a[i * n + j].conj());
        }
    }
    out
}

/// Thin LQ: `t = l · q` with `l` (row legs + bond `In`) carrying the total
/// charge and `q` (bond `Out` + column legs, charge 0) having orthonormal rows.
pub fn lq(t: &SymTensor, split_at: usize) -> Result<(SymTensor, SymTensor)> {
    let full = t.with_all_blocks();
    let m = matricize(&full, split_at)?;
    let total = t.total_charge();
    let mut factors = Vec::new();
    for (key, data) in m.mat.blocks() {
        let (rows, cols) = block_dims(&m.mat, key);
        if rows == 0 || cols == 0 {
            continue;
        }
        // M† = Q' R'  =>  M = R'† Q'†
        let (qd, rd) = dense::qr(&adjoint(data, rows, cols), cols, rows);
        let k = rows.min(cols);
        let l = adjoint(&rd, k, rows);
        let q = adjoint(&qd, cols, k);
        // bond charge b satisfies b + (col charge) = 0
        let bq = key[0] - total;
        factors.push((key[0], bq, k, l, q));
    }
    if factors.is_empty() {
        return Err(TensorError::Structure("no allowed blocks to factor".into()));
    }
    let mut secs: Vec<(i32, usize)> = factors.iter().map(|f| (f.1, f.2)).collect();
    secs.sort();
    let bond = ChargeLeg::new(Direction::In, secs)?;
    let mut lm = SymTensor::zeros(vec![m.rows.fused().clone(), bond.clone()], total);
    let mut qm = SymTensor::zeros(vec![bond.dual(), m.cols.fused().clone()], 0);
    for (r, b, _, l, q) in factors {
        lm.insert_block(vec![r, b], l)?;
        qm.insert_block(vec![b, -b], q)?;
    }
    Ok((split(&lm, 0, &m.rows)?, split(&qm, 1, &m.cols)?))
}

/// Hermitian eigendecomposition `t = w · diag(λ) · w†` of an operator whose
/// column legs are the duals of its row legs, in the same order. Returns
/// ascending eigenvalues per sector and `w` (row legs + bond `In`).
pub fn eigh(t: &SymTensor, split_at: usize) -> Result<(Vec<(i32, Vec<f64>)>, SymTensor)> {
    check_operator(t, split_at)?;
    let m = matricize(t, split_at)?;
    let mut vals_out = Vec::new();
    let mut vecs: Vec<(i32, Vec<C64>)> = Vec::new();
    for &(q, d) in m.rows.fused().sectors() {
        let blk = m
            .mat
            .block(&[q, -q])
            .map(|b| b.to_vec())
            .unwrap_or_else(|| vec![C64::new(0.0, 0.0); d * d]);
        let (vals, w) = dense::eigh(&blk, d)?;
        vals_out.push((q, vals));
        vecs.push((q, w));
    }
    let bond = m.rows.fused().with_dir(Direction::In);
    let mut wm = SymTensor::zeros(vec![m.rows.fused().clone(), bond], 0);
    for (q, w) in vecs {
        wm.insert_block(vec![q, q], w)?;
    }
    Ok((vals_out, split(&wm, 0, &m.rows)?))
}

fn check_operator(t: &SymTensor, split_at: usize) -> Result<()> {
    if t.total_charge() != 0 || 2 * split_at != t.rank() {
        return Err(TensorError::Structure(
            "operator needs charge 0 and equal numbers of row and column legs".into(),
        ));
    }
    for i in 0..split_at {
        if !t.leg(i).pairs_with(t.leg(split_at + i)) {
            return Err(TensorError::Structure(format!(
                "column leg {} is not the dual of row leg {i}",
                split_at + i
            )));
        }
    }
    Ok(())
}

/// Moore–Penrose pseudo-inverse of a Hermitian operator (see [`eigh`] for the
/// leg convention). Eigenvalues with `|λ| <= rel_floor · max|λ|` are treated as
/// zero.
pub fn pinv_hermitian(t: &SymTensor, split_at: usize, rel_floor: f64) -> Result<SymTensor> {
    check_operator(t, split_at)?;
    let m = matricize(t, split_at)?;
    let mut decs = Vec::new();
    let mut lmax: f64 = 0.0;
    for &(q, d) in m.rows.fused().sectors() {
        let Some(blk) = m.mat.block(&[q, -q]) else { continue };
        let (vals, w) = dense::eigh(blk, d)?;
        lmax = vals.iter().fold(lmax, |a, v| a.max(v.abs()));
        decs.push((q, d, vals, w));
    }
    let floor = rel_floor * lmax;
    let mut out = SymTensor::zeros(m.mat.legs().to_vec(), 0);
    for (q, d, vals, w) in decs {
        let mut blk = vec![C64::new(0.0, 0.0); d * d];
        for (k, &lam) in vals.iter().enumerate() {
            if lam.abs() <= floor || lam == 0.0 {
                continue;
            }
            let inv = 1.0 / lam;
            for i in 0..d {
                let wi = w[i * d + k] * inv;
                for j in 0..d {
                    blk[i * d + j] += wi * w[j * d + k].conj();
                }
            }
        }
        out.insert_block(vec![q, -q], blk)?;
    }
    let rows_split = split(&out, 0, &m.rows)?;
    split(&rows_split, split_at, &m.cols)
}
