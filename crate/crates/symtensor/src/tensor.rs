use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::dense;
use crate::error::{Result, TensorError};
use crate::leg::ChargeLeg;
use crate::C64;

/// Per-leg charge assignment identifying a block.
pub type Key = Vec<i32>;

/// A U(1)-symmetric tensor stored as dense row-major blocks keyed by the
/// charge of each leg.
///
/// A block with key `k` may exist only if `Σ_i sign(leg_i) · k_i == total_charge`.
/// Missing blocks are zero. Values are immutable once built; every operation
/// returns a new tensor.
#[derive(Clone, Debug)]
pub struct SymTensor {
    legs: Vec<ChargeLeg>,
    total_charge: i32,
    blocks: BTreeMap<Key, Vec<C64>>,
}

impl SymTensor {
    /// The zero tensor with the given structure.
    pub fn zeros(legs: Vec<ChargeLeg>, total_charge: i32) -> Self {
        Self {
            legs,
            total_charge,
            blocks: BTreeMap::new(),
        }
    }

    /// Rank-0 tensor holding `value`.
    pub fn scalar_tensor(value: C64) -> Self {
        let mut blocks = BTreeMap::new();
        blocks.insert(Vec::new(), vec![value]);
        Self {
            legs: Vec::new(),
            total_charge: 0,
            blocks,
        }
    }

    /// Every key allowed by the selection rule, in lexicographic order.
    pub fn allowed_keys(legs: &[ChargeLeg], total_charge: i32) -> Vec<Key> {
        let n = legs.len();
        // reachable[i] = signed sums attainable by legs i..n
        let mut reachable: Vec<BTreeSet<i32>> = vec![BTreeSet::new(); n + 1];
        reachable[n].insert(0);
        for i in (0..n).rev() {
            let s = legs[i].dir().sign();
            let mut set = BTreeSet::new();
            for q in legs[i].charges() {
                for r in &reachable[i + 1] {
                    set.insert(s * q + r);
                }
            }
            reachable[i] = set;
        }
        let mut out = Vec::new();
        let mut key = Vec::with_capacity(n);
        fn rec(
            legs: &[ChargeLeg],
            reachable: &[BTreeSet<i32>],
            i: usize,
            need: i32,
            key: &mut Vec<i32>,
            out: &mut Vec<Key>,
        ) {
            if i == legs.len() {
                if need == 0 {
                    out.push(key.clone());
                }
                return;
            }
            let s = legs[i].dir().sign();
            for q in legs[i].charges() {
                let rest = need - s * q;
                if reachable[i + 1].contains(&rest) {
                    key.push(q);
                    rec(legs, reachable, i + 1, rest, key, out);
                    key.pop();
                }
            }
        }
        if reachable[0].contains(&total_charge) {
            rec(legs, &reachable, 0, total_charge, &mut key, &mut out);
        }
        out
    }

    /// Fills every allowed block from a function of the dense multi-index.
    pub fn from_fn(legs: Vec<ChargeLeg>, total_charge: i32, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let mut t = Self::zeros(legs, total_charge);
        for key in Self::allowed_keys(&t.legs, total_charge) {
            let shape = t.shape_of(&key);
            let offsets: Vec<usize> = key
                .iter()
                .zip(&t.legs)
                .map(|(&q, l)| l.offset(q).unwrap())
                .collect();
            let size: usize = shape.iter().product();
            let mut data = Vec::with_capacity(size);
            let mut idx = vec![0usize; shape.len()];
            let mut full = offsets.clone();
            for _ in 0..size {
                for a in 0..shape.len() {
                    full[a] = offsets[a] + idx[a];
                }
                data.push(f(&full));
                for a in (0..shape.len()).rev() {
                    idx[a] += 1;
                    if idx[a] < shape[a] {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            t.blocks.insert(key, data);
        }
        t
    }

    /// Random entries with real and imaginary parts uniform in [-1, 1) in
    /// every allowed block.
    pub fn random(legs: Vec<ChargeLeg>, total_charge: i32, rng: &mut impl Rng) -> Self {
        Self::from_fn(legs, total_charge, |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    /// Random real entries in every allowed block.
    pub fn random_real(legs: Vec<ChargeLeg>, total_charge: i32, rng: &mut impl Rng) -> Self {
        Self::from_fn(legs, total_charge, |_| C64::new(rng.gen_range(-1.0..1.0), 0.0))
    }

    /// Builds a tensor from a full dense row-major array. Entries outside the
    /// allowed blocks must have modulus at most `tol`.
    pub fn from_dense(legs: Vec<ChargeLeg>, total_charge: i32, data: &[C64], tol: f64) -> Result<Self> {
        let shape: Vec<usize> = legs.iter().map(|l| l.dim()).collect();
        let size: usize = shape.iter().product();
        if data.len() != size {
            return Err(TensorError::Structure(format!(
                "dense array has {} entries, legs require {size}",
                data.len()
            )));
        }
        let st = dense::strides(&shape);
        // check forbidden entries
        let mut idx = vec![0usize; shape.len()];
        for (flat, x) in data.iter().enumerate() {
            let mut rem = flat;
            for a in 0..shape.len() {
                idx[a] = rem / st[a];
                rem %= st[a];
            }
            let mut sum = 0;
            for (a, l) in legs.iter().enumerate() {
                sum += l.dir().sign() * l.locate(idx[a]).unwrap().0;
            }
            if sum != total_charge && x.norm() > tol {
                let key: Vec<i32> = legs.iter().zip(&idx).map(|(l, &i)| l.locate(i).unwrap().0).collect();
                return Err(TensorError::ChargeViolation { key, total: total_charge });
            }
        }
        let mut t = Self::from_fn(legs, total_charge, |i| {
            let off: usize = i.iter().zip(&st).map(|(a, b)| a * b).sum();
            data[off]
        });
        t.blocks.retain(|_, b| b.iter().any(|x| *x != C64::new(0.0, 0.0)));
        Ok(t)
    }

    /// Expands into a full dense row-major array.
    pub fn to_dense(&self) -> Vec<C64> {
        let shape = self.dims();
        let mut out = vec![C64::new(0.0, 0.0); shape.iter().product()];
        for (key, data) in &self.blocks {
            let offsets: Vec<usize> = key
                .iter()
                .zip(&self.legs)
                .map(|(&q, l)| l.offset(q).unwrap())
                .collect();
            dense::write_box(&mut out, &shape, &offsets, data, &self.shape_of(key));
        }
        out
    }

    pub fn legs(&self) -> &[ChargeLeg] {
        &self.legs
    }

    pub fn leg(&self, i: usize) -> &ChargeLeg {
        &self.legs[i]
    }

    pub fn rank(&self) -> usize {
        self.legs.len()
    }

    pub fn total_charge(&self) -> i32 {
        self.total_charge
    }

    pub fn dims(&self) -> Vec<usize> {
        self.legs.iter().map(|l| l.dim()).collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of stored complex entries.
    pub fn stored_len(&self) -> usize {
        self.blocks.values().map(|b| b.len()).sum()
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&Key, &[C64])> {
        self.blocks.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.blocks.keys()
    }

    pub fn block(&self, key: &[i32]) -> Option<&[C64]> {
        self.blocks.get(key).map(|v| v.as_slice())
    }

    pub(crate) fn from_parts(legs: Vec<ChargeLeg>, total_charge: i32, blocks: BTreeMap<Key, Vec<C64>>) -> Self {
        Self {
            legs,
            total_charge,
            blocks,
        }
    }

    /// Shape of block `key` (panics if a charge is absent from its leg).
    pub fn shape_of(&self, key: &[i32]) -> Vec<usize> {
        key.iter()
            .zip(&self.legs)
            .map(|(&q, l)| l.degeneracy(q).expect("charge not on leg"))
            .collect()
    }

    pub fn satisfies_rule(&self, key: &[i32]) -> bool {
        key.len() == self.legs.len()
            && key
                .iter()
                .zip(&self.legs)
                .map(|(&q, l)| l.dir().sign() * q)
                .sum::<i32>()
                == self.total_charge
    }

    /// Stores a block, rejecting keys that break the selection rule or data of
    /// the wrong size.
    pub fn insert_block(&mut self, key: Key, data: Vec<C64>) -> Result<()> {
        if key.len() != self.legs.len() {
            return Err(TensorError::Structure(format!(
                "key {key:?} has {} charges for a rank-{} tensor",
                key.len(),
                self.legs.len()
            )));
        }
        for (a, (&q, l)) in key.iter().zip(&self.legs).enumerate() {
            if l.degeneracy(q).is_none() {
                return Err(TensorError::Structure(format!("charge {q} is not a sector of leg {a}")));
            }
        }
        if !self.satisfies_rule(&key) {
            return Err(TensorError::ChargeViolation {
                key,
                total: self.total_charge,
            });
        }
        let expected: usize = self.shape_of(&key).iter().product();
        if data.len() != expected {
            return Err(TensorError::BlockShape {
                key,
                expected,
                got: data.len(),
            });
        }
        self.blocks.insert(key, data);
        Ok(())
    }

    /// Adds explicit zero blocks for every allowed key that is missing.
    pub fn with_all_blocks(&self) -> Self {
        let mut out = self.clone();
        for key in Self::allowed_keys(&self.legs, self.total_charge) {
            if !out.blocks.contains_key(&key) {
                let n = self.shape_of(&key).iter().product();
                out.blocks.insert(key, vec![C64::new(0.0, 0.0); n]);
            }
        }
        out
    }

    /// Drops blocks whose entries are all exactly zero.
    pub fn pruned(mut self) -> Self {
        self.blocks.retain(|_, b| b.iter().any(|x| *x != C64::new(0.0, 0.0)));
        self
    }

    /// Value of a rank-0 tensor.
    pub fn scalar(&self) -> Result<C64> {
        if !self.legs.is_empty() {
            return Err(TensorError::Structure(format!("rank-{} tensor is not a scalar", self.legs.len())));
        }
        Ok(self.blocks.get(&Vec::new()).map(|b| b[0]).unwrap_or_default())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks.values().flat_map(|b| b.iter()).map(|x| x.norm_sqr()).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .values()
            .flat_map(|b| b.iter())
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.iter().all(|x| *x == C64::new(0.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.scale_mut(c);
        out
    }

    pub fn scale_mut(&mut self, c: C64) {
        for b in self.blocks.values_mut() {
            for x in b.iter_mut() {
                *x *= c;
            }
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    fn check_same_structure(&self, other: &SymTensor) -> Result<()> {
        if self.legs != other.legs || self.total_charge != other.total_charge {
            return Err(TensorError::Structure(
                "tensors differ in legs or total charge".into(),
            ));
        }
        Ok(())
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: C64, x: &SymTensor) -> Result<()> {
        self.check_same_structure(x)?;
        for (k, xb) in &x.blocks {
            let b = self
                .blocks
                .entry(k.clone())
                .or_insert_with(|| vec![C64::new(0.0, 0.0); xb.len()]);
            for (y, v) in b.iter_mut().zip(xb) {
                *y += alpha * v;
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &SymTensor) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &SymTensor) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// `⟨self, other⟩ = Σ conj(self) · other` over identically structured tensors.
    pub fn inner(&self, other: &SymTensor) -> Result<C64> {
        self.check_same_structure(other)?;
        let mut acc = C64::new(0.0, 0.0);
        for (k, a) in &self.blocks {
            if let Some(b) = other.blocks.get(k) {
                acc += a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>();
            }
        }
        Ok(acc)
    }

    /// Complex conjugate with every leg direction flipped and the total
    /// charge negated, so that `contract(t.conj(), t, all legs)` is `‖t‖²`.
    pub fn conj(&self) -> Self {
        Self {
            legs: self.legs.iter().map(|l| l.dual()).collect(),
            total_charge: -self.total_charge,
            blocks: self
                .blocks
                .iter()
                .map(|(k, b)| (k.clone(), b.iter().map(|x| x.conj()).collect()))
                .collect(),
        }
    }

    /// Reorders legs: leg `i` of the result is leg `perm[i]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rank(), "permutation length");
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            assert!(!seen[p], "not a permutation: {perm:?}");
            seen[p] = true;
        }
        let legs = perm.iter().map(|&p| self.legs[p].clone()).collect();
        let blocks = self
            .blocks
            .iter()
            .map(|(k, b)| {
                let shape = self.shape_of(k);
                let nk: Key = perm.iter().map(|&p| k[p]).collect();
                (nk, dense::permute(b, &shape, perm))
            })
            .collect();
        Self {
            legs,
            total_charge: self.total_charge,
            blocks,
        }
    }

    /// Shifts every charge of leg `leg` by `delta` and adjusts the total charge
    /// so the stored blocks stay legal. Applying the same shift to the leg this
    /// one contracts with keeps the pair compatible.
    pub fn shift_leg(&self, leg: usize, delta: i32) -> Self {
        let mut legs = self.legs.clone();
        let sign = legs[leg].dir().sign();
        legs[leg] = legs[leg].shifted(delta);
        let blocks = self
            .blocks
            .iter()
            .map(|(k, b)| {
                let mut nk = k.clone();
                nk[leg] += delta;
                (nk, b.clone())
            })
            .collect();
        Self {
            legs,
            total_charge: self.total_charge + sign * delta,
            blocks,
        }
    }

    /// Flips the direction of leg `leg`, negating its charges. The tensor
    /// represents the same array; only the bookkeeping changes.
    pub fn flip_leg(&self, leg: usize) -> Self {
        let mut legs = self.legs.clone();
        let l = &legs[leg];
        let mut secs: Vec<(i32, usize)> = l.sectors().iter().map(|&(q, d)| (-q, d)).collect();
        secs.reverse();
        legs[leg] = ChargeLeg::new(l.dir().flip(), secs).expect("valid");
        // dense order reverses sector order; data inside blocks is unchanged
        let blocks = self
            .blocks
            .iter()
            .map(|(k, b)| {
                let mut nk = k.clone();
                nk[leg] = -nk[leg];
                (nk, b.clone())
            })
            .collect();
        Self {
            legs,
            total_charge: self.total_charge,
            blocks,
        }
    }

    /// Identity map on `leg`, with legs `[leg, leg.dual()]`:
    /// `contract(&identity(t.leg(0)), &t, &[(1, 0)]) == t`.
    pub fn identity(leg: &ChargeLeg) -> Self {
        let legs = vec![leg.clone(), leg.dual()];
        let mut blocks = BTreeMap::new();
        for &(q, d) in leg.sectors() {
            let mut b = vec![C64::new(0.0, 0.0); d * d];
            for i in 0..d {
                b[i * d + i] = C64::new(1.0, 0.0);
            }
            blocks.insert(vec![q, q], b);
        }
        // [leg, dual]: sign(d) q + sign(-d) q = 0
        Self {
            legs,
            total_charge: 0,
            blocks,
        }
    }

    /// Multiplies entries along `leg` by per-sector weights (e.g. singular
    /// values). Sectors absent from `weights` are zeroed.
    pub fn scale_leg(&self, leg: usize, weights: &[(i32, Vec<f64>)]) -> Self {
        let map: BTreeMap<i32, &Vec<f64>> = weights.iter().map(|(q, w)| (*q, w)).collect();
        let mut blocks = BTreeMap::new();
        for (k, b) in &self.blocks {
            let Some(w) = map.get(&k[leg]) else { continue };
            let shape = self.shape_of(k);
            let inner: usize = shape[leg + 1..].iter().product();
            let d = shape[leg];
            assert_eq!(w.len(), d, "weight count for sector {}", k[leg]);
            let mut nb = b.clone();
            for (i, x) in nb.iter_mut().enumerate() {
                *x *= w[(i / inner) % d];
            }
            blocks.insert(k.clone(), nb);
        }
        Self {
            legs: self.legs.clone(),
            total_charge: self.total_charge,
            blocks,
        }
    }

    /// Applies `f` to every stored entry.
    pub fn map_data(&self, mut f: impl FnMut(C64) -> C64) -> Self {
        let mut out = self.clone();
        for b in out.blocks.values_mut() {
            for x in b.iter_mut() {
                *x = f(*x);
            }
        }
        out
    }

    /// Entry-wise comparison that treats missing blocks as zeros.
    pub fn approx_eq(&self, other: &SymTensor, tol: f64) -> bool {
        if self.legs != other.legs || self.total_charge != other.total_charge {
            return false;
        }
        self.max_diff(other).map(|d| d <= tol).unwrap_or(false)
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_diff(&self, other: &SymTensor) -> Result<f64> {
        self.check_same_structure(other)?;
        let mut worst: f64 = 0.0;
        let keys: BTreeSet<&Key> = self.blocks.keys().chain(other.blocks.keys()).collect();
        for k in keys {
            match (self.blocks.get(k), other.blocks.get(k)) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        worst = worst.max((x - y).norm());
                    }
                }
                (Some(a), None) | (None, Some(a)) => {
                    for x in a {
                        worst = worst.max(x.norm());
                    }
                }
                (None, None) => {}
            }
        }
        Ok(worst)
    }
}

impl PartialEq for SymTensor {
    /// Exact equality with missing blocks treated as zeros.
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leg::Direction;
    use rand::SeedableRng;

    fn leg(dir: Direction, s: &[(i32, usize)]) -> ChargeLeg {
        ChargeLeg::new(dir, s.to_vec()).unwrap()
    }

    #[test]
    fn insert_rejects_illegal_blocks() {
        let legs = vec![
            leg(Direction::Out, &[(-1, 1), (1, 1)]),
            leg(Direction::In, &[(-1, 2), (1, 1)]),
        ];
        let mut t = SymTensor::zeros(legs, 0);
        assert!(t.insert_block(vec![1, 1], vec![C64::new(1.0, 0.0)]).is_ok());
        assert!(matches!(
            t.insert_block(vec![1, -1], vec![C64::new(1.0, 0.0); 2]),
            Err(TensorError::ChargeViolation { .. })
        ));
        assert!(matches!(
            t.insert_block(vec![-1, -1], vec![C64::new(1.0, 0.0)]),
            Err(TensorError::BlockShape { .. })
        ));
        assert!(t.insert_block(vec![0, 0], vec![]).is_err());
    }

    #[test]
    fn allowed_keys_brute_force() {
        let legs = vec![
            leg(Direction::Out, &[(-1, 1), (0, 1), (2, 1)]),
            leg(Direction::In, &[(0, 1), (1, 1)]),
            leg(Direction::Out, &[(-2, 1), (1, 1), (3, 1)]),
        ];
        for total in -4..5 {
            let got = SymTensor::allowed_keys(&legs, total);
            let mut want = Vec::new();
            for a in legs[0].charges() {
                for b in legs[1].charges() {
                    for c in legs[2].charges() {
                        if a - b + c == total {
                            want.push(vec![a, b, c]);
                        }
                    }
                }
            }
            assert_eq!(got, want, "total {total}");
        }
    }

    #[test]
    fn dense_round_trip_and_norm() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let legs = vec![
            leg(Direction::Out, &[(-1, 2), (1, 1)]),
            leg(Direction::In, &[(0, 1), (2, 2)]),
            leg(Direction::Out, &[(-1, 1), (1, 2)]),
        ];
        let t = SymTensor::random(legs.clone(), 0, &mut rng);
        let d = t.to_dense();
        let back = SymTensor::from_dense(legs, 0, &d, 0.0).unwrap();
        assert_eq!(t, back);
        let dn: f64 = d.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!((dn - t.norm()).abs() < 1e-12);
    }

    #[test]
    fn from_dense_rejects_forbidden_entries() {
        let legs = vec![leg(Direction::Out, &[(-1, 1), (1, 1)]), leg(Direction::In, &[(-1, 1), (1, 1)])];
        let mut d = vec![C64::new(0.0, 0.0); 4];
        d[1] = C64::new(1.0, 0.0);
        assert!(matches!(
            SymTensor::from_dense(legs, 0, &d, 1e-14),
            Err(TensorError::ChargeViolation { .. })
        ));
    }

    #[test]
    fn flip_leg_preserves_dense_array_up_to_sector_order() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let legs = vec![leg(Direction::Out, &[(-1, 1), (1, 2)]), leg(Direction::In, &[(-1, 1), (1, 2)])];
        let t = SymTensor::random(legs, 0, &mut rng);
        let f = t.flip_leg(1);
        assert_eq!(f.leg(1).dir(), Direction::Out);
        for (k, b) in t.blocks() {
            assert_eq!(f.block(&[k[0], -k[1]]).unwrap(), b);
        }
        assert_eq!(f.flip_leg(1), t);
    }

    #[test]
    fn shift_leg_keeps_rule() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let legs = vec![leg(Direction::Out, &[(-1, 1), (1, 1)]), leg(Direction::In, &[(0, 2), (2, 1)])];
        let t = SymTensor::random(legs, -1, &mut rng);
        let s = t.shift_leg(1, 3);
        assert_eq!(s.total_charge(), -4);
        for k in s.keys() {
            assert!(s.satisfies_rule(k));
        }
    }
}
