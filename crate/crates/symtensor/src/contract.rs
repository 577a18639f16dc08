use std::collections::{BTreeMap, HashMap};

use crate::dense;
use crate::error::{Result, TensorError};
use crate::tensor::{Key, SymTensor};
use crate::C64;

/// Contracts leg `pairs[k].0` of `a` with leg `pairs[k].1` of `b`.
///
/// Paired legs must carry identical sectors and opposite directions. The
/// result's legs are the free legs of `a` in order, followed by the free legs
/// of `b` in order; its total charge is the sum of both input charges.
pub fn contract(a: &SymTensor, b: &SymTensor, pairs: &[(usize, usize)]) -> Result<SymTensor> {
    let mut a_used = vec![false; a.rank()];
    let mut b_used = vec![false; b.rank()];
    for &(ia, ib) in pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(TensorError::LegMismatch {
                a_leg: ia,
                b_leg: ib,
                reason: "leg index out of range".into(),
            });
        }
        if a_used[ia] || b_used[ib] {
            return Err(TensorError::LegMismatch {
                a_leg: ia,
                b_leg: ib,
                reason: "leg contracted twice".into(),
            });
        }
        a_used[ia] = true;
        b_used[ib] = true;
        let (la, lb) = (a.leg(ia), b.leg(ib));
        if la.dir() == lb.dir() {
            return Err(TensorError::LegMismatch {
                a_leg: ia,
                b_leg: ib,
                reason: "directions must be opposite".into(),
            });
        }
        if la.sectors() != lb.sectors() {
            return Err(TensorError::LegMismatch {
                a_leg: ia,
                b_leg: ib,
                reason: format!("sectors differ: {:?} vs {:?}", la.sectors(), lb.sectors()),
            });
        }
    }
    let a_free: Vec<usize> = (0..a.rank()).filter(|&i| !a_used[i]).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|&i| !b_used[i]).collect();
    let a_con: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let b_con: Vec<usize> = pairs.iter().map(|p| p.1).collect();

    let a_perm: Vec<usize> = a_free.iter().chain(&a_con).copied().collect();
    let b_perm: Vec<usize> = b_con.iter().chain(&b_free).copied().collect();

    // a blocks grouped by contracted charges, as (free key, m, k, data)
    let mut a_groups: HashMap<Key, Vec<(Key, usize, usize, Vec<C64>)>> = HashMap::new();
    for (key, data) in a.blocks() {
        let shape = a.shape_of(key);
        let fk: Key = a_free.iter().map(|&i| key[i]).collect();
        let ck: Key = a_con.iter().map(|&i| key[i]).collect();
        let m: usize = a_free.iter().map(|&i| shape[i]).product();
        let k: usize = a_con.iter().map(|&i| shape[i]).product();
        let pdata = dense::permute(data, &shape, &a_perm);
        a_groups.entry(ck).or_default().push((fk, m, k, pdata));
    }

    let mut out: BTreeMap<Key, Vec<C64>> = BTreeMap::new();
    for (key, data) in b.blocks() {
        let ck: Key = b_con.iter().map(|&i| key[i]).collect();
        let Some(group) = a_groups.get(&ck) else { continue };
        let shape = b.shape_of(key);
        let fk: Key = b_free.iter().map(|&i| key[i]).collect();
        let k: usize = b_con.iter().map(|&i| shape[i]).product();
        let n: usize = b_free.iter().map(|&i| shape[i]).product();
        let pdata = dense::permute(data, &shape, &b_perm);
        for (afk, m, ka, adata) in group {
            debug_assert_eq!(*ka, k);
            let mut okey = afk.clone();
            okey.extend_from_slice(&fk);
            let dst = out
                .entry(okey)
                .or_insert_with(|| vec![C64::new(0.0, 0.0); m * n]);
            dense::gemm_acc(dst, adata, &pdata, *m, k, n);
        }
    }

    let legs = a_free
        .iter()
        .map(|&i| a.leg(i).clone())
        .chain(b_free.iter().map(|&i| b.leg(i).clone()))
        .collect();
    Ok(SymTensor::from_parts(legs, a.total_charge() + b.total_charge(), out))
}

/// Contracts and then reorders the result legs with `perm`.
pub fn contract_perm(a: &SymTensor, b: &SymTensor, pairs: &[(usize, usize)], perm: &[usize]) -> Result<SymTensor> {
    Ok(contract(a, b, pairs)?.permute(perm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leg::{ChargeLeg, Direction};
    use rand::SeedableRng;

    fn leg(dir: Direction, s: &[(i32, usize)]) -> ChargeLeg {
        ChargeLeg::new(dir, s.to_vec()).unwrap()
    }

    #[test]
    fn matrix_product_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x = leg(Direction::Out, &[(-1, 2), (0, 1), (1, 3)]);
        let y = leg(Direction::In, &[(-1, 1), (1, 2)]);
        let z = leg(Direction::In, &[(0, 2), (2, 1)]);
        let a = SymTensor::random(vec![x.clone(), y.clone()], 0, &mut rng);
        let b = SymTensor::random(vec![y.dual(), z.clone()], 1, &mut rng);
        let c = contract(&a, &b, &[(1, 0)]).unwrap();
        assert_eq!(c.total_charge(), 1);
        let (ad, bd, cd) = (a.to_dense(), b.to_dense(), c.to_dense());
        let (m, k, n) = (x.dim(), y.dim(), z.dim());
        for i in 0..m {
            for j in 0..n {
                let v: C64 = (0..k).map(|l| ad[i * k + l] * bd[l * n + j]).sum();
                assert!((v - cd[i * n + j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn full_contraction_is_inner_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let legs = vec![
            leg(Direction::Out, &[(0, 2), (1, 1)]),
            leg(Direction::In, &[(0, 1), (1, 2)]),
            leg(Direction::Out, &[(-1, 1), (1, 1)]),
        ];
        let t = SymTensor::random(legs, 1, &mut rng);
        let s = contract(&t.conj(), &t, &[(0, 0), (1, 1), (2, 2)]).unwrap().scalar().unwrap();
        assert!((s.re - t.norm_sqr()).abs() < 1e-12);
        assert!(s.im.abs() < 1e-12);
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let l0 = leg(Direction::In, &[(-2, 1), (0, 2)]);
        let l1 = leg(Direction::Out, &[(-1, 1), (1, 3)]);
        let t = SymTensor::random(vec![l0.clone(), l1], -1, &mut rng);
        let id = SymTensor::identity(&l0);
        let r = contract(&id, &t, &[(1, 0)]).unwrap();
        assert!(r.approx_eq(&t, 1e-14));
        assert!(r.keys().eq(t.keys()));
    }

    #[test]
    fn rejects_mismatched_legs() {
        let a = SymTensor::zeros(vec![leg(Direction::Out, &[(0, 1)])], 0);
        let b = SymTensor::zeros(vec![leg(Direction::Out, &[(0, 1)])], 0);
        assert!(matches!(contract(&a, &b, &[(0, 0)]), Err(TensorError::LegMismatch { .. })));
        let c = SymTensor::zeros(vec![leg(Direction::In, &[(0, 2)])], 0);
        assert!(contract(&a, &c, &[(0, 0)]).is_err());
    }
}
