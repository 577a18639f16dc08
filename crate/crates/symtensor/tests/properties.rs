//! Block-sparse operations checked against the same operations on dense arrays.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symtensor::io::{read_tensor, write_tensor};
use symtensor::{contract, fuse, split, truncated_svd, ChargeLeg, Direction, SymTensor, Truncation, C64};

fn leg_strategy() -> impl Strategy<Value = ChargeLeg> {
    (any::<bool>(), prop::collection::vec((-2i32..=2, 1usize..=3), 1..=3)).prop_map(|(out, sectors)| {
        let dir = if out { Direction::Out } else { Direction::In };
        ChargeLeg::from_unsorted(dir, sectors).unwrap()
    })
}

fn tensor(legs: Vec<ChargeLeg>, charge: i32, seed: u64) -> SymTensor {
    SymTensor::random(legs, charge, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn row_major(dims: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

fn max_dense_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contraction_matches_dense(
        l0 in leg_strategy(), l1 in leg_strategy(), k in leg_strategy(), l2 in leg_strategy(),
        qa in -2i32..=2, qb in -2i32..=2, seed in any::<u64>(),
    ) {
        let a = tensor(vec![l0.clone(), l1.clone(), k.clone()], qa, seed);
        let b = tensor(vec![k.dual(), l2.clone()], qb, seed ^ 1);
        let c = contract(&a, &b, &[(2, 0)]).unwrap();
        prop_assert_eq!(c.total_charge(), qa + qb);
        for key in c.keys() {
            prop_assert!(c.satisfies_rule(key));
        }
        let (d0, d1, dk, d2) = (l0.dim(), l1.dim(), k.dim(), l2.dim());
        let (da, db) = (a.to_dense(), b.to_dense());
        let mut want = vec![C64::new(0.0, 0.0); d0 * d1 * d2];
        for i in 0..d0 {
            for j in 0..d1 {
                for m in 0..d2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for q in 0..dk {
                        acc += da[row_major(&[d0, d1, dk], &[i, j, q])] * db[row_major(&[dk, d2], &[q, m])];
                    }
                    want[row_major(&[d0, d1, d2], &[i, j, m])] = acc;
                }
            }
        }
        prop_assert!(max_dense_diff(&c.to_dense(), &want) < 1e-12);
    }

    #[test]
    fn permutation_matches_dense_transpose(
        l0 in leg_strategy(), l1 in leg_strategy(), l2 in leg_strategy(), q in -2i32..=2, seed in any::<u64>(),
    ) {
        let t = tensor(vec![l0.clone(), l1.clone(), l2.clone()], q, seed);
        let p = t.permute(&[2, 0, 1]);
        let dims = [l0.dim(), l1.dim(), l2.dim()];
        let (dt, dp) = (t.to_dense(), p.to_dense());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let x = dt[row_major(&dims, &[i, j, k])];
                    let y = dp[row_major(&[dims[2], dims[0], dims[1]], &[k, i, j])];
                    prop_assert_eq!(x, y);
                }
            }
        }
        prop_assert!(p.permute(&[1, 2, 0]).approx_eq(&t, 0.0));
    }

    #[test]
    fn svd_reconstructs_and_reports_discarded_weight(
        l0 in leg_strategy(), l1 in leg_strategy(), l2 in leg_strategy(),
        q in -2i32..=2, keep in 1usize..=6, seed in any::<u64>(),
    ) {
        let t = tensor(vec![l0, l1, l2], q, seed);
        prop_assume!(t.norm() > 0.0);
        let full = truncated_svd(&t, 1, Truncation::keep_all(None)).unwrap();
        let back = contract(&full.us(), &full.v, &[(1, 0)]).unwrap();
        prop_assert!(back.sub(&t).unwrap().norm() < 1e-10 * t.norm());
        prop_assert!(full.rel_err < 1e-12);

        let cut = truncated_svd(&t, 1, Truncation::keep_all(Some(keep))).unwrap();
        prop_assert!(cut.bond_dim() <= keep);
        let approx = contract(&cut.us(), &cut.v, &[(1, 0)]).unwrap();
        let err = approx.sub(&t).unwrap().norm() / t.norm();
        prop_assert!((err - cut.rel_err).abs() < 1e-10, "{} vs {}", err, cut.rel_err);
        let spectrum = full.spectrum();
        let discarded: f64 = spectrum.iter().skip(keep).map(|s| s * s).sum();
        prop_assert!((discarded.sqrt() / t.norm() - cut.rel_err).abs() < 1e-10);
    }

    #[test]
    fn fuse_then_split_is_identity(
        l0 in leg_strategy(), l1 in leg_strategy(), l2 in leg_strategy(), q in -2i32..=2, seed in any::<u64>(),
    ) {
        let t = tensor(vec![l0, l1, l2], q, seed);
        let (f, fusion) = fuse(&t, 1..3, Direction::Out).unwrap();
        prop_assert_eq!(f.rank(), 2);
        prop_assert!((f.norm() - t.norm()).abs() < 1e-12 * t.norm().max(1.0));
        let back = split(&f, 1, &fusion).unwrap();
        prop_assert!(back.approx_eq(&t, 0.0));
    }

    #[test]
    fn binary_format_round_trips(
        l0 in leg_strategy(), l1 in leg_strategy(), q in -2i32..=2, seed in any::<u64>(),
    ) {
        let t = tensor(vec![l0, l1], q, seed);
        let mut bytes = Vec::new();
        write_tensor(&t, &mut bytes).unwrap();
        let back = read_tensor(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back.total_charge(), t.total_charge());
        prop_assert_eq!(back.legs(), t.legs());
        prop_assert!(back.approx_eq(&t, 0.0));
    }

    #[test]
    fn inner_product_is_hermitian(
        l0 in leg_strategy(), l1 in leg_strategy(), q in -2i32..=2, seed in any::<u64>(),
    ) {
        let a = tensor(vec![l0.clone(), l1.clone()], q, seed);
        let b = tensor(vec![l0, l1], q, seed ^ 7);
        let ab = a.inner(&b).unwrap();
        let ba = b.inner(&a).unwrap();
        prop_assert!((ab - ba.conj()).norm() < 1e-12 * (1.0 + ab.norm()));
        prop_assert!((a.inner(&a).unwrap().re - a.norm_sqr()).abs() < 1e-10 * (1.0 + a.norm_sqr()));
    }
}
