use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prox24::baselines::{magnitude_24, wanda_24, ActivationStats};
use prox24::bench::log_grid;
use prox24::tensor::{
    apply_mask_snap, project_24, prox_map, reg24_total, regw0_value, sparsity_ratio_24,
};
use prox24::{enum_alm, Block4, MaskTensor, ProxParams, RegW0Params, WeightTensor};

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![-3.0..3.0f64, (0.05..3.0f64).prop_map(|v| -v), 0.05..3.0f64,]
}

fn block() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(coord())
}

fn lambda() -> impl Strategy<Value = f64> {
    (-3.0..1.0f64).prop_map(|e| 10f64.powf(e))
}

fn tensor(rows: usize, blocks: usize) -> impl Strategy<Value = WeightTensor> {
    prop::collection::vec(coord(), rows * blocks * 4)
        .prop_map(move |d| WeightTensor::new(rows, blocks * 4, d).unwrap())
}

fn mask_24(rows: usize, blocks: usize) -> impl Strategy<Value = MaskTensor> {
    // One of the six 2-of-4 patterns per block.
    const PATTERNS: [[bool; 4]; 6] = [
        [true, true, false, false],
        [true, false, true, false],
        [true, false, false, true],
        [false, true, true, false],
        [false, true, false, true],
        [false, false, true, true],
    ];
    prop::collection::vec(0..6usize, rows * blocks).prop_map(move |p| {
        let bits = p.iter().flat_map(|&k| PATTERNS[k]).collect();
        MaskTensor::new(rows, blocks * 4, bits).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enum_alm_equivariant(y in block(), lam in lambda(), perm in Just([0usize, 1, 2, 3]).prop_shuffle(), flips in prop::array::uniform4(any::<bool>())) {
        let params = ProxParams::bench(lam).unwrap();
        let base = enum_alm(&Block4::new(y).unwrap(), &params);
        let sign = |i: usize| if flips[i] { -1.0 } else { 1.0 };
        let moved: [f64; 4] = std::array::from_fn(|i| sign(i) * y[perm[i]]);
        let sol = enum_alm(&Block4::new(moved).unwrap(), &params);
        for i in 0..4 {
            prop_assert!((sol.w[i] - sign(i) * base.w[perm[i]]).abs() <= 1e-12,
                "{:?} vs {:?}", sol.w, base.w);
        }
        prop_assert!((sol.objective - base.objective).abs() <= 1e-12);
    }

    #[test]
    fn enum_alm_shrinks_without_sign_change(y in block(), lam in lambda()) {
        let sol = enum_alm(&Block4::new(y).unwrap(), &ProxParams::bench(lam).unwrap());
        for i in 0..4 {
            prop_assert!(sol.w[i].abs() <= y[i].abs());
            prop_assert!(sol.w[i] * y[i] >= 0.0);
        }
        prop_assert!(sol.nonzeros() >= 2.min(y.iter().filter(|v| **v != 0.0).count()));
    }

    #[test]
    fn prox_map_is_blockwise(w in tensor(3, 4), lam in lambda(), r in 0..3usize, b in 0..4usize, fresh in block()) {
        let params = ProxParams::training(lam).unwrap();
        let (base, _) = prox_map(&w, lam, &params).unwrap();
        let mut data = w.data().to_vec();
        let start = r * 16 + b * 4;
        data[start..start + 4].copy_from_slice(&fresh);
        let (changed, _) = prox_map(&WeightTensor::new(3, 16, data).unwrap(), lam, &params).unwrap();
        for i in 0..base.len() {
            if i < start || i >= start + 4 {
                prop_assert_eq!(base.data()[i], changed.data()[i]);
            }
        }
        let single = enum_alm(&Block4::new(fresh).unwrap(), &params);
        prop_assert_eq!(&changed.data()[start..start + 4], &single.w[..]);
    }

    #[test]
    fn prox_map_fixes_sparse_tensors(w in tensor(2, 3), m in mask_24(2, 3), lam in lambda()) {
        let sparse = apply_mask_snap(&w, &m).unwrap();
        let (out, _) = prox_map(&sparse, lam, &ProxParams::training(lam).unwrap()).unwrap();
        prop_assert_eq!(out, sparse);
    }

    #[test]
    fn projection_and_snap(w in tensor(3, 3)) {
        let m = project_24(&w);
        prop_assert!(m.is_24_valid());
        let snapped = apply_mask_snap(&w, &m).unwrap();
        prop_assert_eq!(sparsity_ratio_24(&snapped, 0.0), 1.0);
        prop_assert_eq!(project_24(&snapped), m.clone());
        for (i, &keep) in m.bits().iter().enumerate() {
            let expected = if keep { w.data()[i] } else { 0.0 };
            prop_assert_eq!(snapped.data()[i].to_bits(), expected.to_bits());
        }
        prop_assert_eq!(magnitude_24(&w), m);
    }

    #[test]
    fn joint_nullspace_is_the_constrained_set(w0 in tensor(2, 3), m in mask_24(2, 3), pick in 0..24usize, delta in 0.01..1.0f64) {
        let p = RegW0Params::new(1e-8, 1.0).unwrap();
        let feasible = apply_mask_snap(&w0, &m).unwrap();
        prop_assert_eq!(reg24_total(&feasible), 0.0);
        prop_assert_eq!(regw0_value(&feasible, &w0, &p).unwrap(), 0.0);

        let mut data = feasible.data().to_vec();
        data[pick] += delta;
        let moved = WeightTensor::new(2, 12, data).unwrap();
        let both = reg24_total(&moved) + regw0_value(&moved, &w0, &p).unwrap();
        if m.bits()[pick] {
            // a retained weight no longer equals W0
            prop_assert!(regw0_value(&moved, &w0, &p).unwrap() > 0.0);
        } else {
            // a third nonzero in the block
            prop_assert!(reg24_total(&moved) > 0.0 || w0.data()[pick] + delta == 0.0);
        }
        prop_assert!(both > 0.0);
    }

    #[test]
    fn wanda_matches_block_enumeration(w in tensor(2, 3), norms in prop::collection::vec(0.0..5.0f64, 12)) {
        let stats = ActivationStats::new(norms.clone()).unwrap();
        let m = wanda_24(&w, &stats).unwrap();
        prop_assert!(m.is_24_valid());
        for (b, chunk) in w.data().chunks(4).enumerate() {
            let c0 = (b % 3) * 4;
            let score = |i: usize| chunk[i].abs() * norms[c0 + i];
            // best pair by enumeration; ties prefer lower indices
            let mut best = (0, 1);
            for i in 0..4 {
                for j in (i + 1)..4 {
                    if score(i) + score(j) > score(best.0) + score(best.1) {
                        best = (i, j);
                    }
                }
            }
            let kept: Vec<usize> = (0..4).filter(|&i| m.bits()[b * 4 + i]).collect();
            let s_kept = score(kept[0]) + score(kept[1]);
            prop_assert!((s_kept - (score(best.0) + score(best.1))).abs() <= 1e-12);
        }
    }
}

#[test]
fn nonzeros_never_increase_along_the_path() {
    let grid = log_grid(1e-3, 10.0, 200).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut next = || rng.random_range(-2.0..2.0);
    for _ in 0..100 {
        let y = Block4::new([next(), next(), next(), next()]).unwrap();
        let mut prev = 4;
        for &lam in &grid {
            let n = enum_alm(&y, &ProxParams::bench(lam).unwrap()).nonzeros();
            assert!(n <= prev, "{y:?} at {lam}");
            prev = n;
        }
    }
}

#[test]
fn reg24_zero_iff_at_most_two_nonzeros() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut unit = || rng.random::<f64>();
    for trial in 0..1000 {
        let support = trial % 16;
        let w: [f64; 4] = std::array::from_fn(|i| {
            if support & (1 << i) != 0 {
                (0.01 + 5.0 * unit()) * if unit() < 0.5 { -1.0 } else { 1.0 }
            } else {
                0.0
            }
        });
        let r = prox24::reg24_block(&w).unwrap();
        let nnz = (support as u32).count_ones();
        assert_eq!(r == 0.0, nnz <= 2, "{w:?}");
    }
}
