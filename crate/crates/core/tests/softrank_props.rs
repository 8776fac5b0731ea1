mod common;

use common::{descending_rho, fd_jacobian, max_abs_diff, FaceOracle};
use proptest::prelude::*;
use softrank_gbm::softrank::hard_ranks;
use softrank_gbm::{isotonic_pav, permutahedron_project, soft_rank, soft_rank_vjp};

/// Nonincreasing isotonic regression by the min-max formula
/// `v_i = min_{j ≤ i} max_{l ≥ i} mean(u[j..=l])`.
fn isotonic_minmax(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mean = |j: usize, l: usize| u[j..=l].iter().sum::<f64>() / (l - j + 1) as f64;
    (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| (i..n).map(|l| mean(j, l)).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn theta_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![-10.0..10.0f64, (-4i32..4).prop_map(|v| v as f64)],
        1..=max_len,
    )
}

fn eps_strategy() -> impl Strategy<Value = f64> {
    (-3.0..3.0f64).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn pav_matches_minmax_formula(u in prop::collection::vec(-50.0..50.0f64, 1..12)) {
        let (v, blocks) = isotonic_pav(&u).unwrap();
        prop_assert!(max_abs_diff(&v, &isotonic_minmax(&u)) < 1e-9);
        prop_assert!(blocks.means.windows(2).all(|w| w[0] > w[1]));
        prop_assert_eq!(blocks.ranges().map(|r| r.len()).sum::<usize>(), u.len());
    }

    #[test]
    fn matches_face_oracle(theta in theta_strategy(5), eps in eps_strategy()) {
        let oracle = FaceOracle::new(5);
        let got = soft_rank(&theta, eps).unwrap().soft_ranks;
        prop_assert!(max_abs_diff(&got, &oracle.soft_rank(&theta, eps)) < 1e-8);
    }

    #[test]
    fn general_rho_projection_matches_oracle(
        z in prop::collection::vec(-5.0..5.0f64, 1..=5),
        steps in prop::collection::vec(0.1..3.0f64, 5),
    ) {
        let n = z.len();
        let mut rho: Vec<f64> = steps[..n].iter().scan(0.0, |acc, s| { *acc += s; Some(*acc) }).collect();
        rho.reverse();
        let (y, _, _) = permutahedron_project(&z, &rho).unwrap();
        let oracle = FaceOracle::new(5);
        prop_assert!(max_abs_diff(&y, &oracle.project(&z, &rho)) < 1e-9);
    }

    #[test]
    fn conserves_sum_and_bounds(theta in theta_strategy(30), eps in eps_strategy()) {
        let n = theta.len() as f64;
        let r = soft_rank(&theta, eps).unwrap().soft_ranks;
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() <= 1e-9 * n);
        prop_assert!(r.iter().all(|&v| v >= 1.0 - 1e-9 && v <= n + 1e-9));
    }

    #[test]
    fn preserves_order(theta in theta_strategy(30), eps in eps_strategy()) {
        let r = soft_rank(&theta, eps).unwrap().soft_ranks;
        for i in 0..theta.len() {
            for j in 0..theta.len() {
                if theta[i] > theta[j] {
                    prop_assert!(r[i] <= r[j]);
                }
                if theta[i] == theta[j] {
                    prop_assert_eq!(r[i], r[j]);
                }
            }
        }
    }

    #[test]
    fn translation_invariant(theta in theta_strategy(20), eps in eps_strategy(), c in -5.0..5.0f64) {
        let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
        let a = soft_rank(&theta, eps).unwrap().soft_ranks;
        let b = soft_rank(&shifted, eps).unwrap().soft_ranks;
        prop_assert!(max_abs_diff(&a, &b) < 1e-8 * (1.0 + c.abs() / eps));
    }

    #[test]
    fn permutation_equivariant(theta in theta_strategy(20), eps in eps_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..theta.len()).collect();
        perm.shuffle(&mut common::rng(seed));
        let permuted: Vec<f64> = perm.iter().map(|&i| theta[i]).collect();
        let a = soft_rank(&theta, eps).unwrap().soft_ranks;
        let b = soft_rank(&permuted, eps).unwrap().soft_ranks;
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((b[k] - a[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn scale_covariant(theta in theta_strategy(20), eps in 0.01..10.0f64, a in 0.1..10.0f64) {
        let scaled: Vec<f64> = theta.iter().map(|t| a * t).collect();
        let x = soft_rank(&theta, eps).unwrap().soft_ranks;
        let y = soft_rank(&scaled, a * eps).unwrap().soft_ranks;
        prop_assert!(max_abs_diff(&x, &y) < 1e-8);
    }

    #[test]
    fn vjp_is_transpose_of_fd_jacobian(theta in prop::collection::vec(-3.0..3.0f64, 2..7), eps in 0.1..5.0f64) {
        prop_assume!(common::away_from_pav_boundaries(&theta, eps, 1e-2));
        let result = soft_rank(&theta, eps).unwrap();
        let jac = fd_jacobian(|t| soft_rank(t, eps).unwrap().soft_ranks, &theta, 1e-5);
        for i in 0..theta.len() {
            let mut e = vec![0.0; theta.len()];
            e[i] = 1.0;
            let row = soft_rank_vjp(&result, &e, eps).unwrap();
            for (j, col) in jac.iter().enumerate() {
                prop_assert!((row[j] - col[i]).abs() < 1e-6, "J[{}][{}]: {} vs {}", i, j, row[j], col[i]);
            }
        }
    }
}

#[test]
fn jacobian_is_symmetric_and_annihilates_constants() {
    let theta = [0.3, 0.1, 0.25, -0.4, 0.2];
    let eps = 1.0;
    let result = soft_rank(&theta, eps).unwrap();
    let n = theta.len();
    let jac: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            soft_rank_vjp(&result, &e, eps).unwrap()
        })
        .collect();
    assert!(result.blocks.iter().any(|b| b.len() > 1));
    for (i, row) in jac.iter().enumerate() {
        assert!(row.iter().sum::<f64>().abs() < 1e-12);
        for (j, v) in row.iter().enumerate() {
            assert!((v - jac[j][i]).abs() < 1e-12);
        }
    }
}

#[test]
fn small_epsilon_gives_hard_ranks_with_ties_by_index() {
    let theta = [0.5, 2.0, -1.0, 0.7];
    assert_eq!(soft_rank(&theta, 1e-6).unwrap().soft_ranks, hard_ranks(&theta));
    assert_eq!(hard_ranks(&theta), vec![3.0, 1.0, 4.0, 2.0]);
}

#[test]
fn large_epsilon_collapses_to_mean_rank() {
    let r = soft_rank(&[3.0, -1.0, 0.5, 2.0], 1e6).unwrap().soft_ranks;
    assert!(r.iter().all(|v| (v - 2.5).abs() < 1e-5));
}

#[test]
fn oracle_handles_descending_rho_helper() {
    assert_eq!(descending_rho(3), vec![3.0, 2.0, 1.0]);
    let oracle = FaceOracle::new(3);
    assert_eq!(oracle.project(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0]), vec![3.0, 2.0, 1.0]);
}
