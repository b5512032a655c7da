//! Library results checked against independent reference computations.

use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use tau2::linalg::{
    dinkelbach_value, lambda_max_gram, least_norm_solution, norm_l1, norm_l2, phi_map, tau2, tau_q, LeastNormSolver,
};
use tau2::prox::prox_sq_l1;
use tau2::sensing::{
    gen_matrix, mutual_coherence, stream_rng, Augmentation, MatrixSpec, Stream,
};
use tau2::DenseMatrix;

mod common;
use common::prox_oracle;

/// Cyclic Jacobi eigenvalue iteration for a small symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[test]
fn power_iteration_matches_jacobi() {
    let mut rng = stream_rng(42, Stream::Matrix);
    let data: Vec<f64> = (0..8 * 16).map(|_| StandardNormal.sample(&mut rng)).collect();
    let a = DenseMatrix::new(8, 16, data).unwrap();
    // AAᵀ shares the nonzero spectrum of AᵀA
    let aat: Vec<Vec<f64>> = (0..8)
        .map(|i| (0..8).map(|j| tau2::linalg::dot(a.row(i), a.row(j))).collect())
        .collect();
    let want = jacobi_eigenvalues(aat).into_iter().fold(f64::MIN, f64::max);
    let got = lambda_max_gram(&a, 1e-10, 100_000).unwrap();
    assert!((got - want).abs() <= 1e-8 * want, "{got} vs {want}");
}

#[test]
fn power_iteration_simple_matrices() {
    assert!((lambda_max_gram(&DenseMatrix::identity(3), 1e-10, 1000).unwrap() - 1.0).abs() < 1e-10);
    let d = DenseMatrix::from_diag(&[1.0, 2.0, 3.0]);
    assert!((lambda_max_gram(&d, 1e-10, 10_000).unwrap() - 9.0).abs() < 1e-8);
}

#[test]
fn prox_matches_projected_gradient_oracle() {
    let mut rng = stream_rng(7, Stream::Solver);
    for k in 0..200 {
        let n = [1usize, 2, 3, 6][k % 4];
        let beta = rng.random_range(0.01..3.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let got = prox_sq_l1(&x, beta);
        let want = prox_oracle(&x, beta);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "x={x:?} beta={beta} got={got:?} want={want:?}");
    }
}

#[test]
fn gaussian_rows_have_the_requested_correlation() {
    // sample covariance of two columns over many rows
    let spec = MatrixSpec::gaussian(4000, 6, 0.5, 3);
    let a = gen_matrix(&spec).unwrap();
    let (mut c01, mut v0, mut v1) = (0.0, 0.0, 0.0);
    for i in 0..a.rows() {
        let r = a.row(i);
        c01 += r[0] * r[1];
        v0 += r[0] * r[0];
        v1 += r[1] * r[1];
    }
    let m = a.rows() as f64;
    assert!((v0 / m - 1.0).abs() < 0.08);
    assert!((v1 / m - 1.0).abs() < 0.08);
    assert!((c01 / m - 0.5).abs() < 0.06, "{}", c01 / m);
}

#[test]
fn larger_e_gives_more_coherent_dct_columns() {
    let lo = mutual_coherence(&gen_matrix(&MatrixSpec::dct(64, 256, 1.0, 5)).unwrap());
    let hi = mutual_coherence(&gen_matrix(&MatrixSpec::dct(64, 256, 20.0, 5)).unwrap());
    assert!(hi > lo);
    assert!(hi > 0.99);
}

#[test]
fn augmented_dct_keeps_rank_64() {
    for aug in [Augmentation::Copy, Augmentation::Combine] {
        let spec = MatrixSpec::rank_deficient(64, 1024, 10.0, 5, aug, 1);
        let a = gen_matrix(&spec).unwrap();
        assert_eq!((a.rows(), a.cols()), (69, 1024));
        let sv = a.singular_values();
        let rank = sv.iter().filter(|s| **s > 1e-10 * sv[0]).count();
        assert_eq!(rank, 64, "{aug:?}");
        assert_eq!(LeastNormSolver::new(&a).rank(), 64);
    }
}

#[test]
fn least_norm_on_example_system() {
    let (a, b) = tau2::harness::example1_system();
    let x = least_norm_solution(&a, &b, 1e-10).unwrap();
    let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(u, v)| u - v).collect();
    assert!(norm_l2(&r) <= 1e-10);
    // the kernel is spanned by (1,1,1,−2,−4,2)
    let v = [1.0, 1.0, 1.0, -2.0, -4.0, 2.0];
    assert!(tau2::linalg::dot(&x, &v).abs() < 1e-9);
}

fn nonzero_vec(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, n).prop_filter("nonzero", |v| norm_l1(v) > 1e-6)
}

proptest! {
    #[test]
    fn tau2_is_bounded_and_scale_invariant(x in nonzero_vec(1..40), c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let t = tau_q(&x, 2.0).unwrap();
        prop_assert!(t >= 1.0 - 1e-12 && t <= x.len() as f64 + 1e-12);
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        prop_assert!((tau2(&y).unwrap() - t).abs() <= 1e-12 * t);
        prop_assert!(dinkelbach_value(&x, t).abs() <= 1e-10 * norm_l1(&x).powi(2));
    }

    #[test]
    fn phi_is_5n_lipschitz(x in nonzero_vec(2..30), dir in prop::collection::vec(-1.0f64..1.0, 30), scale in 1e-6f64..10.0) {
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + scale * d).collect();
        prop_assume!(norm_l1(&y) > 0.0);
        let d = norm_l2(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        let px = phi_map(&x).unwrap();
        let py = phi_map(&y).unwrap();
        let dp = norm_l2(&px.iter().zip(&py).map(|(a, b)| a - b).collect::<Vec<_>>());
        prop_assert!(dp <= 5.0 * x.len() as f64 * d * (1.0 + 1e-12));
    }

    #[test]
    fn least_norm_is_orthogonal_to_the_kernel(seed in 0u64..1000, m in 2usize..6, extra in 1usize..5) {
        let n = m + extra;
        let mut rng = stream_rng(seed, Stream::Matrix);
        // duplicate a row to make A rank deficient
        let mut rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        rows.push(rows[0].clone());
        let a = DenseMatrix::from_rows(&rows).unwrap();
        let xt: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let solver = LeastNormSolver::new(&a);
        let x = solver.solve(&a.matvec(&xt)).unwrap();
        for v in solver.kernel_basis() {
            prop_assert!(tau2::linalg::dot(&x, &v).abs() < 1e-9);
            prop_assert!(norm_l2(&a.matvec(&v)) < 1e-10);
        }
    }
}
