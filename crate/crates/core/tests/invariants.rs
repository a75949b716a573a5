use infsup_lab_core::linalg::{svd, svd_thin, sym_eig, DenseMatrix};
use infsup_lab_core::verify::fit_slope;
use proptest::prelude::*;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DenseMatrix<f64>> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(-1.0f64..1.0, m * n).prop_map(move |v| DenseMatrix::from_row_major(m, n, v).unwrap())
    })
}

fn orthogonality_defect(q: &DenseMatrix<f64>) -> f64 {
    q.transpose().matmul(q).sub(&DenseMatrix::identity(q.cols())).frobenius_norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn svd_reconstructs_and_is_orthogonal(a in matrix(60, 40)) {
        let s = svd(&a).unwrap();
        let scale = a.frobenius_norm().max(1.0);
        prop_assert!(s.reconstruct().sub(&a).frobenius_norm() <= 1e-12 * scale);
        prop_assert!(orthogonality_defect(&s.u) <= 1e-12);
        prop_assert!(orthogonality_defect(&s.v) <= 1e-12);
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.sigma.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn rank_deficient_products_have_a_kernel(x in matrix(30, 6), cols in 7usize..20, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let y = DenseMatrix::from_fn(x.cols(), cols, |_, _| rng.gen_range(-1.0..1.0));
        let a = x.matmul(&y);
        let s = svd_thin(&a).unwrap();
        prop_assert!(s.numerical_rank <= x.cols().min(x.rows()));
        prop_assert!(s.reconstruct().sub(&a).frobenius_norm() <= 1e-12 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn block_eigenvalues_pair_with_singular_values(a in matrix(12, 9)) {
        let (m, n) = (a.rows(), a.cols());
        let block = DenseMatrix::from_fn(m + n, m + n, |i, j| match (i < n, j < n) {
            (true, false) => a[(j - n, i)],
            (false, true) => a[(i - n, j)],
            _ => 0.0,
        });
        let eig = sym_eig(&block).unwrap();
        let s = svd(&a).unwrap();
        for (k, sigma) in s.sigma.iter().enumerate() {
            prop_assert!((eig.values[k] - sigma).abs() <= 1e-10);
            prop_assert!((eig.values[m + n - 1 - k] + sigma).abs() <= 1e-10);
        }
    }

    #[test]
    fn slope_is_scale_invariant(
        errs in prop::collection::vec(1e-6f64..1.0, 3..6),
        scale in 1e-3f64..1e3,
    ) {
        let hs: Vec<f64> = (0..errs.len()).map(|k| 0.5f64.powi(k as i32 + 2)).collect();
        let scaled: Vec<f64> = errs.iter().map(|e| e * scale).collect();
        let a = fit_slope(&hs, &errs).unwrap();
        let b = fit_slope(&hs, &scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn slope_recovers_power_laws(p in -1.0f64..4.0, c in 0.01f64..100.0) {
        let hs = [0.25, 0.125, 0.0625, 0.03125];
        let es: Vec<f64> = hs.iter().map(|h: &f64| c * h.powf(p)).collect();
        prop_assert!((fit_slope(&hs, &es).unwrap() - p).abs() <= 1e-10);
    }
}
