use infsup_lab_core::infsup::{infsup_euclidean, infsup_weighted, pair_operators, pair_report, ElementPair, NormMode};
use infsup_lab_core::linalg::{sym_eig, DenseMatrix};
use infsup_lab_core::mesh::Mesh;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn permuted(a: &DenseMatrix<f64>, rows: &[usize], cols: &[usize]) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

#[test]
fn weighted_beta_ignores_dof_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mesh = Mesh::<f64>::unit_square(4).unwrap();
    for pair in ElementPair::ALL {
        let ops = pair_operators(pair, &mesh);
        let base = infsup_weighted(&ops.b, &ops.x_norm, &ops.m_norm).unwrap().beta;
        let mut pu: Vec<usize> = (0..ops.b.cols()).collect();
        let mut pp: Vec<usize> = (0..ops.b.rows()).collect();
        pu.shuffle(&mut rng);
        pp.shuffle(&mut rng);
        let b = permuted(&ops.b, &pp, &pu);
        let x = permuted(&ops.x_norm, &pu, &pu);
        let m = permuted(&ops.m_norm, &pp, &pp);
        let beta = infsup_weighted(&b, &x, &m).unwrap().beta;
        assert!((beta - base).abs() <= 1e-10, "{pair}: {base} vs {beta}");
    }
}

#[test]
fn euclidean_spectrum_pairs_with_block_eigenvalues() {
    let mesh = Mesh::<f64>::unit_square(2).unwrap();
    for pair in ElementPair::ALL {
        let ops = pair_operators(pair, &mesh);
        let (np, nu) = (ops.b.rows(), ops.b.cols());
        let report = infsup_euclidean(&ops.b).unwrap();
        let block = DenseMatrix::from_fn(np + nu, np + nu, |i, j| match (i < nu, j < nu) {
            (true, false) => ops.b[(j - nu, i)],
            (false, true) => ops.b[(i - nu, j)],
            _ => 0.0,
        });
        let eig = sym_eig(&block).unwrap();
        for (k, s) in report.sigma.iter().enumerate() {
            assert!((eig.values[k] - s).abs() <= 1e-10, "{pair} sigma {k}");
        }
    }
}

#[test]
fn mode_and_kernel_shapes() {
    for pair in ElementPair::ALL {
        let r = pair_report::<f64>(pair, 4, NormMode::Weighted).unwrap();
        assert!(r.kernel_dim_pressure >= 1, "{pair}");
        assert_eq!(r.worst_pressure_mode.len(), r.n_pressure());
        assert_eq!(r.pressure_kernel.cols(), r.kernel_dim_pressure);
        assert!(r.beta > 0.0 && r.beta <= r.sigma[0]);
    }
}

#[test]
fn f32_reports_track_f64() {
    let r64 = pair_report::<f64>(ElementPair::Mini, 2, NormMode::Euclidean).unwrap();
    let r32 = pair_report::<f32>(ElementPair::Mini, 2, NormMode::Euclidean).unwrap();
    assert_eq!(r32.numerical_rank, r64.numerical_rank);
    assert!((r32.beta as f64 - r64.beta).abs() <= 1e-4 * r64.beta);
}
