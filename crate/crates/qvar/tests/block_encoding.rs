use qvar::block_encoding::{assemble_block_encoding, max_abs_entry, spectral_norm, verify_block_encoding, BlockEncoding, ANCILLAS, BRANCHES};
use qvar::market::{build_grid, MarketParams, Spacing};
use qvar::pde::{assemble_operator, TridiagonalOperator};
use qvar::qcore::real_unitarity_error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tridiagonal(n: usize, rng: &mut ChaCha8Rng) -> TridiagonalOperator {
    let len = 1 << n;
    let mut t = TridiagonalOperator {
        sub: (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        diag: (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        sup: (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        n,
    };
    t.sub[0] = 0.0;
    t.sup[len - 1] = 0.0;
    t
}

#[test]
fn random_tridiagonals_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..20 {
        let m = random_tridiagonal(1 + i % 5, &mut rng);
        let be = assemble_block_encoding(&m).unwrap();
        assert_eq!(be.a, ANCILLAS);
        assert!(verify_block_encoding(&be, &m) <= 1e-12);
        assert!(real_unitarity_error(&be.u) <= 1e-10);
    }
}

#[test]
fn entrywise_inner_product_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let m = random_tridiagonal(4, &mut rng);
    let be = assemble_block_encoding(&m).unwrap();
    let dense = m.to_dense();
    for i in 0..16 {
        for j in 0..16 {
            assert!((be.u[(i, j)] - dense[(i, j)] / be.gamma).abs() < 1e-12);
        }
    }
}

#[test]
fn gamma_is_padded_branch_count_times_max_entry() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in 1..=5 {
        let m = random_tridiagonal(n, &mut rng);
        let be = assemble_block_encoding(&m).unwrap();
        let max = m.to_dense().iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert_eq!(max_abs_entry(&m), max);
        assert!((be.gamma - BRANCHES as f64 * max).abs() < 1e-15);
    }
}

#[test]
fn market_operator_certifies() {
    let p = MarketParams::new(0.05, 0.05, 0.4, 1.0, 0.5, 1.0 / 64.0).unwrap();
    for n in 2..=5 {
        let grid = build_grid(0.0, 4.0, n, Spacing::Uniform).unwrap();
        let m = assemble_operator(&p, &grid).unwrap().plus_identity();
        let be = assemble_block_encoding(&m).unwrap();
        assert!(be.eps <= 1e-12);
    }
}

#[test]
fn halved_gamma_gives_half_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let m = random_tridiagonal(3, &mut rng);
    let mut be = assemble_block_encoding(&m).unwrap();
    be.gamma *= 0.5;
    let half = spectral_norm(&m.to_dense()) / 2.0;
    assert!((verify_block_encoding(&be, &m) - half).abs() < 1e-12);
}

#[test]
fn perturbation_sweep_is_monotone_and_banded() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let m = random_tridiagonal(3, &mut rng);
    let deltas = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];
    let errs: Vec<f64> = deltas.iter().map(|&d| BlockEncoding::perturbed(&m, 1, 3, d).eps).collect();
    for w in errs.windows(2) {
        assert!(w[1] > w[0], "{errs:?}");
    }
    assert!((1e-8..=1e-4).contains(&errs[2]), "{}", errs[2]);
    for d in deltas {
        let be = BlockEncoding::perturbed(&m, 1, 3, d);
        assert!(real_unitarity_error(&be.u) < 1e-10);
    }
}
