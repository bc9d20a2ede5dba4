use nalgebra::DMatrix;
use num_complex::Complex64;
use qvar::qcore::{grover_rudolph_prepare, qft_matrix, unitarity_error, RegisterLayout, StateVector};
use qvar::QvarError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_state(layout: RegisterLayout, rng: &mut ChaCha8Rng) -> StateVector {
    let raw: Vec<Complex64> = (0..layout.dim()).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(raw.iter().map(|z| z / norm).collect(), layout).unwrap()
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    a.qr().q()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn pauli_x_flips_zero() {
    let layout = RegisterLayout::new(&[("q", 1)]).unwrap();
    let mut s = StateVector::zero(layout);
    let x = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    s.apply_unitary(&["q"], &x).unwrap();
    assert_eq!(s.amplitudes, vec![c(0.0, 0.0), c(1.0, 0.0)]);
}

#[test]
fn identity_leaves_state_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let layout = RegisterLayout::new(&[("a", 2), ("b", 1)]).unwrap();
    let s = random_state(layout, &mut rng);
    let mut t = s.clone();
    t.apply_unitary(&["a"], &DMatrix::identity(4, 4)).unwrap();
    assert!(max_diff(&s.amplitudes, &t.amplitudes) < 1e-15);
}

#[test]
fn random_unitary_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let layout = RegisterLayout::new(&[("a", 1), ("b", 2), ("c", 1)]).unwrap();
    for _ in 0..10 {
        let s = random_state(layout.clone(), &mut rng);
        let u = random_unitary(4, &mut rng);
        let mut t = s.clone();
        t.apply_unitary(&["c", "a"], &u).unwrap();
        assert!((t.norm_sqr() - 1.0).abs() < 1e-12);
        t.apply_unitary(&["c", "a"], &u.adjoint()).unwrap();
        assert!(max_diff(&s.amplitudes, &t.amplitudes) < 1e-12);
    }
}

#[test]
fn non_unitary_rejected() {
    let layout = RegisterLayout::new(&[("q", 1)]).unwrap();
    let mut s = StateVector::zero(layout);
    let m = DMatrix::from_element(2, 2, c(1.0, 0.0));
    assert!(matches!(s.apply_unitary(&["q"], &m), Err(QvarError::NotUnitary(_))));
}

#[test]
fn apply_unitary_matches_kronecker_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layout = RegisterLayout::new(&[("a", 1), ("b", 2)]).unwrap();
    let s = random_state(layout, &mut rng);
    let u = random_unitary(4, &mut rng);
    let mut t = s.clone();
    t.apply_unitary(&["b"], &u).unwrap();
    let full = DMatrix::<Complex64>::identity(2, 2).kronecker(&u);
    let expect = &full * nalgebra::DVector::from_vec(s.amplitudes.clone());
    assert!(max_diff(&t.amplitudes, expect.as_slice()) < 1e-12);
}

#[test]
fn qft_of_zero_is_uniform() {
    let layout = RegisterLayout::new(&[("r", 4)]).unwrap();
    let mut s = StateVector::zero(layout);
    s.qft("r").unwrap();
    for a in &s.amplitudes {
        assert!((a - c(0.25, 0.0)).norm() < 1e-14);
    }
}

#[test]
fn qft_basis_state_matches_dense_dft() {
    let layout = RegisterLayout::new(&[("r", 3)]).unwrap();
    for j in 0..8 {
        let mut s = StateVector::basis(layout.clone(), j);
        s.qft("r").unwrap();
        for k in 0..8 {
            let expect = Complex64::from_polar(1.0 / 8f64.sqrt(), 2.0 * PI * (j * k) as f64 / 8.0);
            assert!((s.amplitudes[k] - expect).norm() < 1e-12);
        }
    }
}

#[test]
fn qft_on_sub_register_matches_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let layout = RegisterLayout::new(&[("a", 2), ("r", 3)]).unwrap();
    let s = random_state(layout, &mut rng);
    let mut t = s.clone();
    t.qft("r").unwrap();
    let mut u = s.clone();
    u.apply_unitary(&["r"], &qft_matrix(3)).unwrap();
    assert!(max_diff(&t.amplitudes, &u.amplitudes) < 1e-12);
    t.inverse_qft("r").unwrap();
    assert!(max_diff(&t.amplitudes, &s.amplitudes) < 1e-12);
}

#[test]
fn qft_matrix_inverse_is_identity() {
    for bits in 1..=8 {
        let f = qft_matrix(bits);
        assert!(unitarity_error(&f) < 1e-12, "width {bits}");
    }
}

#[test]
fn partial_trace_of_product_state() {
    let layout = RegisterLayout::new(&[("a", 1), ("b", 1)]).unwrap();
    let (a, b) = ([0.6, 0.8], [c(0.0, 1.0) * 0.5f64.sqrt(), c(0.5f64.sqrt(), 0.0)]);
    let amps = (0..4).map(|i| b[i & 1] * a[i >> 1]).collect();
    let s = StateVector::from_amplitudes(amps, layout).unwrap();
    let rho = s.partial_trace(&["b"]).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((rho.entries[(i, j)] - b[i] * b[j].conj()).norm() < 1e-14);
        }
    }
}

#[test]
fn bell_state_reduces_to_maximally_mixed() {
    let layout = RegisterLayout::new(&[("a", 1), ("b", 1)]).unwrap();
    let h = 0.5f64.sqrt();
    let s = StateVector::from_amplitudes(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)], layout).unwrap();
    for keep in ["a", "b"] {
        let rho = s.partial_trace(&[keep]).unwrap();
        assert!((rho.entries[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho.entries[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(rho.entries[(0, 1)].norm() < 1e-15);
        rho.validate().unwrap();
    }
}

#[test]
fn partial_trace_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layout = RegisterLayout::new(&[("a", 1), ("b", 1), ("c", 1)]).unwrap();
    for _ in 0..5 {
        let s = random_state(layout.clone(), &mut rng);
        let rho = s.partial_trace(&["c", "a"]).unwrap();
        for (r, (c1, a1)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            for (col, (c2, a2)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                let mut acc = c(0.0, 0.0);
                for b in 0..2 {
                    acc += s.amplitudes[a1 << 2 | b << 1 | c1] * s.amplitudes[a2 << 2 | b << 1 | c2].conj();
                }
                assert!((rho.entries[(r, col)] - acc).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn partial_trace_over_nothing_is_projector() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let layout = RegisterLayout::new(&[("a", 2), ("b", 1)]).unwrap();
    let s = random_state(layout, &mut rng);
    let rho = s.partial_trace(&["a", "b"]).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            assert!((rho.entries[(i, j)] - s.amplitudes[i] * s.amplitudes[j].conj()).norm() < 1e-12);
        }
    }
}

#[test]
fn grover_rudolph_examples() {
    let s = grover_rudolph_prepare(&[1.0; 8]).unwrap();
    for a in &s.amplitudes {
        assert!((a.re - 8f64.sqrt().recip()).abs() < 1e-14);
    }
    let s = grover_rudolph_prepare(&[1.0, 0.0, 0.0, 0.0]).unwrap();
    assert!((s.amplitudes[0].re - 1.0).abs() < 1e-15);
    let s = grover_rudolph_prepare(&[1.0, 2.0, 2.0, 4.0]).unwrap();
    for (a, e) in s.amplitudes.iter().zip([0.2, 0.4, 0.4, 0.8]) {
        assert!((a.re - e).abs() < 1e-14 && a.im == 0.0);
    }
    assert!(grover_rudolph_prepare(&[0.0; 4]).is_err());
    assert!(grover_rudolph_prepare(&[1.0, -1.0]).is_err());
}

#[test]
fn exact_distributions() {
    let s = StateVector::zero(RegisterLayout::new(&[("q", 1)]).unwrap());
    assert_eq!(s.exact_distribution("q").unwrap(), vec![1.0, 0.0]);
    let layout = RegisterLayout::new(&[("q", 2)]).unwrap();
    let u = StateVector::from_amplitudes(vec![c(0.5, 0.0); 4], layout).unwrap();
    assert_eq!(u.exact_distribution("q").unwrap(), vec![0.25; 4]);
}

#[test]
fn sampling_frequency_within_binomial_bound() {
    let layout = RegisterLayout::new(&[("q", 1)]).unwrap();
    let s = StateVector::from_amplitudes(vec![c(0.3f64.sqrt(), 0.0), c(0.7f64.sqrt(), 0.0)], layout).unwrap();
    let counts = s.measure_register("q", 100_000, 11).unwrap();
    let f0 = counts[&0] as f64 / 1e5;
    assert!((f0 - 0.3).abs() < 0.01);
    assert_eq!(counts, s.measure_register("q", 100_000, 11).unwrap());
}

#[test]
fn serialization_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let layout = RegisterLayout::new(&[("index", 2), ("price", 3)]).unwrap();
    let s = random_state(layout, &mut rng);
    let bytes = s.to_bytes();
    assert_eq!(StateVector::from_bytes(&bytes).unwrap(), s);
    assert!(StateVector::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    assert!(StateVector::from_bytes(b"nope").is_err());
}

#[test]
fn layout_enforces_cap_and_ordering() {
    assert!(matches!(
        RegisterLayout::with_cap(&[("a", 10), ("b", 10)], 16),
        Err(QvarError::QubitBudget { need: 20, cap: 16 })
    ));
    assert!(RegisterLayout::new(&[("a", 1), ("a", 1)]).is_err());
    let layout = RegisterLayout::new(&[("hi", 2), ("lo", 3)]).unwrap();
    let idx = layout.compose(&[("hi", 3), ("lo", 1)]).unwrap();
    assert_eq!(idx, 0b11_001);
    assert_eq!(layout.read(idx, layout.get("hi").unwrap()), 3);
}

#[test]
fn unnormalized_state_rejected() {
    let layout = RegisterLayout::new(&[("q", 1)]).unwrap();
    assert!(StateVector::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)], layout).is_err());
}
