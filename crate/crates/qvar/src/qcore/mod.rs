//! Dense statevector simulation with named registers.

mod density;
mod layout;
mod state;

pub use density::DensityMatrix;
pub use layout::{Register, RegisterLayout};
pub use state::{grover_rudolph_prepare, qft_matrix, StateVector};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Largest entry of |U^dagger U - I|.
pub fn unitarity_error(u: &DMatrix<Complex64>) -> f64 {
    let prod = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

pub fn real_unitarity_error(u: &DMatrix<f64>) -> f64 {
    let prod = u.transpose() * u;
    let mut worst = 0.0f64;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - target).abs());
        }
    }
    worst
}
