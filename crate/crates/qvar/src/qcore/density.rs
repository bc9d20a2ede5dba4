use crate::error::{QvarError, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_error();
        if h > 1e-10 {
            return Err(QvarError::Numerical(format!("density matrix not Hermitian ({h:e})")));
        }
        let t = self.trace();
        if (t.re - 1.0).abs() > 1e-10 || t.im.abs() > 1e-10 {
            return Err(QvarError::Numerical(format!("density matrix trace {t}")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -1e-8 {
            return Err(QvarError::Numerical(format!("density matrix eigenvalue {min}")));
        }
        Ok(())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    /// Trace norm of the difference, via eigenvalues of the Hermitian difference.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let d = DensityMatrix { entries: &self.entries - &other.entries };
        0.5 * d.eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
    }
}
