use pks_core::{CellField, Grid};

use crate::manufactured;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// The exact solution at the start time.
    Manufactured,
    /// `amplitude * exp(-width |x - center|^2)` for both fields.
    Gaussian { amplitude_rho: f64, amplitude_phi: f64, center: [f64; 3], width: f64 },
}

impl InitialCondition {
    /// Aggregate at the center of the unit square (total mass about 10 pi).
    pub fn symmetric_blowup() -> Self {
        InitialCondition::Gaussian { amplitude_rho: 1000.0, amplitude_phi: 1.0, center: [0.5, 0.5, 0.0], width: 100.0 }
    }

    /// Same aggregate moved towards a corner, so part of it is cut off.
    pub fn asymmetric_blowup() -> Self {
        InitialCondition::Gaussian { amplitude_rho: 1000.0, amplitude_phi: 1.0, center: [0.75, 0.75, 0.0], width: 100.0 }
    }

    pub fn sample(&self, grid: Grid, t0: f64) -> (CellField, CellField) {
        match *self {
            InitialCondition::Manufactured => {
                let f = manufactured::exact_field(grid, t0);
                (f.clone(), f)
            }
            InitialCondition::Gaussian { amplitude_rho, amplitude_phi, center, width } => {
                let dim = grid.dim();
                let bump = move |x: [f64; 3]| {
                    let r2: f64 = (0..dim).map(|d| (x[d] - center[d]).powi(2)).sum();
                    (-width * r2).exp()
                };
                (
                    CellField::from_fn(grid, |x| amplitude_rho * bump(x)),
                    CellField::from_fn(grid, |x| amplitude_phi * bump(x)),
                )
            }
        }
    }
}
