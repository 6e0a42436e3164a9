#![allow(dead_code)]

use piezoshell::cell::{build_cell_mesh, HoleSpec, PeriodicCellMesh};
use piezoshell::material::{Coupling, Phase, Stiffness};

pub fn iso_phase(lambda: f64, mu: f64, d: f64) -> Phase {
    Phase { c: Stiffness::isotropic(lambda, mu), e: Coupling::zero(), d: [[d, 0.0], [0.0, d]], bending: Stiffness::isotropic(lambda, mu) }
}

/// Anisotropic piezoelectric phase with every coupling entry active.
pub fn piezo_phase(scale: f64) -> Phase {
    Phase {
        c: Stiffness::from_voigt([[4.0, 1.2, 0.3], [1.2, 3.0, -0.2], [0.3, -0.2, 1.5]]).scaled(scale),
        e: Coupling::from_voigt([[0.6, -0.2, 0.15], [0.1, 0.5, -0.3]]).scaled(scale),
        d: [[2.0 * scale, 0.3 * scale], [0.3 * scale, 1.5 * scale]],
        bending: Stiffness::from_voigt([[3.0, 0.8, 0.1], [0.8, 2.5, 0.2], [0.1, 0.2, 1.1]]).scaled(scale),
    }
}

pub fn full_cell(n: usize) -> PeriodicCellMesh {
    build_cell_mesh(HoleSpec::None, n).unwrap()
}

pub fn disk_cell(radius: f64, n: usize) -> PeriodicCellMesh {
    build_cell_mesh(HoleSpec::Disk { center: [0.5, 0.5], radius }, n).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
