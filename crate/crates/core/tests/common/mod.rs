//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use spsqkd_core::map::{ExcitationGrid, GridCell};

/// Excitation grid shaped like a phonon-assisted pumping scan: brightness
/// saturates with power and peaks near 1 nm detuning, while `g2` grows with
/// power and towards small detuning. The brightest and the purest cells
/// therefore sit in opposite corners.
pub fn synthetic_grid() -> ExcitationGrid {
    let mut cells = Vec::new();
    for i in 0..8 {
        let detuning_nm = 0.6 + 0.2 * i as f64;
        for j in 1..=12 {
            let power = j as f64;
            let brightness =
                0.03 * (1.0 - (-power / 4.0).exp()) * (-((detuning_nm - 1.0) / 1.2).powi(2)).exp();
            let g2 = 0.004 + 0.07 * (power / 12.0).powi(2) * (1.0 + 1.5 * (2.0 - detuning_nm) / 1.4);
            cells.push(GridCell {
                detuning_nm,
                power,
                brightness,
                g2,
            });
        }
    }
    ExcitationGrid::new(cells).unwrap()
}

/// Distance between two cells in range-normalized grid coordinates.
pub fn grid_distance(a: &GridCell, b: &GridCell) -> f64 {
    let dx = (a.detuning_nm - b.detuning_nm) / 1.4;
    let dy = (a.power - b.power) / 11.0;
    dx.hypot(dy)
}
