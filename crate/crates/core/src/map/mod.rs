//! Key-rate maps over measured excitation grids.
//!
//! A grid maps excitation settings (detuning, pump power) to measured
//! brightness and `g2`. [`make_sk_map`] runs the key-rate pipeline on every
//! cell at a fixed fiber length, marks the brightest, purest and
//! best-key cells, and traces equal-rate contours at fixed fractions of the
//! maximum.

pub mod contour;
mod grid;
mod skmap;

pub use grid::{ingest_grid, parse_grid, ExcitationGrid, GridCell, GRID_HEADER};
pub use skmap::{make_sk_map, CellResult, ContourSet, Markers, SkMap, CONTOUR_FRACTIONS};
