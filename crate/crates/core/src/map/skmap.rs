use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contour::{marching_squares, Polyline, Raster};
use super::grid::{ExcitationGrid, GridCell};
use crate::error::{Error, Result};
use crate::keyrate::{rate, InsecureReason, ProtocolConfig, RateReport};
use crate::link_model::{ChannelSpec, DetectionParams};
use crate::photon_stats::infer_stats;
use crate::search::argmax;

/// Contour levels as fractions of the maximal key rate, outermost last.
pub const CONTOUR_FRACTIONS: [f64; 3] = [0.99, 0.95, 0.90];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: GridCell,
    pub report: RateReport,
}

impl CellResult {
    pub fn sk(&self) -> f64 {
        self.report.sk
    }

    pub fn insecure(&self) -> Option<InsecureReason> {
        self.report.insecure
    }
}

/// Indices into the map cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Markers {
    pub brightness: usize,
    pub purity: usize,
    pub sk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub fraction: f64,
    pub level: f64,
    /// Closed polylines in `(detuning_nm, power)` coordinates.
    pub polylines: Vec<Polyline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkMap {
    pub distance_km: f64,
    pub cells: Vec<CellResult>,
    pub markers: Markers,
    pub max_sk: f64,
    /// Empty when no cell has a positive key rate.
    pub contours: Vec<ContourSet>,
}

impl SkMap {
    /// Whether at least one cell clears the key threshold.
    pub fn any_secure(&self, delta: f64) -> bool {
        self.cells.iter().any(|c| c.report.is_secure(delta))
    }

    pub fn marker_cell(&self, index: usize) -> &GridCell {
        &self.cells[index].cell
    }
}

/// Key rate of every cell at one fiber length, with markers and contours.
pub fn make_sk_map(
    grid: &ExcitationGrid,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
    alpha_db_per_km: f64,
    distance_km: f64,
) -> Result<SkMap> {
    if grid.is_empty() {
        return Err(Error::MissingData("excitation grid has no cells".into()));
    }
    let ch = ChannelSpec::fiber(alpha_db_per_km, distance_km)?;
    let cells = grid
        .cells()
        .par_iter()
        .map(|cell| {
            let stats = infer_stats(&cell.measurement()?)?;
            Ok(CellResult {
                cell: *cell,
                report: rate(&stats, &ch, det, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pick = |values: Vec<f64>| argmax(&values).unwrap_or(0);
    let markers = Markers {
        brightness: pick(cells.iter().map(|c| c.cell.brightness).collect()),
        purity: pick(cells.iter().map(|c| -c.cell.g2).collect()),
        sk: pick(cells.iter().map(CellResult::sk).collect()),
    };
    let max_sk = cells[markers.sk].sk();

    let contours = if max_sk > 0.0 {
        let raster = Raster::from_scattered(
            &cells
                .iter()
                .map(|c| (c.cell.detuning_nm, c.cell.power, c.sk()))
                .collect::<Vec<_>>(),
        );
        CONTOUR_FRACTIONS
            .iter()
            .map(|&fraction| {
                let level = fraction * max_sk;
                ContourSet {
                    fraction,
                    level,
                    polylines: marching_squares(&raster, level),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(SkMap {
        distance_km,
        cells,
        markers,
        max_sk,
        contours,
    })
}
