use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowIssue};
use crate::photon_stats::SourceMeasurement;

/// Required column line of grid files.
pub const GRID_HEADER: [&str; 4] = ["detuning_nm", "power", "brightness", "g2"];

/// One excitation setting and what the source produced there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub detuning_nm: f64,
    /// Pump power in arbitrary units; only used as an ordinate.
    pub power: f64,
    pub brightness: f64,
    pub g2: f64,
}

impl GridCell {
    fn check(&self) -> std::result::Result<(), String> {
        if !self.detuning_nm.is_finite() || !self.power.is_finite() {
            return Err("detuning and power must be finite".into());
        }
        SourceMeasurement::new(self.brightness, self.g2)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }

    pub fn measurement(&self) -> Result<SourceMeasurement> {
        SourceMeasurement::new(self.brightness, self.g2)
    }
}

/// Validated set of excitation cells, rectangular or scattered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationGrid {
    cells: Vec<GridCell>,
}

impl ExcitationGrid {
    /// Validates every cell; duplicate `(detuning, power)` pairs are rejected.
    /// Row numbers in the error refer to positions in `cells`, starting at 1.
    pub fn new(cells: Vec<GridCell>) -> Result<Self> {
        let lines: Vec<u64> = (1..=cells.len() as u64).collect();
        Self::with_lines(cells, &lines)
    }

    fn with_lines(cells: Vec<GridCell>, lines: &[u64]) -> Result<Self> {
        let mut issues = Vec::new();
        let mut seen = HashSet::new();
        for (cell, &line) in cells.iter().zip(lines) {
            if let Err(reason) = cell.check() {
                issues.push(RowIssue { line, reason });
            } else if !seen.insert((cell.detuning_nm.to_bits(), cell.power.to_bits())) {
                issues.push(RowIssue {
                    line,
                    reason: format!(
                        "duplicate cell (detuning {}, power {})",
                        cell.detuning_nm, cell.power
                    ),
                });
            }
        }
        if !issues.is_empty() {
            return Err(Error::InvalidRows(issues));
        }
        Ok(Self { cells })
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells whose detuning is within `tol` of `detuning_nm`, by power.
    pub fn at_detuning(&self, detuning_nm: f64, tol: f64) -> Vec<GridCell> {
        let mut row: Vec<GridCell> = self
            .cells
            .iter()
            .filter(|c| (c.detuning_nm - detuning_nm).abs() <= tol)
            .copied()
            .collect();
        row.sort_by(|a, b| a.power.total_cmp(&b.power));
        row
    }
}

/// Parses grid text with the header `detuning_nm,power,brightness,g2`.
/// Lines starting with `#` are ignored.
pub fn parse_grid(input: impl Read) -> Result<ExcitationGrid> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header_err = |line: u64, message: String| Error::Parse { line, message };
    let headers = reader
        .headers()
        .map_err(|e| header_err(e.position().map_or(1, |p| p.line()), e.to_string()))?
        .clone();
    let header_line = headers.position().map_or(1, |p| p.line());
    if headers.iter().collect::<Vec<_>>() != GRID_HEADER {
        return Err(header_err(
            header_line,
            format!("expected header '{}'", GRID_HEADER.join(",")),
        ));
    }
    let mut cells = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let cell: GridCell = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        cells.push(cell);
        lines.push(line);
    }
    ExcitationGrid::with_lines(cells, &lines)
}

/// Reads and validates a grid file.
pub fn ingest_grid(path: impl AsRef<Path>) -> Result<ExcitationGrid> {
    let file = std::fs::File::open(path)?;
    parse_grid(std::io::BufReader::new(file))
}
