//! `OSRG` scenario files.
//!
//! Layout (little-endian): magic `OSRG`, u32 version (1), u32 count, u32 rows,
//! u32 cols, u32 time steps, then per record a u32 label followed by
//! `rows * cols * steps` f32 cell values, time-major then row-major.

use std::path::Path;

use super::{GridConfig, LabeledScenario, ManeuverClass, Occupancy, OccupancyGrid, ScenarioTensor};
use crate::binio::{checked_len, ByteReader};
use crate::error::{FormatError, OsrError, Result};

const MAGIC: &[u8; 4] = b"OSRG";
const VERSION: u32 = 1;

pub fn encode_scenarios(scenarios: &[LabeledScenario]) -> Result<Vec<u8>> {
    let shape = match scenarios.first() {
        Some(s) => s.tensor.shape(),
        None => (0, 0, 0),
    };
    if let Some(s) = scenarios.iter().find(|s| s.tensor.shape() != shape) {
        return Err(OsrError::ShapeMismatch {
            expected: shape,
            actual: s.tensor.shape(),
        });
    }
    let cells = shape.0 * shape.1 * shape.2;
    let mut out = Vec::with_capacity(24 + scenarios.len() * (4 + 4 * cells));
    out.extend_from_slice(MAGIC);
    for v in [VERSION, scenarios.len() as u32, shape.0 as u32, shape.1 as u32, shape.2 as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in scenarios {
        out.extend_from_slice(&(s.label.index() as u32).to_le_bytes());
        for c in s.tensor.cells() {
            out.extend_from_slice(&c.value().to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes a scenario file. The grid geometry is taken from `template` with
/// its row, column and step counts checked against the header; cell sizes and
/// timing are not stored in the file.
pub fn decode_scenarios(bytes: &[u8], template: &GridConfig) -> Result<Vec<LabeledScenario>> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    r.version("scenario", VERSION)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let steps = r.u32()? as usize;
    let cells = checked_len(checked_len(rows, cols)?, steps)?;
    let record = checked_len(cells, 4)?
        .checked_add(4)
        .ok_or_else(|| FormatError::Corrupt("record size overflow".into()))?;
    r.require(checked_len(count, record)?)?;
    if count > 0 && template.shape() != (rows, cols, steps) {
        return Err(OsrError::ShapeMismatch {
            expected: template.shape(),
            actual: (rows, cols, steps),
        });
    }

    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let label = r.u32()?;
        let label = ManeuverClass::from_index(label as usize).ok_or_else(|| {
            FormatError::Corrupt(format!("record {n}: invalid label {label}"))
        })?;
        let mut grids = Vec::with_capacity(steps);
        for _ in 0..steps {
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                let v = r.f32()?;
                values.push(Occupancy::from_value(v).ok_or_else(|| {
                    FormatError::Corrupt(format!("record {n}: cell value {v} not in {{0, 0.5, 1}}"))
                })?);
            }
            grids.push(OccupancyGrid::from_cells(rows, cols, values)?);
        }
        out.push(LabeledScenario {
            tensor: ScenarioTensor::new(*template, grids)?,
            label,
            seed: 0,
        });
    }
    r.finish()?;
    Ok(out)
}

pub fn write_scenario_file(path: impl AsRef<Path>, scenarios: &[LabeledScenario]) -> Result<()> {
    std::fs::write(path, encode_scenarios(scenarios)?)?;
    Ok(())
}

pub fn read_scenario_file(path: impl AsRef<Path>, template: &GridConfig) -> Result<Vec<LabeledScenario>> {
    decode_scenarios(&std::fs::read(path)?, template)
}
