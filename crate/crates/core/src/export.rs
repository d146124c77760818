//! Solution export: node CSV and raw binary grid dumps.
//!
//! The binary layout is a header of two little-endian `u64` (`d`, `N`)
//! followed by `N^d` little-endian `f64` values in row-major order (last axis
//! fastest).

use std::io::{Read, Write};

use crate::error::{Result, SfeError};
use crate::geometry::GridMasks;
use crate::spectral::{Grid, GridField};

/// CSV with one line per grid node: coordinates, `in_omega` flag, value.
pub fn write_solution_csv(field: &GridField, masks: Option<&GridMasks>, mut out: impl Write) -> Result<()> {
    let grid = field.grid();
    let values = field.value_vec()?;
    let axes = ["x", "y", "z"];
    let mut header: Vec<String> = (0..grid.dim())
        .map(|a| axes.get(a).map_or(format!("x{a}"), |s| s.to_string()))
        .collect();
    header.push("in_omega".into());
    header.push("value".into());
    writeln!(out, "{}", header.join(","))?;
    let mut p = vec![0.0; grid.dim()];
    for (flat, v) in values.iter().enumerate() {
        grid.point(flat, &mut p);
        let mut row: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
        row.push(masks.map_or(1, |m| u8::from(m.is_omega(flat))).to_string());
        row.push(format!("{v:.16e}"));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_binary(field: &GridField, mut out: impl Write) -> Result<()> {
    let grid = field.grid();
    let values = field.value_vec()?;
    out.write_all(&(grid.dim() as u64).to_le_bytes())?;
    out.write_all(&(grid.n() as u64).to_le_bytes())?;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary(mut input: impl Read) -> Result<GridField> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let d = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    if d == 0 || d > 3 {
        return Err(SfeError::InvalidGrid(format!("unsupported dimension {d} in dump")));
    }
    let grid = Grid::new(d, n)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        input.read_exact(&mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    GridField::from_values(grid, values)
}
