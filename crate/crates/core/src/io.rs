//! CSV/JSON output with atomic writes, and checkpoints.
//!
//! Numbers are written with 17 significant digits so that they round-trip.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyBreakdown;
use crate::error::{LdError, Result};
use crate::fields::FieldSet;
use crate::lattice::{Configuration, Discretization, LatticeGeometry, Model, ModelParams};
use crate::minimize::SolverOptions;

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write via a temporary file in the same directory and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    write_atomic(path, csv_string(header, rows).as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Write `planes.csv` (f, v, jx), `gaps.csv` (phi, jz) and `field.csv` (h)
/// under `dir` with the given file prefix.
pub fn write_fields(dir: &Path, prefix: &str, fs: &FieldSet) -> Result<()> {
    let mut rows = Vec::new();
    for (i, &plane) in fs.planes.iter().enumerate() {
        for (j, &x) in fs.x.iter().enumerate() {
            rows.push(vec![
                Cell::Int(plane as i64),
                Cell::Num(x),
                Cell::Num(fs.f[i][j]),
                Cell::Num(fs.v[i][j]),
                Cell::Num(fs.jx[i][j]),
            ]);
        }
    }
    write_csv(&dir.join(format!("{prefix}planes.csv")), &["plane", "x", "f", "v", "jx"], &rows)?;
    let mut rows = Vec::new();
    for (i, (phi, jz)) in fs.phi.iter().zip(&fs.jz).enumerate() {
        for (j, &x) in fs.x.iter().enumerate() {
            rows.push(vec![Cell::Int(i as i64 + 1), Cell::Num(x), Cell::Num(phi[j]), Cell::Num(jz[j])]);
        }
    }
    write_csv(&dir.join(format!("{prefix}gaps.csv")), &["gap", "x", "phi", "jz"], &rows)?;
    let mut rows = Vec::new();
    for (i, &z) in fs.z.iter().enumerate() {
        for (j, &x) in fs.x.iter().enumerate() {
            rows.push(vec![Cell::Num(z), Cell::Num(x), Cell::Num(fs.h.row(i)[j])]);
        }
    }
    write_csv(&dir.join(format!("{prefix}field.csv")), &["z", "x", "h"], &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub params: ModelParams,
    pub geometry: LatticeGeometry,
    pub discretization: Discretization,
    pub solver: SolverOptions,
    pub iteration: usize,
    pub energy: EnergyBreakdown,
    /// Shape of the payload: stored planes, samples per plane, field rows.
    pub planes: usize,
    pub rows: usize,
}

/// `<stem>.json` holds the header, `<stem>.csv` the flattened configuration.
pub fn write_checkpoint(dir: &Path, stem: &str, header: &CheckpointHeader, cfg: &Configuration) -> Result<()> {
    let mut payload = String::from("index,value\n");
    for (i, v) in cfg.to_vec().iter().enumerate() {
        writeln!(payload, "{i},{}", fmt_num(*v)).expect("writing to a string");
    }
    write_atomic(&dir.join(format!("{stem}.csv")), payload.as_bytes())?;
    write_json(&dir.join(format!("{stem}.json")), header)
}

pub fn read_checkpoint(dir: &Path, stem: &str) -> Result<(CheckpointHeader, Configuration)> {
    let header: CheckpointHeader = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let text = fs::read_to_string(dir.join(format!("{stem}.csv")))?;
    let values = text
        .lines()
        .skip(1)
        .map(|line| {
            line.split(',')
                .nth(1)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| LdError::Config(format!("bad checkpoint line '{line}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let template = Configuration::zeros(header.planes, header.discretization.mx, header.rows);
    if values.len() != template.len() {
        return Err(LdError::ShapeMismatch(format!(
            "checkpoint holds {} values, expected {}",
            values.len(),
            template.len()
        )));
    }
    Ok((header, template.from_vec_like(&values)))
}

pub fn checkpoint_header(model: &Model, solver: &SolverOptions, iteration: usize, energy: EnergyBreakdown) -> CheckpointHeader {
    CheckpointHeader {
        params: model.params,
        geometry: model.geom.clone(),
        discretization: model.disc,
        solver: solver.clone(),
        iteration,
        energy,
        planes: model.stored_planes(),
        rows: model.rows(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, std::f64::consts::PI] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let s = csv_string(&["a", "b"], &[vec![Cell::Int(1), Cell::Num(0.5)]]);
        assert_eq!(s, "a,b\n1,5.0000000000000000e-1\n");
    }
}
