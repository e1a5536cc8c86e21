//! The `lqg-model v1` text format.
//!
//! ```text
//! lqg-model v1
//! matrix A 2 2
//! 0.9 0.1
//! 0 0.5
//! matrix B 2 1
//! ...
//! ```
//!
//! Known matrix names: `A B C W V Q R` (plant, required),
//! `A0 B0 L0 K0` (fallback controller, optional as a group) and
//! `A1 B1 L1 K1` (primary controller, optional as a group). Entries are
//! written with Rust's shortest round-trip `f64` formatting, so a
//! save/load round trip is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::{ControllerLabel, DynamicController, SystemModel};
use crate::{Error, Result};

const HEADER: &str = "lqg-model v1";
const KNOWN_NAMES: [&str; 15] = [
    "A", "B", "C", "W", "V", "Q", "R", "A0", "B0", "L0", "K0", "A1", "B1", "L1", "K1",
];

/// A parsed model file: the plant plus whichever controllers were present.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub system: SystemModel,
    pub primary: Option<DynamicController>,
    pub fallback: Option<DynamicController>,
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
}

/// Serializes a plant and optional controllers into the text format.
pub fn format_model(
    sys: &SystemModel,
    primary: Option<&DynamicController>,
    fallback: Option<&DynamicController>,
) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    write_matrix(&mut out, "A", &sys.a);
    write_matrix(&mut out, "B", &sys.b);
    write_matrix(&mut out, "C", &sys.c);
    write_matrix(&mut out, "W", &sys.w);
    write_matrix(&mut out, "V", &sys.v);
    write_matrix(&mut out, "Q", &sys.q);
    write_matrix(&mut out, "R", &sys.r);
    if let Some(fb) = fallback {
        write_matrix(&mut out, "A0", &fb.a);
        write_matrix(&mut out, "B0", &fb.b);
        write_matrix(&mut out, "L0", &fb.l);
        write_matrix(&mut out, "K0", &fb.k);
    }
    if let Some(pr) = primary {
        write_matrix(&mut out, "A1", &pr.a);
        write_matrix(&mut out, "B1", &pr.b);
        write_matrix(&mut out, "L1", &pr.l);
        write_matrix(&mut out, "K1", &pr.k);
    }
    out
}

pub fn save_model(
    path: &Path,
    sys: &SystemModel,
    primary: Option<&DynamicController>,
    fallback: Option<&DynamicController>,
) -> Result<()> {
    sys.validate()?;
    if let Some(p) = primary {
        p.validate_for(sys)?;
    }
    if let Some(f) = fallback {
        f.validate_for(sys)?;
    }
    std::fs::write(path, format_model(sys, primary, fallback))?;
    Ok(())
}

/// Parses the text format from a string; errors carry 1-based line numbers.
pub fn parse_model(text: &str) -> Result<ModelFile> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty model file".into()))?;
    if header.trim() != HEADER {
        return Err(Error::Parse(format!(
            "line 1: expected header '{HEADER}', got '{}'",
            header.trim()
        )));
    }

    let mut matrices: BTreeMap<String, DMatrix<f64>> = BTreeMap::new();
    while let Some((idx, line)) = lines.next() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("matrix") => {}
            Some(other) => {
                return Err(Error::Parse(format!(
                    "line {lineno}: expected 'matrix', got '{other}'"
                )))
            }
            None => unreachable!(),
        }
        let name = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {lineno}: missing matrix name")))?;
        if !KNOWN_NAMES.contains(&name) {
            return Err(Error::Parse(format!(
                "line {lineno}: unknown matrix name '{name}'"
            )));
        }
        if matrices.contains_key(name) {
            return Err(Error::Parse(format!(
                "line {lineno}: duplicate matrix '{name}'"
            )));
        }
        let rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("line {lineno}: bad row count for '{name}'")))?;
        let cols: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("line {lineno}: bad column count for '{name}'")))?;
        if rows == 0 || cols == 0 {
            return Err(Error::Parse(format!(
                "line {lineno}: matrix '{name}' must be non-empty"
            )));
        }
        if parts.next().is_some() {
            return Err(Error::Parse(format!(
                "line {lineno}: trailing tokens after matrix header"
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (idx, row_line) = lines.next().ok_or_else(|| {
                Error::Parse(format!("unexpected end of file in matrix '{name}'"))
            })?;
            let row_no = idx + 1;
            let values: Vec<f64> = row_line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("line {row_no}: bad number '{tok}' in '{name}'"))
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != cols {
                return Err(Error::Parse(format!(
                    "line {row_no}: matrix '{name}' row has {} entries, expected {cols}",
                    values.len()
                )));
            }
            data.extend_from_slice(&values);
        }
        matrices.insert(name.to_string(), DMatrix::from_row_slice(rows, cols, &data));
    }

    let mut take = |name: &str| -> Result<DMatrix<f64>> {
        matrices
            .remove(name)
            .ok_or_else(|| Error::Parse(format!("missing matrix '{name}'")))
    };

    let system = SystemModel::new(
        take("A")?,
        take("B")?,
        take("C")?,
        take("W")?,
        take("V")?,
        take("Q")?,
        take("R")?,
    )?;

    let mut take_controller = |prefix: &str, label: ControllerLabel| -> Result<Option<DynamicController>> {
        let names = [
            format!("A{prefix}"),
            format!("B{prefix}"),
            format!("L{prefix}"),
            format!("K{prefix}"),
        ];
        let present: Vec<bool> = names.iter().map(|n| matrices.contains_key(n)).collect();
        if present.iter().all(|p| !*p) {
            return Ok(None);
        }
        if !present.iter().all(|p| *p) {
            let missing: Vec<&str> = names
                .iter()
                .zip(&present)
                .filter(|(_, p)| !**p)
                .map(|(n, _)| n.as_str())
                .collect();
            return Err(Error::Parse(format!(
                "incomplete controller block: missing {}",
                missing.join(", ")
            )));
        }
        let ctrl = DynamicController::new(
            matrices.remove(&names[0]).unwrap(),
            matrices.remove(&names[1]).unwrap(),
            matrices.remove(&names[2]).unwrap(),
            matrices.remove(&names[3]).unwrap(),
            label,
        )?;
        ctrl.validate_for(&system)?;
        Ok(Some(ctrl))
    };

    let fallback = take_controller("0", ControllerLabel::Fallback)?;
    let primary = take_controller("1", ControllerLabel::Primary)?;

    Ok(ModelFile { system, primary, fallback })
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}
