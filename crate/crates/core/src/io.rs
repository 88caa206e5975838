//! File formats: grid functions and masks as JSON, grid functions as CSV.
//!
//! CSV layout: a `#grid {descriptor}` comment line, a `cell,value` header, then
//! one row per cell in canonical order. Values use the shortest round-trip
//! decimal form, so re-ingesting is bit exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridDescriptor, GridFunction, OpenSetMask, ProductGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::invalid(format!("unknown format {s:?} (json|csv)"))),
        }
    }
}

pub fn function_to_csv(f: &GridFunction) -> String {
    let desc = GridDescriptor::from(f.grid().clone());
    let mut out = format!("#grid {}\ncell,value\n", serde_json::to_string(&desc).expect("descriptor serializes"));
    for (c, v) in f.values().iter().enumerate() {
        writeln!(out, "{c},{v:?}").expect("write to string");
    }
    out
}

pub fn function_from_csv(text: &str) -> Result<GridFunction> {
    let mut grid: Option<ProductGrid> = None;
    let mut values = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == "cell,value" {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#grid") {
            grid = Some(serde_json::from_str(rest.trim())?);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (cell, value) = line
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("line {}: expected `cell,value`", k + 1)))?;
        let cell: usize = cell
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("line {}: bad cell index", k + 1)))?;
        if cell != values.len() {
            return Err(Error::invalid(format!("line {}: cells must be listed in order", k + 1)));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("line {}: bad value", k + 1)))?;
        values.push(v);
    }
    let grid = grid.ok_or_else(|| Error::invalid("missing `#grid {...}` line"))?;
    GridFunction::new(grid, values)
}

pub fn read_function(path: impl AsRef<Path>) -> Result<GridFunction> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    match Format::from_path(path) {
        Format::Csv => function_from_csv(&text),
        Format::Json => Ok(serde_json::from_str(&text)?),
    }
}

pub fn write_function(path: impl AsRef<Path>, f: &GridFunction, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => function_to_csv(f),
        Format::Json => serde_json::to_string(f)?,
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<OpenSetMask> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
