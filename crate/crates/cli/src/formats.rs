//! On-disk formats: F32M matrices, CSV matrices, score CSVs and PGM images.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{CliResult, Failure};

pub const MATRIX_MAGIC: &[u8; 4] = b"F32M";

/// Shortest-form decimal with at most 9 significant digits, enough to
/// round-trip any `f32`.
pub fn format_float(v: f32) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.8e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, v);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{exp}")
    }
}

pub fn encode_matrix(m: &Array2<f32>) -> Vec<u8> {
    let (rows, cols) = m.dim();
    let mut out = Vec::with_capacity(12 + 4 * rows * cols);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Array2<f32>, String> {
    if bytes.len() < 12 || &bytes[..4] != MATRIX_MAGIC {
        return Err("not an F32M matrix file".into());
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(12))
        .ok_or("matrix dimensions overflow")?;
    if bytes.len() != expected {
        return Err(format!(
            "payload is {} bytes, header ({rows} x {cols}) requires {expected}",
            bytes.len()
        ));
    }
    let values = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

pub fn matrix_to_csv(m: &Array2<f32>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Array2<f32>, String> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f32> = line
            .split(',')
            .map(|c| c.trim().parse::<f32>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(format!("line {}: expected {c} columns, got {}", i + 1, row.len()))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), values).map_err(|e| e.to_string())
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes CSV for a `.csv` extension, F32M otherwise.
pub fn write_matrix(path: &Path, m: &Array2<f32>) -> CliResult<()> {
    let bytes = if is_csv(path) {
        matrix_to_csv(m).into_bytes()
    } else {
        encode_matrix(m)
    };
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

pub fn read_matrix(path: &Path) -> CliResult<Array2<f32>> {
    let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
    if is_csv(path) {
        let text = String::from_utf8(bytes).map_err(|e| Failure::parse(path, e))?;
        matrix_from_csv(&text).map_err(|e| Failure::parse(path, e))
    } else {
        decode_matrix(&bytes).map_err(|e| Failure::parse(path, e))
    }
}

/// `id,<class_1>,...,<class_C>` followed by one row per item.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCsv {
    pub classes: Vec<String>,
    pub ids: Vec<String>,
    pub values: Array2<f32>,
}

impl ScoreCsv {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or("empty score file")?;
        let head: Vec<&str> = header.split(',').map(str::trim).collect();
        if head.first() != Some(&"id") || head.len() < 2 {
            return Err("header must be id,<class_1>,...".into());
        }
        let classes: Vec<String> = head[1..].iter().map(|s| s.to_string()).collect();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != classes.len() + 1 {
                return Err(format!(
                    "line {}: expected {} columns, got {}",
                    i + 1,
                    classes.len() + 1,
                    cells.len()
                ));
            }
            if !seen.insert(cells[0].to_string()) {
                return Err(format!("line {}: duplicate id {:?}", i + 1, cells[0]));
            }
            ids.push(cells[0].to_string());
            for c in &cells[1..] {
                values.push(c.parse::<f32>().map_err(|e| format!("line {}: {c:?}: {e}", i + 1))?);
            }
        }
        let values = Array2::from_shape_vec((ids.len(), classes.len()), values).map_err(|e| e.to_string())?;
        Ok(Self { classes, ids, values })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        Self::parse(&text).map_err(|e| Failure::parse(path, e))
    }

    pub fn render(&self) -> String {
        let mut out = format!("id,{}\n", self.classes.join(","));
        for (id, row) in self.ids.iter().zip(self.values.rows()) {
            out.push_str(id);
            for &v in row {
                out.push(',');
                out.push_str(&format_float(v));
            }
            out.push('\n');
        }
        out
    }
}

/// 8-bit binary PGM of a dB matrix: values clamped to `[max - range, max]`
/// map linearly onto `[0, 255]`, first matrix row at the bottom.
pub fn render_pgm(db: &Array2<f32>, range_db: f32) -> Vec<u8> {
    let (rows, cols) = db.dim();
    let max = db.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let lo = max - range_db;
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for r in (0..rows).rev() {
        for c in 0..cols {
            let v = db[[r, c]].clamp(lo, max);
            let level = if range_db > 0.0 { (v - lo) / range_db * 255.0 } else { 255.0 };
            out.push(level.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}
