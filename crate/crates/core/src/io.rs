//! Field dumps and CSV tables.
//!
//! Binary layout (little endian): `b"AXIF"`, `u32` version, `u32 nr`, `u32 nz`, then
//! `r_min, r_max, z_min, z_max` as `f64` (48 bytes in total), followed by `nr * nz`
//! `f64` values radius-major.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{AxisymGrid, FieldKind, ScalarField};

pub const MAGIC: &[u8; 4] = b"AXIF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 48;

pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    let g = &field.grid;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * field.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.nr as u32).to_le_bytes());
    buf.extend_from_slice(&(g.nz as u32).to_le_bytes());
    for v in [g.r_min, g.r_max, g.z_min, g.z_max] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_field(bytes: &[u8], kind: FieldKind) -> Result<ScalarField> {
    if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
        return Err(Error::Format("missing AXIF header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported AXIF version {version}")));
    }
    let (nr, nz) = (u32_at(8) as usize, u32_at(12) as usize);
    let grid = AxisymGrid::new(f64_at(16), f64_at(24), f64_at(32), f64_at(40), nr, nz)
        .map_err(|e| Error::Format(e.to_string()))?;
    if bytes.len() != HEADER_LEN + 8 * grid.len() {
        return Err(Error::Format(format!(
            "expected {} bytes of data, found {}",
            8 * grid.len(),
            bytes.len() - HEADER_LEN
        )));
    }
    let values = (0..grid.len()).map(|k| f64_at(HEADER_LEN + 8 * k)).collect();
    ScalarField::from_values(grid, kind, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_field(field))?;
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path, kind: FieldKind) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_field(&bytes, kind)
}

/// Writes `x1,x2,value` rows for every cell.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let g = &field.grid;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x1,x2,value")?;
    for i in 0..g.nr {
        for j in 0..g.nz {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", g.r(i), g.z(j), field.at(i, j))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a CSV table with the given header and rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV table, returning the header and rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = match lines.next() {
        Some(h) => h?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::Format("empty table".into())),
    };
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let g = AxisymGrid::new(0.0, 2.0, -1.0, 1.5, 5, 3).unwrap();
        let f = ScalarField::from_fn(g, FieldKind::Stream, |r, z| (r * 3.1).sin() - z / 7.0);
        let bytes = encode_field(&f);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 15);
        assert_eq!(&bytes[..4], b"AXIF");
        let back = decode_field(&bytes, FieldKind::Stream).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let g = AxisymGrid::new(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        let bytes = encode_field(&ScalarField::zeros(g, FieldKind::Vorticity));
        assert!(matches!(decode_field(&bytes[..bytes.len() - 1], FieldKind::Vorticity), Err(Error::Format(_))));
        assert!(matches!(decode_field(b"nope", FieldKind::Vorticity), Err(Error::Format(_))));
    }
}
