//! Dense matrix files.
//!
//! Text form: CSV with a header row, one matrix row per line. Binary form: the 8-byte magic
//! `CNSMAT\0\x01`, row and column counts as little-endian `u64`, then row-major
//! little-endian `f64` values. [`read_matrix`] detects the form from the magic bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: [u8; 8] = *b"CNSMAT\x00\x01";

pub fn write_matrix_csv(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for row in m.rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            // shortest representation that round-trips exactly
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_binary(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MATRIX_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes binary when the extension is `.bin`, CSV otherwise.
pub fn write_matrix(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        write_matrix_binary(path, m)
    } else {
        write_matrix_csv(path, m)
    }
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 8];
    let got = read_up_to(&mut file, &mut magic)?;
    if got == 8 && magic == MATRIX_MAGIC {
        return read_binary_body(path, BufReader::new(file));
    }
    read_matrix_csv(path)
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        let k = r.read(&mut buf[filled..])?;
        if k == 0 {
            break;
        }
        filled += k;
    }
    Ok(filled)
}

fn read_binary_body(path: &Path, mut r: impl Read) -> Result<Array2<f64>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let count = rows.checked_mul(cols).ok_or_else(|| {
        Error::Format(format!(
            "{}: implausible shape {rows} x {cols}",
            path.display()
        ))
    })?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "{}: expected {} payload bytes for {rows} x {cols}, found {}",
            path.display(),
            count * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
}

/// Reads a headed numeric CSV. Empty cells are rejected.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let cols = reader.headers()?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        // header is line 1
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        if record.len() != cols {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                msg: format!("expected {cols} fields, found {}", record.len()),
            });
        }
        for field in record.iter() {
            let v = field.parse::<f64>().map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line,
                msg: format!("bad number {field:?}: {e}"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("rows checked"))
}
