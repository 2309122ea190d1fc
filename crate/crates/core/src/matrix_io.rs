//! Plain-text matrix files.
//!
//! The first line holds `rows cols`; the remaining tokens are the entries in
//! row-major order. Values are written with 17 significant digits so every
//! `f64` round-trips exactly. The reader accepts any whitespace layout.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub fn write_matrix_to<W: Write>(out: &mut W, m: ArrayView2<'_, f64>) -> io::Result<()> {
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.write_all(b" ")?;
            }
            first = false;
            write!(out, "{v:.16e}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn format_matrix(m: ArrayView2<'_, f64>) -> String {
    let mut buf = Vec::new();
    write_matrix_to(&mut buf, m).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("matrix text is ASCII")
}

pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let mut tokens = text.split_ascii_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        let tok = tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what} in matrix header")))?;
        tok.parse()
            .map_err(|_| Error::Parse(format!("bad {what} in matrix header: {tok:?}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let mut data = Vec::with_capacity(rows * cols);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::Parse(format!("bad matrix entry {tok:?}")))?;
        data.push(v);
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries for a {rows}x{cols} matrix, found {}",
            rows * cols,
            data.len()
        )));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_matrix(path: impl AsRef<Path>, m: ArrayView2<'_, f64>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_matrix_to(&mut out, m)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}
