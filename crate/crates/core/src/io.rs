//! Binary matrix/vector files and JSON helpers.
//!
//! `FRM1 <rows> <cols> [complex]\n` followed by little-endian `f64` values in
//! row-major order (complex entries as `re, im` pairs). Vectors use
//! `FRV1 <n> <real|complex>\n` with the same payload encoding.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::C64;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn read_header(path: &Path, r: &mut impl Read) -> Result<Vec<String>> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte).map_err(|e| Error::io(path, e))?;
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > 256 {
            return Err(format_err(path, "header line too long"));
        }
    }
    let text = String::from_utf8(line).map_err(|_| format_err(path, "header is not ascii"))?;
    Ok(text.split_whitespace().map(str::to_owned).collect())
}

fn parse_dim(path: &Path, s: &str) -> Result<usize> {
    s.parse().map_err(|_| format_err(path, format!("bad dimension {s:?}")))
}

fn read_f64s(path: &Path, r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|_| format_err(path, "payload shorter than header states"))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(format_err(path, "trailing bytes after payload"));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn write_f64(path: &Path, w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_matrix(path: &Path, m: &Mat<f64>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "FRM1 {} {}", m.nrows(), m.ncols()).map_err(|e| Error::io(path, e))?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            write_f64(path, &mut w, m[(i, j)])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_complex_matrix(path: &Path, m: &Mat<C64>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "FRM1 {} {} complex", m.nrows(), m.ncols()).map_err(|e| Error::io(path, e))?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            write_f64(path, &mut w, m[(i, j)].re)?;
            write_f64(path, &mut w, m[(i, j)].im)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_matrix_raw(path: &Path) -> Result<(usize, usize, bool, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let h = read_header(path, &mut r)?;
    let complex = match h.len() {
        3 => false,
        4 if h[3] == "complex" => true,
        _ => return Err(format_err(path, "expected `FRM1 <rows> <cols> [complex]`")),
    };
    if h[0] != "FRM1" {
        return Err(format_err(path, format!("bad magic {:?}", h[0])));
    }
    let rows = parse_dim(path, &h[1])?;
    let cols = parse_dim(path, &h[2])?;
    let per = if complex { 2 } else { 1 };
    let data = read_f64s(path, &mut r, rows * cols * per)?;
    Ok((rows, cols, complex, data))
}

pub fn read_matrix(path: &Path) -> Result<Mat<f64>> {
    let (rows, cols, complex, data) = read_matrix_raw(path)?;
    if complex {
        return Err(format_err(path, "expected a real matrix"));
    }
    Ok(Mat::from_fn(rows, cols, |i, j| data[i * cols + j]))
}

pub fn read_complex_matrix(path: &Path) -> Result<Mat<C64>> {
    let (rows, cols, complex, data) = read_matrix_raw(path)?;
    Ok(Mat::from_fn(rows, cols, |i, j| {
        if complex {
            let k = 2 * (i * cols + j);
            C64::new(data[k], data[k + 1])
        } else {
            C64::new(data[i * cols + j], 0.0)
        }
    }))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "FRV1 {} real", v.len()).map_err(|e| Error::io(path, e))?;
    for &x in v {
        write_f64(path, &mut w, x)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_complex_vector(path: &Path, v: &[C64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "FRV1 {} complex", v.len()).map_err(|e| Error::io(path, e))?;
    for x in v {
        write_f64(path, &mut w, x.re)?;
        write_f64(path, &mut w, x.im)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a vector file; real files come back with zero imaginary parts.
pub fn read_vector(path: &Path) -> Result<Vec<C64>> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let h = read_header(path, &mut r)?;
    if h.len() != 3 || h[0] != "FRV1" {
        return Err(format_err(path, "expected `FRV1 <n> <real|complex>`"));
    }
    let n = parse_dim(path, &h[1])?;
    match h[2].as_str() {
        "real" => Ok(read_f64s(path, &mut r, n)?
            .into_iter()
            .map(|x| C64::new(x, 0.0))
            .collect()),
        "complex" => Ok(read_f64s(path, &mut r, 2 * n)?
            .chunks_exact(2)
            .map(|c| C64::new(c[0], c[1]))
            .collect()),
        other => Err(format_err(path, format!("unknown field {other:?}"))),
    }
}

pub fn read_real_vector(path: &Path) -> Result<Vec<f64>> {
    let v = read_vector(path)?;
    if v.iter().any(|x| x.im != 0.0) {
        return Err(format_err(path, "expected a real vector"));
    }
    Ok(v.into_iter().map(|x| x.re).collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes an 8-bit binary PGM scaled to `[min, max]` of the data.
///
/// Returns the `(min, max)` pair; callers record it in a sidecar so the
/// image can be mapped back to physical values.
pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[f64]) -> Result<(f64, f64)> {
    if data.len() != width * height {
        return Err(Error::Dimension(format!(
            "{} values for a {width}x{height} image",
            data.len()
        )));
    }
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = create(path)?;
    write!(w, "P5\n{width} {height}\n255\n").map_err(|e| Error::io(path, e))?;
    let bytes: Vec<u8> = data
        .iter()
        .map(|&v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("framereg-io-{}", std::process::id()));
        dir.join(name)
    }

    #[test]
    fn matrix_round_trip_is_bitwise() {
        let m = Mat::from_fn(3, 4, |i, j| (i as f64 + 0.1) * (j as f64 - 1.7) / 3.0);
        let p = tmp("m.frm");
        write_matrix(&p, &m).unwrap();
        let back = read_matrix(&p).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(m[(i, j)].to_bits(), back[(i, j)].to_bits());
            }
        }
        let header = std::fs::read(&p).unwrap();
        assert!(header.starts_with(b"FRM1 3 4\n"));
    }

    #[test]
    fn complex_vector_round_trip() {
        let v = vec![C64::new(1.0, -2.0), C64::new(0.25, 1e-300)];
        let p = tmp("v.frv");
        write_complex_vector(&p, &v).unwrap();
        assert_eq!(read_vector(&p).unwrap(), v);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let p = tmp("bad.frm");
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, b"FRM1 2 2\n\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_matrix(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn missing_file_is_missing_artifact() {
        assert!(matches!(read_matrix(&tmp("nope.frm")), Err(Error::MissingArtifact(_))));
    }
}
