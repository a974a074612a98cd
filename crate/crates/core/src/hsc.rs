//! On-disk formats.
//!
//! HSC cube layout:
//!
//! ```text
//! HSC1\n
//! rows=<u> cols=<u> bands=<u> dtype=f32\n
//! rows*cols*bands little-endian f32, band-sequential
//! ```
//!
//! Noise covariances use the same framing with magic `HSN1`, a
//! `bands=<u> dtype=f64` header, and the covariance in row-major f64.
//! Anomaly masks are CSV with a `row,col` header and one line per
//! flagged pixel.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::cube::{AnomalyMask, GridShape, HsiCube};
use crate::error::{Error, Result};

const CUBE_MAGIC: [u8; 4] = *b"HSC1";
const COV_MAGIC: [u8; 4] = *b"HSN1";

/// Writes `cube` with samples rounded to f32.
pub fn write_hsc<W: Write>(cube: &HsiCube, mut w: W) -> std::io::Result<()> {
    w.write_all(&CUBE_MAGIC)?;
    w.write_all(b"\n")?;
    writeln!(
        w,
        "rows={} cols={} bands={} dtype=f32",
        cube.rows(),
        cube.cols(),
        cube.bands()
    )?;
    let mut payload = Vec::with_capacity(cube.samples().len() * 4);
    for &v in cube.samples() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&payload)?;
    w.flush()
}

pub fn read_hsc<R: Read>(mut r: R) -> Result<HsiCube> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::io("<reader>", e))?;
    parse_hsc(&bytes)
}

pub fn save_hsc(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_hsc(cube, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_hsc(path: impl AsRef<Path>) -> Result<HsiCube> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_hsc(&bytes)
}

/// Reads only the header of an HSC file: `(rows, cols, bands)`.
pub fn read_hsc_header(path: impl AsRef<Path>) -> Result<(usize, usize, usize)> {
    let path = path.as_ref();
    let mut head = Vec::new();
    File::open(path)
        .and_then(|f| f.take(256).read_to_end(&mut head))
        .map_err(|e| Error::io(path, e))?;
    let (header, _) = split_header(&head, CUBE_MAGIC)?;
    parse_cube_header(header)
}

fn split_header(bytes: &[u8], magic: [u8; 4]) -> Result<(&str, &[u8])> {
    if bytes.len() < 5 {
        return Err(Error::MalformedHeader("file shorter than the magic".into()));
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != magic {
        return Err(Error::BadMagic {
            found,
            expected: magic,
        });
    }
    if bytes[4] != b'\n' {
        return Err(Error::MalformedHeader("missing newline after magic".into()));
    }
    let rest = &bytes[5..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("unterminated header line".into()))?;
    let header = std::str::from_utf8(&rest[..end])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    Ok((header, &rest[end + 1..]))
}

fn header_fields<'a>(header: &'a str, keys: &[&str]) -> Result<Vec<&'a str>> {
    let tokens: Vec<&str> = header.split(' ').collect();
    if tokens.len() != keys.len() {
        return Err(Error::MalformedHeader(format!("unexpected header {header:?}")));
    }
    tokens
        .iter()
        .zip(keys)
        .map(|(tok, key)| {
            tok.strip_prefix(key)
                .and_then(|t| t.strip_prefix('='))
                .ok_or_else(|| Error::MalformedHeader(format!("expected {key}=..., got {tok:?}")))
        })
        .collect()
}

fn parse_count(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::MalformedHeader(format!("bad count {s:?}")))
}

fn parse_cube_header(header: &str) -> Result<(usize, usize, usize)> {
    let f = header_fields(header, &["rows", "cols", "bands", "dtype"])?;
    if f[3] != "f32" {
        return Err(Error::MalformedHeader(format!("unsupported dtype {}", f[3])));
    }
    let dims = (parse_count(f[0])?, parse_count(f[1])?, parse_count(f[2])?);
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(Error::MalformedHeader("dimensions must be positive".into()));
    }
    Ok(dims)
}

fn check_payload(payload: &[u8], expected: usize) -> Result<()> {
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::PayloadMismatch {
            expected,
            found: payload.len(),
        });
    }
    Ok(())
}

fn parse_hsc(bytes: &[u8]) -> Result<HsiCube> {
    let (header, payload) = split_header(bytes, CUBE_MAGIC)?;
    let (rows, cols, bands) = parse_cube_header(header)?;
    let count = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(bands))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    check_payload(payload, count * 4)?;
    let mut samples = Vec::with_capacity(count);
    for (index, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        samples.push(f64::from(v));
    }
    HsiCube::new(rows, cols, bands, samples)
}

/// Writes a square covariance matrix in the `HSN1` format.
pub fn save_covariance(cov: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = cov.nrows();
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&COV_MAGIC)?;
        w.write_all(b"\n")?;
        writeln!(w, "bands={n} dtype=f64")?;
        for r in 0..n {
            for c in 0..n {
                w.write_all(&cov[(r, c)].to_le_bytes())?;
            }
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn load_covariance(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, payload) = split_header(&bytes, COV_MAGIC)?;
    let f = header_fields(header, &["bands", "dtype"])?;
    if f[1] != "f64" {
        return Err(Error::MalformedHeader(format!("unsupported dtype {}", f[1])));
    }
    let n = parse_count(f[0])?;
    check_payload(payload, n * n * 8)?;
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(DMatrix::from_row_slice(n, n, &values))
}

pub fn write_mask_csv<W: Write>(mask: &AnomalyMask, shape: GridShape, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let to_err = |e: csv::Error| Error::Csv(e.to_string());
    wtr.write_record(["row", "col"]).map_err(to_err)?;
    for i in mask.indices() {
        let (r, c) = shape.position(i);
        wtr.write_record([r.to_string(), c.to_string()])
            .map_err(to_err)?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))
}

pub fn read_mask_csv<R: Read>(r: R, shape: GridShape) -> Result<AnomalyMask> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut indices = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let field = |k: usize| -> Result<usize> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Csv(format!("record {}: expected row,col", line + 1)))
        };
        let (row, col) = (field(0)?, field(1)?);
        if row >= shape.rows || col >= shape.cols {
            return Err(Error::Csv(format!(
                "record {}: pixel ({row},{col}) outside {}x{} image",
                line + 1,
                shape.rows,
                shape.cols
            )));
        }
        indices.push(shape.index(row, col));
    }
    AnomalyMask::from_indices(shape.pixels(), &indices)
}

pub fn save_mask(mask: &AnomalyMask, shape: GridShape, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_mask_csv(mask, shape, BufWriter::new(file))
}

pub fn load_mask(path: impl AsRef<Path>, shape: GridShape) -> Result<AnomalyMask> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_mask_csv(BufReader::new(file), shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cube() -> HsiCube {
        let samples = (0..60).map(|i| (i as f32 * 0.37 - 3.0) as f64).collect();
        HsiCube::new(3, 4, 5, samples).unwrap()
    }

    fn encode(cube: &HsiCube) -> Vec<u8> {
        let mut buf = Vec::new();
        write_hsc(cube, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let cube = sample_cube();
        let back = read_hsc(encode(&cube).as_slice()).unwrap();
        assert_eq!(back.rows(), 3);
        for (a, b) in cube.samples().iter().zip(back.samples()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_layout() {
        let buf = encode(&sample_cube());
        let text = b"HSC1\nrows=3 cols=4 bands=5 dtype=f32\n";
        assert_eq!(&buf[..text.len()], text);
        assert_eq!(buf.len(), text.len() + 60 * 4);
        // first sample is -3.0f32, little endian
        assert_eq!(&buf[text.len()..text.len() + 4], &(-3.0f32).to_le_bytes());
    }

    #[test]
    fn bad_magic() {
        let mut buf = encode(&sample_cube());
        buf[..4].copy_from_slice(b"XXX1");
        assert!(matches!(
            read_hsc(buf.as_slice()),
            Err(Error::BadMagic { found, .. }) if &found == b"XXX1"
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut buf = b"HSC1\nrows=2 cols=2 bands=2 dtype=f32\n".to_vec();
        for i in 0..7 {
            buf.extend_from_slice(&(i as f32).to_le_bytes());
        }
        assert!(matches!(
            read_hsc(buf.as_slice()),
            Err(Error::Truncated { expected: 32, found: 28 })
        ));
    }

    #[test]
    fn oversized_payload() {
        let mut buf = encode(&sample_cube());
        buf.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(read_hsc(buf.as_slice()), Err(Error::PayloadMismatch { .. })));
    }

    #[test]
    fn non_finite_sample() {
        let mut buf = b"HSC1\nrows=1 cols=1 bands=2 dtype=f32\n".to_vec();
        buf.extend_from_slice(&1.0f32.to_le_bytes());
        buf.extend_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(read_hsc(buf.as_slice()), Err(Error::NonFinite { index: 1 })));
    }

    #[test]
    fn malformed_headers() {
        for h in [
            "HSC1\nrows=2 cols=2 dtype=f32\n",
            "HSC1\nrows=2 cols=2 bands=1 dtype=f64\n",
            "HSC1\nrows=0 cols=2 bands=1 dtype=f32\n",
            "HSC1\nrows=a cols=2 bands=1 dtype=f32\n",
            "HSC1 rows=1 cols=1 bands=1 dtype=f32\n",
        ] {
            assert!(
                matches!(read_hsc(h.as_bytes()), Err(Error::MalformedHeader(_))),
                "{h:?}"
            );
        }
    }

    #[test]
    fn covariance_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.hsn");
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 3.0 + 1e-13]);
        save_covariance(&cov, &path).unwrap();
        assert_eq!(load_covariance(&path).unwrap(), cov);
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"HSN1\nbands=2 dtype=f64\n"));
    }

    #[test]
    fn mask_csv() {
        let shape = GridShape::new(3, 4);
        let mask = AnomalyMask::from_indices(12, &[5, 11]).unwrap();
        let mut buf = Vec::new();
        write_mask_csv(&mask, shape, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "row,col\n1,1\n2,3\n");
        assert_eq!(read_mask_csv(buf.as_slice(), shape).unwrap(), mask);

        let empty = AnomalyMask::new(vec![false; 12]);
        let mut buf = Vec::new();
        write_mask_csv(&empty, shape, &mut buf).unwrap();
        assert_eq!(buf, b"row,col\n");
        assert!(read_mask_csv("row,col\n3,0\n".as_bytes(), shape).is_err());
    }
}
