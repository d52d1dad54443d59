//! Binary field files: `PFLD1\n`, a one-line JSON header, then little-endian
//! `f64` arrays (velocity, pressure, optional `grad v`, optional `grad pi`).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GridSpec, GriddedField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8] = b"PFLD1\n";

/// Headers longer than this are rejected before parsing.
const MAX_HEADER: usize = 1 << 16;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    #[serde(flatten)]
    grid: GridSpec,
    has_grad_v: bool,
    has_grad_p: bool,
}

pub fn write_field<W: Write>(field: &GriddedField, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    let header = Header { grid: *field.grid(), has_grad_v: field.grad_v().is_some(), has_grad_p: field.grad_p().is_some() };
    w.write_all(MAGIC)?;
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    let arrays = [Some(field.velocity()), Some(field.pressure()), field.grad_v(), field.grad_p()];
    for a in arrays.into_iter().flatten() {
        for x in a {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<GriddedField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| Error::Format("bad magic".into()))?;
    let nl = rest
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: Header =
        serde_json::from_slice(&rest[..nl]).map_err(|e| Error::Format(format!("header: {e}")))?;
    header.grid.validate()?;
    let data = &rest[nl + 1..];

    let n = header.grid.len();
    let lens = [3 * n, n, if header.has_grad_v { 9 * n } else { 0 }, if header.has_grad_p { 3 * n } else { 0 }];
    let expected = lens.iter().sum::<usize>() * 8;
    if data.len() < expected {
        return Err(Error::IncompleteData { expected, found: data.len() });
    }
    if data.len() > expected {
        return Err(Error::Format(format!("{} trailing bytes after {expected} bytes of arrays", data.len() - expected)));
    }
    let mut values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |len: usize| -> Vec<f64> { values.by_ref().take(len).collect() };
    let velocity = take(lens[0]);
    let pressure = take(lens[1]);
    let grad_v = header.has_grad_v.then(|| take(lens[2]));
    let grad_p = header.has_grad_p.then(|| take(lens[3]));
    GriddedField::new(header.grid, velocity, pressure, grad_v, grad_p)
}

pub fn store_field(field: &GriddedField, path: impl AsRef<Path>) -> Result<()> {
    write_field(field, File::create(path)?)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<GriddedField> {
    read_field(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_analytic, AnalyticField};

    fn sample() -> GriddedField {
        let f = AnalyticField::from_registry("bump", &[]).unwrap();
        sample_analytic(&f, &GridSpec::unit_half_cylinder(5)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let g = read_field(buf.as_slice()).unwrap();
        let bits = |a: &[f64]| a.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(f.velocity()), bits(g.velocity()));
        assert_eq!(bits(f.pressure()), bits(g.pressure()));
        assert_eq!(bits(f.grad_v().unwrap()), bits(g.grad_v().unwrap()));
        assert_eq!(bits(f.grad_p().unwrap()), bits(g.grad_p().unwrap()));
        assert_eq!(f.grid(), g.grid());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pfld");
        store_field(&f, &path).unwrap();
        assert_eq!(load_field(&path).unwrap(), f);
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_field(&sample(), &mut buf).unwrap();
        let text = String::from_utf8_lossy(&buf[..200]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("PFLD1"));
        let v: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        for key in ["nx", "ny", "nz", "nt", "x0", "y0", "z0", "t0", "dx", "dy", "dz", "dt", "has_grad_v", "has_grad_p"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn accepts_declared_shape_without_gradients() {
        let grid = GridSpec { nx: 8, ny: 8, nz: 8, nt: 8, ..GridSpec::unit_half_cylinder(8) };
        let f = GriddedField::new(grid, vec![0.5; 3 * 4096], vec![1.0; 4096], None, None).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let g = read_field(buf.as_slice()).unwrap();
        assert_eq!(g.velocity().len(), 3 * 8usize.pow(4));
        assert_eq!(g.pressure().len(), 8usize.pow(4));
        assert!(g.grad_v().is_none());
    }

    #[test]
    fn malformed_inputs() {
        let mut buf = Vec::new();
        write_field(&sample(), &mut buf).unwrap();
        assert!(matches!(read_field(&buf[..buf.len() - 8]), Err(Error::IncompleteData { .. })));
        let mut long = buf.clone();
        long.extend([0u8; 8]);
        assert!(matches!(read_field(long.as_slice()), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[0] = b'Q';
        assert!(matches!(read_field(bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_field(&b"PFLD1\n{\"nx\":2}\n"[..]), Err(Error::Format(_))));
        assert!(matches!(read_field(&b"PFLD1\nno newline"[..]), Err(Error::Format(_))));
    }
}
