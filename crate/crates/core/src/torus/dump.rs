//! Binary field dumps.
//!
//! Layout (little-endian): magic `WFLD`, then `u32` version, `n`, `N`,
//! component count and slice count, then one `f64` time per slice, then
//! the values slice by slice, component-major, row-major over points.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Field, FieldFamily, SpatialGrid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WFLD";
pub const VERSION: u32 = 1;

pub fn write_family(path: &Path, family: &FieldFamily) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let grid = family.grid();
    let ncomp = family.slices[0].components();
    w.write_all(MAGIC)?;
    for v in [
        VERSION,
        grid.n as u32,
        grid.points as u32,
        ncomp as u32,
        family.len() as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for t in &family.times {
        w.write_all(&t.to_le_bytes())?;
    }
    for slice in &family.slices {
        for v in slice.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    write_family(path, &FieldFamily::constant(vec![0.0], field))
}

pub fn read_family(path: &Path) -> Result<FieldFamily> {
    let malformed = |reason: String| Error::MalformedDump {
        path: path.to_path_buf(),
        reason,
    };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        return Err(malformed("missing WFLD header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (version, n, points, ncomp, nslices) = (word(0), word(1), word(2), word(3), word(4));
    if version != VERSION {
        return Err(malformed(format!("unsupported version {version}")));
    }
    let grid = SpatialGrid::new(n as usize, points as usize).map_err(|e| malformed(e.to_string()))?;
    let kind = grid
        .kind_for_components(ncomp as usize)
        .ok_or_else(|| malformed(format!("{ncomp} components")))?;
    let per_slice = ncomp as usize * grid.len();
    let nslices = nslices as usize;
    let expected = 24 + 8 * nslices * (1 + per_slice);
    if bytes.len() != expected || nslices == 0 {
        return Err(malformed(format!(
            "{} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut values = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let times: Vec<f64> = values.by_ref().take(nslices).collect();
    let slices = (0..nslices)
        .map(|_| Field::from_data(grid, kind, values.by_ref().take(per_slice).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldFamily { times, slices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::FieldKind;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = SpatialGrid::new(2, 8).unwrap();
        let f = Field::matrix_from_fn(g, |x| {
            crate::linalg::SymMatrix::from_rows(&[&[x[0], x[1]], &[x[1], -x[0] + 0.1]])
        });
        let fam = FieldFamily {
            times: vec![-0.5, 0.25],
            slices: vec![f.clone(), f.map(|v| v * 3.0)],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.wfld");
        write_family(&path, &fam).unwrap();
        let back = read_family(&path).unwrap();
        assert_eq!(back, fam);
        assert_eq!(back.kind(), FieldKind::SymMatrix);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wfld");
        let g = SpatialGrid::new(2, 8).unwrap();
        write_field(&path, &Field::zeros(g, FieldKind::Scalar)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_family(&path), Err(Error::MalformedDump { .. })));
        std::fs::write(&path, b"nope").unwrap();
        assert!(matches!(read_family(&path), Err(Error::MalformedDump { .. })));
    }
}
