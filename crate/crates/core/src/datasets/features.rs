//! Feature file formats.
//!
//! CSV: header `f0,...,f{d-1}` with an optional trailing `label` column.
//!
//! Binary (`LDFEAT01`): 8-byte magic, little-endian `u64 n`, `u64 d`,
//! `u8 has_labels`, `n*d` row-major `f64`, then `n` `u32` labels if present.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointSet;

pub const FEATURE_MAGIC: &[u8; 8] = b"LDFEAT01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    Binary,
}

impl FeatureFormat {
    /// `.csv` files are CSV, everything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

/// Reads a feature file, detecting the format from its first bytes.
pub fn load_features(path: &Path) -> Result<PointSet> {
    load_features_allow_empty(path)?
        .ok_or_else(|| Error::format(path, "feature file contains no rows"))
}

/// Like [`load_features`], but a file without data rows yields `None`.
pub fn load_features_allow_empty(path: &Path) -> Result<Option<PointSet>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_features(&bytes).map_err(|e| match e {
        Error::Usage(msg) => Error::format(path, msg),
        other => other,
    })
}

pub fn parse_features(bytes: &[u8]) -> Result<Option<PointSet>> {
    if bytes.starts_with(FEATURE_MAGIC) {
        read_binary(bytes).map(Some)
    } else {
        read_csv(bytes)
    }
}

pub fn save_features(path: &Path, p: &PointSet, format: FeatureFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        FeatureFormat::Csv => write_csv(&mut buf, p),
        FeatureFormat::Binary => write_binary(&mut buf, p),
    }
    .expect("writing to a Vec cannot fail");
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_binary<W: Write>(mut w: W, p: &PointSet) -> std::io::Result<()> {
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&(p.len() as u64).to_le_bytes())?;
    w.write_all(&(p.dim() as u64).to_le_bytes())?;
    w.write_all(&[p.labels().is_some() as u8])?;
    for v in p.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(labels) = p.labels() {
        for l in labels {
            w.write_all(&l.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary(bytes: &[u8]) -> Result<PointSet> {
    let mut r = bytes;
    let bad = |msg: &str| Error::usage(format!("invalid LDFEAT01 data: {msg}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != FEATURE_MAGIC {
        return Err(bad("wrong magic"));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let n = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let d = u64::from_le_bytes(word) as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag).map_err(|_| bad("truncated header"))?;
    let has_labels = match flag[0] {
        0 => false,
        1 => true,
        v => return Err(bad(&format!("has_labels byte must be 0 or 1, got {v}"))),
    };
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(8))
        .and_then(|b| b.checked_add(if has_labels { 4 * n } else { 0 }))
        .ok_or_else(|| bad("shape overflows"))?;
    if r.len() != expected {
        return Err(bad(&format!(
            "payload is {} bytes, shape {n}x{d} needs {expected}",
            r.len()
        )));
    }
    let (values, tail) = r.split_at(n * d * 8);
    let data: Vec<f64> = values
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if has_labels {
        let labels = tail
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        PointSet::with_labels(data, n, d, labels)
    } else {
        PointSet::new(data, n, d)
    }
}

pub fn write_csv<W: Write>(mut w: W, p: &PointSet) -> std::io::Result<()> {
    let mut header: Vec<String> = (0..p.dim()).map(|k| format!("f{k}")).collect();
    if p.labels().is_some() {
        header.push("label".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, row) in p.rows().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(labels) = p.labels() {
            fields.push(labels[i].to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_csv(bytes: &[u8]) -> Result<Option<PointSet>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = rdr
        .headers()
        .map_err(|e| Error::usage(format!("unreadable header: {e}")))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Ok(None);
    }
    let has_labels = header.iter().next_back() == Some("label");
    let d = header.len() - has_labels as usize;
    if d == 0 {
        return Err(Error::usage("header has no feature columns"));
    }
    for (k, name) in header.iter().take(d).enumerate() {
        if name != format!("f{k}") {
            return Err(Error::usage(format!(
                "header column {k} is '{name}', expected 'f{k}'"
            )));
        }
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::usage(format!("row {row}: {e}")))?;
        for (col, field) in rec.iter().take(d).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::usage(format!("row {row}, column {col}: '{field}' is not a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            data.push(v);
        }
        if has_labels {
            let field = &rec[d];
            labels.push(field.parse::<u32>().map_err(|_| {
                Error::usage(format!("row {row}: label '{field}' is not a non-negative integer"))
            })?);
        }
        n += 1;
    }
    if n == 0 {
        return Ok(None);
    }
    let p = if has_labels {
        PointSet::with_labels(data, n, d, labels)?
    } else {
        PointSet::new(data, n, d)?
    };
    Ok(Some(p))
}

/// Numeric CSV with an arbitrary header, e.g. predicted probability vectors.
pub fn load_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(&bytes[..]);
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, format!("row {row}: {e}")))?;
        let values = rec
            .iter()
            .enumerate()
            .map(|(col, f)| {
                let v: f64 = f.parse().map_err(|_| {
                    Error::format(path, format!("row {row}, column {col}: '{f}' is not a number"))
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { row, col })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_roundtrip_three_rows() {
        let p = PointSet::with_labels(vec![0.1, -2.0, 3.5e-9, 4.0, 1e300, 6.25], 3, 2, vec![0, 1, 0])
            .unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f0,f1,label\n"));
        assert_eq!(parse_features(&buf).unwrap().unwrap(), p);
    }

    #[test]
    fn csv_without_labels() {
        let p = parse_features(b"f0,f1,f2\n1,2,3\n4,5,6\n").unwrap().unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.dim(), 3);
        assert!(p.labels().is_none());
        assert_eq!(p.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn csv_errors_are_located() {
        let ragged = parse_features(b"f0,f1\n1,2\n3\n").unwrap_err();
        assert!(ragged.to_string().contains("row 1"), "{ragged}");
        assert!(parse_features(b"a,b\n1,2\n").is_err());
        assert!(matches!(
            parse_features(b"f0,f1\n1,2\n3,NaN\n"),
            Err(Error::NonFinite { row: 1, col: 1 })
        ));
        assert!(matches!(
            parse_features(b"f0,f1\n1,inf\n"),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(parse_features(b"f0,label\n1,-1\n").is_err());
        assert!(parse_features(b"f0\nabc\n").is_err());
    }

    #[test]
    fn empty_inputs() {
        assert!(parse_features(b"").unwrap().is_none());
        assert!(parse_features(b"f0,f1\n").unwrap().is_none());
    }

    #[test]
    fn binary_layout() {
        let p = PointSet::with_labels(vec![1.0, 2.0], 2, 1, vec![3, 4]).unwrap();
        let mut buf = Vec::new();
        write_binary(&mut buf, &p).unwrap();
        assert_eq!(&buf[..8], b"LDFEAT01");
        assert_eq!(&buf[8..16], &2u64.to_le_bytes());
        assert_eq!(&buf[16..24], &1u64.to_le_bytes());
        assert_eq!(buf[24], 1);
        assert_eq!(&buf[25..33], &1.0f64.to_le_bytes());
        assert_eq!(&buf[41..45], &3u32.to_le_bytes());
        assert_eq!(buf.len(), 49);
        assert!(read_binary(&buf[..48]).is_err());
    }

    #[test]
    fn large_binary_file_loads_with_shape() {
        let n = 60_000;
        let d = 25;
        let data: Vec<f64> = (0..n * d).map(|i| (i % 977) as f64 * 0.001).collect();
        let labels: Vec<u32> = (0..n).map(|i| (i % 10) as u32).collect();
        let p = PointSet::with_labels(data, n, d, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.bin");
        save_features(&path, &p, FeatureFormat::Binary).unwrap();
        let back = load_features(&path).unwrap();
        assert_eq!((back.len(), back.dim()), (n, d));
        assert_eq!(back.class_ids().unwrap().len(), 10);
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(FeatureFormat::from_path(Path::new("a.CSV")), FeatureFormat::Csv);
        assert_eq!(FeatureFormat::from_path(Path::new("a.bin")), FeatureFormat::Binary);
        assert_eq!(FeatureFormat::from_path(Path::new("a")), FeatureFormat::Binary);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_features(Path::new("/nonexistent/features.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    proptest! {
        #[test]
        fn both_formats_roundtrip_bit_exactly(
            rows in prop::collection::vec(prop::collection::vec(-1e12f64..1e12, 3), 1..12),
            labeled in any::<bool>(),
        ) {
            let n = rows.len();
            let data: Vec<f64> = rows.concat();
            let p = if labeled {
                PointSet::with_labels(data, n, 3, (0..n as u32).collect()).unwrap()
            } else {
                PointSet::new(data, n, 3).unwrap()
            };
            for fmt in [FeatureFormat::Csv, FeatureFormat::Binary] {
                let mut buf = Vec::new();
                match fmt {
                    FeatureFormat::Csv => write_csv(&mut buf, &p).unwrap(),
                    FeatureFormat::Binary => write_binary(&mut buf, &p).unwrap(),
                }
                let back = parse_features(&buf).unwrap().unwrap();
                prop_assert_eq!(back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                                p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
                prop_assert_eq!(back.labels(), p.labels());
            }
        }
    }
}
