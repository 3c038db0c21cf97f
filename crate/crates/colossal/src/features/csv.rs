//! Feature-table CSV: header `id,f0,...,f{d-1}`, UTF-8, LF line endings,
//! `.` decimal separator. Values are written with the shortest decimal
//! representation that parses back to the identical f64, so a write/read
//! round trip is bit-exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureTable, FeatureVector};

pub fn render_feature_csv(table: &FeatureTable) -> Result<String> {
    let d = table.dim();
    let mut out = String::from("id");
    for i in 0..d {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for row in table.rows() {
        if row.id.is_empty() || row.id.contains([',', '"', '\n', '\r']) {
            return Err(Error::Input(format!(
                "id `{}` cannot be written to csv",
                row.id.escape_debug()
            )));
        }
        out.push_str(&row.id);
        for v in &row.values {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_feature_csv(text: &str) -> Result<FeatureTable> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::CsvFormat {
        line: 1,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "id" {
        return Err(Error::CsvFormat {
            line: 1,
            msg: "expected header `id,f0,...`".into(),
        });
    }
    for (i, col) in cols[1..].iter().enumerate() {
        if *col != format!("f{i}") {
            return Err(Error::CsvFormat {
                line: 1,
                msg: format!("expected column `f{i}`, got `{col}`"),
            });
        }
    }
    let d = cols.len() - 1;

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            return Err(Error::CsvFormat {
                line: line_no,
                msg: "empty row".into(),
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::CsvFormat {
                line: line_no,
                msg: format!("expected {} fields, got {}", d + 1, fields.len()),
            });
        }
        if fields[0].is_empty() {
            return Err(Error::CsvFormat {
                line: line_no,
                msg: "empty id".into(),
            });
        }
        let mut values = Vec::with_capacity(d);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| Error::CsvFormat {
                line: line_no,
                msg: format!("non-numeric cell `{f}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvFormat {
                    line: line_no,
                    msg: format!("non-finite cell `{f}`"),
                });
            }
            values.push(v);
        }
        rows.push(FeatureVector {
            id: fields[0].to_string(),
            values,
        });
    }
    if rows.is_empty() {
        return Err(Error::CsvFormat {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    // reject duplicates with the offending line number
    let mut seen = std::collections::BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        if seen.insert(row.id.clone(), i).is_some() {
            return Err(Error::CsvFormat {
                line: i + 2,
                msg: format!("duplicate id `{}`", row.id),
            });
        }
    }
    FeatureTable::new(rows)
}

pub fn read_feature_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_csv(&text)
}

pub fn write_feature_table(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_feature_csv(table)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn round_trip_is_identity() {
        let t = FeatureTable::new(vec![
            FeatureVector::new("a", vec![1.0, -2.5]).unwrap(),
            FeatureVector::new("b", vec![0.1, 1e-17]).unwrap(),
        ])
        .unwrap();
        let back = parse_feature_csv(&render_feature_csv(&t).unwrap()).unwrap();
        assert_eq!(back.rows(), t.rows());
    }

    #[test]
    fn duplicate_ids_error_names_row() {
        let text = "id,f0\na,1\na,2\n";
        match parse_feature_csv(text) {
            Err(Error::CsvFormat { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_row_errors() {
        let text = "id,f0,f1\na,1,2\nb,3\n";
        match parse_feature_csv(text) {
            Err(Error::CsvFormat { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_errors() {
        let text = "id,f0\na,zap\n";
        assert!(matches!(
            parse_feature_csv(text),
            Err(Error::CsvFormat { line: 2, .. })
        ));
    }

    #[test]
    fn non_finite_cell_errors() {
        let text = "id,f0\na,inf\n";
        assert!(parse_feature_csv(text).is_err());
    }

    #[test]
    fn bad_header_errors() {
        assert!(parse_feature_csv("id,f0,f2\na,1,2\n").is_err());
        assert!(parse_feature_csv("name,f0\na,1\n").is_err());
    }

    // Generated-table property: d=64, N=100, values bit-equal after a
    // render/parse cycle.
    #[test]
    fn random_table_round_trips_bit_exactly() {
        let mut rng = SplitMix64::new(99);
        let rows: Vec<FeatureVector> = (0..100)
            .map(|i| {
                let values = (0..64)
                    .map(|_| (rng.next_f64() - 0.5) * 1e6)
                    .collect();
                FeatureVector::new(format!("sample_{i:03}"), values).unwrap()
            })
            .collect();
        let t = FeatureTable::new(rows).unwrap();
        let back = parse_feature_csv(&render_feature_csv(&t).unwrap()).unwrap();
        for (a, b) in t.rows().iter().zip(back.rows()) {
            assert_eq!(a.id, b.id);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let t = FeatureTable::new(vec![FeatureVector::new("x", vec![0.25]).unwrap()]).unwrap();
        write_feature_table(&t, &path).unwrap();
        assert_eq!(read_feature_table(&path).unwrap().rows(), t.rows());
    }
}
