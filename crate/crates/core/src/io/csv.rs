//! Paired-sample CSV ingestion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ranks::PairedDataset;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub u_column: String,
    pub v_column: String,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            u_column: "u".into(),
            v_column: "v".into(),
            delimiter: b',',
        }
    }
}

pub fn read_paired_csv(path: &Path, options: &CsvOptions) -> Result<PairedDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_paired_csv_from(file, options)
}

/// Parses a header row and one `(u, v)` pair per data row.
///
/// Row numbers in errors count data rows from 1.
pub fn read_paired_csv_from<R: Read>(reader: R, options: &CsvOptions) -> Result<PairedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::param(
                "column",
                name,
                format!(
                    "not found in header [{}]",
                    headers.iter().collect::<Vec<_>>().join(", ")
                ),
            )
        })
    };
    let (ui, vi) = (column(&options.u_column)?, column(&options.v_column)?);

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw =
                record
                    .get(idx)
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| Error::InvalidRow {
                        row,
                        reason: format!("missing value in column `{name}`"),
                    })?;
            let x: f64 = raw.parse().map_err(|_| Error::InvalidRow {
                row,
                reason: format!("`{raw}` in column `{name}` is not a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::InvalidRow {
                    row,
                    reason: format!("`{raw}` in column `{name}` is not finite"),
                });
            }
            Ok(x)
        };
        rows.push((cell(ui, &options.u_column)?, cell(vi, &options.v_column)?));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("CSV has no data rows"));
    }
    PairedDataset::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranks::{pratt_statistic, wilcoxon_statistic};

    fn parse(text: &str) -> Result<PairedDataset> {
        read_paired_csv_from(text.as_bytes(), &CsvOptions::default())
    }

    #[test]
    fn worked_example_file() {
        let x = parse("u,v\n9,18\n2,11\n3,3\n8,10\n9,8").unwrap();
        assert_eq!(
            x.rows(),
            &[
                (9.0, 18.0),
                (2.0, 11.0),
                (3.0, 3.0),
                (8.0, 10.0),
                (9.0, 8.0)
            ]
        );
        assert_eq!(wilcoxon_statistic(&x).w, 8.0);
        assert_eq!(pratt_statistic(&x), 10.0);
    }

    #[test]
    fn custom_columns_and_delimiter() {
        let opts = CsvOptions {
            u_column: "before".into(),
            v_column: "after".into(),
            delimiter: b';',
        };
        let x =
            read_paired_csv_from("id;after;before\n1;2.5;1\n2; 3 ;4\n".as_bytes(), &opts).unwrap();
        assert_eq!(x.rows(), &[(1.0, 2.5), (4.0, 3.0)]);
    }

    #[test]
    fn diagnostics() {
        assert!(matches!(parse("u,v\n"), Err(Error::EmptyInput(_))));
        assert!(matches!(parse("u,v"), Err(Error::EmptyInput(_))));
        match parse("u,v\n1,2\n3,NaN\n") {
            Err(Error::InvalidRow { row: 2, reason }) => assert!(reason.contains("NaN")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("u,v\n1,2\n3,x\n"),
            Err(Error::InvalidRow { row: 2, .. })
        ));
        assert!(matches!(
            parse("u,v\n1,2\n3\n"),
            Err(Error::InvalidRow { row: 2, .. })
        ));
        assert!(matches!(
            parse("u,v\n1,\n"),
            Err(Error::InvalidRow { row: 1, .. })
        ));
        assert!(matches!(
            parse("u,v\ninf,1\n"),
            Err(Error::InvalidRow { row: 1, .. })
        ));
        assert!(matches!(
            parse("a,b\n1,2\n"),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn missing_file() {
        let err = read_paired_csv(Path::new("/nonexistent/pairs.csv"), &CsvOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
