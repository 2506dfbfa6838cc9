//! CSV ingestion and emission. Comma separator, optional single header row
//! auto-detected by a non-numeric first row, rows are observations. Values
//! are serialized with 17 significant digits so a write/read round trip is
//! lossless.

use std::path::Path;

use hdtest::DataMatrix;

use crate::error::{CliError, CliResult};

#[derive(Debug)]
pub struct CsvTable {
    pub names: Option<Vec<String>>,
    pub data: DataMatrix,
}

fn csv_err(path: &Path, message: String) -> CliError {
    CliError::Csv {
        path: path.display().to_string(),
        message,
    }
}

pub fn read_table(path: &Path) -> CliResult<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::trim).collect())
        .collect();
    if rows.is_empty() {
        return Err(csv_err(path, "empty file".into()));
    }
    let width = rows[0].len();
    // A header must be entirely non-numeric; a mixed first row is data (and
    // its bad cells are reported as such).
    let header_is_names = rows[0].iter().all(|cell| parse_cell(cell).is_none());
    let names = header_is_names.then(|| rows[0].iter().map(|s| s.to_string()).collect());
    let data_rows = &rows[if header_is_names { 1 } else { 0 }..];
    if data_rows.is_empty() {
        return Err(csv_err(path, "no data rows".into()));
    }
    let mut values = Vec::with_capacity(data_rows.len() * width);
    for (r, row) in data_rows.iter().enumerate() {
        if row.len() != width {
            return Err(csv_err(
                path,
                format!(
                    "ragged row {}: {} cells, expected {}",
                    r + 1,
                    row.len(),
                    width
                ),
            ));
        }
        for (c, cell) in row.iter().enumerate() {
            match parse_cell(cell) {
                Some(v) => values.push(v),
                None => {
                    return Err(csv_err(
                        path,
                        format!("non-numeric cell at row {} col {}: `{cell}`", r + 1, c + 1),
                    ))
                }
            }
        }
    }
    let data = DataMatrix::from_row_major(data_rows.len(), width, values)
        .map_err(CliError::Core)?;
    Ok(CsvTable { names, data })
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg_attr(not(test), allow(dead_code))]
pub fn write_table(names: Option<&[String]>, data: &DataMatrix) -> String {
    let mut out = String::new();
    if let Some(names) = names {
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for i in 0..data.n_rows() {
        let row: Vec<String> = data.row(i).iter().map(|&v| format_value(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Resolve a column token against header names, or as a 0-based index.
pub fn resolve_column(token: &str, names: Option<&[String]>, width: usize) -> CliResult<usize> {
    if let Some(names) = names {
        if let Some(idx) = names.iter().position(|n| n == token.trim()) {
            return Ok(idx);
        }
    }
    let idx: usize = token.trim().parse().map_err(|_| CliError::Usage {
        message: format!("column `{token}` is neither a header name nor an index"),
    })?;
    if idx >= width {
        return Err(CliError::Usage {
            message: format!("column index {idx} out of range (p = {width})"),
        });
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_plain_matrix() {
        let f = write_temp("1,0\n-1,0\n");
        let table = read_table(f.path()).unwrap();
        assert!(table.names.is_none());
        assert_eq!(table.data.n_rows(), 2);
        assert_eq!(table.data.n_cols(), 2);
        assert_eq!(table.data.get(1, 0), -1.0);
    }

    #[test]
    fn detects_header_row() {
        let f = write_temp("a,b\n1,2\n");
        let table = read_table(f.path()).unwrap();
        assert_eq!(table.names, Some(vec!["a".into(), "b".into()]));
        assert_eq!(table.data.n_rows(), 1);
    }

    #[test]
    fn reports_bad_cell_position() {
        let f = write_temp("1,x\n");
        let err = read_table(f.path()).unwrap_err();
        assert!(err.to_string().contains("row 1 col 2"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn rejects_ragged_and_empty() {
        let f = write_temp("1,2\n3\n");
        assert!(read_table(f.path()).unwrap_err().to_string().contains("ragged"));
        let f = write_temp("");
        assert!(read_table(f.path()).is_err());
    }

    #[test]
    fn round_trip_preserves_full_precision() {
        let values = [
            0.1,
            -1.0 / 3.0,
            std::f64::consts::PI,
            1.2345678901234567e-300,
            6.02214076e23,
            -0.0,
        ];
        let data = DataMatrix::from_row_major(3, 2, values.to_vec()).unwrap();
        let text = write_table(None, &data);
        let f = write_temp(&text);
        let back = read_table(f.path()).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(back.data.get(i, j), data.get(i, j), "cell ({i},{j})");
            }
        }
        // and once more through a header
        let named = write_table(Some(&["u".into(), "v".into()]), &data);
        let f2 = write_temp(&named);
        let back2 = read_table(f2.path()).unwrap();
        assert_eq!(back2.names, Some(vec!["u".into(), "v".into()]));
        assert_eq!(back2.data, data);
    }

    #[test]
    fn resolves_columns_by_name_and_index() {
        let names = vec!["y".to_string(), "x1".to_string()];
        assert_eq!(resolve_column("x1", Some(&names), 2).unwrap(), 1);
        assert_eq!(resolve_column("0", Some(&names), 2).unwrap(), 0);
        assert!(resolve_column("5", Some(&names), 2).is_err());
        assert!(resolve_column("zz", Some(&names), 2).is_err());
    }
}
