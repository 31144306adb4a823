//! CSV ingestion with a configurable column mapping.

use std::path::{Path, PathBuf};

use swr_core::TimeSeriesPair;

use crate::error::{CliError, CliResult};

/// Where to find the series inside a delimited text file. Without a header
/// row, columns are addressed by zero-based position; the default names `x`
/// and `y` then refer to the first and second column.
#[derive(Debug, Clone)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub time: Option<String>,
    pub input: String,
    pub target: String,
    pub delimiter: u8,
    pub has_header: bool,
}

/// Columns read from a dataset. `target` is `None` when the file has no such
/// column and it was not required.
#[derive(Debug, Clone)]
pub struct Columns {
    pub time: Vec<i64>,
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
}

struct Table {
    headers: Option<Vec<String>>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl DatasetFile {
    fn read_table(&self) -> CliResult<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(self.delimiter)
            .has_headers(self.has_header)
            .trim(csv::Trim::All)
            .from_path(&self.path)
            .map_err(|e| CliError::io(&self.path, e))?;
        let headers = if self.has_header {
            let h = reader.headers().map_err(|e| self.csv_error(e))?;
            Some(h.iter().map(str::to_string).collect())
        } else {
            None
        };
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| self.csv_error(e))?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(Table { headers, rows })
    }

    fn csv_error(&self, err: csv::Error) -> CliError {
        let line = err.position().map(|p| format!(":{}", p.line())).unwrap_or_default();
        CliError::Data(format!("{}{line}: {err}", self.path.display()))
    }

    fn column(&self, table: &Table, name: &str) -> Option<usize> {
        match &table.headers {
            Some(headers) => headers.iter().position(|h| h == name),
            None => match name {
                "x" => Some(0),
                "y" => Some(1),
                _ => name.parse().ok(),
            },
        }
    }

    fn require_column(&self, table: &Table, name: &str) -> CliResult<usize> {
        self.column(table, name)
            .ok_or_else(|| CliError::Data(format!("{}: column '{name}' not found", self.path.display())))
    }

    fn parse_f64(&self, table: &Table, col: usize, name: &str) -> CliResult<Vec<f64>> {
        table
            .rows
            .iter()
            .map(|(line, record)| {
                let field = record.get(col).unwrap_or("");
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(CliError::Data(format!(
                        "{}:{line}: column '{name}' (field {}): expected a finite number, got '{field}'",
                        self.path.display(),
                        col + 1
                    ))),
                }
            })
            .collect()
    }

    /// Reads the input column and, if present, the target column.
    pub fn load(&self, require_target: bool) -> CliResult<Columns> {
        let table = self.read_table()?;
        if table.rows.is_empty() {
            return Err(CliError::Data(format!("{}: no data rows", self.path.display())));
        }
        let x_col = self.require_column(&table, &self.input)?;
        let x = self.parse_f64(&table, x_col, &self.input)?;
        let y = match self.column(&table, &self.target) {
            Some(col) => Some(self.parse_f64(&table, col, &self.target)?),
            None if require_target => {
                return Err(CliError::Data(format!("{}: column '{}' not found", self.path.display(), self.target)))
            }
            None => None,
        };
        let time = match &self.time {
            None => (0..x.len() as i64).collect(),
            Some(name) => {
                let col = self.require_column(&table, name)?;
                let mut out = Vec::with_capacity(x.len());
                for (line, record) in &table.rows {
                    let field = record.get(col).unwrap_or("");
                    let t: i64 = field.parse().map_err(|_| {
                        CliError::Data(format!(
                            "{}:{line}: column '{name}' (field {}): expected an integer time, got '{field}'",
                            self.path.display(),
                            col + 1
                        ))
                    })?;
                    if out.last().is_some_and(|prev| *prev >= t) {
                        return Err(CliError::Data(format!(
                            "{}:{line}: time values must be strictly increasing",
                            self.path.display()
                        )));
                    }
                    out.push(t);
                }
                out
            }
        };
        Ok(Columns { time, x, y })
    }

    pub fn load_pair(&self) -> CliResult<TimeSeriesPair> {
        let cols = self.load(true)?;
        Ok(TimeSeriesPair::with_index(cols.x, cols.y.expect("target required"), cols.time)?)
    }

    /// Reads an optional numeric column where empty fields mark missing
    /// values.
    pub fn load_optional_column(&self, name: &str) -> CliResult<Vec<Option<f64>>> {
        let table = self.read_table()?;
        let col = self.require_column(&table, name)?;
        table
            .rows
            .iter()
            .map(|(line, record)| {
                let field = record.get(col).unwrap_or("");
                if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                    return Ok(None);
                }
                field.parse::<f64>().map(Some).map_err(|_| {
                    CliError::Data(format!(
                        "{}:{line}: column '{name}' (field {}): expected a number, got '{field}'",
                        self.path.display(),
                        col + 1
                    ))
                })
            })
            .collect()
    }
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

/// Formats a value for CSV output; `None` becomes an empty field.
pub fn field(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}
