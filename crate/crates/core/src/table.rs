//! Flat CSV files with a versioned `#` header line followed by a column
//! line.  Floats are written in the shortest form that parses back to the
//! same bits.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Accumulates rows of an output table.
pub struct TableWriter {
    text: String,
    width: usize,
}

impl TableWriter {
    pub fn new(header: &str, columns: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "{header}");
        let _ = writeln!(text, "{}", columns.join(","));
        TableWriter { text, width: columns.len() }
    }

    pub fn row(&mut self, fields: &[Field]) {
        debug_assert_eq!(fields.len(), self.width);
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let _ = match f {
                Field::F(x) => write!(self.text, "{x:e}"),
                Field::U(n) => write!(self.text, "{n}"),
                Field::B(b) => write!(self.text, "{}", *b as u8),
                Field::S(s) => write!(self.text, "{s}"),
            };
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// One output cell.
pub enum Field<'a> {
    F(f64),
    U(u64),
    B(bool),
    S(&'a str),
}

/// A parsed table: the header line (without the magic prefix) and the data
/// rows, each tagged with its 1-based line number.
pub struct Table {
    pub header_rest: String,
    pub rows: Vec<(usize, Vec<String>)>,
}

/// Parses a table whose first line starts with `magic` and whose second line
/// names `columns`.
pub fn read_table(text: &str, magic: &str, columns: &[&str]) -> Result<Table> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    let header_rest = first
        .trim()
        .strip_prefix(magic)
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("expected header `{magic}`") })?
        .trim()
        .to_string();
    let body_start = first.len() + 1;
    let body = text.get(body_start..).unwrap_or("");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 2, msg: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if found != columns {
        return Err(Error::Parse { line: 2, msg: format!("expected columns `{}`", columns.join(",")) });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize + 1);
            Error::Parse { line, msg: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize + 1);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { header_rest, rows })
}

pub fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("not a number: {s}") })
}

pub fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("not an integer: {s}") })
}

pub fn parse_bool(s: &str, line: usize) -> Result<bool> {
    match s {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(Error::Parse { line, msg: format!("not a flag: {s}") }),
    }
}

/// Value of `key=<value>` among whitespace-separated header tokens.
pub fn header_value<'a>(rest: &'a str, key: &str) -> Option<&'a str> {
    rest.split_whitespace().find_map(|t| t.strip_prefix(key)?.strip_prefix('='))
}
