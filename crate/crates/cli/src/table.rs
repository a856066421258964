//! Report tables and their CSV / JSON encodings.
//!
//! Floats are written in the shortest form that parses back to the same
//! `f64`, so identical runs give byte-identical files.

use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Self::Float(x) => float_text(*x),
            Self::Int(i) => i.to_string(),
            Self::Bool(b) => b.to_string(),
            Self::Text(s) => s.clone(),
            Self::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Float(x) if x.is_finite() => Value::from(*x),
            Self::Float(x) => Value::from(float_text(*x)),
            Self::Int(i) => Value::from(*i),
            Self::Bool(b) => Value::from(*b),
            Self::Text(s) => Value::from(s.as_str()),
            Self::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Self::Int(i)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Self::Int(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Self::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Self::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Self::Empty, Into::into)
    }
}

/// `Debug` formatting of `f64` is the shortest round-trip decimal.
pub fn float_text(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let encode = |e: csv::Error| CliError::Encode(e.to_string());
        w.write_record(&self.columns).map_err(encode)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(encode)?;
        }
        w.into_inner().map_err(|e| CliError::Encode(e.to_string()))
    }

    /// Array of row objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.columns.iter().zip(row).map(|(c, v)| ((*c).to_owned(), v.json())).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}
