use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    /// Floats use the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_finite() => serde_json::to_string(v).expect("finite float"),
            Cell::Float(v) if v.is_nan() => "NaN".into(),
            Cell::Float(v) => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Rows under a fixed header. `suffix` is empty for an experiment's main
/// table; other tables are written to `<name>_<suffix>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub suffix: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(suffix: &str, header: &[&'static str]) -> Self {
        Table {
            suffix: suffix.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match the header of {:?}",
            self.suffix
        );
        self.rows.push(row);
    }

    /// Rows as objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    Value::Object(
                        self.header
                            .iter()
                            .zip(r)
                            .map(|(h, c)| (h.to_string(), c.to_json()))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

/// A pass/fail verdict with the numbers behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub measured: f64,
    pub target: String,
    pub tolerance: String,
    pub pass: bool,
}

impl Check {
    pub fn new(
        id: impl Into<String>,
        measured: f64,
        target: impl Into<String>,
        tolerance: impl Into<String>,
        pass: bool,
    ) -> Self {
        Check {
            id: id.into(),
            measured,
            target: target.into(),
            tolerance: tolerance.into(),
            pass,
        }
    }

    /// `|measured - target| <= tol`.
    pub fn abs(id: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Check::new(
            id,
            measured,
            format!("{target:.6}"),
            format!("{tol} abs"),
            (measured - target).abs() <= tol,
        )
    }

    /// `|measured - target| <= tol |target|`.
    pub fn rel(id: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        let pass = (measured - target).abs() <= tol * target.abs();
        Check::new(
            id,
            measured,
            format!("{target:.6}"),
            format!("{}% rel", tol * 100.0),
            pass,
        )
    }

    /// `measured <= bound`.
    pub fn at_most(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check::new(
            id,
            measured,
            format!("<= {bound:.6}"),
            "0",
            measured <= bound,
        )
    }

    /// `measured < bound`.
    pub fn below(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check::new(id, measured, format!("< {bound:e}"), "0", measured < bound)
    }

    /// `lo <= measured <= hi`.
    pub fn within(id: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Check::new(
            id,
            measured,
            format!("[{lo}, {hi}]"),
            "0",
            (lo..=hi).contains(&measured),
        )
    }
}
