//! Row tables rendered as CSV (with '#' metadata lines) or a JSON array.

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    /// No value, e.g. the numbers of a failed sweep row.
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // round-trip through the CSV formatting so both outputs carry the
            // same digits
            Cell::Float(x) => format_float(*x)
                .parse::<f64>()
                .ok()
                .and_then(Number::from_f64)
                .map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

/// Nine significant digits, lowercase scientific notation.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.8e}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: &'static str,
    pub unit: Option<&'static str>,
}

pub const fn col(name: &'static str) -> Column {
    Column { name, unit: None }
}

pub const fn col_unit(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit: Some(unit) }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Self {
            columns,
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.comments {
            for line in c.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let header: Vec<String> = self
            .columns
            .iter()
            .map(|c| match c.unit {
                Some(u) => format!("{}[{u}]", c.name),
                None => c.name.to_string(),
            })
            .collect();
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, cell)| (c.name.to_string(), cell.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("json values serialise");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.016_487_212_707_001_28), "1.64872127e-2");
        assert_eq!(format_float(-1.0), "-1.00000000e0");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(0.0), "0.00000000e0");
    }

    #[test]
    fn csv_and_json() {
        let mut t = Table::new(vec![col("name"), col_unit("value", "rad"), col("ok")]);
        t.comments.push("hello".into());
        t.push(vec![Cell::text("a,b"), Cell::Float(0.5), Cell::Bool(true)]);
        t.push(vec![Cell::text("c"), Cell::Empty, Cell::Bool(false)]);
        assert_eq!(t.to_csv().unwrap(), "# hello\nname,value[rad],ok\n\"a,b\",5.00000000e-1,true\nc,,false\n");
        let v: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v[0]["value"], 0.5);
        assert_eq!(v[1]["value"], Value::Null);
        assert_eq!(v[0]["name"], "a,b");
    }
}
