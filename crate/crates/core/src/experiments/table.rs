use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// One cell of a [`ResultTable`].
#[derive(Debug, Clone)]
pub enum Value {
    Text(String),
    Int(i64),
    Real(f64),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Text(a), Value::Text(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
            _ => false,
        }
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Real(v) => Some(*v),
            Value::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    fn parse(field: &str) -> Value {
        let looks_real = field.contains(['e', 'E', '.']) || matches!(field, "NaN" | "inf" | "-inf");
        if !looks_real {
            if let Ok(v) = field.parse::<i64>() {
                return Value::Int(v);
            }
        } else if let Ok(v) = field.parse::<f64>() {
            return Value::Real(v);
        }
        Value::Text(field.to_string())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Int(v) => write!(f, "{v}"),
            // 17 significant digits round-trip every finite double.
            Value::Real(v) if v.is_finite() => write!(f, "{v:.16e}"),
            Value::Real(v) => write!(f, "{v}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    /// SHA-256 of the canonical spec text, hex encoded.
    pub spec_hash: String,
    pub seed: u64,
    pub version: String,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub provenance: Provenance,
}

impl ResultTable {
    pub fn new(columns: &[&str], provenance: Provenance) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            provenance,
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub(crate) fn require(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| Error::Schema(format!("table has no '{name}' column")))
    }

    /// Numeric values of a column, NaN where a cell is not numeric.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.require(name)?;
        Ok(self
            .rows
            .iter()
            .map(|r| r[j].as_f64().unwrap_or(f64::NAN))
            .collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let p = &self.provenance;
        out.push_str(&format!("# spec_hash: {}\n", p.spec_hash));
        out.push_str(&format!("# seed: {}\n", p.seed));
        out.push_str(&format!("# version: {}\n", p.version));
        for note in &p.notes {
            out.push_str(&format!("# note: {note}\n"));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // Writing into a Vec cannot fail.
        w.write_record(&self.columns).expect("in-memory csv");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).expect("in-memory csv");
        }
        let body = w.into_inner().expect("in-memory csv");
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut provenance = Provenance::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            let (key, value) = body
                .split_once(": ")
                .or_else(|| body.strip_suffix(':').map(|k| (k, "")))
                .ok_or_else(|| Error::Parse(format!("bad provenance line '{line}'")))?;
            match key {
                "spec_hash" => provenance.spec_hash = value.to_string(),
                "seed" => {
                    provenance.seed = value
                        .parse()
                        .map_err(|e| Error::Parse(format!("provenance seed: {e}")))?
                }
                "version" => provenance.version = value.to_string(),
                "note" => provenance.notes.push(value.to_string()),
                other => return Err(Error::Parse(format!("unknown provenance key '{other}'"))),
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let columns = reader
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            rows.push(rec.iter().map(Value::parse).collect());
        }
        Ok(ResultTable {
            columns,
            rows,
            provenance,
        })
    }
}

/// Writes the table as CSV with `#` provenance lines.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    std::fs::write(path, table.to_csv()).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<ResultTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ResultTable::from_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        let mut t = ResultTable::new(
            &["family", "s", "value"],
            Provenance {
                spec_hash: "ab12".into(),
                seed: 7,
                version: "corrsense 0.1.0".into(),
                notes: vec!["eps_ball = eps_amp * sqrt(m)".into()],
            },
        );
        t.push(vec!["mtx1".into(), 3usize.into(), 0.1f64.into()]);
        t.push(vec!["a,b".into(), 4usize.into(), f64::NAN.into()]);
        t.push(vec!["mtx2".into(), 5usize.into(), 1.0f64.into()]);
        t
    }

    #[test]
    fn csv_round_trip() {
        let t = sample();
        let text = t.to_csv();
        assert!(text.contains("mtx1,3,1.0000000000000001e-1\n"));
        assert!(text.contains("\"a,b\",4,NaN\n"));
        assert_eq!(ResultTable::from_csv(&text).unwrap(), t);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ResultTable::new(&["a", "b"], Provenance::default());
        let text = t.to_csv();
        assert!(text.ends_with("a,b\n"));
        assert_eq!(ResultTable::from_csv(&text).unwrap(), t);
    }

    #[test]
    fn missing_column_is_schema_error() {
        assert!(matches!(sample().numbers("nope"), Err(Error::Schema(_))));
    }
}
