use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Rounds to 6 significant digits so every format carries the same number.
pub fn sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            serde_json::Number::from_f64(sig6(n.as_f64().expect("f64 number"))).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Rows sharing one column list. Cells are plain JSON scalars.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// One row per item, columns taken from the fields of the first.
    pub fn from_records<T: Serialize>(records: &[T]) -> Result<Self> {
        let mut table = Table::default();
        for r in records {
            let Value::Object(map) = serde_json::to_value(r)? else {
                anyhow::bail!("record is not an object");
            };
            if table.columns.is_empty() {
                table.columns = map.keys().cloned().collect();
            }
            table.rows.push(table.columns.iter().map(|c| map.get(c).cloned().unwrap_or(Value::Null)).collect());
        }
        Ok(table)
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn rounded(self) -> Self {
        Table { columns: self.columns, rows: self.rows.into_iter().map(|r| r.into_iter().map(round_value).collect()).collect() }
    }
}

struct JsonRow<'a>(&'a [String], &'a [Value]);

impl Serialize for JsonRow<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

struct JsonTable<'a>(&'a Table);

impl Serialize for JsonTable<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.rows.len()))?;
        for row in &self.0.rows {
            seq.serialize_element(&JsonRow(&self.0.columns, row))?;
        }
        seq.end()
    }
}

pub enum Body {
    Table(Table),
    /// A nested record; CSV flattens it into `key,value` rows.
    Document(Value),
    /// Bytes written as-is whatever the format.
    Raw(Vec<u8>),
}

pub struct Output {
    pub body: Body,
    pub round: bool,
}

impl Output {
    pub fn table(t: Table) -> Self {
        Output { body: Body::Table(t), round: true }
    }

    pub fn document<T: Serialize>(d: &T) -> Result<Self> {
        Ok(Output { body: Body::Document(serde_json::to_value(d)?), round: true })
    }

    pub fn exact(mut self) -> Self {
        self.round = false;
        self
    }

    pub fn render(self, format: Format) -> Result<Vec<u8>> {
        let body = match (self.body, self.round) {
            (Body::Table(t), true) => Body::Table(t.rounded()),
            (Body::Document(d), true) => Body::Document(round_value(d)),
            (b, _) => b,
        };
        let mut out = match (body, format) {
            (Body::Raw(bytes), _) => return Ok(bytes),
            (Body::Table(t), Format::Json) => serde_json::to_vec_pretty(&JsonTable(&t))?,
            (Body::Document(d), Format::Json) => serde_json::to_vec_pretty(&d)?,
            (Body::Table(t), Format::Csv) => csv_bytes(&t)?,
            (Body::Document(d), Format::Csv) => {
                let mut t = Table::new(&["key", "value"]);
                flatten("", &d, &mut t);
                csv_bytes(&t)?
            }
        };
        if format == Format::Json {
            out.push(b'\n');
        }
        Ok(out)
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Table) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&join(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&join(&i.to_string()), v, out)),
        scalar => out.push(vec![Value::String(prefix.to_string()), scalar.clone()]),
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn csv_bytes(t: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.columns)?;
    for row in &t.rows {
        w.write_record(row.iter().map(cell_text))?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// so readers never see a partial file; stdout when `path` is `None`.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    let Some(path) = path else {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(bytes)?;
        return Ok(stdout.flush()?);
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.75949367088), 0.759494);
        assert_eq!(sig6(18.0), 18.0);
        assert_eq!(sig6(123456789.0), 123457000.0);
        assert_eq!(sig6(0.0), 0.0);
    }

    #[test]
    fn formats_carry_the_same_numbers() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![Value::from(1.0 / 3.0), Value::from(7), Value::Null]);
        let csv = String::from_utf8(Output::table(t.clone()).render(Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "a,b,c\n0.333333,7,\n");
        let json: Value = serde_json::from_slice(&Output::table(t).render(Format::Json).unwrap()).unwrap();
        assert_eq!(json[0]["a"], 0.333333);
        assert_eq!(json[0]["c"], Value::Null);
    }

    #[test]
    fn documents_flatten_to_key_value_rows() {
        let d = serde_json::json!({"x": {"y": [1.5, "z"]}, "w": true});
        let csv = String::from_utf8(Output::document(&d).unwrap().render(Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "key,value\nx.y.0,1.5\nx.y.1,z\nw,true\n");
    }

    #[test]
    fn atomic_write_leaves_only_the_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit(b"one", Some(&path)).unwrap();
        emit(b"two", Some(&path)).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
