use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub config_id: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Append-only long-format table `config_id,seed,metric,value`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    rows: Vec<TableRow>,
}

pub const CSV_HEADER: [&str; 4] = ["config_id", "seed", "metric", "value"];

impl ExperimentTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        config_id: impl Into<String>,
        seed: u64,
        metric: impl Into<String>,
        value: f64,
    ) {
        self.rows.push(TableRow {
            config_id: config_id.into(),
            seed,
            metric: metric.into(),
            value,
        });
    }

    pub fn extend(&mut self, other: ExperimentTable) {
        self.rows.extend(other.rows);
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Values of `metric` in row order.
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    pub fn retain(&mut self, keep: impl FnMut(&TableRow) -> bool) {
        self.rows.retain(keep);
    }

    /// CSV with shortest round-trip decimals (`inf`, `-inf`, `NaN` for
    /// non-finite values).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Argument(format!("cannot write CSV: {e}"));
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.config_id.as_str(),
                &r.seed.to_string(),
                &r.metric,
                &format_value(r.value),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Argument(format!("cannot write CSV: {e}")))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Argument(format!("bad CSV header: {e}")))?;
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::Argument(format!("unexpected CSV header {header:?}")));
        }
        let mut table = Self::new();
        for (line, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| Error::Argument(format!("CSV line {}: {e}", line + 2)))?;
            let field = |i: usize| record.get(i).unwrap_or_default();
            let bad = |what: &str| Error::Argument(format!("CSV line {}: bad {what}", line + 2));
            table.push(
                field(0),
                field(1).parse().map_err(|_| bad("seed"))?,
                field(2),
                field(3).parse().map_err(|_| bad("value"))?,
            );
        }
        Ok(table)
    }

    /// `{config_id: {"seed": s, "metrics": {metric: value}}}`; non-finite
    /// values become `null`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut by_config: BTreeMap<&str, (u64, serde_json::Map<String, serde_json::Value>)> =
            BTreeMap::new();
        for r in &self.rows {
            let entry = by_config
                .entry(&r.config_id)
                .or_insert_with(|| (r.seed, serde_json::Map::new()));
            let value = serde_json::Number::from_f64(r.value)
                .map_or(serde_json::Value::Null, serde_json::Value::Number);
            entry.1.insert(r.metric.clone(), value);
        }
        serde_json::Value::Object(
            by_config
                .into_iter()
                .map(|(id, (seed, metrics))| {
                    (
                        id.to_string(),
                        serde_json::json!({ "seed": seed, "metrics": metrics }),
                    )
                })
                .collect(),
        )
    }
}

/// Shortest decimal that parses back to `v`, in exponent form for very small
/// or large magnitudes.
pub fn format_value(v: f64) -> String {
    format!("{v:?}")
}
