use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One estimate. `n = None` marks the limiting (infinite-sample) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: Option<usize>,
    pub statistic: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

impl ResultRow {
    pub fn new(n: Option<usize>, statistic: impl Into<String>, estimate: f64, std_error: Option<f64>) -> Self {
        Self { n, statistic: statistic.into(), estimate, std_error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub replicates: usize,
    /// Replicates that failed (or were redrawn) and are excluded from the estimates.
    pub failures: usize,
    /// Wall-clock seconds; not part of the reproducible content.
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: TableMetadata,
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Markdown,
}

const CSV_HEADER: [&str; 8] = ["experiment", "n", "statistic", "estimate", "std_error", "config_hash", "seed", "failures"];

impl ResultTable {
    pub fn get(&self, n: Option<usize>, statistic: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.n == n && r.statistic == statistic)
    }

    /// Estimate of `statistic` at `n`, or an error naming the missing cell.
    pub fn value(&self, n: Option<usize>, statistic: &str) -> Result<f64> {
        self.get(n, statistic)
            .map(|r| r.estimate)
            .ok_or_else(|| Error::invalid(format!("table has no '{statistic}' row for n={}", fmt_n(n))))
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Markdown => self.to_markdown(),
        }
    }

    /// Rows plus reproducible metadata; floats are written in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        let m = &self.metadata;
        for r in &self.rows {
            w.write_record([
                m.experiment.clone(),
                fmt_n(r.n),
                r.statistic.clone(),
                format!("{:?}", r.estimate),
                r.std_error.map(|s| format!("{s:?}")).unwrap_or_default(),
                m.config_hash.clone(),
                m.seed.to_string(),
                m.failures.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::Parse { line: 1, message: format!("unexpected header {header:?}") });
        }
        let mut rows = Vec::new();
        let mut meta: Option<TableMetadata> = None;
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx as u64 + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let bad = |what: &str| Error::Parse { line, message: format!("bad {what}") };
            let n = match &rec[1] {
                "inf" => None,
                s => Some(s.parse().map_err(|_| bad("n"))?),
            };
            let estimate = rec[3].parse().map_err(|_| bad("estimate"))?;
            let std_error = match &rec[4] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("std_error"))?),
            };
            let this = TableMetadata {
                experiment: rec[0].to_string(),
                config_hash: rec[5].to_string(),
                seed: rec[6].parse().map_err(|_| bad("seed"))?,
                replicates: 0,
                failures: rec[7].parse().map_err(|_| bad("failures"))?,
                runtime_secs: 0.0,
            };
            match &meta {
                None => meta = Some(this),
                Some(m) if m.config_hash != this.config_hash || m.experiment != this.experiment => {
                    return Err(Error::Parse { line, message: "rows disagree on experiment or config hash".into() })
                }
                Some(_) => {}
            }
            rows.push(ResultRow { n, statistic: rec[2].to_string(), estimate, std_error });
        }
        let metadata = meta.ok_or_else(|| Error::Parse { line: 1, message: "table has no rows".into() })?;
        Ok(Self { metadata, rows })
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let m = &self.metadata;
        let _ = writeln!(s, "### {}\n", m.experiment);
        s.push_str("| n | statistic | estimate | std. error |\n|---:|:---|---:|---:|\n");
        for r in &self.rows {
            let se = r.std_error.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "| {} | {} | {:.4} | {} |", fmt_n(r.n), r.statistic, r.estimate, se);
        }
        let _ = writeln!(
            s,
            "\nconfig `{}`, seed {}, {} replicates, {} failures, {:.1} s",
            m.config_hash, m.seed, m.replicates, m.failures, m.runtime_secs
        );
        s
    }
}

fn fmt_n(n: Option<usize>) -> String {
    n.map(|v| v.to_string()).unwrap_or_else(|| "inf".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        ResultTable {
            metadata: TableMetadata {
                experiment: "demo".into(),
                config_hash: "abc".into(),
                seed: 7,
                replicates: 10,
                failures: 1,
                runtime_secs: 0.0,
            },
            rows: vec![
                ResultRow::new(Some(10), "n_var_cv", 0.1 + 0.2, Some(1e-3)),
                ResultRow::new(None, "n_var_cv", 2.124, None),
            ],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let mut back = ResultTable::from_csv(&t.to_csv()).unwrap();
        back.metadata.replicates = t.metadata.replicates;
        assert_eq!(back, t);
    }

    #[test]
    fn markdown_mentions_every_row() {
        let md = sample().to_markdown();
        assert!(md.contains("| 10 | n_var_cv | 0.3000 | 0.0010 |"));
        assert!(md.contains("| inf | n_var_cv | 2.1240 | - |"));
    }

    #[test]
    fn bad_header_is_a_parse_error() {
        assert!(matches!(ResultTable::from_csv("a,b\n1,2\n"), Err(Error::Parse { line: 1, .. })));
    }
}
