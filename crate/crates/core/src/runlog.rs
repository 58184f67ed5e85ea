//! Run-log CSV ingestion.
//!
//! Columns, in order: `problem_id,strategy,attempt_index,queries,cost_usd,verdict`.
//! `verdict` is `OK` or `FAIL`. A header row is required.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COLUMNS: [&str; 6] = [
    "problem_id",
    "strategy",
    "attempt_index",
    "queries",
    "cost_usd",
    "verdict",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "OK")]
    Ok,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Verdict {
    pub fn is_ok(self) -> bool {
        self == Verdict::Ok
    }
}

/// One logged attempt at one problem under one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub strategy: String,
    pub attempt_index: u32,
    pub queries: u32,
    #[serde(rename = "cost_usd")]
    pub cost: f64,
    pub verdict: Verdict,
}

impl RunRecord {
    fn check(&self) -> Result<(), String> {
        if self.attempt_index < 1 {
            return Err("attempt_index must be >= 1".into());
        }
        if self.queries < 1 {
            return Err("queries must be >= 1".into());
        }
        if !(self.cost.is_finite() && self.cost >= 0.0) {
            return Err(format!(
                "cost_usd must be a non-negative number, got {}",
                self.cost
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the input, header included.
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("header mismatch: expected `{}`, found `{found}`", COLUMNS.join(","))]
    Schema { found: String },
    #[error("{} malformed row(s):\n{}", .0.len(), join_rows(.0))]
    Rows(Vec<RowError>),
    #[error("read error: {0}")]
    Io(String),
}

fn join_rows(rows: &[RowError]) -> String {
    rows.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses and validates a run log. All malformed rows are reported together.
pub fn ingest<R: Read>(source: R) -> Result<Vec<RunRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Io(e.to_string()))?
        .clone();
    if headers.iter().ne(COLUMNS.iter().copied()) {
        return Err(IngestError::Schema {
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen: HashMap<(String, String, u32), u64> = HashMap::new();
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        let rec: RunRecord = match row.deserialize(Some(&headers)) {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if let Err(message) = rec.check() {
            errors.push(RowError { line, message });
            continue;
        }
        let key = (
            rec.problem_id.clone(),
            rec.strategy.clone(),
            rec.attempt_index,
        );
        if let Some(first) = seen.get(&key) {
            errors.push(RowError {
                line,
                message: format!(
                    "duplicate attempt_index {} for problem `{}` / strategy `{}` (first seen on line {first})",
                    rec.attempt_index, rec.problem_id, rec.strategy
                ),
            });
            continue;
        }
        seen.insert(key, line);
        records.push(rec);
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(IngestError::Rows(errors))
    }
}

/// Writes records in the ingest schema.
pub fn serialize<W: Write>(records: &[RunRecord], sink: W) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(sink);
    writer.write_record(COLUMNS)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "problem_id,strategy,attempt_index,queries,cost_usd,verdict\n";

    #[test]
    fn empty_body() {
        assert_eq!(ingest(HEADER.as_bytes()).unwrap(), vec![]);
    }

    #[test]
    fn header_mismatch_is_fatal() {
        let err = ingest("problem,strategy\np1,k\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::Schema { .. }));
        let reordered = "strategy,problem_id,attempt_index,queries,cost_usd,verdict\n";
        assert!(matches!(
            ingest(reordered.as_bytes()),
            Err(IngestError::Schema { .. })
        ));
    }

    #[test]
    fn duplicate_attempt_names_row() {
        let text =
            format!("{HEADER}p1,kshot,1,1,0.1,FAIL\np1,kshot,2,1,0.1,FAIL\np1,kshot,1,1,0.1,OK\n");
        match ingest(text.as_bytes()).unwrap_err() {
            IngestError::Rows(rows) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].line, 4);
                assert!(rows[0].message.contains("duplicate"));
                assert!(rows[0].message.contains("line 2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_are_all_reported() {
        let text = format!(
            "{HEADER}p1,kshot,1,1,0.1,MAYBE\np1,kshot,2,0,0.1,OK\np1,kshot,3,1,-1,OK\np1,kshot,4,1,0.1,OK\np2,kshot,x,1,0.1,OK\n"
        );
        match ingest(text.as_bytes()).unwrap_err() {
            IngestError::Rows(rows) => {
                let lines: Vec<u64> = rows.iter().map(|r| r.line).collect();
                assert_eq!(lines, vec![2, 3, 4, 6]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn same_index_under_different_strategy_is_fine() {
        let text = format!("{HEADER}p1,kshot,1,1,0.1,FAIL\np1,agent,1,7,0.4,OK\n");
        assert_eq!(ingest(text.as_bytes()).unwrap().len(), 2);
    }

    fn arb_record() -> impl Strategy<Value = RunRecord> {
        (
            "[a-z0-9_]{1,6}",
            prop::sample::select(vec!["kshot", "agent", "agent-1/3x3", "with,comma"]),
            1u32..1000,
            1u32..60,
            0.0f64..5.0,
            any::<bool>(),
        )
            .prop_map(|(p, s, i, q, c, ok)| RunRecord {
                problem_id: p,
                strategy: s.to_string(),
                attempt_index: i,
                queries: q,
                cost: c,
                verdict: if ok { Verdict::Ok } else { Verdict::Fail },
            })
    }

    proptest! {
        #[test]
        fn serialize_then_ingest_is_identity(mut recs in prop::collection::vec(arb_record(), 0..40)) {
            let mut seen = std::collections::HashSet::new();
            recs.retain(|r| seen.insert((r.problem_id.clone(), r.strategy.clone(), r.attempt_index)));
            let mut buf = Vec::new();
            serialize(&recs, &mut buf).unwrap();
            let back = ingest(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &recs);
            let mut again = Vec::new();
            serialize(&back, &mut again).unwrap();
            prop_assert_eq!(again, buf);
        }
    }
}
