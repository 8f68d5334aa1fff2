//! Eye-tracking corpus readers.
//!
//! All presets are tab-separated with a header row. Column names are matched
//! case-insensitively; columns not listed here (FFD, GD, GPT, …) are ignored.
//!
//! | format        | word     | TRT                       | occurrence key          | participant |
//! |---------------|----------|---------------------------|-------------------------|-------------|
//! | `generic-tsv` | `word`   | `trt_ms`                  | `context_id`            | -           |
//! | `geco`        | `WORD`   | `WORD_TOTAL_READING_TIME` | `WORD_ID`               | `PP_NR`     |
//! | `zuco`        | `word`   | `TRT`                     | `sentence_id`+`word_id` | `subject`   |
//!
//! The generic format already carries TRT summed over participants, one row per
//! occurrence. The GECO and ZuCo presets have one row per participant and
//! occurrence; rows sharing an occurrence key are summed. A TRT of `-`, `.`,
//! `NA` or an empty cell marks a skipped word and counts as 0 ms.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FixationRecord {
    pub word: String,
    pub context_id: String,
    /// Total reading time summed over participants; 0 when skipped.
    pub trt_ms: f64,
    pub participant_count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OsecFormat {
    Geco,
    Zuco,
    GenericTsv,
}

impl FromStr for OsecFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "geco" => Ok(OsecFormat::Geco),
            "zuco" => Ok(OsecFormat::Zuco),
            "generic-tsv" | "generic" | "tsv" => Ok(OsecFormat::GenericTsv),
            other => Err(Error::config(format!(
                "unknown eye-tracking format {other:?} (expected geco, zuco, generic-tsv)"
            ))),
        }
    }
}

impl fmt::Display for OsecFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OsecFormat::Geco => "geco",
            OsecFormat::Zuco => "zuco",
            OsecFormat::GenericTsv => "generic-tsv",
        })
    }
}

pub fn ingest_osec(path: &Path, format: OsecFormat, participants: u32) -> Result<Vec<FixationRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_osec(&text, path, format, participants)
}

pub fn parse_osec(
    text: &str,
    origin: &Path,
    format: OsecFormat,
    participants: u32,
) -> Result<Vec<FixationRecord>> {
    if participants == 0 {
        return Err(Error::config("participant count must be at least 1"));
    }
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((header_line, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let columns: Vec<String> = header.split('\t').map(|c| c.trim().to_lowercase()).collect();
    let col = |name: &str| {
        columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::parse(origin, header_line, format!("missing column {name:?}")))
    };
    let (word_col, trt_col, key_cols): (usize, usize, Vec<usize>) = match format {
        OsecFormat::GenericTsv => (col("word")?, col("trt_ms")?, vec![col("context_id")?]),
        OsecFormat::Geco => (
            col("word")?,
            col("word_total_reading_time")?,
            vec![col("word_id")?],
        ),
        OsecFormat::Zuco => (
            col("word")?,
            col("trt")?,
            vec![col("sentence_id")?, col("word_id")?],
        ),
    };
    let needed = key_cols
        .iter()
        .copied()
        .chain([word_col, trt_col])
        .max()
        .unwrap_or(0);

    let mut records: Vec<FixationRecord> = Vec::new();
    let mut by_key: HashMap<String, usize> = HashMap::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() <= needed {
            return Err(Error::parse(
                origin,
                n,
                format!("expected at least {} fields, found {}", needed + 1, fields.len()),
            ));
        }
        let word = fields[word_col].trim();
        if word.is_empty() {
            return Err(Error::parse(origin, n, "empty word"));
        }
        let trt = parse_trt(fields[trt_col]).map_err(|m| Error::parse(origin, n, m))?;
        let key = key_cols
            .iter()
            .map(|&c| fields[c].trim())
            .collect::<Vec<_>>()
            .join(":");
        match format {
            OsecFormat::GenericTsv => records.push(FixationRecord {
                word: word.to_string(),
                context_id: key,
                trt_ms: trt,
                participant_count: participants,
            }),
            OsecFormat::Geco | OsecFormat::Zuco => match by_key.get(&key) {
                Some(&i) => {
                    if records[i].word != word {
                        return Err(Error::parse(
                            origin,
                            n,
                            format!(
                                "occurrence {key} is {:?} here but {:?} earlier",
                                word, records[i].word
                            ),
                        ));
                    }
                    records[i].trt_ms += trt;
                }
                None => {
                    by_key.insert(key.clone(), records.len());
                    records.push(FixationRecord {
                        word: word.to_string(),
                        context_id: key,
                        trt_ms: trt,
                        participant_count: participants,
                    });
                }
            },
        }
    }
    Ok(records)
}

fn parse_trt(raw: &str) -> std::result::Result<f64, String> {
    let raw = raw.trim();
    if matches!(raw, "" | "-" | "." | "NA" | "nan" | "NaN") {
        return Ok(0.0);
    }
    let v: f64 = raw.parse().map_err(|_| format!("bad TRT value {raw:?}"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("TRT must be a nonnegative number, got {raw:?}"));
    }
    Ok(v)
}
