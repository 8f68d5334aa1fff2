use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Corpus frequency list, counts per 100 million tokens.
///
/// `l_bnc(w) = log10(count(w) × 10)`, the log frequency per billion tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyLexicon {
    counts: BTreeMap<String, f64>,
    log_freq: BTreeMap<String, f64>,
    mean_log_freq: f64,
}

impl FrequencyLexicon {
    /// Builds the lexicon; keys are lowercased and counts of case variants summed.
    pub fn from_counts<I, S>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut merged: BTreeMap<String, f64> = BTreeMap::new();
        for (w, c) in counts {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::contract(format!(
                    "frequency count for {:?} must be positive, got {c}",
                    w.as_ref()
                )));
            }
            *merged.entry(w.as_ref().to_lowercase()).or_insert(0.0) += c;
        }
        if merged.is_empty() {
            return Err(Error::empty("frequency lexicon has no entries"));
        }
        let log_freq: BTreeMap<String, f64> = merged
            .iter()
            .map(|(w, &c)| (w.clone(), per_billion_log(c)))
            .collect();
        let mean_log_freq = log_freq.values().sum::<f64>() / log_freq.len() as f64;
        Ok(FrequencyLexicon {
            counts: merged,
            log_freq,
            mean_log_freq,
        })
    }

    /// Reads `word<TAB>count_per_100M` lines. A header row whose count column
    /// is not numeric is skipped; `#` lines are comments.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(word), Some(count)) = (parts.next(), parts.next()) else {
                return Err(Error::parse(origin, i + 1, "expected word<TAB>count"));
            };
            match count.trim().parse::<f64>() {
                Ok(c) if c.is_finite() && c > 0.0 => rows.push((word.trim().to_string(), c)),
                Ok(c) => {
                    return Err(Error::parse(origin, i + 1, format!("count must be positive, got {c}")))
                }
                Err(_) if rows.is_empty() && i == 0 => continue,
                Err(_) => return Err(Error::parse(origin, i + 1, format!("bad count {count:?}"))),
            }
        }
        Self::from_counts(rows).map_err(|e| match e {
            Error::EmptyInput(m) => Error::parse(origin, 0, m),
            other => other,
        })
    }

    pub fn count(&self, word: &str) -> Option<f64> {
        self.counts.get(&word.to_lowercase()).copied()
    }

    pub fn l_bnc(&self, word: &str) -> Option<f64> {
        self.log_freq.get(&word.to_lowercase()).copied()
    }

    pub fn mean_l_bnc(&self) -> f64 {
        self.mean_log_freq
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn per_billion_log(count_per_100m: f64) -> f64 {
    (count_per_100m * 10.0).log10()
}
