use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::frequency::FrequencyLexicon;
use super::{minmax_normalize, regularize_frequency, regularize_length, AvgMap};

pub const LEXICON_FORMAT: &str = "gazekex-lexicon 1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Native,
    Expanded,
    MeanFilled,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Native => "native",
            Source::Expanded => "expanded",
            Source::MeanFilled => "mean_filled",
        })
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "native" => Ok(Source::Native),
            "expanded" => Ok(Source::Expanded),
            "mean_filled" => Ok(Source::MeanFilled),
            other => Err(Error::config(format!("unknown lexicon source {other:?}"))),
        }
    }
}

/// Which regularizers are applied to AVG-TRT before normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Regularization {
    pub frequency: bool,
    pub length: bool,
}

impl Regularization {
    pub const NONE: Self = Regularization {
        frequency: false,
        length: false,
    };
    pub const BOTH: Self = Regularization {
        frequency: true,
        length: true,
    };

    pub fn label(&self) -> &'static str {
        match (self.frequency, self.length) {
            (false, false) => "none",
            (true, false) => "freq",
            (false, true) => "len",
            (true, true) => "freq+len",
        }
    }
}

impl fmt::Display for Regularization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Regularization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "" => Ok(Regularization::NONE),
            "freq" | "frequency" => Ok(Regularization {
                frequency: true,
                length: false,
            }),
            "len" | "length" => Ok(Regularization {
                frequency: false,
                length: true,
            }),
            "freq+len" | "both" | "len+freq" => Ok(Regularization::BOTH),
            other => Err(Error::config(format!(
                "unknown regularization {other:?} (none, freq, len, freq+len)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LexiconEntry {
    /// Milliseconds per participant, averaged over occurrences.
    pub avg_trt: f64,
    /// `avg_trt` after the configured regularizers.
    pub regularized: f64,
    /// Min-max normalized value in `[0, 1]`.
    pub normalized: f64,
    pub source: Source,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LexiconMeta {
    pub corpus: String,
    pub genre: String,
    pub regularization: Regularization,
    /// Normalization bounds over the native `regularized` values.
    pub min: f64,
    pub max: f64,
}

/// Word-level reading-time lexicon. Keys are lowercased.
#[derive(Clone, Debug, PartialEq)]
pub struct GazeLexicon {
    pub meta: LexiconMeta,
    entries: BTreeMap<String, LexiconEntry>,
}

impl GazeLexicon {
    /// Builds native entries from AVG-TRT values: regularize, then one min-max pass.
    pub fn build(
        avg: &AvgMap,
        regularization: Regularization,
        freq: Option<&FrequencyLexicon>,
        corpus: &str,
        genre: &str,
    ) -> Result<Self> {
        let mut regularized = avg.clone();
        if regularization.frequency {
            let freq = freq.ok_or_else(|| {
                Error::config("frequency regularization needs a frequency lexicon")
            })?;
            regularized = regularize_frequency(&regularized, freq);
        }
        if regularization.length {
            regularized = regularize_length(&regularized);
        }
        let meta = |min, max| LexiconMeta {
            corpus: corpus.to_string(),
            genre: genre.to_string(),
            regularization,
            min,
            max,
        };
        if regularized.is_empty() {
            return Ok(GazeLexicon {
                meta: meta(0.0, 0.0),
                entries: BTreeMap::new(),
            });
        }
        let normalized = minmax_normalize(&regularized)?;
        let entries = avg
            .iter()
            .map(|(w, &a)| {
                (
                    w.to_lowercase(),
                    LexiconEntry {
                        avg_trt: a,
                        regularized: regularized[w],
                        normalized: normalized.values[w],
                        source: Source::Native,
                    },
                )
            })
            .collect();
        Ok(GazeLexicon {
            meta: meta(normalized.min, normalized.max),
            entries,
        })
    }

    /// Rebuilds the native entries under a different regularization, dropping
    /// any expanded or filled entries.
    pub fn regularize(
        &self,
        regularization: Regularization,
        freq: Option<&FrequencyLexicon>,
    ) -> Result<Self> {
        GazeLexicon::build(
            &self.native_averages(),
            regularization,
            freq,
            &self.meta.corpus,
            &self.meta.genre,
        )
    }

    /// Recomputes `normalized` from `regularized` over native entries.
    /// Non-native entries are clamped into `[0, 1]` under the new bounds.
    pub fn normalize(&self) -> Result<Self> {
        let natives: AvgMap = self
            .entries
            .iter()
            .filter(|(_, e)| e.source == Source::Native)
            .map(|(w, e)| (w.clone(), e.regularized))
            .collect();
        if natives.is_empty() {
            return Err(Error::empty("lexicon has no native entries to normalize"));
        }
        let n = minmax_normalize(&natives)?;
        let span = n.max - n.min;
        let mut out = self.clone();
        out.meta.min = n.min;
        out.meta.max = n.max;
        for (w, e) in out.entries.iter_mut() {
            e.normalized = match n.values.get(w) {
                Some(&v) => v,
                None if span > 0.0 => ((e.regularized - n.min) / span).clamp(0.0, 1.0),
                None => 0.0,
            };
        }
        Ok(out)
    }

    pub fn from_entries(meta: LexiconMeta, entries: BTreeMap<String, LexiconEntry>) -> Self {
        GazeLexicon { meta, entries }
    }

    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.entries
            .get(word)
            .or_else(|| self.entries.get(&word.to_lowercase()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    /// Normalized value for `word`, if present.
    pub fn value(&self, word: &str) -> Option<f64> {
        self.get(word).map(|e| e.normalized)
    }

    /// Normalized value, or the mean native value for words not in the lexicon.
    pub fn value_or_fill(&self, word: &str) -> f64 {
        self.value(word).unwrap_or_else(|| self.native_mean())
    }

    /// Mean normalized value over native entries (0 with no natives).
    pub fn native_mean(&self) -> f64 {
        let (sum, n) = self
            .natives()
            .fold((0.0, 0usize), |(s, n), (_, e)| (s + e.normalized, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, LexiconEntry> {
        &self.entries
    }

    pub fn natives(&self) -> impl Iterator<Item = (&String, &LexiconEntry)> {
        self.entries.iter().filter(|(_, e)| e.source == Source::Native)
    }

    pub fn native_averages(&self) -> AvgMap {
        self.natives().map(|(w, e)| (w.clone(), e.avg_trt)).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn insert(&mut self, word: String, entry: LexiconEntry) {
        self.entries.insert(word, entry);
    }

    pub fn to_tsv(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        out.push_str(&format!("# {LEXICON_FORMAT}\n"));
        out.push_str(&format!("# corpus: {}\n", m.corpus));
        out.push_str(&format!("# genre: {}\n", m.genre));
        out.push_str(&format!("# frequency_regularized: {}\n", m.regularization.frequency));
        out.push_str(&format!("# length_regularized: {}\n", m.regularization.length));
        out.push_str(&format!("# min: {:?}\n", m.min));
        out.push_str(&format!("# max: {:?}\n", m.max));
        out.push_str("word\tavg_trt\tregularized\tnormalized\tsource\n");
        for (w, e) in &self.entries {
            out.push_str(&format!(
                "{w}\t{:?}\t{:?}\t{:?}\t{}\n",
                e.avg_trt, e.regularized, e.normalized, e.source
            ));
        }
        out
    }

    pub fn from_tsv(text: &str, origin: &Path) -> Result<Self> {
        let mut meta = LexiconMeta {
            corpus: String::new(),
            genre: String::new(),
            regularization: Regularization::NONE,
            min: 0.0,
            max: 0.0,
        };
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                let Some((key, value)) = rest.split_once(':') else { continue };
                let value = value.trim();
                let bad = |what: &str| Error::parse(origin, n, format!("bad {what} {value:?}"));
                match key.trim() {
                    "corpus" => meta.corpus = value.to_string(),
                    "genre" => meta.genre = value.to_string(),
                    "frequency_regularized" => {
                        meta.regularization.frequency = value.parse().map_err(|_| bad("flag"))?
                    }
                    "length_regularized" => {
                        meta.regularization.length = value.parse().map_err(|_| bad("flag"))?
                    }
                    "min" => meta.min = value.parse().map_err(|_| bad("min"))?,
                    "max" => meta.max = value.parse().map_err(|_| bad("max"))?,
                    _ => {}
                }
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.first() == Some(&"word") {
                continue;
            }
            if f.len() != 5 {
                return Err(Error::parse(origin, n, format!("expected 5 fields, found {}", f.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(origin, n, format!("bad number {s:?}")))
            };
            let entry = LexiconEntry {
                avg_trt: num(f[1])?,
                regularized: num(f[2])?,
                normalized: num(f[3])?,
                source: f[4]
                    .parse()
                    .map_err(|e: Error| Error::parse(origin, n, e.to_string()))?,
            };
            if !(0.0..=1.0).contains(&entry.normalized) {
                return Err(Error::parse(origin, n, "normalized value outside [0, 1]"));
            }
            entries.insert(f[0].to_lowercase(), entry);
        }
        Ok(GazeLexicon { meta, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::error::write_text(path, &self.to_tsv())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GazeLexicon::from_tsv(&text, path)
    }
}
