//! Reading times for words the eye-tracking lexicon does not cover.
//!
//! Each uncovered word is compared, by cosine similarity, against the covered
//! words of the same target vocabulary. The ten most similar candidates are
//! combined with rank weights `r / Σ_{i=1..k} i`, where the most similar
//! candidate gets `r = k` and the least similar `r = 1`.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{GazeLexicon, LexiconEntry, Source};

pub const TOP_K: usize = 10;

/// Word vectors of one fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::shape("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    /// Adds a vector; the first vector seen for a word wins.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape(format!(
                "vector for {word:?} has {} dims, table has {}",
                vector.len(),
                self.dim
            )));
        }
        if self.index.contains_key(word) {
            return Ok(());
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    /// Reads `word v1 … vd` lines; the dimension comes from the first line.
    /// A leading `<count> <dim>` header line is accepted and skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values = parts
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>();
            let values = match values {
                Ok(v) => v,
                Err(e) => return Err(Error::parse(origin, n, format!("bad vector value: {e}"))),
            };
            if table.is_none() && values.len() == 1 && word.parse::<usize>().is_ok() {
                continue;
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(origin, n, "non-finite vector value"));
            }
            let t = match &mut table {
                Some(t) => t,
                None => table.insert(
                    EmbeddingTable::new(values.len())
                        .map_err(|_| Error::parse(origin, n, "vector with no components"))?,
                ),
            };
            t.insert(word, &values)
                .map_err(|e| Error::parse(origin, n, e.to_string()))?;
        }
        table.ok_or_else(|| Error::parse(origin, 0, "embedding file has no vectors"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EmbeddingTable::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                out.push(' ');
                out.push_str(&format!("{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    /// Exact match first, then the lowercased form.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        let i = self
            .index
            .get(word)
            .or_else(|| self.index.get(&word.to_lowercase()))?;
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape(format!(
            "cosine of vectors with {} and {} dims",
            u.len(),
            v.len()
        )));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::UndefinedSimilarity(
            "cosine with a zero vector".into(),
        ));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Character-level word vectors, used when a pair lacks pretrained vectors.
pub trait CharEncoder {
    fn encode(&self, word: &str) -> Option<Vec<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilaritySource {
    Pretrained,
    CharLevel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedCandidate {
    pub word: String,
    pub similarity: f64,
    pub source: SimilaritySource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityRanking {
    pub out_word: String,
    /// Most similar first, at most [`TOP_K`] long.
    pub candidates: Vec<RankedCandidate>,
}

/// Scores uncovered words against a fixed candidate list, caching the
/// candidates' character-level vectors.
pub struct Ranker<'a> {
    candidates: Vec<String>,
    pretrained: Option<&'a EmbeddingTable>,
    char_encoder: Option<&'a dyn CharEncoder>,
    char_vectors: Vec<Option<Vec<f64>>>,
}

impl<'a> Ranker<'a> {
    pub fn new(
        in_vocab: &[String],
        pretrained: Option<&'a EmbeddingTable>,
        char_encoder: Option<&'a dyn CharEncoder>,
    ) -> Result<Self> {
        if in_vocab.is_empty() {
            return Err(Error::empty("no in-lexicon candidates to rank"));
        }
        let candidates: Vec<String> = in_vocab
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let char_vectors = candidates
            .iter()
            .map(|w| {
                let needs_char = pretrained.is_none_or(|t| !t.contains(w));
                match (needs_char, char_encoder) {
                    (_, None) => None,
                    // computed lazily below only when the out word lacks a vector
                    (false, Some(_)) => None,
                    (true, Some(enc)) => enc.encode(w),
                }
            })
            .collect();
        Ok(Ranker {
            candidates,
            pretrained,
            char_encoder,
            char_vectors,
        })
    }

    fn candidate_char_vector(&mut self, i: usize) -> Option<Vec<f64>> {
        if self.char_vectors[i].is_none() {
            if let Some(enc) = self.char_encoder {
                self.char_vectors[i] = enc.encode(&self.candidates[i]);
            }
        }
        self.char_vectors[i].clone()
    }

    pub fn rank(&mut self, out_word: &str) -> SimilarityRanking {
        let out_pre = self.pretrained.and_then(|t| t.get(out_word));
        let mut out_char: Option<Option<Vec<f64>>> = None;
        let mut scored: Vec<RankedCandidate> = Vec::new();
        for i in 0..self.candidates.len() {
            let cand_pre = self.pretrained.and_then(|t| t.get(&self.candidates[i]));
            let pair = match (out_pre, cand_pre) {
                (Some(u), Some(v)) => cosine(u, v).ok().map(|s| (s, SimilaritySource::Pretrained)),
                _ => {
                    let oc = out_char
                        .get_or_insert_with(|| self.char_encoder.and_then(|e| e.encode(out_word)))
                        .clone();
                    match (oc, self.candidate_char_vector(i)) {
                        (Some(u), Some(v)) => {
                            cosine(&u, &v).ok().map(|s| (s, SimilaritySource::CharLevel))
                        }
                        _ => None,
                    }
                }
            };
            if let Some((similarity, source)) = pair {
                scored.push(RankedCandidate {
                    word: self.candidates[i].clone(),
                    similarity,
                    source,
                });
            }
        }
        scored.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then_with(|| a.word.cmp(&b.word))
        });
        scored.truncate(TOP_K);
        SimilarityRanking {
            out_word: out_word.to_string(),
            candidates: scored,
        }
    }
}

pub fn rank_candidates(
    out_word: &str,
    in_vocab: &[String],
    pretrained: Option<&EmbeddingTable>,
    char_encoder: Option<&dyn CharEncoder>,
) -> Result<SimilarityRanking> {
    Ok(Ranker::new(in_vocab, pretrained, char_encoder)?.rank(out_word))
}

/// Weights for `k` ranked candidates, most similar first: `(k − j) / Σ_{i=1..k} i`.
pub fn rank_weights(k: usize) -> Vec<f64> {
    let total = (k * (k + 1) / 2) as f64;
    (0..k).map(|j| (k - j) as f64 / total).collect()
}

/// Rank-weighted combination of the candidates' normalized values.
/// An empty ranking falls back to the lexicon's native mean.
pub fn expand_trt(ranking: &SimilarityRanking, lexicon: &GazeLexicon) -> Result<f64> {
    Ok(expanded_entry(ranking, lexicon)?.normalized)
}

fn expanded_entry(ranking: &SimilarityRanking, lexicon: &GazeLexicon) -> Result<LexiconEntry> {
    if ranking.candidates.is_empty() {
        log::warn!(
            "no comparable candidates for {:?}; using the mean reading time",
            ranking.out_word
        );
        return Ok(fill_entry(lexicon, Source::MeanFilled));
    }
    let weights = rank_weights(ranking.candidates.len());
    let mut out = LexiconEntry {
        avg_trt: 0.0,
        regularized: 0.0,
        normalized: 0.0,
        source: Source::Expanded,
    };
    for (c, w) in ranking.candidates.iter().zip(weights) {
        let e = lexicon.get(&c.word).ok_or_else(|| {
            Error::contract(format!("ranked candidate {:?} is not in the lexicon", c.word))
        })?;
        out.avg_trt += w * e.avg_trt;
        out.regularized += w * e.regularized;
        out.normalized += w * e.normalized;
    }
    out.normalized = out.normalized.clamp(0.0, 1.0);
    Ok(out)
}

fn fill_entry(lexicon: &GazeLexicon, source: Source) -> LexiconEntry {
    let natives: Vec<&LexiconEntry> = lexicon.natives().map(|(_, e)| e).collect();
    let n = natives.len().max(1) as f64;
    LexiconEntry {
        avg_trt: natives.iter().map(|e| e.avg_trt).sum::<f64>() / n,
        regularized: natives.iter().map(|e| e.regularized).sum::<f64>() / n,
        normalized: lexicon.native_mean(),
        source,
    }
}

fn uncovered(lexicon: &GazeLexicon, target_vocab: &[String]) -> BTreeSet<String> {
    target_vocab
        .iter()
        .map(|w| w.to_lowercase())
        .filter(|w| !lexicon.contains(w))
        .collect()
}

/// Adds an expanded entry for every target word the lexicon lacks.
/// Native entries are copied unchanged.
pub fn expand_lexicon(
    lexicon: &GazeLexicon,
    target_vocab: &[String],
    pretrained: Option<&EmbeddingTable>,
    char_encoder: Option<&dyn CharEncoder>,
) -> Result<GazeLexicon> {
    let missing = uncovered(lexicon, target_vocab);
    if missing.is_empty() {
        return Ok(lexicon.clone());
    }
    let in_vocab: Vec<String> = target_vocab
        .iter()
        .map(|w| w.to_lowercase())
        .filter(|w| lexicon.get(w).is_some_and(|e| e.source == Source::Native))
        .collect();
    if in_vocab.is_empty() {
        log::warn!("no target word has a native reading time; mean-filling {} words", missing.len());
        return Ok(fill_missing(lexicon, missing, Source::MeanFilled));
    }
    let mut ranker = Ranker::new(&in_vocab, pretrained, char_encoder)?;
    let mut out = lexicon.clone();
    for w in missing {
        let ranking = ranker.rank(&w);
        let entry = expanded_entry(&ranking, lexicon)?;
        out.insert(w, entry);
    }
    Ok(out)
}

/// Gives every uncovered target word the mean native normalized value.
pub fn mean_fill(lexicon: &GazeLexicon, target_vocab: &[String]) -> GazeLexicon {
    fill_missing(lexicon, uncovered(lexicon, target_vocab), Source::MeanFilled)
}

fn fill_missing(lexicon: &GazeLexicon, missing: BTreeSet<String>, source: Source) -> GazeLexicon {
    let entry = fill_entry(lexicon, source);
    let mut out = lexicon.clone();
    for w in missing {
        out.insert(w, entry.clone());
    }
    out
}
