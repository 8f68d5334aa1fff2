//! Losses and decoding on plain values.

use crate::dataset::{tags_to_spans, Span, Tag};
use crate::error::{Error, Result};
use crate::gaze::GazeLexicon;

/// `Σ_w ‖p_w − onehot(gold_w)‖²`.
pub fn loss_word(prob_rows: &[Vec<f64>], gold: &[Tag]) -> Result<f64> {
    if prob_rows.len() != gold.len() {
        return Err(Error::contract(format!(
            "{} probability rows for {} gold tags",
            prob_rows.len(),
            gold.len()
        )));
    }
    let mut total = 0.0;
    for (row, &tag) in prob_rows.iter().zip(gold) {
        if row.len() != Tag::COUNT {
            return Err(Error::contract(format!("probability row has {} entries", row.len())));
        }
        total += row
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let t = if k == tag.index() { 1.0 } else { 0.0 };
                (p - t) * (p - t)
            })
            .sum::<f64>();
    }
    Ok(total)
}

/// `Σ_w (ã_w − â_w)²`.
pub fn loss_attention(attention: &[f64], target: &[f64]) -> Result<f64> {
    if attention.len() != target.len() {
        return Err(Error::contract(format!(
            "attention of length {} against target of length {}",
            attention.len(),
            target.len()
        )));
    }
    Ok(attention.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum())
}

pub fn loss_total(word: f64, attention: f64, lambda_word: f64, lambda_att: f64) -> f64 {
    lambda_word * word + lambda_att * attention
}

/// Per-token lexicon values renormalized to sum to 1; uniform when every
/// value is zero.
pub fn attention_target<S: AsRef<str>>(lexicon: &GazeLexicon, tokens: &[S]) -> Vec<f64> {
    let raw: Vec<f64> = tokens
        .iter()
        .map(|t| lexicon.value_or_fill(t.as_ref()))
        .collect();
    normalize_target(&raw)
}

pub(crate) fn normalize_target(raw: &[f64]) -> Vec<f64> {
    let sum: f64 = raw.iter().sum();
    if sum > 0.0 {
        raw.iter().map(|v| v / sum).collect()
    } else {
        vec![1.0 / raw.len().max(1) as f64; raw.len()]
    }
}

/// Argmax of one row. Ties go to `Not`, then to the earliest of S, B, M, E.
pub fn argmax_tag(row: &[f64]) -> Tag {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if row[Tag::Not.index()] == max {
        return Tag::Not;
    }
    let k = row.iter().position(|&v| v == max).unwrap_or(Tag::Not.index());
    Tag::from_index(k).unwrap_or(Tag::Not)
}

pub fn decode_rows(rows: &[Vec<f64>]) -> (Vec<Tag>, Vec<Span>) {
    let tags: Vec<Tag> = rows.iter().map(|r| argmax_tag(r)).collect();
    let spans = tags_to_spans(&tags);
    (tags, spans)
}
