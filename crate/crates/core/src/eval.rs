//! Keyphrase scoring and attention analyses.
//!
//! Scores are macro averages over posts. A post's precision is
//! `correct / predicted` and its recall `correct / gold`, where a predicted
//! phrase is correct when it equals a not-yet-matched gold phrase,
//! case-insensitively, token for token. A post with neither predictions nor
//! gold counts as `P = R = 1`. Without predictions a post is left out of the
//! precision mean; without gold it is left out of the recall mean.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{phrase, Post, Span};
use crate::error::{Error, Result};
use crate::tagger::{Prediction, Tagger};

pub const REPORT_FORMAT: &str = "gazekex-report-1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostScore {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

pub fn score_post<S: AsRef<str>, T: AsRef<str>>(predicted: &[S], gold: &[T]) -> PostScore {
    let mut unmatched: Vec<String> = gold.iter().map(|g| g.as_ref().to_lowercase()).collect();
    let mut correct = 0;
    for p in predicted {
        let p = p.as_ref().to_lowercase();
        if let Some(i) = unmatched.iter().position(|g| *g == p) {
            unmatched.swap_remove(i);
            correct += 1;
        }
    }
    let (np, ng) = (predicted.len(), gold.len());
    let (precision, recall) = match (np, ng) {
        (0, 0) => (Some(1.0), Some(1.0)),
        (0, _) => (None, Some(0.0)),
        (_, 0) => (Some(0.0), None),
        _ => (Some(correct as f64 / np as f64), Some(correct as f64 / ng as f64)),
    };
    PostScore {
        precision,
        recall,
        correct,
        predicted: np,
        gold: ng,
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub posts: usize,
    pub predictions: usize,
    pub golds: usize,
    pub correct: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Macro scores over aligned per-post phrase lists.
pub fn score<S: AsRef<str>, T: AsRef<str>>(predictions: &[Vec<S>], golds: &[Vec<T>]) -> Result<RunScore> {
    if predictions.len() != golds.len() {
        return Err(Error::contract(format!(
            "{} predicted posts against {} gold posts",
            predictions.len(),
            golds.len()
        )));
    }
    let per: Vec<PostScore> = predictions.iter().zip(golds).map(|(p, g)| score_post(p, g)).collect();
    let precision = mean(per.iter().filter_map(|s| s.precision));
    let recall = mean(per.iter().filter_map(|s| s.recall));
    Ok(RunScore {
        precision,
        recall,
        f1: f1(precision, recall),
        posts: per.len(),
        predictions: per.iter().map(|s| s.predicted).sum(),
        golds: per.iter().map(|s| s.gold).sum(),
        correct: per.iter().map(|s| s.correct).sum(),
    })
}

pub fn span_phrases(tokens: &[String], spans: &[Span]) -> Vec<String> {
    spans.iter().map(|&s| phrase(tokens, s)).collect()
}

pub fn predict_posts(tagger: &Tagger, posts: &[Post]) -> Result<Vec<Prediction>> {
    posts.iter().map(|p| tagger.predict(p.tokens())).collect()
}

pub fn predicted_phrases(posts: &[Post], predictions: &[Prediction]) -> Vec<Vec<String>> {
    posts
        .iter()
        .zip(predictions)
        .map(|(p, pr)| span_phrases(p.tokens(), &pr.spans))
        .collect()
}

pub fn gold_phrases(posts: &[Post]) -> Vec<Vec<String>> {
    posts.iter().map(Post::gold_phrases).collect()
}

/// Predicts and scores `posts`.
pub fn evaluate(tagger: &Tagger, posts: &[Post]) -> Result<RunScore> {
    let preds = predict_posts(tagger, posts)?;
    score(&predicted_phrases(posts, &preds), &gold_phrases(posts))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean of the averaged precision and recall.
    pub f1: f64,
    pub runs: usize,
}

pub fn aggregate(runs: &[RunScore]) -> Aggregate {
    let precision = mean(runs.iter().map(|r| r.precision));
    let recall = mean(runs.iter().map(|r| r.recall));
    Aggregate {
        precision,
        recall,
        f1: f1(precision, recall),
        runs: runs.len(),
    }
}

fn phrase_set<S: AsRef<str>>(phrases: &[S]) -> BTreeSet<String> {
    phrases.iter().map(|p| p.as_ref().to_lowercase()).collect()
}

/// Indices of posts where `a` predicts exactly the gold phrases and `b` does not.
pub fn disagreement_subset<S: AsRef<str>>(a: &[Vec<S>], b: &[Vec<S>], golds: &[Vec<S>]) -> Result<Vec<usize>> {
    if a.len() != golds.len() || b.len() != golds.len() {
        return Err(Error::contract("disagreement subset needs three aligned lists"));
    }
    Ok((0..golds.len())
        .filter(|&i| {
            let g = phrase_set(&golds[i]);
            phrase_set(&a[i]) == g && phrase_set(&b[i]) != g
        })
        .collect())
}

/// Indices of test posts with gold phrases, none of which is a training gold phrase.
pub fn generalization_subset(train: &[Post], test: &[Post]) -> Vec<usize> {
    let seen: BTreeSet<String> = train.iter().flat_map(Post::gold_phrases).collect();
    (0..test.len())
        .filter(|&i| {
            let g = test[i].gold_phrases();
            !g.is_empty() && g.iter().all(|p| !seen.contains(p))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub post_id: String,
    pub gold_phrase: String,
    pub mean_attention: f64,
    /// 1 for the largest attention; ties take the best rank.
    pub rank: usize,
    pub post_len: usize,
}

/// `1 + #{tokens whose attention exceeds the span's mean attention}`.
pub fn rank_of(attention: &[f64], (s, e): Span) -> Result<(f64, usize)> {
    if s >= e || e > attention.len() {
        return Err(Error::contract(format!(
            "span ({s}, {e}) outside attention of length {}",
            attention.len()
        )));
    }
    let m = attention[s..e].iter().sum::<f64>() / (e - s) as f64;
    Ok((m, 1 + attention.iter().filter(|&&a| a > m).count()))
}

/// Rank of the post's first gold keyphrase under the model's attention.
pub fn attention_rank(tagger: &Tagger, post: &Post) -> Result<RankRecord> {
    if !tagger.config().variant.has_attention() {
        return Err(Error::config(format!(
            "the {} variant has no attention to rank",
            tagger.config().variant
        )));
    }
    let &span = post
        .gold_spans()
        .first()
        .ok_or_else(|| Error::contract(format!("post {:?} has no gold keyphrase", post.id())))?;
    let attention = tagger.forward(post.tokens())?.attention.expect("attention variant");
    let (mean_attention, rank) = rank_of(&attention, span)?;
    Ok(RankRecord {
        post_id: post.id().to_string(),
        gold_phrase: phrase(post.tokens(), span),
        mean_attention,
        rank,
        post_len: post.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub rank: usize,
    pub count_a: usize,
    pub count_b: usize,
}

pub fn rank_histogram(a: &[RankRecord], b: &[RankRecord]) -> Vec<HistogramRow> {
    let max = a.iter().chain(b).map(|r| r.rank).max().unwrap_or(0);
    (1..=max)
        .map(|rank| HistogramRow {
            rank,
            count_a: a.iter().filter(|r| r.rank == rank).count(),
            count_b: b.iter().filter(|r| r.rank == rank).count(),
        })
        .collect()
}

pub fn median_rank(records: &[RankRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let mut r: Vec<usize> = records.iter().map(|r| r.rank).collect();
    r.sort_unstable();
    let n = r.len();
    Some(if n % 2 == 1 {
        r[n / 2] as f64
    } else {
        (r[n / 2 - 1] + r[n / 2]) as f64 / 2.0
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankAnalysis {
    pub model_a: String,
    pub model_b: String,
    pub subset_size: usize,
    pub records_a: Vec<RankRecord>,
    pub records_b: Vec<RankRecord>,
    pub histogram: Vec<HistogramRow>,
}

impl RankAnalysis {
    pub fn new(model_a: &str, model_b: &str, records_a: Vec<RankRecord>, records_b: Vec<RankRecord>) -> Self {
        RankAnalysis {
            model_a: model_a.to_string(),
            model_b: model_b.to_string(),
            subset_size: records_a.len().max(records_b.len()),
            histogram: rank_histogram(&records_a, &records_b),
            records_a,
            records_b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub seed: u64,
    pub score: RunScore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub runs: Vec<RunReport>,
    /// Mean over runs, per label.
    pub aggregates: BTreeMap<String, Aggregate>,
    /// Named post-subset sizes.
    pub subsets: BTreeMap<String, usize>,
    pub rank_analysis: Option<RankAnalysis>,
}

impl Default for EvalReport {
    fn default() -> Self {
        EvalReport {
            format: REPORT_FORMAT.to_string(),
            runs: Vec::new(),
            aggregates: BTreeMap::new(),
            subsets: BTreeMap::new(),
            rank_analysis: None,
        }
    }
}

impl EvalReport {
    pub fn push_run(&mut self, label: &str, seed: u64, score: RunScore) {
        self.runs.push(RunReport {
            label: label.to_string(),
            seed,
            score,
        });
        let scores: Vec<RunScore> = self.runs.iter().filter(|r| r.label == label).map(|r| r.score).collect();
        self.aggregates.insert(label.to_string(), aggregate(&scores));
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        writeln!(out, "runs: {}", self.runs.len()).unwrap();
        if !self.aggregates.is_empty() {
            writeln!(out, "\n{:<28} {:>4} {:>8} {:>8} {:>8}", "model", "runs", "P", "R", "F1").unwrap();
            for (label, a) in &self.aggregates {
                writeln!(
                    out,
                    "{label:<28} {:>4} {:>8.4} {:>8.4} {:>8.4}",
                    a.runs, a.precision, a.recall, a.f1
                )
                .unwrap();
            }
        }
        if !self.subsets.is_empty() {
            writeln!(out, "\nsubsets:").unwrap();
            for (name, n) in &self.subsets {
                writeln!(out, "  {name}: {n}").unwrap();
            }
        }
        if let Some(r) = &self.rank_analysis {
            let med = |x: &[RankRecord]| median_rank(x).map_or("-".into(), |m| format!("{m}"));
            writeln!(out, "\nattention rank over {} posts:", r.subset_size).unwrap();
            writeln!(out, "  {}: median rank {}", r.model_a, med(&r.records_a)).unwrap();
            writeln!(out, "  {}: median rank {}", r.model_b, med(&r.records_b)).unwrap();
        }
        out
    }

    pub fn histogram_tsv(&self) -> String {
        let mut out = String::from("rank\tcount_modelA\tcount_modelB\n");
        if let Some(r) = &self.rank_analysis {
            for row in &r.histogram {
                writeln!(out, "{}\t{}\t{}", row.rank, row.count_a, row.count_b).unwrap();
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub record: PathBuf,
    pub summary: PathBuf,
    pub histogram: PathBuf,
}

/// Writes `report.json`, `summary.txt` and `rank_histogram.tsv` into `dir`.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        record: dir.join("report.json"),
        summary: dir.join("summary.txt"),
        histogram: dir.join("rank_histogram.tsv"),
    };
    let json = serde_json::to_string_pretty(report).expect("reports serialize");
    fs::write(&files.record, json + "\n").map_err(|e| Error::io(&files.record, e))?;
    fs::write(&files.summary, report.summary()).map_err(|e| Error::io(&files.summary, e))?;
    fs::write(&files.histogram, report.histogram_tsv()).map_err(|e| Error::io(&files.histogram, e))?;
    Ok(files)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: EvalReport =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if report.format != REPORT_FORMAT {
        return Err(Error::parse(path, 0, format!("unknown report format {:?}", report.format)));
    }
    Ok(report)
}
