//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs without the libtest harness so the lines always print.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::ops::ControlFlow;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{fixture, gazekex, ok};
use gazekex::dataset::{load_posts, segment_hashtag, spans_to_tags, tags_to_spans, vocabulary, Span, Tag};
use gazekex::eval::{attention_rank, evaluate, median_rank};
use gazekex::expansion::{
    expand_lexicon, expand_trt, rank_weights, EmbeddingTable, RankedCandidate, SimilarityRanking, SimilaritySource,
};
use gazekex::gaze::{self, length_regularized, regularize_length, AvgMap, GazeLexicon, Regularization, Source};
use gazekex::numeric::GradCheckOptions;
use gazekex::pipeline::{build_native_lexicon, fill_lexicon, gradcheck_variant, Fill, LexiconConfig, SourceConfig};
use gazekex::synthetic;
use gazekex::tagger::{train, train_with, ModelConfig, Tagger, Variant};

const GRAD_TOL: f64 = 1e-4;
const GRAD_FLOOR: f64 = 1e-8;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const ORACLE_TOL: f64 = 1e-9;
const WEIGHT_SUM_TOL: f64 = 1e-12;
const ORACLE_CASES: usize = 50;
const OVERFIT_F1: f64 = 0.95;
const OVERFIT_MAX_EPOCHS: usize = 200;
const OVERFIT_BUDGET: Duration = Duration::from_secs(300);
const RANK_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const RANK_MIN_WINS: usize = 4;
const FUZZ_CASES: usize = 1000;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn small(variant: Variant, seed: u64, epochs: usize) -> ModelConfig {
    ModelConfig {
        variant,
        seed,
        epochs,
        word_emb_dim: synthetic::FIXTURE_EMBEDDING_DIM,
        char_emb_dim: 8,
        char_hidden: 8,
        char_word_dim: 8,
        word_hidden: 16,
        attention_dim: 8,
        ..ModelConfig::default()
    }
}

fn fixture_embeddings() -> Result<EmbeddingTable, String> {
    EmbeddingTable::load(&fixture("embeddings.txt")).map_err(err)
}

fn fixture_sources() -> Vec<SourceConfig> {
    [("osec_news.tsv", "news"), ("osec_wiki.tsv", "wikipedia")]
        .iter()
        .map(|(f, g)| SourceConfig {
            path: fixture(f),
            format: gaze::OsecFormat::GenericTsv,
            participants: synthetic::OSEC_PARTICIPANTS,
            corpus: f.trim_end_matches(".tsv").to_string(),
            genre: g.to_string(),
        })
        .collect()
}

fn lexicon_config(sources: Vec<SourceConfig>) -> LexiconConfig {
    LexiconConfig {
        sources,
        frequency: Some(fixture("frequency.tsv")),
        regularization: Regularization::NONE,
    }
}

fn all_regularizations() -> Vec<Regularization> {
    ["none", "freq", "len", "freq+len"].iter().map(|s| s.parse().unwrap()).collect()
}

fn c1_gradient_fidelity() -> Outcome {
    let opts = GradCheckOptions::default();
    ensure(opts.floor == GRAD_FLOOR, || format!("gradcheck floor is {}", opts.floor))?;
    let t0 = Instant::now();
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for v in Variant::ALL {
        let r = gradcheck_variant(v, 1).map_err(err)?;
        ensure(r.max_relative_error < GRAD_TOL, || {
            format!("{v}: max relative error {:e} at {:?}", r.max_relative_error, r.worst())
        })?;
        worst = worst.max(r.max_relative_error);
        parts.push(format!("{v} {:.1e}", r.max_relative_error));
    }
    let dt = t0.elapsed();
    ensure(dt < GRAD_BUDGET, || format!("took {dt:?}"))?;
    Ok(format!("{} (worst {worst:.1e} < {GRAD_TOL:e}) in {:.2}s", parts.join(", "), dt.as_secs_f64()))
}

fn c2_length_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut max_diff: f64 = 0.0;
    for _ in 0..ORACLE_CASES {
        let avg: f64 = rng.gen_range(20.0..1500.0);
        let len: usize = rng.gen_range(1..20);
        let mut oracle = avg;
        for _ in 0..len {
            oracle /= 1.08;
        }
        let word = "x".repeat(len);
        let via_map = regularize_length(&AvgMap::from([(word.clone(), avg)]))[&word];
        for got in [length_regularized(avg, len), via_map] {
            max_diff = max_diff.max((got - oracle).abs());
        }
        ensure(length_regularized(avg, 0) == avg, || format!("Len 0 changed {avg}"))?;
        let digits = regularize_length(&AvgMap::from([("2016".to_string(), avg)]))["2016"];
        ensure(digits == avg, || format!("letterless word changed {avg} to {digits}"))?;
    }
    ensure(max_diff <= ORACLE_TOL, || format!("max deviation {max_diff:e}"))?;
    Ok(format!("{ORACLE_CASES} pairs, max deviation {max_diff:.1e} <= {ORACLE_TOL:e}; Len 0 exact"))
}

fn c3_rank_weight_oracle() -> Outcome {
    let mut worst_sum: f64 = 0.0;
    for k in 1..=10 {
        let w = rank_weights(k);
        worst_sum = worst_sum.max((w.iter().sum::<f64>() - 1.0).abs());
        ensure(w.windows(2).all(|p| p[0] > p[1]), || format!("k={k}: weights not decreasing"))?;
    }
    ensure(worst_sum <= WEIGHT_SUM_TOL, || format!("weight sum off by {worst_sum:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_diff: f64 = 0.0;
    for case in 0..ORACLE_CASES {
        let n = rng.gen_range(1..=10);
        let mut avg: AvgMap = (0..n).map(|i| (format!("c{i}"), rng.gen_range(50.0..600.0))).collect();
        avg.insert("anchorlow".into(), 10.0);
        avg.insert("anchorhigh".into(), 900.0);
        let lex = GazeLexicon::build(&avg, Regularization::NONE, None, "oracle", "test").map_err(err)?;
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let ranking = SimilarityRanking {
            out_word: format!("oov{case}"),
            candidates: order
                .iter()
                .enumerate()
                .map(|(r, &i)| RankedCandidate {
                    word: format!("c{i}"),
                    similarity: 1.0 - r as f64 * 0.05,
                    source: SimilaritySource::Pretrained,
                })
                .collect(),
        };
        let values: Vec<f64> = order.iter().map(|i| lex.value(&format!("c{i}")).unwrap()).collect();
        let denom = (n * (n + 1)) as f64 / 2.0;
        let brute: f64 = values.iter().enumerate().map(|(j, v)| (n - j) as f64 / denom * v).sum();
        let got = expand_trt(&ranking, &lex).map_err(err)?;
        max_diff = max_diff.max((got - brute).abs());
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ensure(lo - ORACLE_TOL <= got && got <= hi + ORACLE_TOL, || {
            format!("case {case}: E-TRT {got} outside [{lo}, {hi}]")
        })?;
    }
    ensure(max_diff <= ORACLE_TOL, || format!("max deviation {max_diff:e}"))?;
    Ok(format!(
        "weights sum to 1 within {worst_sum:.1e} for k=1..10; {ORACLE_CASES} sets within {max_diff:.1e} and inside candidate range"
    ))
}

fn check_lexicon(lex: &GazeLexicon, label: &str) -> Result<bool, String> {
    for (w, e) in lex.entries() {
        ensure((0.0..=1.0).contains(&e.normalized), || format!("{label}: {w} = {}", e.normalized))?;
    }
    let natives: Vec<&gaze::LexiconEntry> = lex.natives().map(|(_, e)| e).collect();
    let distinct = natives.iter().any(|e| e.regularized != natives[0].regularized);
    if distinct {
        let lo = natives.iter().map(|e| e.normalized).fold(f64::INFINITY, f64::min);
        let hi = natives.iter().map(|e| e.normalized).fold(f64::NEG_INFINITY, f64::max);
        ensure(lo == 0.0 && hi == 1.0, || format!("{label}: native range [{lo}, {hi}]"))?;
    }
    Ok(distinct)
}

fn c4_normalization_contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let posts = load_posts(&fixture("overfit_posts.jsonl")).map_err(err)?;
    let vocab = vocabulary(&posts);
    let emb = fixture_embeddings()?;
    let (mut checked, mut non_degenerate) = (0, 0);
    let sources = fixture_sources();
    let configs = [vec![sources[0].clone()], vec![sources[1].clone()], sources.clone()];
    for reg in all_regularizations() {
        for srcs in &configs {
            let native = build_native_lexicon(&lexicon_config(srcs.clone()), reg).map_err(err)?;
            for fill in [None, Some(Fill::Expanded), Some(Fill::MeanFilled)] {
                let lex = match fill {
                    None => native.clone(),
                    Some(f) => fill_lexicon(&native, &vocab, f, Some(&emb), None).map_err(err)?,
                };
                let path = dir.path().join(format!("lex{checked}.tsv"));
                lex.save(&path).map_err(err)?;
                let back = GazeLexicon::load(&path).map_err(err)?;
                let label = format!("{} {reg} {fill:?}", native.meta.corpus);
                non_degenerate += usize::from(check_lexicon(&back, &label)?);
                checked += 1;
            }
        }
    }
    let flat = GazeLexicon::build(&AvgMap::from([("a".into(), 5.0), ("b".into(), 5.0)]), Regularization::NONE, None, "flat", "t")
        .map_err(err)?;
    ensure(flat.entries().values().all(|e| e.normalized == 0.0), || "degenerate lexicon not mapped to 0".into())?;
    Ok(format!(
        "{checked} emitted lexicons in [0,1]; {non_degenerate} non-degenerate ones attain 0 and 1 exactly"
    ))
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

fn c5_expansion_coverage() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let native_path = dir.path().join("native.tsv");
    let expanded_path = dir.path().join("expanded.tsv");
    let posts_path = fixture("overfit_posts.jsonl");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    ok(&gazekex(["osec", "build", "--input", &s(&fixture("osec_news.tsv")), "--participants", "4", "--out", &s(&native_path)]));
    ok(&gazekex([
        "osec", "expand", "--lexicon", &s(&native_path), "--posts", &s(&posts_path), "--embeddings",
        &s(&fixture("embeddings.txt")), "--fill", "expanded", "--out", &s(&expanded_path),
    ]));
    let before = fs::read_to_string(&native_path).map_err(err)?;
    let after = fs::read_to_string(&expanded_path).map_err(err)?;
    let after_lines: std::collections::BTreeSet<&str> = data_lines(&after).into_iter().collect();
    let native_lines = data_lines(&before);
    ensure(native_lines.iter().all(|l| after_lines.contains(l)), || "a native line changed".into())?;
    let expanded = GazeLexicon::load(&expanded_path).map_err(err)?;
    let tokens: Vec<String> = load_posts(&posts_path).map_err(err)?.iter().flat_map(|p| p.tokens().to_vec()).collect();
    let cli_cov = gaze::coverage(&expanded, &tokens, false).map_err(err)?;
    ensure(cli_cov == 1.0, || format!("CLI coverage {cli_cov}"))?;

    let native = GazeLexicon::load(&native_path).map_err(err)?;
    let emb = fixture_embeddings()?;
    let encoder = Tagger::new(small(Variant::Baseline, 1, 1), None, Some(emb.clone())).map_err(err)?;
    let words: Vec<&str> = synthetic::FILLER_WORDS.iter().chain(synthetic::TOPIC_WORDS).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 20;
    for t in 0..trials {
        let mut vocab: Vec<String> = (0..rng.gen_range(1..40)).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect();
        for _ in 0..rng.gen_range(0..5) {
            vocab.push((0..rng.gen_range(1..9)).map(|_| rng.gen_range(b'a'..=b'z') as char).collect());
        }
        let encoder_ref = (t % 2 == 0).then_some(&encoder as &dyn gazekex::expansion::CharEncoder);
        let lex = expand_lexicon(&native, &vocab, Some(&emb), encoder_ref).map_err(err)?;
        let cov = gaze::coverage(&lex, &vocab, false).map_err(err)?;
        ensure(cov == 1.0, || format!("trial {t}: coverage {cov}"))?;
        for (w, e) in native.entries() {
            ensure(lex.get(w) == Some(e), || format!("trial {t}: native {w} changed"))?;
        }
        ensure(lex.entries().values().filter(|e| e.source == Source::Native).count() == native.len(), || {
            format!("trial {t}: native count changed")
        })?;
    }
    Ok(format!(
        "CLI expand: coverage 1 over {} tokens, {} native lines byte-identical; {trials} random vocabularies also at 1",
        tokens.len(),
        native_lines.len()
    ))
}

fn c6_overfit() -> Outcome {
    let posts = load_posts(&fixture("overfit_posts.jsonl")).map_err(err)?;
    ensure(posts.len() == synthetic::OVERFIT_POSTS, || format!("{} posts", posts.len()))?;
    let emb = fixture_embeddings()?;
    let lexicon_cfg = LexiconConfig {
        sources: vec![fixture_sources()[0].clone()],
        ..lexicon_config(Vec::new())
    };
    let native = build_native_lexicon(&lexicon_cfg, Regularization::BOTH).map_err(err)?;
    let lexicon = fill_lexicon(&native, &vocabulary(&posts), Fill::MeanFilled, None, None).map_err(err)?;
    let t0 = Instant::now();
    let mut parts = Vec::new();
    for v in Variant::ALL {
        let lex = v.needs_lexicon().then(|| lexicon.clone());
        let mut t = Tagger::new(small(v, 1, OVERFIT_MAX_EPOCHS), lex, Some(emb.clone())).map_err(err)?;
        let mut reached: Option<(usize, f64)> = None;
        let mut last = 0.0;
        let mut eval_err = None;
        train_with(&mut t, &posts, &[], |e, t| match evaluate(t, &posts) {
            Ok(s) => {
                last = s.f1;
                if s.f1 >= OVERFIT_F1 {
                    reached = Some((e.epoch, s.f1));
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            }
            Err(x) => {
                eval_err = Some(x.to_string());
                ControlFlow::Break(())
            }
        })
        .map_err(err)?;
        if let Some(x) = eval_err {
            return Err(x);
        }
        let (epoch, f1) = reached.ok_or_else(|| format!("{v}: F1 {last:.3} after {OVERFIT_MAX_EPOCHS} epochs"))?;
        parts.push(format!("{v} {f1:.3}@{epoch}"));
    }
    let dt = t0.elapsed();
    ensure(dt < OVERFIT_BUDGET, || format!("took {dt:?}"))?;
    Ok(format!("train F1 >= {OVERFIT_F1}: {} in {:.1}s", parts.join(", "), dt.as_secs_f64()))
}

fn c7_attention_direction() -> Outcome {
    let posts = synthetic::posts(90, 21);
    let (train_posts, test_posts) = posts.split_at(60);
    let lexicon = synthetic::keyphrase_lexicon();
    let emb = synthetic::embeddings(synthetic::FIXTURE_EMBEDDING_DIM, 5);
    let mut wins = 0;
    let mut parts = Vec::new();
    for seed in RANK_SEEDS {
        let mut med = BTreeMap::new();
        for v in [Variant::Att, Variant::Ha] {
            let mut t = Tagger::new(small(v, seed, 10), Some(lexicon.clone()), Some(emb.clone())).map_err(err)?;
            train(&mut t, train_posts, &[]).map_err(err)?;
            let recs = test_posts.iter().map(|p| attention_rank(&t, p)).collect::<Result<Vec<_>, _>>().map_err(err)?;
            med.insert(v, median_rank(&recs).ok_or("no ranks")?);
        }
        let (ha, att) = (med[&Variant::Ha], med[&Variant::Att]);
        wins += usize::from(ha <= att);
        parts.push(format!("seed {seed} ha {ha} / att {att}"));
    }
    ensure(wins >= RANK_MIN_WINS, || format!("HA ahead in {wins} of 5: {}", parts.join("; ")))?;
    Ok(format!("HA median rank <= Att in {wins}/5 seeds ({})", parts.join("; ")))
}

fn span_sets(len: usize) -> Vec<Vec<Span>> {
    fn go(pos: usize, len: usize, acc: &mut Vec<Span>, out: &mut Vec<Vec<Span>>) {
        if pos >= len {
            out.push(acc.clone());
            return;
        }
        go(pos + 1, len, acc, out);
        for e in pos + 1..=len {
            acc.push((pos, e));
            go(e, len, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    go(0, len, &mut Vec::new(), &mut out);
    out
}

/// Exact preimage when one exists, else maximal runs of non-N tags.
fn repair_oracle(tags: &[Tag], sets: &[Vec<Span>]) -> Vec<Span> {
    if let Some(s) = sets.iter().find(|s| spans_to_tags(s, tags.len()).unwrap() == tags) {
        return s.clone();
    }
    let mut out: Vec<Span> = Vec::new();
    for (i, &t) in tags.iter().enumerate() {
        if t != Tag::Not {
            match out.last_mut() {
                Some(last) if last.1 == i => last.1 = i + 1,
                _ => out.push((i, i + 1)),
            }
        }
    }
    out
}

fn c8_tag_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..FUZZ_CASES {
        let len = rng.gen_range(1..24);
        let mut spans = Vec::new();
        let mut pos = 0;
        while pos < len {
            if rng.gen_bool(0.4) {
                let end = rng.gen_range(pos + 1..=len.min(pos + 4));
                spans.push((pos, end));
                pos = end;
            } else {
                pos += 1;
            }
        }
        let tags = spans_to_tags(&spans, len).map_err(err)?;
        ensure(tags_to_spans(&tags) == spans, || format!("case {case}: {spans:?} did not survive"))?;
    }
    let sets: Vec<Vec<Vec<Span>>> = (0..=7).map(span_sets).collect();
    let mut invalid = 0;
    for case in 0..FUZZ_CASES {
        let len = rng.gen_range(0..=7);
        let tags: Vec<Tag> = (0..len).map(|_| Tag::from_index(rng.gen_range(0..Tag::COUNT)).unwrap()).collect();
        let want = repair_oracle(&tags, &sets[len]);
        invalid += usize::from(!sets[len].iter().any(|s| spans_to_tags(s, len).unwrap() == tags));
        ensure(tags_to_spans(&tags) == want, || format!("case {case}: {tags:?}"))?;
    }
    Ok(format!(
        "{FUZZ_CASES} span sets round-trip; {FUZZ_CASES} tag sequences ({invalid} invalid) match the brute-force oracle"
    ))
}

fn c9_segmentation_table() -> Outcome {
    let table: [(&str, &[&str]); 10] = [
        ("TCOT", &["TCOT"]),
        ("tcot", &["tcot"]),
        ("WhiteHouse", &["White", "House"]),
        ("iPhoneRelease", &["i", "Phone", "Release"]),
        ("ABCNews", &["ABCNews"]),
        ("USAToday", &["USAToday"]),
        ("GOP2016", &["GOP2016"]),
        ("Vote2016Now", &["Vote", "2016", "Now"]),
        ("NewsUSA", &["News", "USA"]),
        ("x", &["x"]),
    ];
    for (input, want) in table {
        let got = segment_hashtag(input);
        ensure(got == want, || format!("{input}: {got:?}, want {want:?}"))?;
    }
    let alphabet: Vec<char> = ('a'..='z').chain('A'..='Z').chain('0'..='9').chain(['_']).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..FUZZ_CASES {
        let s: String = (0..rng.gen_range(1..17)).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        let parts = segment_hashtag(&s);
        ensure(parts.concat() == s && parts.iter().all(|p| !p.is_empty()), || format!("{s}: {parts:?}"))?;
    }
    Ok(format!("{} table cases exact; {FUZZ_CASES} random hashtags concatenate back", table.len()))
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let lex = dir.path().join("lex.tsv");
    let posts = fixture("overfit_posts.jsonl");
    ok(&gazekex(["osec", "build", "--input", &s(&fixture("osec_news.tsv")), "--participants", "4", "--out", &s(&lex)]));
    ok(&gazekex(["osec", "expand", "--lexicon", &s(&lex), "--posts", &s(&posts), "--fill", "mean_filled", "--out", &s(&lex)]));
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        ok(&gazekex([
            "--config", &s(&fixture("run.toml")), "--seed", "7", "--out-dir", &s(&out), "train", "--variant", "ha",
            "--lexicon", &s(&lex), "--train", &s(&posts), "--dev", &s(&posts), "--epochs", "3",
        ]));
        runs.push(out);
    }
    let files = ["model.ckpt", "report.json", "train.log", "summary.txt", "effective-config.toml"];
    for f in files {
        let a = fs::read(runs[0].join(f)).map_err(err)?;
        let b = fs::read(runs[1].join(f)).map_err(err)?;
        ensure(a == b, || format!("{f} differs"))?;
    }
    let bytes = fs::metadata(runs[0].join("model.ckpt")).map_err(err)?.len();
    Ok(format!("two `train` runs: {} identical (checkpoint {bytes} bytes)", files.join(", ")))
}

fn coverage_line(out: &str, kind: &str) -> Result<(String, f64), String> {
    let line = out.lines().find(|l| l.starts_with(kind)).ok_or(format!("no {kind} line in {out:?}"))?;
    let f: Vec<&str> = line.split('\t').collect();
    Ok((f[1].to_string(), f[2].parse().map_err(err)?))
}

fn c11_coverage() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let lex_path = dir.path().join("lex.tsv");
    GazeLexicon::build(&AvgMap::from([("climate".into(), 300.0), ("the".into(), 120.0)]), Regularization::NONE, None, "toy", "t")
        .map_err(err)?
        .save(&lex_path)
        .map_err(err)?;
    let mut details = Vec::new();
    for (text, tokens, ratio) in [("Climate the zebra quokka", "2/4", 0.5), ("the the zebra climate", "3/4", 0.75)] {
        let vocab = dir.path().join("vocab.txt");
        fs::write(&vocab, text).map_err(err)?;
        let out = ok(&gazekex(["osec", "coverage", "--lexicon", &s(&lex_path), "--vocab", &s(&vocab)]));
        let (count, got) = coverage_line(&out, "tokens")?;
        ensure(count == tokens && got == ratio, || format!("{text:?}: {count} = {got}"))?;
        let (types, dedup) = coverage_line(&out, "types")?;
        details.push(format!("{tokens} tokens -> {got} (types {types} -> {dedup:.4})"));
    }
    Ok(details.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, fn() -> Outcome); 11] = [
        (1, "gradient fidelity", c1_gradient_fidelity),
        (2, "length regularizer oracle", c2_length_oracle),
        (3, "rank-weighted expansion oracle", c3_rank_weight_oracle),
        (4, "normalization contract", c4_normalization_contract),
        (5, "expansion coverage", c5_expansion_coverage),
        (6, "overfit check", c6_overfit),
        (7, "attention supervision direction", c7_attention_direction),
        (8, "tag round trip", c8_tag_round_trip),
        (9, "hashtag segmentation table", c9_segmentation_table),
        (10, "determinism", c10_determinism),
        (11, "coverage computation", c11_coverage),
    ];
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                println!("criterion {n:>2} FAIL  {name}: {why} [{secs:.1}s]");
                failed.push(n);
            }
        }
    }
    println!(
        "acceptance: {} passed, {} failed",
        criteria.len() - failed.len(),
        failed.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
