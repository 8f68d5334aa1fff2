//! Reading-time lexicons built from eye-tracking corpora.
//!
//! The pipeline runs in stages over per-word values:
//!
//! 1. [`average_trt`]: TRT divided by the participant count, averaged over a
//!    word's occurrences (AVG-TRT);
//! 2. optional regularizers: [`regularize_frequency`] multiplies by the
//!    per-billion log frequency, [`regularize_length`] divides by `1.08^letters`;
//! 3. one [`minmax_normalize`] pass into `[0, 1]`.
//!
//! [`GazeLexicon`] keeps every stage per word so downstream consumers can pick.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

mod frequency;
mod ingest;
mod lexicon;

pub use frequency::{per_billion_log, FrequencyLexicon};
pub use ingest::{ingest_osec, parse_osec, FixationRecord, OsecFormat};
pub use lexicon::{GazeLexicon, LexiconEntry, LexiconMeta, Regularization, Source, LEXICON_FORMAT};

/// Word (lowercased) → value.
pub type AvgMap = BTreeMap<String, f64>;

/// Per-letter divisor base in the length regularizer.
pub const LENGTH_BASE: f64 = 1.08;

/// Number of reading-time bins produced by [`discretize`].
pub const TRT_BINS: usize = 11;

pub fn average_trt(records: &[FixationRecord], participant_count: u32) -> Result<AvgMap> {
    if participant_count == 0 {
        return Err(Error::config("participant count must be at least 1"));
    }
    let p = f64::from(participant_count);
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records {
        let slot = acc.entry(r.word.to_lowercase()).or_insert((0.0, 0));
        slot.0 += r.trt_ms / p;
        slot.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(w, (sum, n))| (w, sum / n as f64))
        .collect())
}

/// FRA-TRT: AVG-TRT times the word's log frequency, or times the mean log
/// frequency for words missing from the frequency list.
pub fn regularize_frequency(avg: &AvgMap, freq: &FrequencyLexicon) -> AvgMap {
    avg.iter()
        .map(|(w, &a)| {
            let l = freq.l_bnc(w).unwrap_or_else(|| freq.mean_l_bnc());
            (w.clone(), a * l)
        })
        .collect()
}

/// Letters in a word; digits, hyphens and other symbols do not count.
pub fn letter_count(word: &str) -> usize {
    word.chars().filter(|c| c.is_alphabetic()).count()
}

/// LRA-TRT: AVG-TRT divided by `1.08^letters`.
pub fn regularize_length(avg: &AvgMap) -> AvgMap {
    avg.iter()
        .map(|(w, &a)| (w.clone(), length_regularized(a, letter_count(w))))
        .collect()
}

pub fn length_regularized(avg_trt: f64, letters: usize) -> f64 {
    avg_trt / LENGTH_BASE.powi(letters as i32)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub values: AvgMap,
    pub min: f64,
    pub max: f64,
}

/// `(x − min) / (max − min)`; every value maps to 0 when all are equal.
pub fn minmax_normalize(map: &AvgMap) -> Result<Normalized> {
    if map.is_empty() {
        return Err(Error::empty("cannot normalize an empty map"));
    }
    let min = map.values().cloned().fold(f64::INFINITY, f64::min);
    let max = map.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let values = map
        .iter()
        .map(|(w, &x)| {
            let v = if span > 0.0 {
                ((x - min) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (w.clone(), v)
        })
        .collect();
    Ok(Normalized { values, min, max })
}

/// Mean AVG-TRT over the words two corpora share.
pub fn combine_averages(a: &AvgMap, b: &AvgMap) -> AvgMap {
    a.iter()
        .filter_map(|(w, &x)| b.get(w).map(|&y| (w.clone(), (x + y) / 2.0)))
        .collect()
}

/// Lexicon over the co-occurring native words of `a` and `b`, each valued at the
/// mean of the two AVG-TRTs and then regularized and normalized as configured.
pub fn combine(
    a: &GazeLexicon,
    b: &GazeLexicon,
    regularization: Regularization,
    freq: Option<&FrequencyLexicon>,
) -> Result<GazeLexicon> {
    let avg = combine_averages(&a.native_averages(), &b.native_averages());
    if avg.is_empty() {
        log::warn!(
            "corpora {:?} and {:?} share no words; combined lexicon is empty",
            a.meta.corpus,
            b.meta.corpus
        );
    }
    let (first, second) = if a.meta.corpus <= b.meta.corpus {
        (&a.meta, &b.meta)
    } else {
        (&b.meta, &a.meta)
    };
    let corpus = format!("{}+{}", first.corpus, second.corpus);
    let genre = format!("{}+{}", first.genre, second.genre);
    GazeLexicon::build(&avg, regularization, freq, &corpus, &genre)
}

/// Reading-time bin for a normalized value: `round(value × 10)`, halves up.
pub fn discretize(value: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::contract(format!(
            "discretize needs a value in [0, 1], got {value}"
        )));
    }
    Ok(((value * 10.0) + 0.5).floor() as usize)
}

pub fn one_hot(bin: usize) -> Vec<f64> {
    let mut v = vec![0.0; TRT_BINS];
    v[bin.min(TRT_BINS - 1)] = 1.0;
    v
}

/// Share of `vocab` found in the lexicon: over distinct words when
/// `deduplicate`, over tokens otherwise. Matching is case-insensitive.
pub fn coverage<S: AsRef<str>>(lexicon: &GazeLexicon, vocab: &[S], deduplicate: bool) -> Result<f64> {
    if vocab.is_empty() {
        return Err(Error::empty("coverage over an empty vocabulary"));
    }
    if deduplicate {
        let unique: BTreeSet<String> = vocab.iter().map(|w| w.as_ref().to_lowercase()).collect();
        let hit = unique.iter().filter(|w| lexicon.contains(w)).count();
        Ok(hit as f64 / unique.len() as f64)
    } else {
        let hit = vocab
            .iter()
            .filter(|w| lexicon.contains(&w.as_ref().to_lowercase()))
            .count();
        Ok(hit as f64 / vocab.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn map(pairs: &[(&str, f64)]) -> AvgMap {
        pairs.iter().map(|(w, v)| (w.to_string(), *v)).collect()
    }

    fn rec(word: &str, trt: f64) -> FixationRecord {
        FixationRecord {
            word: word.into(),
            context_id: "c".into(),
            trt_ms: trt,
            participant_count: 1,
        }
    }

    #[test]
    fn average_divides_by_participants() {
        let avg = average_trt(&[rec("Austin", 130.0)], 13).unwrap();
        assert_eq!(avg["austin"], 10.0);
    }

    #[test]
    fn average_over_fourteen_occurrences() {
        let values: Vec<f64> = (0..14).map(|i| 100.0 + 7.0 * i as f64).collect();
        let recs: Vec<_> = values.iter().map(|&v| rec("aspects", v)).collect();
        let avg = average_trt(&recs, 1).unwrap();
        let expected = values.iter().sum::<f64>() / 14.0;
        assert!((avg["aspects"] - expected).abs() < 1e-12);
    }

    #[test]
    fn skipped_occurrences_count_as_zero() {
        let avg = average_trt(&[rec("is", 0.0), rec("IS", 80.0), rec("is", 40.0)], 1).unwrap();
        assert_eq!(avg["is"], 40.0);
        let same = average_trt(&[rec("a", 55.0), rec("a", 55.0), rec("a", 55.0)], 1).unwrap();
        assert_eq!(same["a"], 55.0);
    }

    #[test]
    fn frequency_fallback_uses_mean_log() {
        let freq = FrequencyLexicon::from_counts([("x", 10f64.powf(3.5)), ("y", 10f64.powf(4.5))]).unwrap();
        assert!((freq.mean_l_bnc() - 5.0).abs() < 1e-12);
        let out = regularize_frequency(&map(&[("absent", 10.0), ("x", 2.0)]), &freq);
        assert!((out["absent"] - 50.0).abs() < 1e-12);
        assert!((out["x"] - 2.0 * 4.5).abs() < 1e-12);
    }

    #[test]
    fn frequency_fallback_hand_value() {
        // mean_l_bnc 4.5: two words at log10(count·10) = 4 and 5
        let freq = FrequencyLexicon::from_counts([("p", 1000.0), ("q", 10000.0)]).unwrap();
        let out = regularize_frequency(&map(&[("zzz", 10.0)]), &freq);
        assert!((out["zzz"] - 45.0).abs() < 1e-12);
    }

    #[test]
    fn length_regularizer_hand_values() {
        let out = regularize_length(&map(&[("abc", 100.0), ("example", 150.0), ("42", 7.0)]));
        assert!((out["abc"] - 79.383224).abs() < 1e-6);
        assert!((out["example"] - 87.523559).abs() < 1e-6);
        assert_eq!(out["42"], 7.0);
        assert_eq!(letter_count("left-wing"), 8);
        assert_eq!(letter_count("Group."), 5);
    }

    #[test]
    fn minmax_examples() {
        let n = minmax_normalize(&map(&[("a", 2.0), ("b", 4.0), ("c", 6.0)])).unwrap();
        assert_eq!(n.values["a"], 0.0);
        assert_eq!(n.values["b"], 0.5);
        assert_eq!(n.values["c"], 1.0);
        let single = minmax_normalize(&map(&[("only", 3.0)])).unwrap();
        assert_eq!(single.values["only"], 0.0);
        let t1 = minmax_normalize(&map(&[("a", 156.0), ("b", 58.0), ("c", 406.0)])).unwrap();
        assert!((t1.values["a"] - 0.2816).abs() < 1e-4);
        assert_eq!(t1.values["b"], 0.0);
        assert_eq!(t1.values["c"], 1.0);
        assert!(matches!(minmax_normalize(&AvgMap::new()), Err(Error::EmptyInput(_))));
    }

    fn lex(pairs: &[(&str, f64)], name: &str) -> GazeLexicon {
        GazeLexicon::build(&map(pairs), Regularization::NONE, None, name, "test").unwrap()
    }

    #[test]
    fn combine_takes_mean_over_intersection() {
        let a = lex(&[("word", 100.0), ("only_a", 5.0), ("x", 1.0)], "a");
        let b = lex(&[("word", 200.0), ("only_b", 9.0), ("x", 3.0)], "b");
        let c = combine(&a, &b, Regularization::NONE, None).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("word").unwrap().avg_trt, 150.0);
        assert_eq!(c.meta.corpus, "a+b");
        let d = combine(&lex(&[("p", 1.0)], "a"), &lex(&[("q", 1.0)], "b"), Regularization::NONE, None).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn discretize_bins() {
        assert_eq!(discretize(0.0).unwrap(), 0);
        assert_eq!(discretize(1.0).unwrap(), 10);
        assert_eq!(discretize(0.47).unwrap(), 5);
        assert_eq!(discretize(0.44).unwrap(), 4);
        assert_eq!(discretize(0.45).unwrap(), 5);
        assert!(matches!(discretize(1.01), Err(Error::Contract(_))));
        assert!(discretize(-0.1).is_err());
        assert!(discretize(f64::NAN).is_err());
        let grid: BTreeSet<usize> = (0..=10).map(|k| discretize(k as f64 / 10.0).unwrap()).collect();
        assert_eq!(grid, (0..=10).collect());
        assert_eq!(one_hot(3).iter().sum::<f64>(), 1.0);
        assert_eq!(one_hot(3)[3], 1.0);
    }

    #[test]
    fn coverage_counts() {
        let l = lex(&[("a", 1.0), ("b", 2.0)], "l");
        let vocab = ["a", "B", "c", "d"];
        assert_eq!(coverage(&l, &vocab, false).unwrap(), 0.5);
        let repeated = ["a", "a", "a", "c"];
        assert_eq!(coverage(&l, &repeated, false).unwrap(), 0.75);
        assert_eq!(coverage(&l, &repeated, true).unwrap(), 0.5);
        assert_eq!(coverage(&l, &["a", "b"], true).unwrap(), 1.0);
        let empty: [&str; 0] = [];
        assert!(matches!(coverage(&l, &empty, true), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn build_requires_frequency_list_when_asked() {
        let r = GazeLexicon::build(&map(&[("a", 1.0)]), Regularization::BOTH, None, "c", "g");
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn tsv_round_trip() {
        let freq = FrequencyLexicon::from_counts([("austin", 40.0), ("member", 3000.0)]).unwrap();
        let l = GazeLexicon::build(
            &map(&[("austin", 12.0), ("member", 9.0), ("left-wing", 31.2)]),
            Regularization::BOTH,
            Some(&freq),
            "zuco",
            "wikipedia",
        )
        .unwrap();
        let back = GazeLexicon::from_tsv(&l.to_tsv(), std::path::Path::new("m")).unwrap();
        assert_eq!(back, l);
    }

    proptest! {
        #[test]
        fn normalized_values_in_unit_interval(values in prop::collection::vec(0.0f64..1000.0, 1..30)) {
            let m: AvgMap = values.iter().enumerate().map(|(i, v)| (format!("w{i}"), *v)).collect();
            let l = GazeLexicon::build(&m, Regularization::NONE, None, "c", "g").unwrap();
            let vals: Vec<f64> = l.entries().values().map(|e| e.normalized).collect();
            prop_assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                prop_assert!(vals.contains(&0.0));
                prop_assert!(vals.contains(&1.0));
            }
        }

        #[test]
        fn frequency_is_monotone(avg in 0.1f64..500.0, c1 in 1.0f64..1e6, c2 in 1.0f64..1e6) {
            prop_assume!((c1 - c2).abs() > 1e-6);
            let freq = FrequencyLexicon::from_counts([("lo", c1.min(c2)), ("hi", c1.max(c2))]).unwrap();
            let out = regularize_frequency(&map(&[("lo", avg), ("hi", avg)]), &freq);
            prop_assert!(out["hi"] > out["lo"]);
        }

        #[test]
        fn length_is_monotone(avg in 0.1f64..500.0, short in 0usize..10, extra in 1usize..10) {
            let a = "a".repeat(short);
            let b = "b".repeat(short + extra);
            let out = regularize_length(&map(&[(a.as_str(), avg), (b.as_str(), avg)]));
            prop_assert!(out[&b] < out[&a]);
        }

        #[test]
        fn combine_is_symmetric(
            xs in prop::collection::btree_map("[a-e]{1,2}", 1.0f64..300.0, 1..12),
            ys in prop::collection::btree_map("[a-e]{1,2}", 1.0f64..300.0, 1..12),
        ) {
            let a = GazeLexicon::build(&xs, Regularization::NONE, None, "a", "g").unwrap();
            let b = GazeLexicon::build(&ys, Regularization::NONE, None, "b", "g").unwrap();
            let ab = combine(&a, &b, Regularization { frequency: false, length: true }, None).unwrap();
            let ba = combine(&b, &a, Regularization { frequency: false, length: true }, None).unwrap();
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn discretize_is_monotone(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(discretize(lo).unwrap() <= discretize(hi).unwrap());
        }

        #[test]
        fn stages_are_pure(values in prop::collection::vec(0.0f64..1000.0, 1..20)) {
            let m: AvgMap = values.iter().enumerate().map(|(i, v)| (format!("w{i}x"), *v)).collect();
            let freq = FrequencyLexicon::from_counts([("w0x", 12.0), ("w3x", 4000.0)]).unwrap();
            let a = GazeLexicon::build(&m, Regularization::BOTH, Some(&freq), "c", "g").unwrap();
            let b = GazeLexicon::build(&m, Regularization::BOTH, Some(&freq), "c", "g").unwrap();
            prop_assert_eq!(a.to_tsv(), b.to_tsv());
        }
    }
}
