//! Deterministic synthetic corpora with planted keyphrases.
//!
//! Posts mix filler words with one hashtag built from topic words. Topic
//! words read slowly and rarely occur in the frequency list; filler words
//! read fast and are frequent. Pretrained vectors cluster by word class.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{build_dataset, DatasetMode, Post, RawTweet};
use crate::expansion::EmbeddingTable;
use crate::gaze::{AvgMap, GazeLexicon, Regularization};

pub const FILLER_WORDS: &[&str] = &[
    "the", "a", "to", "of", "and", "in", "is", "for", "on", "with", "we", "they", "this", "that", "it",
    "at", "be", "are", "will", "not", "all", "our", "new", "just", "about", "from", "more", "now",
    "today", "people", "time", "get", "see", "so", "what", "who", "can", "one", "day", "out", "up",
    "like", "know", "think", "big", "good", "great", "really", "still", "here", "must", "need",
    "going", "again", "next", "last", "every", "week", "said", "very",
];

pub const TOPIC_WORDS: &[&str] = &[
    "climate", "senate", "budget", "election", "healthcare", "debate", "economy", "taxes", "jobs",
    "border", "energy", "science", "football", "music", "movie", "ocean", "space", "rocket",
    "garden", "coffee", "travel", "mountain", "festival", "library", "market", "storm", "bridge",
    "museum", "castle", "harvest",
];

/// Words left out of [`embeddings`], so expansion must use character vectors.
pub const NO_VECTOR_WORDS: &[&str] = &["harvest", "very", "said"];

pub const OSEC_PARTICIPANTS: u32 = 4;

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn hashtag<R: Rng>(rng: &mut R) -> String {
    let k = *[1usize, 1, 2, 2, 2, 3].choose(rng).unwrap();
    let words: Vec<&str> = TOPIC_WORDS.choose_multiple(rng, k).copied().collect();
    if k == 1 && rng.gen_bool(0.5) {
        format!("#{}", words[0])
    } else {
        format!("#{}", words.iter().map(|w| capitalize(w)).collect::<String>())
    }
}

fn filler<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    (0..n).map(|_| FILLER_WORDS.choose(rng).unwrap().to_string()).collect()
}

/// `kept` tweets that pass the hashtag filters, followed by `rejected` that do not.
pub fn tweets(kept: usize, rejected: usize, seed: u64) -> Vec<RawTweet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(kept + rejected);
    for i in 0..kept {
        let n = rng.gen_range(4..10);
        let mut words = filler(&mut rng, n);
        let at = rng.gen_range(1..words.len());
        words.insert(at, hashtag(&mut rng));
        if rng.gen_bool(0.3) {
            words.push("!".into());
        }
        out.push(RawTweet {
            id: format!("syn-{i:04}"),
            text: words.join(" "),
        });
    }
    for i in 0..rejected {
        let n = rng.gen_range(3..8);
        let mut words = filler(&mut rng, n);
        match i % 3 {
            0 => {}
            1 => words.push(hashtag(&mut rng)),
            _ => {
                words.insert(1, hashtag(&mut rng));
                words.insert(2, hashtag(&mut rng));
            }
        }
        out.push(RawTweet {
            id: format!("syn-r{i:04}"),
            text: words.join(" "),
        });
    }
    out
}

pub fn posts(n: usize, seed: u64) -> Vec<Post> {
    build_dataset(&tweets(n, 0, seed), DatasetMode::Generic)
}

fn is_topic(word: &str) -> bool {
    TOPIC_WORDS.contains(&word.to_lowercase().as_str())
}

/// Generic eye-tracking TSV covering about `coverage` of all words; every
/// row sums TRT over [`OSEC_PARTICIPANTS`] readers.
pub fn osec_tsv(coverage: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<&str> = FILLER_WORDS.iter().chain(TOPIC_WORDS).copied().collect();
    words.shuffle(&mut rng);
    let keep = ((words.len() as f64 * coverage).round() as usize).min(words.len());
    let mut covered = words[..keep].to_vec();
    covered.sort_unstable();
    let mut out = String::from("word\ttrt_ms\tcontext_id\n");
    let mut ctx = 0;
    for w in covered {
        for occ in 0..rng.gen_range(2..5) {
            ctx += 1;
            let mut total = 0.0;
            for _ in 0..OSEC_PARTICIPANTS {
                let skip = !is_topic(w) && w.len() <= 3 && rng.gen_bool(0.3);
                if !skip {
                    let base = if is_topic(w) { 260.0 } else { 140.0 };
                    total += base + 12.0 * w.len() as f64 + rng.gen_range(-40.0..40.0);
                }
            }
            let surface = if occ == 0 { capitalize(w) } else { w.to_string() };
            let trt = if total == 0.0 { "-".to_string() } else { format!("{}", total.round()) };
            writeln!(out, "{surface}\t{trt}\tc{ctx}").unwrap();
        }
    }
    out
}

/// Counts per 100 million tokens for every word.
pub fn frequency_tsv(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("word\tcount_per_100M\n");
    let mut all: Vec<&str> = FILLER_WORDS.iter().chain(TOPIC_WORDS).copied().collect();
    all.sort_unstable();
    for w in all {
        let c: f64 = if is_topic(w) {
            rng.gen_range(50.0..800.0)
        } else {
            rng.gen_range(5_000.0..600_000.0)
        };
        writeln!(out, "{w}\t{}", c.round()).unwrap();
    }
    out
}

/// Clustered vectors: one centre per word class plus per-word noise.
pub fn embeddings(dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let topic_c = centre(&mut rng);
    let filler_c = centre(&mut rng);
    let mut table = EmbeddingTable::new(dim).expect("positive dimension");
    for (words, c) in [(FILLER_WORDS, &filler_c), (TOPIC_WORDS, &topic_c)] {
        for w in words {
            let v: Vec<f64> = c.iter().map(|x| x + rng.gen_range(-0.6..0.6)).collect();
            if !NO_VECTOR_WORDS.contains(w) {
                table.insert(w, &v).expect("consistent dimension");
            }
        }
    }
    table
}

/// Native lexicon with every topic word at 1 and every filler word at 0.
pub fn keyphrase_lexicon() -> GazeLexicon {
    let avg: AvgMap = FILLER_WORDS
        .iter()
        .map(|w| (w.to_string(), 100.0))
        .chain(TOPIC_WORDS.iter().map(|w| (w.to_string(), 400.0)))
        .collect::<BTreeMap<_, _>>();
    GazeLexicon::build(&avg, Regularization::NONE, None, "synthetic-keyphrase", "synthetic")
        .expect("nonempty lexicon")
}

/// Seeds and sizes behind the committed fixture files.
pub const FIXTURE_EMBEDDING_DIM: usize = 16;
pub const OVERFIT_POSTS: usize = 50;

/// Run config over the fixture files with dimensions small enough for CI.
pub const FIXTURE_CONFIG: &str = r#"seeds = [1, 2]
variants = ["baseline", "att", "ha", "feat"]

[lexicon]
regularization = "freq+len"
frequency = "frequency.tsv"

[[lexicon.sources]]
path = "osec_news.tsv"
participants = 4
corpus = "synthetic-news"
genre = "news"

[[lexicon.sources]]
path = "osec_wiki.tsv"
participants = 4
corpus = "synthetic-wiki"
genre = "wikipedia"

[dataset]
tweets = "tweets.jsonl"
mode = "generic"
ratios = [0.8, 0.1, 0.1]
split_seed = 13

[expansion]
embeddings = "embeddings.txt"
fill = "expanded"
char_encoder_epochs = 1

[model]
word_emb_dim = 16
char_emb_dim = 8
char_hidden = 8
char_word_dim = 8
word_hidden = 16
attention_dim = 8
epochs = 4

[ablation]
variant = "ha"
regularizations = ["none", "freq+len"]
fills = ["expanded", "mean_filled"]
baselines = ["baseline", "att"]
"#;

/// `(file name, contents)` of every committed fixture, regenerated.
pub fn fixture_files() -> Vec<(&'static str, String)> {
    let tweet_lines: String = tweets(150, 12, 7)
        .iter()
        .map(|t| serde_json::json!({"id": t.id, "text": t.text}).to_string() + "\n")
        .collect();
    vec![
        ("tweets.jsonl", tweet_lines),
        ("osec_news.tsv", osec_tsv(0.75, 3)),
        ("osec_wiki.tsv", osec_tsv(0.8, 4)),
        ("frequency.tsv", frequency_tsv(5)),
        ("embeddings.txt", embeddings(FIXTURE_EMBEDDING_DIM, 5).to_text()),
        ("overfit_posts.jsonl", crate::dataset::posts_to_jsonl(&posts(OVERFIT_POSTS, 11))),
        ("run.toml", FIXTURE_CONFIG.to_string()),
    ]
}
