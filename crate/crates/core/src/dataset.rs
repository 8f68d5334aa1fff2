//! Hashtag-supervised keyphrase posts.
//!
//! A tweet is kept when it has exactly one hashtag and that hashtag has a
//! word token on each side. The `#` is dropped, the tag text is segmented
//! into words, and those words become the post's gold keyphrase.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POST_FORMAT_VERSION: u32 = 1;

/// SBMEN tag. The discriminant is the classifier output index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Single = 0,
    Begin = 1,
    Middle = 2,
    End = 3,
    Not = 4,
}

impl Tag {
    pub const ALL: [Tag; 5] = [Tag::Single, Tag::Begin, Tag::Middle, Tag::End, Tag::Not];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        match self {
            Tag::Single => 'S',
            Tag::Begin => 'B',
            Tag::Middle => 'M',
            Tag::End => 'E',
            Tag::Not => 'N',
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Half-open token range `[start, end)`.
pub type Span = (usize, usize);

fn check_spans(spans: &[Span], len: usize) -> Result<()> {
    let mut sorted = spans.to_vec();
    sorted.sort_unstable();
    let mut prev_end = 0;
    for (i, &(s, e)) in sorted.iter().enumerate() {
        if s >= e || e > len {
            return Err(Error::contract(format!(
                "span ({s}, {e}) is empty or outside a post of {len} tokens"
            )));
        }
        if i > 0 && s < prev_end {
            return Err(Error::contract(format!("span ({s}, {e}) overlaps its neighbour")));
        }
        prev_end = e;
    }
    Ok(())
}

pub fn spans_to_tags(spans: &[Span], len: usize) -> Result<Vec<Tag>> {
    check_spans(spans, len)?;
    let mut tags = vec![Tag::Not; len];
    for &(s, e) in spans {
        if e - s == 1 {
            tags[s] = Tag::Single;
        } else {
            tags[s] = Tag::Begin;
            tags[s + 1..e - 1].fill(Tag::Middle);
            tags[e - 1] = Tag::End;
        }
    }
    Ok(tags)
}

/// Exact decode when `tags` matches `(N | S | B M* E)*`; otherwise every
/// maximal run of non-`Not` tags becomes one span.
pub fn tags_to_spans(tags: &[Tag]) -> Vec<Span> {
    decode_valid(tags).unwrap_or_else(|| maximal_runs(tags))
}

pub fn is_valid_sequence(tags: &[Tag]) -> bool {
    decode_valid(tags).is_some()
}

fn decode_valid(tags: &[Tag]) -> Option<Vec<Span>> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &t) in tags.iter().enumerate() {
        match (t, open) {
            (Tag::Not, None) => {}
            (Tag::Single, None) => spans.push((i, i + 1)),
            (Tag::Begin, None) => open = Some(i),
            (Tag::Middle, Some(_)) => {}
            (Tag::End, Some(s)) => {
                spans.push((s, i + 1));
                open = None;
            }
            _ => return None,
        }
    }
    open.is_none().then_some(spans)
}

fn maximal_runs(tags: &[Tag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, &t) in tags.iter().enumerate() {
        match (t == Tag::Not, start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, tags.len()));
    }
    spans
}

/// Splits hashtag text into words.
///
/// Text with no lowercase letter or no uppercase letter is one word.
/// Otherwise, scanning left to right, the longest `[A-Z]*[a-z]+` match is
/// taken; where none starts, an uppercase run `[A-Z]+` is taken; any other
/// run of characters (digits, `_`, uncased letters) is its own piece.
pub fn segment_hashtag(text: &str) -> Vec<String> {
    if text.is_empty() {
        return Vec::new();
    }
    let has_lower = text.chars().any(char::is_lowercase);
    let has_upper = text.chars().any(char::is_uppercase);
    if !(has_lower && has_upper) {
        return vec![text.to_string()];
    }
    let chars: Vec<char> = text.chars().collect();
    let cased = |c: char| c.is_uppercase() || c.is_lowercase();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let mut j = i;
        if cased(chars[i]) {
            while j < chars.len() && chars[j].is_uppercase() {
                j += 1;
            }
            let upper_end = j;
            while j < chars.len() && chars[j].is_lowercase() {
                j += 1;
            }
            debug_assert!(j > upper_end || upper_end > i);
        } else {
            while j < chars.len() && !cased(chars[j]) {
                j += 1;
            }
        }
        out.push(chars[i..j].iter().collect());
        i = j;
    }
    out
}

const EMOTICONS: &[&str] = &[
    ":)", ":-)", ":(", ":-(", ":D", ":-D", ";)", ";-)", ":P", ":-P", ":p", ":-p", ":'(", ":/",
    ":-/", ":|", ":o", ":O", "<3", "</3", "^_^", "^^", "-_-", "=)", "=(", ":3", "xD", "XD",
];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Rule-based tweet tokenizer.
///
/// Splits on whitespace. URLs and emoticons are kept whole. Elsewhere each
/// leading or trailing non-word character becomes its own token, except a
/// leading `#` or `@` directly followed by a word character.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) || EMOTICONS.contains(&chunk) {
            out.push(chunk.to_string());
            continue;
        }
        let chars: Vec<char> = chunk.chars().collect();
        let mut lo = 0;
        let mut hi = chars.len();
        while lo < hi && !is_word_char(chars[lo]) {
            let sigil = matches!(chars[lo], '#' | '@');
            if sigil && lo + 1 < hi && is_word_char(chars[lo + 1]) {
                break;
            }
            out.push(chars[lo].to_string());
            lo += 1;
        }
        let mut trailing = Vec::new();
        while hi > lo && !is_word_char(chars[hi - 1]) {
            trailing.push(chars[hi - 1].to_string());
            hi -= 1;
        }
        if lo < hi {
            out.push(chars[lo..hi].iter().collect());
        }
        out.extend(trailing.into_iter().rev());
    }
    out
}

fn is_hashtag(token: &str) -> bool {
    let mut cs = token.chars();
    cs.next() == Some('#') && {
        let rest = cs.as_str();
        !rest.is_empty() && rest.chars().all(is_word_char)
    }
}

fn is_word_token(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTweet {
    pub id: String,
    pub text: String,
}

impl RawTweet {
    /// One tweet per line: either plain text or a JSON object with `text`
    /// and optional `id`. Plain lines get `line-N` ids.
    pub fn parse_lines(text: &str, origin: &Path) -> Result<Vec<RawTweet>> {
        #[derive(Deserialize)]
        struct Record {
            id: Option<serde_json::Value>,
            text: String,
        }
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if line.trim_start().starts_with('{') {
                if let Ok(r) = serde_json::from_str::<Record>(line) {
                    let id = match r.id {
                        Some(serde_json::Value::String(s)) => s,
                        Some(v) => v.to_string(),
                        None => format!("line-{n}"),
                    };
                    out.push(RawTweet { id, text: r.text });
                    continue;
                }
                if serde_json::from_str::<serde_json::Value>(line).is_ok() {
                    return Err(Error::parse(origin, n, "JSON tweet record without a text field"));
                }
            }
            out.push(RawTweet {
                id: format!("line-{n}"),
                text: line.to_string(),
            });
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Vec<RawTweet>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RawTweet::parse_lines(&text, path)
    }
}

/// A tokenized post with gold keyphrase spans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Post {
    id: String,
    tokens: Vec<String>,
    gold_spans: Vec<Span>,
    tags: Vec<Tag>,
}

impl Post {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, mut gold_spans: Vec<Span>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::contract("a post needs at least one token"));
        }
        if tokens.iter().any(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::contract("tokens must be nonempty and contain no whitespace"));
        }
        gold_spans.sort_unstable();
        let tags = spans_to_tags(&gold_spans, tokens.len())?;
        Ok(Post {
            id: id.into(),
            tokens,
            gold_spans,
            tags,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn gold_spans(&self) -> &[Span] {
        &self.gold_spans
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Lowercased, space-joined text of each gold span.
    pub fn gold_phrases(&self) -> Vec<String> {
        self.gold_spans.iter().map(|&s| phrase(&self.tokens, s)).collect()
    }
}

/// Lowercased, space-joined tokens of `span`.
pub fn phrase(tokens: &[String], (s, e): Span) -> String {
    tokens[s..e].join(" ").to_lowercase()
}

#[derive(Serialize, Deserialize)]
struct PostRecord {
    version: u32,
    id: String,
    tokens: Vec<String>,
    gold_spans: Vec<[usize; 2]>,
}

pub fn posts_to_jsonl(posts: &[Post]) -> String {
    let mut out = String::new();
    for p in posts {
        let r = PostRecord {
            version: POST_FORMAT_VERSION,
            id: p.id.clone(),
            tokens: p.tokens.clone(),
            gold_spans: p.gold_spans.iter().map(|&(s, e)| [s, e]).collect(),
        };
        out.push_str(&serde_json::to_string(&r).expect("post records serialize"));
        out.push('\n');
    }
    out
}

/// Reads posts, validating every record.
pub fn posts_from_jsonl(text: &str, origin: &Path) -> Result<Vec<Post>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: PostRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        if r.version != POST_FORMAT_VERSION {
            return Err(Error::parse(
                origin,
                i + 1,
                format!("post format version {} (expected {POST_FORMAT_VERSION})", r.version),
            ));
        }
        let spans = r.gold_spans.iter().map(|&[s, e]| (s, e)).collect();
        let post = Post::new(r.id, r.tokens, spans).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        out.push(post);
    }
    Ok(out)
}

pub fn save_posts(posts: &[Post], path: &Path) -> Result<()> {
    crate::error::write_text(path, &posts_to_jsonl(posts))
}

pub fn load_posts(path: &Path) -> Result<Vec<Post>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    posts_from_jsonl(&text, path)
}

/// Source collection label. All modes apply the same filters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetMode {
    ElectionTrec,
    GeneralTwitter,
    Generic,
}

impl FromStr for DatasetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "election-trec" => Ok(DatasetMode::ElectionTrec),
            "general-twitter" => Ok(DatasetMode::GeneralTwitter),
            "generic" => Ok(DatasetMode::Generic),
            other => Err(Error::config(format!(
                "unknown dataset mode {other:?} (election-trec, general-twitter, generic)"
            ))),
        }
    }
}

impl fmt::Display for DatasetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetMode::ElectionTrec => "election-trec",
            DatasetMode::GeneralTwitter => "general-twitter",
            DatasetMode::Generic => "generic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    NoHashtag,
    MultipleHashtags,
    HashtagAtBoundary,
}

/// Applies the filters to one tweet.
pub fn tweet_to_post(tweet: &RawTweet) -> std::result::Result<Post, Rejection> {
    let tokens = tokenize(&tweet.text);
    let tags: Vec<usize> = (0..tokens.len()).filter(|&i| is_hashtag(&tokens[i])).collect();
    let at = match tags.as_slice() {
        [] => return Err(Rejection::NoHashtag),
        [i] => *i,
        _ => return Err(Rejection::MultipleHashtags),
    };
    let before = tokens[..at].iter().any(|t| is_word_token(t));
    let after = tokens[at + 1..].iter().any(|t| is_word_token(t));
    if !(before && after) {
        return Err(Rejection::HashtagAtBoundary);
    }
    let words = segment_hashtag(&tokens[at][1..]);
    let span = (at, at + words.len());
    let mut out = Vec::with_capacity(tokens.len() + words.len());
    out.extend_from_slice(&tokens[..at]);
    out.extend(words);
    out.extend_from_slice(&tokens[at + 1..]);
    Ok(Post::new(tweet.id.clone(), out, vec![span]).expect("filtered tweets form valid posts"))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub read: usize,
    pub kept: usize,
    pub no_hashtag: usize,
    pub multiple_hashtags: usize,
    pub hashtag_at_boundary: usize,
}

pub fn build_dataset(tweets: &[RawTweet], mode: DatasetMode) -> Vec<Post> {
    build_dataset_with_stats(tweets, mode).0
}

pub fn build_dataset_with_stats(tweets: &[RawTweet], mode: DatasetMode) -> (Vec<Post>, BuildStats) {
    let mut stats = BuildStats {
        read: tweets.len(),
        ..BuildStats::default()
    };
    let mut posts = Vec::new();
    for t in tweets {
        match tweet_to_post(t) {
            Ok(p) => posts.push(p),
            Err(Rejection::NoHashtag) => stats.no_hashtag += 1,
            Err(Rejection::MultipleHashtags) => stats.multiple_hashtags += 1,
            Err(Rejection::HashtagAtBoundary) => stats.hashtag_at_boundary += 1,
        }
    }
    stats.kept = posts.len();
    if posts.is_empty() {
        log::warn!("{mode} dataset is empty: none of {} tweets passed the hashtag filters", tweets.len());
    }
    (posts, stats)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Post>,
    pub dev: Vec<Post>,
    pub test: Vec<Post>,
    pub seed: u64,
    /// train, dev, test.
    pub ratios: [f64; 3],
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sizes for `n` posts: dev and test round up, train takes the rest.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::config(format!("split ratios {ratios:?} must lie in [0, 1]")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios {ratios:?} sum to {sum}, not 1")));
    }
    let part = |r: f64| ((n as f64 * r - 1e-9).ceil().max(0.0) as usize).min(n);
    let dev = part(ratios[1]);
    let test = part(ratios[2]).min(n - dev);
    Ok([n - dev - test, dev, test])
}

/// Seeded shuffle, then contiguous train/dev/test blocks.
pub fn split(posts: &[Post], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    let [n_train, n_dev, _] = split_sizes(posts.len(), ratios)?;
    let mut order: Vec<usize> = (0..posts.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |r: std::ops::Range<usize>| order[r].iter().map(|&i| posts[i].clone()).collect();
    Ok(DatasetSplit {
        train: take(0..n_train),
        dev: take(n_train..n_train + n_dev),
        test: take(n_train + n_dev..posts.len()),
        seed,
        ratios,
    })
}

pub fn parse_ratios(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::config(format!("bad split ratios {s:?}")))?;
    <[f64; 3]>::try_from(parts)
        .map_err(|_| Error::config(format!("expected three split ratios, got {s:?}")))
}

/// Lowercased token vocabulary of `posts`, sorted and deduplicated.
pub fn vocabulary(posts: &[Post]) -> Vec<String> {
    let set: std::collections::BTreeSet<String> = posts
        .iter()
        .flat_map(|p| p.tokens.iter().map(|t| t.to_lowercase()))
        .collect();
    set.into_iter().collect()
}
