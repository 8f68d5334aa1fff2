//! Config-driven orchestration of the lexicon, dataset, training and
//! evaluation stages, plus the lexicon ablation grid.
//!
//! Every stage writes into its own directory under the run's output root and
//! echoes the effective [`RunConfig`] there as [`CONFIG_ECHO`]. Relative paths
//! in a config file resolve against the file's directory and are echoed as
//! absolute paths, so re-running the echo reproduces the run.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_dataset_with_stats, load_posts, save_posts, split, split_sizes, vocabulary, DatasetMode, DatasetSplit, Post, RawTweet};
use crate::error::{Error, Result, StageExt};
use crate::eval::{
    aggregate, attention_rank, disagreement_subset, emit_report, evaluate, generalization_subset, gold_phrases,
    predict_posts, predicted_phrases, Aggregate, EvalReport, RankAnalysis, RunReport,
};
use crate::expansion::{expand_lexicon, mean_fill, CharEncoder, EmbeddingTable};
use crate::gaze::{average_trt, combine, ingest_osec, FrequencyLexicon, GazeLexicon, OsecFormat, Regularization};
use crate::numeric::{gradient_check, GradCheckOptions, GradCheckReport};
use crate::synthetic;
use crate::tagger::{train, ModelConfig, Tagger, TrainingLog, Variant};

/// File name of the effective config written into every output directory.
pub const CONFIG_ECHO: &str = "effective-config.toml";

/// Caps the worker threads used for parallel seeds and grid cells.
pub const THREADS_ENV: &str = "GAZEKEX_THREADS";

/// How target words without a native reading time get a value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    #[default]
    Expanded,
    MeanFilled,
}

impl Fill {
    pub const ALL: [Fill; 2] = [Fill::Expanded, Fill::MeanFilled];

    pub fn label(self) -> &'static str {
        match self {
            Fill::Expanded => "expanded",
            Fill::MeanFilled => "mean_filled",
        }
    }
}

impl fmt::Display for Fill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Fill {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expanded" | "expand" => Ok(Fill::Expanded),
            "mean_filled" | "mean-filled" | "mean" => Ok(Fill::MeanFilled),
            other => Err(Error::config(format!("unknown fill {other:?} (expanded, mean_filled)"))),
        }
    }
}

/// Serializes through `Display` and parses through `FromStr`.
mod as_label {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

mod as_labels {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::ser::SerializeSeq;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&x.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(de::Error::custom))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: OsecFormat,
    pub participants: u32,
    #[serde(default)]
    pub corpus: String,
    #[serde(default)]
    pub genre: String,
}

fn default_format() -> OsecFormat {
    OsecFormat::GenericTsv
}

impl SourceConfig {
    /// Corpus label, falling back to the file stem.
    pub fn corpus_label(&self) -> String {
        if self.corpus.is_empty() {
            self.path.file_stem().map_or("osec".into(), |s| s.to_string_lossy().into_owned())
        } else {
            self.corpus.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LexiconConfig {
    /// One eye-tracking corpus, or two to combine over shared words.
    pub sources: Vec<SourceConfig>,
    pub frequency: Option<PathBuf>,
    #[serde(with = "as_label")]
    pub regularization: Regularization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Raw tweets to filter into posts.
    pub tweets: Option<PathBuf>,
    /// Prebuilt posts; takes precedence over `tweets`.
    pub posts: Option<PathBuf>,
    pub mode: DatasetMode,
    pub ratios: [f64; 3],
    pub split_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            tweets: None,
            posts: None,
            mode: DatasetMode::Generic,
            ratios: [0.8, 0.1, 0.1],
            split_seed: 13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionConfig {
    /// Pretrained word vectors, used for expansion and as word embeddings.
    pub embeddings: Option<PathBuf>,
    pub fill: Fill,
    /// Epochs of the baseline tagger whose character vectors rank words
    /// without pretrained vectors; 0 skips it.
    pub char_encoder_epochs: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            embeddings: None,
            fill: Fill::Expanded,
            char_encoder_epochs: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub variant: Variant,
    #[serde(with = "as_labels")]
    pub regularizations: Vec<Regularization>,
    pub fills: Vec<Fill>,
    pub baselines: Vec<Variant>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            variant: Variant::Ha,
            regularizations: ["none", "freq", "len", "freq+len"]
                .iter()
                .map(|s| s.parse().expect("known label"))
                .collect(),
            fills: Fill::ALL.to_vec(),
            baselines: vec![Variant::Baseline, Variant::Att],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub lexicon: LexiconConfig,
    pub dataset: DatasetConfig,
    pub expansion: ExpansionConfig,
    pub model: ModelConfig,
    pub ablation: AblationConfig,
    /// Per-command input files, keyed by flag name.
    pub inputs: BTreeMap<String, PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: (1..=5).collect(),
            variants: Variant::ALL.to_vec(),
            lexicon: LexiconConfig::default(),
            dataset: DatasetConfig::default(),
            expansion: ExpansionConfig::default(),
            model: ModelConfig::default(),
            ablation: AblationConfig::default(),
            inputs: BTreeMap::new(),
        }
    }
}

pub fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

fn rebase(path: &mut PathBuf, base: &Path) {
    if path.is_relative() {
        *path = absolute(&base.join(&*path));
    }
}

impl RunConfig {
    /// Parses TOML; unknown keys are rejected.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::parse(origin, line, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::parse(&text, path)?;
        let base = absolute(path.parent().unwrap_or(Path::new(".")));
        cfg.rebase_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolves every relative path against `base`.
    pub fn rebase_paths(&mut self, base: &Path) {
        for s in &mut self.lexicon.sources {
            rebase(&mut s.path, base);
        }
        let opts = [
            &mut self.lexicon.frequency,
            &mut self.dataset.tweets,
            &mut self.dataset.posts,
            &mut self.expansion.embeddings,
        ];
        for p in opts.into_iter().flatten() {
            rebase(p, base);
        }
        for p in self.inputs.values_mut() {
            rebase(p, base);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must list at least one seed"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants must list at least one model"));
        }
        if self.lexicon.sources.len() > 2 {
            return Err(Error::config(format!(
                "at most two eye-tracking sources can be combined, got {}",
                self.lexicon.sources.len()
            )));
        }
        if let Some(s) = self.lexicon.sources.iter().find(|s| s.participants == 0) {
            return Err(Error::config(format!("source {} has zero participants", s.path.display())));
        }
        split_sizes(10, self.dataset.ratios)?;
        if self.ablation.regularizations.is_empty() || self.ablation.fills.is_empty() {
            return Err(Error::config("the ablation grid needs at least one regularization and one fill"));
        }
        if !self.ablation.variant.needs_lexicon() {
            return Err(Error::config(format!(
                "ablation variant {} does not use a lexicon",
                self.ablation.variant
            )));
        }
        self.model.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize")
    }

    /// Writes the effective config into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        write(&dir.join(CONFIG_ECHO), &self.to_toml())
    }

    /// Model config for one training run.
    pub fn model_for(&self, variant: Variant, seed: u64, lexicon: Option<&Path>) -> ModelConfig {
        ModelConfig {
            variant,
            seed,
            lexicon: lexicon
                .filter(|_| variant.needs_lexicon())
                .map(|p| p.display().to_string()),
            embeddings: self.expansion.embeddings.as_ref().map(|p| p.display().to_string()),
            ..self.model.clone()
        }
    }
}

/// Thread pool sized by [`THREADS_ENV`], or rayon's default when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}

use crate::error::write_text as write;

pub fn load_frequency(cfg: &LexiconConfig) -> Result<Option<FrequencyLexicon>> {
    cfg.frequency.as_deref().map(FrequencyLexicon::load).transpose()
}

pub fn source_lexicon(
    source: &SourceConfig,
    regularization: Regularization,
    freq: Option<&FrequencyLexicon>,
) -> Result<GazeLexicon> {
    let records = ingest_osec(&source.path, source.format, source.participants)?;
    let avg = average_trt(&records, source.participants)?;
    GazeLexicon::build(&avg, regularization, freq, &source.corpus_label(), &source.genre)
}

/// Native lexicon from one source, or the combination of two.
pub fn build_native_lexicon(cfg: &LexiconConfig, regularization: Regularization) -> Result<GazeLexicon> {
    let freq = load_frequency(cfg)?;
    let lexicons = cfg
        .sources
        .iter()
        .map(|s| source_lexicon(s, regularization, freq.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    match lexicons.as_slice() {
        [] => Err(Error::config("no eye-tracking source configured")),
        [one] => Ok(one.clone()),
        [a, b] => combine(a, b, regularization, freq.as_ref()),
        _ => Err(Error::config("at most two eye-tracking sources can be combined")),
    }
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<Vec<Post>> {
    if let Some(p) = &cfg.posts {
        return load_posts(p);
    }
    let path = cfg
        .tweets
        .as_deref()
        .ok_or_else(|| Error::config("dataset needs `tweets` or `posts`"))?;
    let tweets = RawTweet::load(path)?;
    let (posts, stats) = build_dataset_with_stats(&tweets, cfg.mode);
    log::info!("{}: kept {} of {} tweets ({stats:?})", path.display(), posts.len(), tweets.len());
    Ok(posts)
}

pub fn load_embeddings(path: Option<&Path>) -> Result<Option<EmbeddingTable>> {
    path.map(EmbeddingTable::load).transpose()
}

/// Whether expansion would meet an uncovered word without a pretrained vector.
pub fn needs_char_encoder(lexicon: &GazeLexicon, vocab: &[String], embeddings: Option<&EmbeddingTable>) -> bool {
    vocab
        .iter()
        .any(|w| !lexicon.contains(w) && embeddings.is_none_or(|e| !e.contains(w)))
}

/// Baseline tagger trained briefly so its character path can embed unseen words.
pub fn train_char_encoder(
    model: &ModelConfig,
    seed: u64,
    epochs: usize,
    embeddings: Option<&EmbeddingTable>,
    train_posts: &[Post],
) -> Result<Tagger> {
    let cfg = ModelConfig {
        variant: Variant::Baseline,
        seed,
        epochs,
        lexicon: None,
        ..model.clone()
    };
    let mut t = Tagger::new(cfg, None, embeddings.cloned())?;
    train(&mut t, train_posts, &[])?;
    Ok(t)
}

pub fn fill_lexicon(
    native: &GazeLexicon,
    vocab: &[String],
    fill: Fill,
    embeddings: Option<&EmbeddingTable>,
    char_encoder: Option<&dyn CharEncoder>,
) -> Result<GazeLexicon> {
    match fill {
        Fill::Expanded => expand_lexicon(native, vocab, embeddings, char_encoder),
        Fill::MeanFilled => Ok(mean_fill(native, vocab)),
    }
}

/// Trains one model; lexicon-free variants ignore `lexicon`.
pub fn train_run(
    model: ModelConfig,
    lexicon: Option<&GazeLexicon>,
    embeddings: Option<&EmbeddingTable>,
    train_posts: &[Post],
    dev_posts: &[Post],
) -> Result<(Tagger, TrainingLog)> {
    let lexicon = lexicon.filter(|_| model.variant.needs_lexicon()).cloned();
    let mut t = Tagger::new(model, lexicon, embeddings.cloned())?;
    let log = train(&mut t, train_posts, dev_posts)?;
    Ok((t, log))
}

/// Inputs shared by the pipeline and the ablation grid.
struct Prepared {
    split: DatasetSplit,
    vocab: Vec<String>,
    embeddings: Option<EmbeddingTable>,
    char_encoder: Option<Tagger>,
}

fn prepare(cfg: &RunConfig, out: &Path, native: &GazeLexicon) -> Result<Prepared> {
    let posts = load_dataset(&cfg.dataset).stage("dataset")?;
    let sp = split(&posts, cfg.dataset.ratios, cfg.dataset.split_seed).stage("dataset")?;
    let data_dir = out.join("dataset");
    for (name, part) in [("posts", &posts), ("train", &sp.train), ("dev", &sp.dev), ("test", &sp.test)] {
        save_posts(part, &data_dir.join(format!("{name}.jsonl"))).stage("dataset")?;
    }
    cfg.echo(&data_dir).stage("dataset")?;

    let embeddings = load_embeddings(cfg.expansion.embeddings.as_deref()).stage("expansion")?;
    let vocab = vocabulary(&posts);
    let wants_expansion = cfg.expansion.fill == Fill::Expanded || cfg.ablation.fills.contains(&Fill::Expanded);
    let char_encoder = if wants_expansion
        && cfg.expansion.char_encoder_epochs > 0
        && needs_char_encoder(native, &vocab, embeddings.as_ref())
    {
        let t = train_char_encoder(
            &cfg.model,
            cfg.seeds[0],
            cfg.expansion.char_encoder_epochs,
            embeddings.as_ref(),
            &sp.train,
        )
        .stage("expansion")?;
        write(&out.join("lexicon").join("char_encoder.ckpt"), &t.to_checkpoint().to_text()).stage("expansion")?;
        Some(t)
    } else {
        None
    };
    Ok(Prepared {
        split: sp,
        vocab,
        embeddings,
        char_encoder,
    })
}

type Job<'a> = (Variant, u64, Option<&'a GazeLexicon>, Option<&'a Path>);

fn run_jobs(cfg: &RunConfig, jobs: &[Job<'_>], prep: &Prepared) -> Result<Vec<(Tagger, TrainingLog)>> {
    let pool = thread_pool()?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(variant, seed, lexicon, path)| {
                let model = cfg.model_for(variant, seed, path);
                train_run(model, lexicon, prep.embeddings.as_ref(), &prep.split.train, &prep.split.dev)
            })
            .collect::<Result<Vec<_>>>()
    })
    .stage("train")
}

/// Full pipeline: lexicon, dataset, expansion, one model per variant and
/// seed, and a test-set report with subset and attention-rank analyses.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> Result<EvalReport> {
    cfg.validate().stage("config")?;
    cfg.echo(out).stage("config")?;

    let lex_dir = out.join("lexicon");
    let native = build_native_lexicon(&cfg.lexicon, cfg.lexicon.regularization).stage("lexicon")?;
    native.save(&lex_dir.join("native.tsv")).stage("lexicon")?;

    let prep = prepare(cfg, out, &native)?;
    let encoder = prep.char_encoder.as_ref().map(|t| t as &dyn CharEncoder);
    let lexicon = fill_lexicon(&native, &prep.vocab, cfg.expansion.fill, prep.embeddings.as_ref(), encoder)
        .stage("expansion")?;
    let lex_path = lex_dir.join(format!("{}.tsv", cfg.expansion.fill));
    lexicon.save(&lex_path).stage("expansion")?;
    cfg.echo(&lex_dir).stage("expansion")?;

    // Recorded relative to each checkpoint so runs are relocatable.
    let recorded = Path::new("../../../lexicon").join(lex_path.file_name().expect("file name"));
    let jobs: Vec<Job<'_>> = cfg
        .variants
        .iter()
        .flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s)))
        .map(|(v, s)| (v, s, Some(&lexicon), Some(recorded.as_path())))
        .collect();
    let trained = run_jobs(cfg, &jobs, &prep)?;

    let test = &prep.split.test;
    let mut report = EvalReport::default();
    for (&(variant, seed, _, _), (tagger, log)) in jobs.iter().zip(&trained) {
        let dir = out.join("runs").join(variant.key()).join(format!("seed-{seed}"));
        write(&dir.join("model.ckpt"), &tagger.to_checkpoint().to_text()).stage("train")?;
        write(&dir.join("train.log"), &log.to_text()).stage("train")?;
        cfg.echo(&dir).stage("train")?;
        if !test.is_empty() {
            let score = evaluate(tagger, test).stage("evaluate")?;
            report.push_run(variant.model_name(), seed, score);
        }
    }
    report.subsets.insert("test".into(), test.len());
    report
        .subsets
        .insert("generalization".into(), generalization_subset(&prep.split.train, test).len());

    let first = |v: Variant| jobs.iter().position(|j| j.0 == v && j.1 == cfg.seeds[0]).map(|i| &trained[i].0);
    if let (Some(ha), Some(att)) = (first(Variant::Ha), first(Variant::Att)) {
        let (subset, analysis) = rank_analysis(ha, att, test, false).stage("analyze")?;
        report.subsets.insert("disagreement".into(), subset);
        report.rank_analysis = Some(analysis);
    }
    let report_dir = out.join("report");
    emit_report(&report, &report_dir).stage("report")?;
    cfg.echo(&report_dir).stage("report")?;
    Ok(report)
}

/// Posts where `a` matches gold and `b` does not.
pub fn disagreement(a: &Tagger, b: &Tagger, posts: &[Post]) -> Result<Vec<usize>> {
    let pa = predicted_phrases(posts, &predict_posts(a, posts)?);
    let pb = predicted_phrases(posts, &predict_posts(b, posts)?);
    disagreement_subset(&pa, &pb, &gold_phrases(posts))
}

/// Attention ranks of both models over the disagreement subset, or over
/// every post with a gold keyphrase when `all_posts`. Returns the subset size.
pub fn rank_analysis(a: &Tagger, b: &Tagger, posts: &[Post], all_posts: bool) -> Result<(usize, RankAnalysis)> {
    let idx = if all_posts {
        (0..posts.len()).collect()
    } else {
        disagreement(a, b, posts)?
    };
    let chosen: Vec<&Post> = idx.iter().map(|&i| &posts[i]).filter(|p| !p.gold_spans().is_empty()).collect();
    let ranks = |t: &Tagger| chosen.iter().map(|p| attention_rank(t, p)).collect::<Result<Vec<_>>>();
    Ok((
        idx.len(),
        RankAnalysis::new(a.config().variant.model_name(), b.config().variant.model_name(), ranks(a)?, ranks(b)?),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub model: String,
    /// `None` for baselines, which read no lexicon.
    pub regularization: Option<String>,
    pub fill: Option<Fill>,
    /// Relative to the ablation directory.
    pub lexicon: Option<PathBuf>,
    pub runs: Vec<RunReport>,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub variant: Variant,
    pub cells: Vec<AblationCell>,
}

impl AblationTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model\tregularization\tfill\tprecision\trecall\tf1\truns\n");
        for c in &self.cells {
            let a = &c.aggregate;
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                c.model,
                c.regularization.as_deref().unwrap_or("-"),
                c.fill.map_or("-", Fill::label),
                a.precision,
                a.recall,
                a.f1,
                a.runs
            ));
        }
        out
    }
}

/// Trains the ablation variant under every regularization × fill lexicon and
/// the baselines without one, averaging each cell over the seeds. Writes the
/// lexicons, `table.tsv` and `cells.json` under `out/ablation`.
pub fn ablate(cfg: &RunConfig, out: &Path) -> Result<AblationTable> {
    cfg.validate().stage("config")?;
    let dir = out.join("ablation");
    cfg.echo(&dir).stage("config")?;
    let lex_dir = dir.join("lexicons");

    let natives = cfg
        .ablation
        .regularizations
        .iter()
        .map(|&r| build_native_lexicon(&cfg.lexicon, r))
        .collect::<Result<Vec<_>>>()
        .stage("lexicon")?;
    let prep = prepare(cfg, &dir, &natives[0])?;
    let encoder = prep.char_encoder.as_ref().map(|t| t as &dyn CharEncoder);

    let mut grid: Vec<(Option<(Regularization, Fill)>, Variant, Option<GazeLexicon>, Option<PathBuf>)> = Vec::new();
    for (native, &reg) in natives.iter().zip(&cfg.ablation.regularizations) {
        for &fill in &cfg.ablation.fills {
            let lex = fill_lexicon(native, &prep.vocab, fill, prep.embeddings.as_ref(), encoder).stage("expansion")?;
            let name = format!("{reg}-{fill}.tsv");
            lex.save(&lex_dir.join(&name)).stage("expansion")?;
            grid.push((Some((reg, fill)), cfg.ablation.variant, Some(lex), Some(Path::new("lexicons").join(name))));
        }
    }
    for &b in &cfg.ablation.baselines {
        grid.push((None, b, None, None));
    }
    cfg.echo(&lex_dir).stage("expansion")?;

    let jobs: Vec<Job<'_>> = grid
        .iter()
        .flat_map(|(_, v, lex, path)| cfg.seeds.iter().map(move |&s| (*v, s, lex.as_ref(), path.as_deref())))
        .collect();
    let trained = run_jobs(cfg, &jobs, &prep)?;

    let test = &prep.split.test;
    let mut cells = Vec::with_capacity(grid.len());
    let mut scores = trained.iter().map(|(t, _)| evaluate(t, test));
    for (key, v, _, path) in &grid {
        let runs = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let score = scores.next().expect("one score per job").stage("evaluate")?;
                Ok(RunReport {
                    label: v.model_name().to_string(),
                    seed,
                    score,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let agg = aggregate(&runs.iter().map(|r| r.score).collect::<Vec<_>>());
        cells.push(AblationCell {
            model: v.model_name().to_string(),
            regularization: key.map(|(r, _)| r.to_string()),
            fill: key.map(|(_, f)| f),
            lexicon: path.clone(),
            runs,
            aggregate: agg,
        });
    }
    let table = AblationTable {
        variant: cfg.ablation.variant,
        cells,
    };
    write(&dir.join("table.tsv"), &table.to_tsv()).stage("report")?;
    let json = serde_json::to_string_pretty(&table).expect("tables serialize");
    write(&dir.join("cells.json"), &(json + "\n")).stage("report")?;
    Ok(table)
}

/// Gradient check on a fixed 3-token post with ±1 initial weights, which keep
/// every sampled gradient well above finite-difference roundoff.
pub fn gradcheck_variant(variant: Variant, seed: u64) -> Result<GradCheckReport> {
    let tokens = ["the", "Climate", "Senate"].map(String::from).to_vec();
    let post = Post::new("gradcheck", tokens, vec![(1, 3)])?;
    let cfg = ModelConfig {
        variant,
        seed,
        word_emb_dim: 4,
        char_emb_dim: 3,
        char_hidden: 3,
        char_word_dim: 3,
        word_hidden: 4,
        attention_dim: 3,
        init_scale: 1.0,
        ..ModelConfig::default()
    };
    let lexicon = variant.needs_lexicon().then(synthetic::keyphrase_lexicon);
    let t = Tagger::new(cfg, lexicon, Some(synthetic::embeddings(4, 5)))?;
    gradient_check(t.params(), |ps| t.loss_and_gradients(ps, &post), GradCheckOptions::default())
}
