//! Command-line front end. Flags override the `--config` file, and every
//! command echoes the resulting effective config next to its outputs.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{build_dataset_with_stats, load_posts, parse_ratios, save_posts, split, DatasetMode, Post, RawTweet};
use crate::error::{Error, Result, StageExt};
use crate::eval::{emit_report, evaluate, generalization_subset, EvalReport};
use crate::expansion::CharEncoder;
use crate::gaze::{self, combine, GazeLexicon, OsecFormat, Regularization};
use crate::numeric::Checkpoint;
use crate::pipeline::{
    ablate, absolute, build_native_lexicon, fill_lexicon, gradcheck_variant, load_embeddings, load_frequency,
    rank_analysis, run_pipeline, train_run, Fill, RunConfig, SourceConfig,
};
use crate::tagger::{ModelConfig, Tagger, Variant};

#[derive(Debug, Parser)]
#[command(name = "gazekex", version, about = "Reading-time lexicons and gaze-informed keyphrase tagging")]
pub struct Cli {
    /// TOML run config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; defaults to gazekex-out.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// error, warn, info, debug or trace; falls back to RUST_LOG, then info.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reading-time lexicons from eye-tracking corpora.
    #[command(subcommand)]
    Osec(OsecCommand),
    /// Hashtag-labelled post datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train one tagger.
    Train(TrainArgs),
    /// Score a checkpoint on a post set.
    Evaluate(EvaluateArgs),
    /// Attention-rank and generalization-subset analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Regularization × fill lexicon grid plus baselines, averaged over seeds.
    Ablate,
    /// Finite-difference gradient check of every variant on a 3-token post.
    Gradcheck(GradcheckArgs),
    /// Full pipeline from eye-tracking files and tweets to a test report.
    Run,
}

#[derive(Debug, Args)]
pub struct LexiconOut {
    /// Output lexicon file; defaults to `<out-dir>/lexicon.tsv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OsecCommand {
    /// AVG-TRT lexicon from one corpus file.
    Build {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<OsecFormat>,
        #[arg(long)]
        participants: Option<u32>,
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long)]
        genre: Option<String>,
        #[arg(long)]
        frequency: Option<PathBuf>,
        #[arg(long)]
        regularization: Option<Regularization>,
        #[command(flatten)]
        out: LexiconOut,
    },
    /// Re-derive native values under another regularization.
    Regularize {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        regularization: Option<Regularization>,
        #[arg(long)]
        frequency: Option<PathBuf>,
        #[command(flatten)]
        out: LexiconOut,
    },
    /// Recompute min-max bounds over native entries.
    Normalize {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[command(flatten)]
        out: LexiconOut,
    },
    /// Average two lexicons over their shared words.
    Combine {
        #[arg(long, num_args = 2, required = true)]
        lexicon: Vec<PathBuf>,
        #[arg(long)]
        regularization: Option<Regularization>,
        #[arg(long)]
        frequency: Option<PathBuf>,
        #[command(flatten)]
        out: LexiconOut,
    },
    /// Give every target word a value, by similarity or by the native mean.
    Expand {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Checkpoint whose character path embeds words without vectors.
        #[arg(long)]
        char_encoder: Option<PathBuf>,
        #[arg(long)]
        fill: Option<Fill>,
        #[command(flatten)]
        out: LexiconOut,
    },
    /// Share of target tokens and types the lexicon covers.
    Coverage {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Debug, Args)]
pub struct Target {
    /// Posts whose tokens form the target vocabulary.
    #[arg(long)]
    pub posts: Option<PathBuf>,
    /// Whitespace-separated tokens forming the target vocabulary.
    #[arg(long, conflicts_with = "posts")]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Filter raw tweets into posts labelled by their hashtag.
    Build {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        mode: Option<DatasetMode>,
        /// Output posts file; defaults to `<out-dir>/posts.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded train/dev/test split into `<out-dir>`.
    Split {
        #[arg(long)]
        input: Option<PathBuf>,
        /// `train,dev,test` fractions summing to 1.
        #[arg(long, value_parser = parse_ratios)]
        ratios: Option<[f64; 3]>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelInputs {
    /// Lexicon for ha and feat checkpoints; defaults to the one they recorded.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Word vectors; defaults to those the checkpoint recorded.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: ModelInputs,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Gold-keyphrase attention ranks of two attention models.
    Rank {
        #[arg(long)]
        model_a: Option<PathBuf>,
        #[arg(long)]
        model_b: Option<PathBuf>,
        #[arg(long)]
        posts: Option<PathBuf>,
        /// Rank every post instead of those only model A gets right.
        #[arg(long)]
        all_posts: bool,
        #[command(flatten)]
        inputs: ModelInputs,
    },
    /// Scores on test posts whose keyphrase never occurs in training.
    Generalization {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        posts: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[command(flatten)]
        inputs: ModelInputs,
    },
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Variants to check; all four when omitted.
    #[arg(long)]
    pub variant: Vec<Variant>,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Parses `args` (program name first), runs the command and maps the outcome
/// to an exit code. Errors go to stderr tagged with their stage.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    init_logging(cli.log_level.as_deref());
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn init_logging(level: Option<&str>) {
    let mut b = env_logger::Builder::new();
    match level.map(String::from).or_else(|| std::env::var("RUST_LOG").ok()) {
        Some(l) => b.parse_filters(&l),
        None => b.parse_filters("info"),
    };
    let _ = b.format_timestamp(None).try_init();
}

struct Ctx {
    cfg: RunConfig,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| absolute(Path::new("gazekex-out")))
    }

    /// Flag value, else the config's recorded input; records the choice.
    fn input(&mut self, key: &str, flag: Option<PathBuf>) -> Option<PathBuf> {
        if let Some(p) = flag {
            self.cfg.inputs.insert(key.to_string(), absolute(&p));
        }
        self.cfg.inputs.get(key).cloned()
    }

    fn require(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.input(key, flag)
            .ok_or_else(|| Error::config(format!("missing --{}", key.replace('_', "-"))))
    }

    /// Output file: flag, else recorded, else `<out-dir>/<default>`.
    fn output(&mut self, flag: Option<PathBuf>, default: &str) -> PathBuf {
        let p = self.input("out", flag).unwrap_or_else(|| self.out_dir().join(default));
        self.cfg.inputs.insert("out".into(), p.clone());
        p
    }

    fn echo_beside(&self, file: &Path) -> Result<()> {
        self.cfg.echo(file.parent().unwrap_or(Path::new(".")))
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).stage("config")?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
        cfg.model.seed = s;
    }
    let mut ctx = Ctx {
        cfg,
        out_dir: cli.out_dir.as_deref().map(absolute),
    };
    match cli.command {
        Command::Osec(c) => osec(&mut ctx, c),
        Command::Dataset(c) => dataset(&mut ctx, c, cli.seed),
        Command::Train(a) => train_cmd(&mut ctx, a).stage("train"),
        Command::Evaluate(a) => evaluate_cmd(&mut ctx, a).stage("evaluate"),
        Command::Analyze(c) => analyze(&mut ctx, c).stage("analyze"),
        Command::Ablate => {
            let out = ctx.out_dir();
            let table = ablate(&ctx.cfg, &out)?;
            print!("{}", table.to_tsv());
            Ok(())
        }
        Command::Gradcheck(a) => gradcheck_cmd(&mut ctx, a).stage("gradcheck"),
        Command::Run => {
            let out = ctx.out_dir();
            let report = run_pipeline(&ctx.cfg, &out)?;
            print!("{}", report.summary());
            println!("artifacts in {}", out.display());
            Ok(())
        }
    }
}

fn save_lexicon(ctx: &mut Ctx, lex: &GazeLexicon, flag: Option<PathBuf>) -> Result<PathBuf> {
    let out = ctx.output(flag, "lexicon.tsv");
    lex.save(&out)?;
    ctx.echo_beside(&out)?;
    println!("wrote {} ({} entries)", out.display(), lex.len());
    Ok(out)
}

fn target_tokens(ctx: &mut Ctx, t: Target) -> Result<Vec<String>> {
    if let Some(p) = ctx.input("posts", t.posts) {
        Ok(load_posts(&p)?.iter().flat_map(|p| p.tokens().to_vec()).collect())
    } else if let Some(p) = ctx.input("vocab", t.vocab) {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(text.split_whitespace().map(String::from).collect())
    } else {
        Err(Error::config("missing --posts or --vocab"))
    }
}

fn osec(ctx: &mut Ctx, cmd: OsecCommand) -> Result<()> {
    match cmd {
        OsecCommand::Build {
            input,
            format,
            participants,
            corpus,
            genre,
            frequency,
            regularization,
            out,
        } => {
            let lex = &mut ctx.cfg.lexicon;
            if let Some(p) = input {
                let participants = participants
                    .or(lex.sources.first().map(|s| s.participants))
                    .ok_or_else(|| Error::config("missing --participants"))
                    .stage("osec build")?;
                lex.sources = vec![SourceConfig {
                    path: absolute(&p),
                    format: OsecFormat::GenericTsv,
                    participants,
                    corpus: String::new(),
                    genre: String::new(),
                }];
            }
            lex.sources.truncate(1);
            let src = lex
                .sources
                .first_mut()
                .ok_or_else(|| Error::config("missing --input"))
                .stage("osec build")?;
            if let Some(f) = format {
                src.format = f;
            }
            if let Some(n) = participants {
                src.participants = n;
            }
            if let Some(c) = corpus {
                src.corpus = c;
            }
            if let Some(g) = genre {
                src.genre = g;
            }
            if let Some(f) = frequency {
                lex.frequency = Some(absolute(&f));
            }
            if let Some(r) = regularization {
                lex.regularization = r;
            }
            let built = build_native_lexicon(&ctx.cfg.lexicon, ctx.cfg.lexicon.regularization).stage("osec build")?;
            save_lexicon(ctx, &built, out.out).stage("osec build")?;
        }
        OsecCommand::Regularize {
            lexicon,
            regularization,
            frequency,
            out,
        } => {
            let run = |ctx: &mut Ctx| -> Result<()> {
                let base = GazeLexicon::load(&ctx.require("lexicon", lexicon)?)?;
                if let Some(f) = frequency {
                    ctx.cfg.lexicon.frequency = Some(absolute(&f));
                }
                if let Some(r) = regularization {
                    ctx.cfg.lexicon.regularization = r;
                }
                let freq = load_frequency(&ctx.cfg.lexicon)?;
                let lex = base.regularize(ctx.cfg.lexicon.regularization, freq.as_ref())?;
                save_lexicon(ctx, &lex, out.out).map(drop)
            };
            run(ctx).stage("osec regularize")?;
        }
        OsecCommand::Normalize { lexicon, out } => {
            let run = |ctx: &mut Ctx| -> Result<()> {
                let lex = GazeLexicon::load(&ctx.require("lexicon", lexicon)?)?.normalize()?;
                save_lexicon(ctx, &lex, out.out).map(drop)
            };
            run(ctx).stage("osec normalize")?;
        }
        OsecCommand::Combine {
            lexicon,
            regularization,
            frequency,
            out,
        } => {
            let run = |ctx: &mut Ctx| -> Result<()> {
                let a = GazeLexicon::load(&ctx.require("lexicon_a", Some(lexicon[0].clone()))?)?;
                let b = GazeLexicon::load(&ctx.require("lexicon_b", Some(lexicon[1].clone()))?)?;
                if let Some(f) = frequency {
                    ctx.cfg.lexicon.frequency = Some(absolute(&f));
                }
                if let Some(r) = regularization {
                    ctx.cfg.lexicon.regularization = r;
                }
                let freq = load_frequency(&ctx.cfg.lexicon)?;
                let lex = combine(&a, &b, ctx.cfg.lexicon.regularization, freq.as_ref())?;
                save_lexicon(ctx, &lex, out.out).map(drop)
            };
            run(ctx).stage("osec combine")?;
        }
        OsecCommand::Expand {
            lexicon,
            target,
            embeddings,
            char_encoder,
            fill,
            out,
        } => {
            let run = |ctx: &mut Ctx| -> Result<()> {
                let native = GazeLexicon::load(&ctx.require("lexicon", lexicon)?)?;
                let tokens = target_tokens(ctx, target)?;
                let vocab = vocabulary_of(&tokens);
                if let Some(e) = embeddings {
                    ctx.cfg.expansion.embeddings = Some(absolute(&e));
                }
                if let Some(f) = fill {
                    ctx.cfg.expansion.fill = f;
                }
                let emb = load_embeddings(ctx.cfg.expansion.embeddings.as_deref())?;
                let encoder = match ctx.input("char_encoder", char_encoder) {
                    Some(p) => Some(load_tagger(&p, Some(&native), emb.clone())?),
                    None => None,
                };
                let lex = fill_lexicon(
                    &native,
                    &vocab,
                    ctx.cfg.expansion.fill,
                    emb.as_ref(),
                    encoder.as_ref().map(|t| t as &dyn CharEncoder),
                )?;
                save_lexicon(ctx, &lex, out.out)?;
                println!("token coverage {}", gaze::coverage(&lex, &tokens, false)?);
                Ok(())
            };
            run(ctx).stage("osec expand")?;
        }
        OsecCommand::Coverage { lexicon, target } => {
            let run = |ctx: &mut Ctx| -> Result<()> {
                let lex = GazeLexicon::load(&ctx.require("lexicon", lexicon)?)?;
                let tokens = target_tokens(ctx, target)?;
                let types = vocabulary_of(&tokens);
                let hits = |ws: &[String]| ws.iter().filter(|w| lex.contains(&w.to_lowercase())).count();
                println!(
                    "tokens\t{}/{}\t{}",
                    hits(&tokens),
                    tokens.len(),
                    gaze::coverage(&lex, &tokens, false)?
                );
                println!(
                    "types\t{}/{}\t{}",
                    hits(&types),
                    types.len(),
                    gaze::coverage(&lex, &tokens, true)?
                );
                Ok(())
            };
            run(ctx).stage("osec coverage")?;
        }
    }
    Ok(())
}

fn vocabulary_of(tokens: &[String]) -> Vec<String> {
    let mut v: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn dataset(ctx: &mut Ctx, cmd: DatasetCommand, seed: Option<u64>) -> Result<()> {
    match cmd {
        DatasetCommand::Build { input, mode, out } => {
            let run = |ctx: &mut Ctx| -> Result<()> {
                if let Some(p) = input {
                    ctx.cfg.dataset.tweets = Some(absolute(&p));
                }
                if let Some(m) = mode {
                    ctx.cfg.dataset.mode = m;
                }
                let path = ctx
                    .cfg
                    .dataset
                    .tweets
                    .clone()
                    .ok_or_else(|| Error::config("missing --input"))?;
                let tweets = RawTweet::load(&path)?;
                let (posts, stats) = build_dataset_with_stats(&tweets, ctx.cfg.dataset.mode);
                let out = ctx.output(out, "posts.jsonl");
                write_posts(&posts, &out)?;
                ctx.echo_beside(&out)?;
                println!(
                    "kept {} of {} tweets (no hashtag {}, several hashtags {}, hashtag at boundary {})",
                    posts.len(),
                    tweets.len(),
                    stats.no_hashtag,
                    stats.multiple_hashtags,
                    stats.hashtag_at_boundary
                );
                Ok(())
            };
            run(ctx).stage("dataset build")
        }
        DatasetCommand::Split { input, ratios } => {
            let run = |ctx: &mut Ctx| -> Result<()> {
                let posts = load_posts(&ctx.require("input", input)?)?;
                if let Some(r) = ratios {
                    ctx.cfg.dataset.ratios = r;
                }
                if let Some(s) = seed {
                    ctx.cfg.dataset.split_seed = s;
                }
                let d = &ctx.cfg.dataset;
                let sp = split(&posts, d.ratios, d.split_seed)?;
                let dir = ctx.out_dir();
                for (name, part) in [("train", &sp.train), ("dev", &sp.dev), ("test", &sp.test)] {
                    write_posts(part, &dir.join(format!("{name}.jsonl")))?;
                }
                ctx.cfg.echo(&dir)?;
                println!("train {} / dev {} / test {}", sp.train.len(), sp.dev.len(), sp.test.len());
                Ok(())
            };
            run(ctx).stage("dataset split")
        }
    }
}

fn write_posts(posts: &[Post], path: &Path) -> Result<()> {
    save_posts(posts, path)
}

/// Loads a checkpoint with the lexicon and vectors it needs: explicit ones
/// first, then the paths it recorded at training time, which resolve
/// against the checkpoint's directory when relative.
pub fn load_tagger(
    path: &Path,
    lexicon: Option<&GazeLexicon>,
    embeddings: Option<crate::expansion::EmbeddingTable>,
) -> Result<Tagger> {
    let ck = Checkpoint::load(path)?;
    let model: ModelConfig =
        serde_json::from_str(&ck.config).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let recorded = |p: &str| path.parent().unwrap_or(Path::new(".")).join(p);
    let lexicon = match (model.variant.needs_lexicon(), lexicon, &model.lexicon) {
        (false, _, _) => None,
        (true, Some(l), _) => Some(l.clone()),
        (true, None, Some(p)) => Some(GazeLexicon::load(&recorded(p))?),
        (true, None, None) => None,
    };
    let embeddings = match (embeddings, &model.embeddings) {
        (Some(e), _) => Some(e),
        (None, Some(p)) => load_embeddings(Some(&recorded(p)))?,
        (None, None) => None,
    };
    Tagger::from_checkpoint(&ck, lexicon, embeddings)
}

fn model_inputs(ctx: &mut Ctx, m: ModelInputs) -> Result<(Option<GazeLexicon>, Option<crate::expansion::EmbeddingTable>)> {
    let lex = ctx.input("lexicon", m.lexicon).map(|p| GazeLexicon::load(&p)).transpose()?;
    if let Some(e) = m.embeddings {
        ctx.cfg.expansion.embeddings = Some(absolute(&e));
    }
    let emb = load_embeddings(ctx.cfg.expansion.embeddings.as_deref())?;
    Ok((lex, emb))
}

fn finish_report(ctx: &Ctx, report: &EvalReport, dir: &Path) -> Result<()> {
    let files = emit_report(report, dir)?;
    ctx.cfg.echo(dir)?;
    print!("{}", report.summary());
    println!("report in {}", files.record.display());
    Ok(())
}

fn train_cmd(ctx: &mut Ctx, a: TrainArgs) -> Result<()> {
    if let Some(v) = a.variant {
        ctx.cfg.model.variant = v;
    }
    if let Some(n) = a.epochs {
        ctx.cfg.model.epochs = n;
    }
    if let Some(e) = a.embeddings {
        ctx.cfg.expansion.embeddings = Some(absolute(&e));
    }
    let variant = ctx.cfg.model.variant;
    let seed = ctx.cfg.seeds[0];
    ctx.cfg.seeds = vec![seed];
    ctx.cfg.model.seed = seed;
    let lex_path = ctx.input("lexicon", a.lexicon);
    if variant.needs_lexicon() && lex_path.is_none() {
        return Err(Error::config(format!("the {variant} variant needs --lexicon")));
    }
    let train_path = ctx.require("train", a.train)?;
    let dev_path = ctx.input("dev", a.dev);
    ctx.cfg.validate()?;

    let lexicon = lex_path.as_deref().map(GazeLexicon::load).transpose()?;
    let emb = load_embeddings(ctx.cfg.expansion.embeddings.as_deref())?;
    let train_posts = load_posts(&train_path)?;
    let dev_posts = dev_path.as_deref().map(load_posts).transpose()?.unwrap_or_default();
    let model = ctx.cfg.model_for(variant, seed, lex_path.as_deref());
    let (tagger, log) = train_run(model, lexicon.as_ref(), emb.as_ref(), &train_posts, &dev_posts)?;

    let dir = ctx.out_dir();
    let ckpt = dir.join("model.ckpt");
    tagger.to_checkpoint().save(&ckpt)?;
    crate::error::write_text(&dir.join("train.log"), &log.to_text())?;
    let (label, posts) = if dev_posts.is_empty() {
        ("train", &train_posts)
    } else {
        ("dev", &dev_posts)
    };
    let mut report = EvalReport::default();
    report.push_run(variant.model_name(), seed, evaluate(&tagger, posts)?);
    report.subsets.insert(label.into(), posts.len());
    println!("wrote {}", ckpt.display());
    finish_report(ctx, &report, &dir)
}

fn evaluate_cmd(ctx: &mut Ctx, a: EvaluateArgs) -> Result<()> {
    let ckpt = ctx.require("checkpoint", a.checkpoint)?;
    let posts = load_posts(&ctx.require("posts", a.posts)?)?;
    let (lex, emb) = model_inputs(ctx, a.inputs)?;
    let tagger = load_tagger(&ckpt, lex.as_ref(), emb)?;
    let mut report = EvalReport::default();
    report.push_run(tagger.config().variant.model_name(), tagger.config().seed, evaluate(&tagger, &posts)?);
    report.subsets.insert("posts".into(), posts.len());
    finish_report(ctx, &report, &ctx.out_dir())
}

fn analyze(ctx: &mut Ctx, cmd: AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Rank {
            model_a,
            model_b,
            posts,
            all_posts,
            inputs,
        } => {
            let pa = ctx.require("model_a", model_a)?;
            let pb = ctx.require("model_b", model_b)?;
            let posts = load_posts(&ctx.require("posts", posts)?)?;
            let (lex, emb) = model_inputs(ctx, inputs)?;
            let a = load_tagger(&pa, lex.as_ref(), emb.clone())?;
            let b = load_tagger(&pb, lex.as_ref(), emb)?;
            let (n, analysis) = rank_analysis(&a, &b, &posts, all_posts)?;
            let mut report = EvalReport::default();
            for t in [&a, &b] {
                report.push_run(t.config().variant.model_name(), t.config().seed, evaluate(t, &posts)?);
            }
            report
                .subsets
                .insert(if all_posts { "posts" } else { "disagreement" }.into(), n);
            report.rank_analysis = Some(analysis);
            finish_report(ctx, &report, &ctx.out_dir())
        }
        AnalyzeCommand::Generalization {
            train,
            posts,
            checkpoint,
            inputs,
        } => {
            let train_posts = load_posts(&ctx.require("train", train)?)?;
            let test = load_posts(&ctx.require("posts", posts)?)?;
            let subset: Vec<Post> = generalization_subset(&train_posts, &test)
                .into_iter()
                .map(|i| test[i].clone())
                .collect();
            let (lex, emb) = model_inputs(ctx, inputs)?;
            let mut report = EvalReport::default();
            report.subsets.insert("test".into(), test.len());
            report.subsets.insert("generalization".into(), subset.len());
            for (i, p) in checkpoint.iter().enumerate() {
                ctx.input(&format!("checkpoint_{i}"), Some(p.clone()));
                let t = load_tagger(p, lex.as_ref(), emb.clone())?;
                if !subset.is_empty() {
                    report.push_run(t.config().variant.model_name(), t.config().seed, evaluate(&t, &subset)?);
                }
            }
            finish_report(ctx, &report, &ctx.out_dir())
        }
    }
}

fn gradcheck_cmd(ctx: &mut Ctx, a: GradcheckArgs) -> Result<()> {
    let variants = if a.variant.is_empty() { Variant::ALL.to_vec() } else { a.variant };
    let seed = ctx.cfg.seeds[0];
    let mut table = String::from("variant\tmax_relative_error\tcoordinates\tworst\n");
    let mut failed = Vec::new();
    for v in variants {
        let r = gradcheck_variant(v, seed)?;
        let worst = r.worst().map_or("-".into(), |c| format!("{}[{}]", c.param, c.index));
        table.push_str(&format!("{v}\t{:e}\t{}\t{worst}\n", r.max_relative_error, r.checks.len()));
        if !(r.max_relative_error < a.tolerance) {
            failed.push(v.key());
        }
    }
    print!("{table}");
    if let Some(dir) = &ctx.out_dir {
        crate::error::write_text(&dir.join("gradcheck.tsv"), &table)?;
        ctx.cfg.echo(dir)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Evaluation(format!(
            "relative error at or above {} for {}",
            a.tolerance,
            failed.join(", ")
        )))
    }
}
