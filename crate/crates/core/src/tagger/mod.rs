//! BiLSTM keyphrase taggers.
//!
//! Every token is embedded as `[word vector : character-level vector]` and
//! encoded by a word BiLSTM. The four variants differ after that:
//!
//! * `baseline` classifies each hidden state `h_w`.
//! * `att` adds a feed-forward attention `e_w = tanh(W_e h_w + b_e)`,
//!   `a_w = W_a e_w + b_a`, normalizes `a` over the post into `ã`, and
//!   classifies `[h_w : ã_w]`.
//! * `ha` is `att` with an extra squared-error loss pulling `ã` towards the
//!   post's normalized reading times `â`.
//! * `feat` appends an 11-bin one-hot of the token's reading time to its
//!   input vector.
//!
//! The classifier is an affine map to five SBMEN scores followed by softmax.

mod loss;
mod train;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Post, Span, Tag};
use crate::error::{Error, Result};
use crate::expansion::{CharEncoder, EmbeddingTable};
use crate::gaze::{discretize, one_hot, GazeLexicon, TRT_BINS};
use crate::numeric::lstm::{bilstm_encode, LstmParams, INIT_SCALE};
use crate::numeric::{Checkpoint, Gradients, ParamId, ParamSet, Tape, Tensor, Var};

pub use loss::{argmax_tag, attention_target, decode_rows, loss_attention, loss_total, loss_word};
pub use train::{train, train_with, EpochLog, TrainingLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Att,
    Ha,
    Feat,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Att, Variant::Ha, Variant::Feat];

    pub fn has_attention(self) -> bool {
        matches!(self, Variant::Att | Variant::Ha)
    }

    pub fn needs_lexicon(self) -> bool {
        matches!(self, Variant::Ha | Variant::Feat)
    }

    pub fn key(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Att => "att",
            Variant::Ha => "ha",
            Variant::Feat => "feat",
        }
    }

    pub fn model_name(self) -> &'static str {
        match self {
            Variant::Baseline => "BiLSTM",
            Variant::Att => "Att-BiLSTM",
            Variant::Ha => "HA-BiLSTM",
            Variant::Feat => "F-BiLSTM",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "bilstm" => Ok(Variant::Baseline),
            "att" | "att-bilstm" => Ok(Variant::Att),
            "ha" | "ha-bilstm" => Ok(Variant::Ha),
            "feat" | "f-bilstm" => Ok(Variant::Feat),
            other => Err(Error::config(format!(
                "unknown variant {other:?} (baseline, att, ha, feat)"
            ))),
        }
    }
}

/// How raw attention scores become `ã`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionNorm {
    /// `exp(a_w) / Σ exp(a)`.
    #[default]
    Softmax,
    /// `a_w / Σ a`; unstable when the sum is near zero.
    Sum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub word_emb_dim: usize,
    pub char_emb_dim: usize,
    pub char_hidden: usize,
    /// Output size of the character-level word vector.
    pub char_word_dim: usize,
    /// Hidden size per direction of the word BiLSTM.
    pub word_hidden: usize,
    pub attention_dim: usize,
    pub attention_norm: AttentionNorm,
    pub lambda_word: f64,
    pub lambda_att: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Uniform init half-width for all weights.
    pub init_scale: f64,
    pub seed: u64,
    /// Path of the reading-time lexicon, recorded for reproducibility.
    pub lexicon: Option<String>,
    /// Path of the pretrained word vectors, recorded for reproducibility.
    pub embeddings: Option<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Baseline,
            word_emb_dim: 100,
            char_emb_dim: 50,
            char_hidden: 50,
            char_word_dim: 50,
            word_hidden: 300,
            attention_dim: 100,
            attention_norm: AttentionNorm::Softmax,
            lambda_word: 0.7,
            lambda_att: 0.3,
            epochs: 10,
            learning_rate: 0.001,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            clip_norm: Some(5.0),
            init_scale: INIT_SCALE,
            seed: 1,
            lexicon: None,
            embeddings: None,
        }
    }
}

impl ModelConfig {
    pub fn for_variant(variant: Variant) -> Self {
        ModelConfig {
            variant,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_emb_dim", self.word_emb_dim),
            ("char_emb_dim", self.char_emb_dim),
            ("char_hidden", self.char_hidden),
            ("char_word_dim", self.char_word_dim),
            ("word_hidden", self.word_hidden),
            ("attention_dim", self.attention_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(Error::config(format!("{name} must be positive")));
        }
        for (name, l) in [("lambda_word", self.lambda_word), ("lambda_att", self.lambda_att)] {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::config(format!("{name} = {l} is outside [0, 1]")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.rms_decay) || self.rms_epsilon <= 0.0 {
            return Err(Error::config("rms_decay must be in [0, 1) and rms_epsilon positive"));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(Error::config("clip_norm must be positive"));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::config("init_scale must be positive"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        let feat = if self.variant == Variant::Feat { TRT_BINS } else { 0 };
        self.word_emb_dim + self.char_word_dim + feat
    }

    pub fn classifier_input_dim(&self) -> usize {
        2 * self.word_hidden + usize::from(self.variant.has_attention())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model config serializes")
    }
}

/// Printable ASCII maps to `0..95`; everything else to the UNK row.
pub const CHAR_VOCAB: usize = 96;
const CHAR_UNK: usize = 95;

pub fn char_index(c: char) -> usize {
    match c as u32 {
        32..=126 => c as usize - 32,
        _ => CHAR_UNK,
    }
}

#[derive(Clone, Copy, Debug)]
struct AttentionIds {
    we: ParamId,
    be: ParamId,
    wa: ParamId,
    ba: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct Ids {
    char_emb: ParamId,
    char_fwd: LstmParams,
    char_bwd: LstmParams,
    char_proj_w: ParamId,
    char_proj_b: ParamId,
    word_unk: ParamId,
    word_fwd: LstmParams,
    word_bwd: LstmParams,
    attention: Option<AttentionIds>,
    out_w: ParamId,
    out_b: ParamId,
}

/// Nodes of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub inputs: Vec<Var>,
    pub probs: Vec<Var>,
    pub raw_attention: Option<Var>,
    pub attention: Option<Var>,
}

/// Loss nodes of one forward pass.
#[derive(Clone, Debug)]
pub struct LossVars {
    pub total: Var,
    pub word: Var,
    pub attention: Option<Var>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub probs: Vec<Vec<f64>>,
    pub raw_attention: Option<Vec<f64>>,
    pub attention: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub tags: Vec<Tag>,
    pub spans: Vec<Span>,
    pub attention: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValues {
    pub total: f64,
    pub word: f64,
    pub attention: Option<f64>,
}

/// A tagger: configuration, parameters, and the frozen resources it reads.
#[derive(Clone, Debug)]
pub struct Tagger {
    config: ModelConfig,
    params: ParamSet,
    ids: Ids,
    lexicon: Option<GazeLexicon>,
    embeddings: Option<EmbeddingTable>,
}

impl Tagger {
    /// Initializes parameters from `config.seed`.
    pub fn new(
        config: ModelConfig,
        lexicon: Option<GazeLexicon>,
        embeddings: Option<EmbeddingTable>,
    ) -> Result<Self> {
        config.validate()?;
        if config.variant.needs_lexicon() && lexicon.is_none() {
            return Err(Error::config(format!(
                "the {} variant needs a reading-time lexicon",
                config.variant
            )));
        }
        if let Some(e) = &embeddings {
            if e.dim() != config.word_emb_dim {
                return Err(Error::config(format!(
                    "pretrained vectors have {} dims but word_emb_dim is {}",
                    e.dim(),
                    config.word_emb_dim
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (params, ids) = init_params(&config, &mut rng);
        Ok(Tagger {
            config,
            params,
            ids,
            lexicon,
            embeddings,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn lexicon(&self) -> Option<&GazeLexicon> {
        self.lexicon.as_ref()
    }

    pub fn embeddings(&self) -> Option<&EmbeddingTable> {
        self.embeddings.as_ref()
    }

    /// Replaces the parameters; names and shapes must match this model.
    pub fn set_params(&mut self, params: ParamSet) -> Result<()> {
        check_layout(&self.params, &params)?;
        self.params = params;
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            seed: self.config.seed,
            config: self.config.to_json(),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(
        checkpoint: &Checkpoint,
        lexicon: Option<GazeLexicon>,
        embeddings: Option<EmbeddingTable>,
    ) -> Result<Self> {
        let config: ModelConfig = serde_json::from_str(&checkpoint.config)
            .map_err(|e| Error::config(format!("checkpoint config: {e}")))?;
        let mut t = Tagger::new(config, lexicon, embeddings)?;
        t.set_params(checkpoint.params.clone())?;
        Ok(t)
    }

    fn char_vector_var(&self, tape: &mut Tape, params: &ParamSet, word: &str) -> Result<Var> {
        if word.is_empty() {
            return Err(Error::contract("character encoding of an empty word"));
        }
        let emb = tape.param(params, self.ids.char_emb);
        let seq = word
            .chars()
            .map(|c| tape.row(emb, char_index(c)))
            .collect::<Result<Vec<_>>>()?;
        let bi = bilstm_encode(tape, params, &self.ids.char_fwd, &self.ids.char_bwd, &seq)?;
        let last = tape.concat(&[bi.forward_last, bi.backward_first])?;
        let w = tape.param(params, self.ids.char_proj_w);
        let b = tape.param(params, self.ids.char_proj_b);
        tape.affine(w, last, b)
    }

    fn word_vector_var(&self, tape: &mut Tape, params: &ParamSet, word: &str) -> Var {
        match self.embeddings.as_ref().and_then(|e| e.get(word)) {
            Some(v) => tape.input(Tensor::vector(v.to_vec())),
            None => tape.param(params, self.ids.word_unk),
        }
    }

    /// Input vectors `ṽ_w` (with the reading-time one-hot for `feat`).
    fn input_vars<S: AsRef<str>>(&self, tape: &mut Tape, params: &ParamSet, tokens: &[S]) -> Result<Vec<Var>> {
        let mut char_cache: HashMap<&str, Var> = HashMap::new();
        let mut out = Vec::with_capacity(tokens.len());
        for t in tokens {
            let t = t.as_ref();
            let cv = match char_cache.get(t) {
                Some(&v) => v,
                None => {
                    let v = self.char_vector_var(tape, params, t)?;
                    char_cache.insert(t, v);
                    v
                }
            };
            let wv = self.word_vector_var(tape, params, t);
            let mut parts = vec![wv, cv];
            if self.config.variant == Variant::Feat {
                parts.push(tape.input(Tensor::vector(self.reading_time_one_hot(t)?)));
            }
            out.push(tape.concat(&parts)?);
        }
        Ok(out)
    }

    fn reading_time_one_hot(&self, token: &str) -> Result<Vec<f64>> {
        let lex = self
            .lexicon
            .as_ref()
            .ok_or_else(|| Error::config("reading-time feature without a lexicon"))?;
        Ok(one_hot(discretize(lex.value_or_fill(token))?))
    }

    /// Records the forward pass for `tokens` on `tape` using `params`.
    pub fn forward_vars<S: AsRef<str>>(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        tokens: &[S],
    ) -> Result<ForwardVars> {
        if tokens.is_empty() {
            return Err(Error::empty("forward pass over an empty post"));
        }
        let inputs = self.input_vars(tape, params, tokens)?;
        let bi = bilstm_encode(tape, params, &self.ids.word_fwd, &self.ids.word_bwd, &inputs)?;
        let (raw_attention, attention) = match self.ids.attention {
            None => (None, None),
            Some(a) => {
                let we = tape.param(params, a.we);
                let be = tape.param(params, a.be);
                let wa = tape.param(params, a.wa);
                let ba = tape.param(params, a.ba);
                let mut scores = Vec::with_capacity(bi.states.len());
                for &h in &bi.states {
                    let pre = tape.affine(we, h, be)?;
                    let e = tape.tanh(pre);
                    scores.push(tape.affine(wa, e, ba)?);
                }
                let raw = tape.concat(&scores)?;
                let norm = match self.config.attention_norm {
                    AttentionNorm::Softmax => tape.softmax(raw),
                    AttentionNorm::Sum => tape.sum_normalize(raw),
                };
                (Some(raw), Some(norm))
            }
        };
        let ow = tape.param(params, self.ids.out_w);
        let ob = tape.param(params, self.ids.out_b);
        let mut probs = Vec::with_capacity(bi.states.len());
        for (i, &h) in bi.states.iter().enumerate() {
            let x = match attention {
                Some(att) => {
                    let a = tape.slice(att, i, 1)?;
                    tape.concat(&[h, a])?
                }
                None => h,
            };
            let logits = tape.affine(ow, x, ob)?;
            probs.push(tape.softmax(logits));
        }
        Ok(ForwardVars {
            inputs,
            probs,
            raw_attention,
            attention,
        })
    }

    /// Loss nodes for `post`. Non-`ha` variants use `λ_word · L_word`.
    pub fn loss_vars(&self, tape: &mut Tape, params: &ParamSet, post: &Post) -> Result<(ForwardVars, LossVars)> {
        let fw = self.forward_vars(tape, params, post.tokens())?;
        let mut terms = Vec::with_capacity(fw.probs.len());
        for (&p, &tag) in fw.probs.iter().zip(post.tags()) {
            let mut target = vec![0.0; Tag::COUNT];
            target[tag.index()] = 1.0;
            let t = tape.input(Tensor::vector(target));
            terms.push(tape.squared_distance(p, t)?);
        }
        let word = tape.add_all(&terms)?;
        let mut total = tape.scale(word, self.config.lambda_word);
        let mut attention = None;
        if self.config.variant == Variant::Ha {
            let att = fw.attention.expect("ha has attention");
            let lex = self.lexicon.as_ref().expect("ha has a lexicon");
            let target = tape.input(Tensor::vector(attention_target(lex, post.tokens())));
            let la = tape.squared_distance(att, target)?;
            let scaled = tape.scale(la, self.config.lambda_att);
            total = tape.add(total, scaled)?;
            attention = Some(la);
        }
        Ok((fw, LossVars { total, word, attention }))
    }

    pub fn loss_with(&self, params: &ParamSet, post: &Post) -> Result<LossValues> {
        let mut tape = Tape::new();
        let (_, l) = self.loss_vars(&mut tape, params, post)?;
        Ok(LossValues {
            total: tape.value(l.total).item(),
            word: tape.value(l.word).item(),
            attention: l.attention.map(|a| tape.value(a).item()),
        })
    }

    pub fn loss(&self, post: &Post) -> Result<LossValues> {
        self.loss_with(&self.params, post)
    }

    /// Total loss and its gradient at `params`.
    pub fn loss_and_gradients(&self, params: &ParamSet, post: &Post) -> Result<(f64, Gradients)> {
        let mut tape = Tape::new();
        let (_, l) = self.loss_vars(&mut tape, params, post)?;
        let grads = tape.backward(l.total, params)?;
        Ok((tape.value(l.total).item(), grads))
    }

    pub fn forward<S: AsRef<str>>(&self, tokens: &[S]) -> Result<ForwardOutput> {
        let mut tape = Tape::new();
        let fw = self.forward_vars(&mut tape, &self.params, tokens)?;
        Ok(ForwardOutput {
            probs: fw.probs.iter().map(|&p| tape.value(p).data().to_vec()).collect(),
            raw_attention: fw.raw_attention.map(|a| tape.value(a).data().to_vec()),
            attention: fw.attention.map(|a| tape.value(a).data().to_vec()),
        })
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Prediction> {
        let out = self.forward(tokens)?;
        let (tags, spans) = decode_rows(&out.probs);
        Ok(Prediction {
            tags,
            spans,
            attention: out.attention,
        })
    }

    /// Input vectors `ṽ_w` of a post as plain values.
    pub fn embed_post<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let vars = self.input_vars(&mut tape, &self.params, tokens)?;
        Ok(vars.iter().map(|&v| tape.value(v).data().to_vec()).collect())
    }

    pub fn char_word_embed(&self, word: &str) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let v = self.char_vector_var(&mut tape, &self.params, word)?;
        Ok(tape.value(v).data().to_vec())
    }
}

impl CharEncoder for Tagger {
    fn encode(&self, word: &str) -> Option<Vec<f64>> {
        self.char_word_embed(word).ok()
    }
}

fn uniform<R: Rng>(params: &mut ParamSet, name: &str, shape: &[usize], scale: f64, rng: &mut R) -> ParamId {
    params.insert(name, Tensor::uniform(shape, -scale, scale, rng))
}

fn init_params<R: Rng>(c: &ModelConfig, rng: &mut R) -> (ParamSet, Ids) {
    let s = c.init_scale;
    let mut p = ParamSet::new();
    let char_emb = uniform(&mut p, "char.embedding", &[CHAR_VOCAB, c.char_emb_dim], s, rng);
    let char_fwd = LstmParams::init_scaled(&mut p, "char.fwd", c.char_emb_dim, c.char_hidden, s, rng);
    let char_bwd = LstmParams::init_scaled(&mut p, "char.bwd", c.char_emb_dim, c.char_hidden, s, rng);
    let char_proj_w = uniform(&mut p, "char.proj.weight", &[c.char_word_dim, 2 * c.char_hidden], s, rng);
    let char_proj_b = p.insert("char.proj.bias", Tensor::zeros(&[c.char_word_dim]));
    let word_unk = uniform(&mut p, "word.unk", &[c.word_emb_dim], s, rng);
    let word_fwd = LstmParams::init_scaled(&mut p, "word.fwd", c.input_dim(), c.word_hidden, s, rng);
    let word_bwd = LstmParams::init_scaled(&mut p, "word.bwd", c.input_dim(), c.word_hidden, s, rng);
    let attention = c.variant.has_attention().then(|| AttentionIds {
        we: uniform(&mut p, "attention.we", &[c.attention_dim, 2 * c.word_hidden], s, rng),
        be: p.insert("attention.be", Tensor::zeros(&[c.attention_dim])),
        wa: uniform(&mut p, "attention.wa", &[1, c.attention_dim], s, rng),
        ba: p.insert("attention.ba", Tensor::zeros(&[1])),
    });
    let out_w = uniform(&mut p, "classifier.weight", &[Tag::COUNT, c.classifier_input_dim()], s, rng);
    let out_b = p.insert("classifier.bias", Tensor::zeros(&[Tag::COUNT]));
    let ids = Ids {
        char_emb,
        char_fwd,
        char_bwd,
        char_proj_w,
        char_proj_b,
        word_unk,
        word_fwd,
        word_bwd,
        attention,
        out_w,
        out_b,
    };
    (p, ids)
}

fn check_layout(expected: &ParamSet, got: &ParamSet) -> Result<()> {
    if expected.len() != got.len() {
        return Err(Error::shape(format!(
            "model has {} parameter tensors, checkpoint has {}",
            expected.len(),
            got.len()
        )));
    }
    for ((_, en, et), (_, gn, gt)) in expected.iter().zip(got.iter()) {
        if en != gn || et.shape() != gt.shape() {
            return Err(Error::shape(format!(
                "parameter {gn} {:?} does not match model parameter {en} {:?}",
                gt.shape(),
                et.shape()
            )));
        }
    }
    Ok(())
}
