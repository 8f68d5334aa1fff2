use std::fmt::Write as _;
use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Post;
use crate::error::{Error, Result};
use crate::numeric::{RmsProp, RmsPropConfig};

use super::Tagger;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean total loss over the epoch's posts, each taken before its update.
    pub mean_loss: f64,
    pub dev_f1: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    /// `epoch<TAB>mean_loss<TAB>dev_f1` rows under a header; `-` for no dev set.
    pub fn to_text(&self) -> String {
        let mut out = String::from("epoch\tmean_loss\tdev_f1\n");
        for e in &self.epochs {
            let f1 = e.dev_f1.map_or("-".to_string(), |f| format!("{f:.6}"));
            writeln!(out, "{}\t{:.8}\t{f1}", e.epoch, e.mean_loss).unwrap();
        }
        out
    }
}

/// Trains for `config.epochs` passes of per-post RMSprop updates.
pub fn train(tagger: &mut Tagger, train: &[Post], dev: &[Post]) -> Result<TrainingLog> {
    train_with(tagger, train, dev, |_, _| ControlFlow::Continue(()))
}

/// As [`train`], calling `on_epoch` after every epoch; `Break` stops early.
pub fn train_with<F>(tagger: &mut Tagger, train: &[Post], dev: &[Post], mut on_epoch: F) -> Result<TrainingLog>
where
    F: FnMut(&EpochLog, &Tagger) -> ControlFlow<()>,
{
    if train.is_empty() {
        return Err(Error::empty("training set is empty"));
    }
    let cfg = tagger.config().clone();
    let mut opt = RmsProp::new(
        RmsPropConfig {
            learning_rate: cfg.learning_rate,
            decay: cfg.rms_decay,
            epsilon: cfg.rms_epsilon,
        },
        tagger.params(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for &i in &order {
            let post = &train[i];
            let (loss, mut grads) = tagger.loss_and_gradients(tagger.params(), post)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Evaluation(format!(
                    "non-finite loss {loss} in epoch {epoch} on post {:?} ({} variant, attention_norm {:?})",
                    post.id(),
                    cfg.variant,
                    cfg.attention_norm
                )));
            }
            if let Some(c) = cfg.clip_norm {
                grads.clip_global_norm(c);
            }
            opt.step(tagger.params_mut(), &grads)?;
            sum += loss;
        }
        let dev_f1 = if dev.is_empty() {
            None
        } else {
            Some(crate::eval::evaluate(tagger, dev)?.f1)
        };
        let entry = EpochLog {
            epoch,
            mean_loss: sum / train.len() as f64,
            dev_f1,
        };
        log::info!(
            "{} epoch {epoch}: mean loss {:.6}{}",
            cfg.variant,
            entry.mean_loss,
            dev_f1.map_or(String::new(), |f| format!(", dev F1 {f:.4}"))
        );
        log.epochs.push(entry);
        if on_epoch(&entry, tagger).is_break() {
            break;
        }
    }
    Ok(log)
}
