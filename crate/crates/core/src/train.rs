//! Training loop: batched gradients, Adam with stepwise learning-rate decay,
//! validation-driven early stopping.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::Tape;
use crate::checkpoint::Checkpoint;
use crate::data::{make_batches, Batch, TrainExample};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metrics};
use crate::graph::PaddedGraph;
use crate::model::{forward, loss, LossMode, ModelParams, ParamVars, Variant, VariantConfig};
use crate::optim::{adam_step, AdamState};
use crate::tensor::{Scalar, Tensor};

/// Metric used to pick the best epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Selection {
    #[default]
    Mrr,
    Precision,
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mrr" => Ok(Selection::Mrr),
            "precision" => Ok(Selection::Precision),
            _ => Err(Error::Config(format!("unknown selection metric `{s}`"))),
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Mrr => "mrr",
            Selection::Precision => "precision",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub variant: Variant,
    pub ggnn_steps: usize,
    pub loss: LossMode,
    pub selection: Selection,
    /// Cutoff for validation metrics.
    pub k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            batch_size: 100,
            lr: 0.001,
            decay_factor: 0.1,
            decay_every: 3,
            l2: 1e-5,
            max_epochs: 30,
            patience: 10,
            seed: 0,
            variant: Variant::Full,
            ggnn_steps: 1,
            loss: LossMode::Categorical,
            selection: Selection::Mrr,
            k: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("batch", self.batch_size),
            ("decay_every", self.decay_every),
            ("epochs", self.max_epochs),
            ("patience", self.patience),
            ("k", self.k),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "decay factor must be in (0, 1], got {}",
                self.decay_factor
            )));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!(
                "l2 must be non-negative, got {}",
                self.l2
            )));
        }
        Ok(())
    }

    pub fn variant_config(&self) -> VariantConfig {
        VariantConfig {
            variant: self.variant,
            ggnn_steps: self.ggnn_steps,
        }
    }

    /// `key=value` lines, stable order.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("d", self.dim.to_string()),
            ("batch", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            ("decay_factor", self.decay_factor.to_string()),
            ("decay_every", self.decay_every.to_string()),
            ("l2", self.l2.to_string()),
            ("epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("variant", self.variant.to_string()),
            ("steps", self.ggnn_steps.to_string()),
            ("loss", self.loss.to_string()),
            ("selection", self.selection.to_string()),
            ("k", self.k.to_string()),
        ]
    }

    /// Applies one `key=value` setting. Returns `false` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<V: FromStr>(key: &str, value: &str) -> Result<V> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "d" => self.dim = num(key, value)?,
            "batch" => self.batch_size = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "decay_factor" => self.decay_factor = num(key, value)?,
            "decay_every" => self.decay_every = num(key, value)?,
            "l2" => self.l2 = num(key, value)?,
            "epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "variant" => self.variant = value.trim().parse()?,
            "steps" => self.ggnn_steps = num(key, value)?,
            "loss" => self.loss = value.trim().parse()?,
            "selection" => self.selection = value.trim().parse()?,
            "k" => self.k = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// `lr0 · decay_factor^⌊epoch / decay_every⌋` (epochs count from 0).
pub fn lr_at(epoch: usize, config: &TrainConfig) -> f64 {
    let stage = (epoch / config.decay_every.max(1)) as i32;
    config.lr * config.decay_factor.powi(stage)
}

/// Summary of one pass over the training batches.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub mean_grad_norm: f64,
    pub max_grad_norm: f64,
    pub batches: usize,
    pub examples: usize,
}

/// Loss and gradients (in [`ModelParams::tensors`] order) for one example.
pub fn example_gradients<T: Scalar>(
    params: &ModelParams<T>,
    graph: &PaddedGraph<T>,
    label: usize,
    variant: VariantConfig,
    mode: LossMode,
) -> Result<(f64, Vec<Tensor<T>>)> {
    let mut tape = Tape::new();
    let p = ParamVars::trainable(&mut tape, params);
    let out = forward(&mut tape, &p, graph, variant)?;
    let l = loss(&mut tape, out.probs, label, mode)?;
    let value = tape.value(l).item().to_f64_lossy();
    let mut grads = tape.backward(l)?;
    let grads = p
        .all()
        .into_iter()
        .map(|v| grads.take(v).expect("trainable leaf"))
        .collect();
    Ok((value, grads))
}

/// Sum of per-example losses and mean gradient over a batch.
///
/// Examples fan out across the rayon pool; partial results are summed in
/// batch order so the outcome does not depend on the thread count. The
/// padding row of the embedding gradient is zeroed.
pub fn batch_gradients<T: Scalar>(
    params: &ModelParams<T>,
    batch: &Batch<'_, T>,
    variant: VariantConfig,
    mode: LossMode,
) -> Result<(f64, Vec<Tensor<T>>)> {
    let mut loss_sum = 0.0;
    let mut total: Option<Vec<Tensor<T>>> = None;
    let chunk = (rayon::current_num_threads() * 4).max(1);
    let pairs: Vec<_> = batch.examples.iter().zip(&batch.graphs).collect();
    for group in pairs.chunks(chunk) {
        let results: Vec<(f64, Vec<Tensor<T>>)> = group
            .par_iter()
            .map(|(e, g)| example_gradients(params, g, e.label, variant, mode))
            .collect::<Result<_>>()?;
        for (l, grads) in results {
            loss_sum += l;
            match &mut total {
                None => total = Some(grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        a.add_assign(g);
                    }
                }
            }
        }
    }
    let mut grads = total.ok_or_else(|| Error::Contract("empty batch".into()))?;
    let scale = T::one() / T::from_f64_lossy(batch.len() as f64);
    for g in &mut grads {
        for v in g.data_mut() {
            *v = *v * scale;
        }
    }
    let pad = params.pad_index() * params.dim();
    for v in &mut grads[0].data_mut()[pad..] {
        *v = T::zero();
    }
    Ok((loss_sum, grads))
}

/// One Adam step per batch at learning rate `lr`.
pub fn train_epoch<'a, T: Scalar>(
    params: &mut ModelParams<T>,
    state: &mut AdamState<T>,
    batches: impl IntoIterator<Item = Batch<'a, T>>,
    lr: f64,
    config: &TrainConfig,
) -> Result<EpochStats> {
    let variant = config.variant_config();
    let mut loss_sum = 0.0;
    let mut examples = 0;
    let mut norms = Vec::new();
    for (i, batch) in batches.into_iter().enumerate() {
        let (l, grads) =
            batch_gradients(params, &batch, variant, config.loss).map_err(|e| batch_error(i, e))?;
        if !l.is_finite() {
            return Err(Error::NonFinite {
                op: format!("loss of batch {i}"),
            });
        }
        let norm = grads
            .iter()
            .map(|g| g.sum_squares().to_f64_lossy())
            .sum::<f64>()
            .sqrt();
        adam_step(&mut params.tensors_mut(), &grads, state, lr, config.l2)
            .map_err(|e| batch_error(i, e))?;
        loss_sum += l;
        examples += batch.len();
        norms.push(norm);
    }
    if examples == 0 {
        return Err(Error::Contract(
            "train_epoch needs at least one batch".into(),
        ));
    }
    Ok(EpochStats {
        mean_loss: loss_sum / examples as f64,
        mean_grad_norm: norms.iter().sum::<f64>() / norms.len() as f64,
        max_grad_norm: norms.iter().copied().fold(0.0, f64::max),
        batches: norms.len(),
        examples,
    })
}

fn batch_error(i: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { op } => Error::NonFinite {
            op: format!("batch {i}: {op}"),
        },
        other => other,
    }
}

/// Batch-order seed for `epoch`.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Seeded 90/10 partition into `(train, validation)`.
pub fn validation_split(
    examples: &[TrainExample],
    seed: u64,
) -> Result<(Vec<TrainExample>, Vec<TrainExample>)> {
    if examples.len() < 2 {
        return Err(Error::EmptyDataset(
            "need at least two examples to hold out a validation set".into(),
        ));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = examples.len().div_ceil(10);
    let val = order[..n_val]
        .iter()
        .map(|&i| examples[i].clone())
        .collect();
    let train = order[n_val..]
        .iter()
        .map(|&i| examples[i].clone())
        .collect();
    Ok((train, val))
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub validation: Metrics,
}

impl EpochLog {
    pub const HEADER: &'static str = "epoch, lr, train_loss, val_p20, val_mrr20";

    pub fn line(&self) -> String {
        format!(
            "{}, {:e}, {:.6}, {:.2}, {:.2}",
            self.epoch,
            self.lr,
            self.train_loss,
            self.validation.precision_at_k,
            self.validation.mrr_at_k
        )
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

/// Early-stopping bookkeeping.
#[derive(Clone, Debug, Default)]
pub struct EarlyStopping {
    best: Option<f64>,
    since_best: usize,
}

impl EarlyStopping {
    /// Records a validation score; returns `true` if it is a new best.
    pub fn observe(&mut self, score: f64) -> bool {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self, patience: usize) -> bool {
        self.since_best >= patience
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

/// Trains on 90% of `examples`, validates on the rest after every epoch,
/// and keeps the best parameters.
pub fn fit(
    examples: &[TrainExample],
    num_items: usize,
    vocab_hash: u64,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<FitOutcome> {
    config.validate()?;
    crate::data::check_indices(examples, num_items)?;
    let (train, val) = validation_split(examples, config.seed)?;
    let mut params = ModelParams::<f32>::init(num_items, config.dim, config.variant, config.seed)?;
    let mut state = AdamState::new(params.tensors());
    let k = config.k.min(num_items);
    let variant = config.variant_config();

    let mut stopper = EarlyStopping::default();
    let mut best: Option<(ModelParams<f32>, usize, f64)> = None;
    let mut log = Vec::new();
    for epoch in 0..config.max_epochs {
        let lr = lr_at(epoch, config);
        let batches = make_batches(
            &train,
            config.batch_size,
            epoch_seed(config.seed, epoch),
            params.pad_index(),
        )?;
        let stats = train_epoch(&mut params, &mut state, batches, lr, config)?;
        let metrics = evaluate(&params, variant, &val, k)?;
        let entry = EpochLog {
            epoch: epoch + 1,
            lr,
            train_loss: stats.mean_loss,
            validation: metrics,
        };
        on_epoch(&entry);
        log.push(entry);
        let score = match config.selection {
            Selection::Mrr => metrics.mrr_at_k,
            Selection::Precision => metrics.precision_at_k,
        };
        if stopper.observe(score) {
            best = Some((params.clone(), epoch + 1, score));
        }
        if stopper.should_stop(config.patience) {
            break;
        }
    }
    let (params, epoch, metric) = best.expect("at least one epoch ran");
    Ok(FitOutcome {
        checkpoint: Checkpoint {
            params,
            vocab_hash,
            config: config.clone(),
            epoch,
            best_metric: metric,
        },
        log,
    })
}
