//! Target-attentive gated graph network.
//!
//! Forward pass for one session graph:
//!
//! 1. look up node embeddings and run `T` gated propagation steps over the
//!    outgoing/incoming adjacency,
//! 2. attend from every candidate item over the session nodes (target
//!    embedding), and from the last node over all nodes (global embedding),
//! 3. fuse target, local (last node) and global embeddings into one session
//!    vector per candidate and score it against that candidate's embedding.
//!
//! Weight matrices are stored in `out × in` orientation and applied to row
//! vectors, i.e. `x · Wᵀ`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::PaddedGraph;
use crate::tensor::{Scalar, Tensor};

/// Which session representation feeds the scorer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// Target + local + attentive global.
    #[default]
    Full,
    /// Last node only.
    Local,
    /// Mean of node states.
    Avg,
    /// Attentive global only.
    Att,
    /// Local + attentive global.
    LocalPlusAtt,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::Local,
        Variant::Avg,
        Variant::Att,
        Variant::LocalPlusAtt,
    ];

    /// Number of `d`-sized blocks the fusion matrix consumes (0 means no fusion matrix).
    pub fn fusion_blocks(self) -> usize {
        match self {
            Variant::Full => 3,
            Variant::LocalPlusAtt => 2,
            Variant::Att => 1,
            Variant::Local | Variant::Avg => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Local => "L",
            Variant::Avg => "Avg",
            Variant::Att => "Att",
            Variant::LocalPlusAtt => "L_plus_Att",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "tagnn" => Ok(Variant::Full),
            "l" | "local" => Ok(Variant::Local),
            "avg" => Ok(Variant::Avg),
            "att" => Ok(Variant::Att),
            "l_plus_att" | "l+att" | "lplusatt" => Ok(Variant::LocalPlusAtt),
            _ => Err(Error::Config(format!(
                "unknown variant `{s}` (expected full, L, Avg, Att, L_plus_Att)"
            ))),
        }
    }
}

/// Architecture switches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariantConfig {
    pub variant: Variant,
    pub ggnn_steps: usize,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            ggnn_steps: 1,
        }
    }
}

/// Training objective on top of the softmax output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LossMode {
    /// `−log ŷ_label`.
    #[default]
    Categorical,
    /// `−Σᵢ yᵢ log ŷᵢ + (1 − yᵢ) log(1 − ŷᵢ)` with one-hot `y`.
    Eq13,
}

impl LossMode {
    pub fn name(self) -> &'static str {
        match self {
            LossMode::Categorical => "categorical",
            LossMode::Eq13 => "eq13",
        }
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "categorical" => Ok(LossMode::Categorical),
            "eq13" => Ok(LossMode::Eq13),
            _ => Err(Error::Config(format!(
                "unknown loss `{s}` (expected categorical or eq13)"
            ))),
        }
    }
}

/// Lower clamp for every log argument in the loss.
pub const LOG_FLOOR: f64 = 1e-12;

/// All trainable weights.
///
/// `embedding` has `m + 1` rows; row `m` is the padding item and stays zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T: Scalar = f32> {
    pub embedding: Tensor<T>,
    pub h_out: Tensor<T>,
    pub h_in: Tensor<T>,
    pub bias: Tensor<T>,
    pub w_z: Tensor<T>,
    pub u_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub u_r: Tensor<T>,
    pub w_o: Tensor<T>,
    pub u_o: Tensor<T>,
    pub w_att: Tensor<T>,
    pub q: Tensor<T>,
    pub c: Tensor<T>,
    pub w1: Tensor<T>,
    pub w2: Tensor<T>,
    /// `d × (k·d)`; absent for variants that use no fusion.
    pub w3: Option<Tensor<T>>,
}

/// Parameter names, in the order of [`ModelParams::tensors`].
pub const PARAM_NAMES: [&str; 16] = [
    "embedding",
    "ggnn.h_out",
    "ggnn.h_in",
    "ggnn.bias",
    "ggnn.w_z",
    "ggnn.u_z",
    "ggnn.w_r",
    "ggnn.u_r",
    "ggnn.w_o",
    "ggnn.u_o",
    "target.w_att",
    "global.q",
    "global.c",
    "global.w1",
    "global.w2",
    "fusion.w3",
];

impl<T: Scalar> ModelParams<T> {
    /// Uniform `[−1/√d, 1/√d]` for every weight, drawn in [`PARAM_NAMES`]
    /// order from a ChaCha8 stream; the padding row is zeroed.
    pub fn init(num_items: usize, dim: usize, variant: Variant, seed: u64) -> Result<Self> {
        if num_items == 0 || dim == 0 {
            return Err(Error::Config(format!(
                "need at least one item and dimension, got m={num_items}, d={dim}"
            )));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize| {
            let data = (0..rows * cols)
                .map(|_| T::from_f64_lossy(rng.gen_range(-bound..=bound)))
                .collect();
            Tensor::new(vec![rows, cols], data).expect("consistent shape")
        };
        let mut embedding = draw(num_items + 1, dim);
        for v in &mut embedding.data_mut()[num_items * dim..] {
            *v = T::zero();
        }
        let h_out = draw(dim, dim);
        let h_in = draw(dim, dim);
        let bias = draw(1, dim);
        let w_z = draw(dim, dim);
        let u_z = draw(dim, dim);
        let w_r = draw(dim, dim);
        let u_r = draw(dim, dim);
        let w_o = draw(dim, dim);
        let u_o = draw(dim, dim);
        let w_att = draw(dim, dim);
        let q = draw(dim, 1);
        let c = draw(1, dim);
        let w1 = draw(dim, dim);
        let w2 = draw(dim, dim);
        let blocks = variant.fusion_blocks();
        let w3 = (blocks > 0).then(|| draw(dim, blocks * dim));
        Ok(Self {
            embedding,
            h_out,
            h_in,
            bias,
            w_z,
            u_z,
            w_r,
            u_r,
            w_o,
            u_o,
            w_att,
            q,
            c,
            w1,
            w2,
            w3,
        })
    }

    pub fn num_items(&self) -> usize {
        self.embedding.rows() - 1
    }

    pub fn dim(&self) -> usize {
        self.embedding.cols()
    }

    /// Index of the reserved padding item.
    pub fn pad_index(&self) -> usize {
        self.num_items()
    }

    /// Trainable tensors in [`PARAM_NAMES`] order (`fusion.w3` only if present).
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut v = vec![
            &self.embedding,
            &self.h_out,
            &self.h_in,
            &self.bias,
            &self.w_z,
            &self.u_z,
            &self.w_r,
            &self.u_r,
            &self.w_o,
            &self.u_o,
            &self.w_att,
            &self.q,
            &self.c,
            &self.w1,
            &self.w2,
        ];
        if let Some(w3) = &self.w3 {
            v.push(w3);
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = vec![
            &mut self.embedding,
            &mut self.h_out,
            &mut self.h_in,
            &mut self.bias,
            &mut self.w_z,
            &mut self.u_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.w_o,
            &mut self.u_o,
            &mut self.w_att,
            &mut self.q,
            &mut self.c,
            &mut self.w1,
            &mut self.w2,
        ];
        if let Some(w3) = &mut self.w3 {
            v.push(w3);
        }
        v
    }

    pub fn named(&self) -> Vec<(&'static str, &Tensor<T>)> {
        PARAM_NAMES.iter().copied().zip(self.tensors()).collect()
    }

    /// Rebuilds parameters from tensors in [`PARAM_NAMES`] order.
    pub fn from_tensors(tensors: Vec<Tensor<T>>) -> Result<Self> {
        let n = tensors.len();
        if n != 15 && n != 16 {
            return Err(Error::Contract(format!(
                "expected 15 or 16 parameter tensors, got {n}"
            )));
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked");
        let params = Self {
            embedding: next(),
            h_out: next(),
            h_in: next(),
            bias: next(),
            w_z: next(),
            u_z: next(),
            w_r: next(),
            u_r: next(),
            w_o: next(),
            u_o: next(),
            w_att: next(),
            q: next(),
            c: next(),
            w1: next(),
            w2: next(),
            w3: (n == 16).then(&mut next),
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks every shape against `m` and `d`.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let check = |name: &'static str, t: &Tensor<T>, shape: [usize; 2]| {
            if t.shape() == shape {
                Ok(())
            } else {
                Err(Error::Dimension {
                    op: name,
                    left: t.shape().to_vec(),
                    right: shape.to_vec(),
                })
            }
        };
        if self.embedding.rank() != 2 || self.embedding.rows() < 2 {
            return Err(Error::Contract(
                "embedding must have at least one item row plus padding".into(),
            ));
        }
        for (name, t) in self.named().into_iter().skip(1) {
            let shape = match name {
                "ggnn.bias" | "global.c" => [1, d],
                "global.q" => [d, 1],
                "fusion.w3" => [d, t.cols()],
                _ => [d, d],
            };
            check(name, t, shape)?;
        }
        if let Some(w3) = &self.w3 {
            if w3.cols() % d != 0 || !(1..=3).contains(&(w3.cols() / d)) {
                return Err(Error::Dimension {
                    op: "fusion.w3",
                    left: w3.shape().to_vec(),
                    right: vec![d, 3 * d],
                });
            }
        }
        Ok(())
    }

    /// Whether the fusion matrix fits `variant`.
    pub fn check_variant(&self, variant: Variant) -> Result<()> {
        let have = self.w3.as_ref().map_or(0, |w| w.cols() / self.dim());
        if have == variant.fusion_blocks() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "variant {variant} needs a fusion matrix with {} blocks, parameters have {have}",
                variant.fusion_blocks()
            )))
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams::from_tensors(self.tensors().into_iter().map(Tensor::cast).collect())
            .expect("same shapes")
    }
}

/// Tape handles for every parameter.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub embedding: Var,
    pub h_out: Var,
    pub h_in: Var,
    pub bias: Var,
    pub w_z: Var,
    pub u_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub w_o: Var,
    pub u_o: Var,
    pub w_att: Var,
    pub q: Var,
    pub c: Var,
    pub w1: Var,
    pub w2: Var,
    pub w3: Option<Var>,
}

impl ParamVars {
    /// Registers parameters as trainable leaves.
    pub fn trainable<'a, T: Scalar>(tape: &mut Tape<'a, T>, params: &'a ModelParams<T>) -> Self {
        let vars: Vec<Var> = params
            .tensors()
            .into_iter()
            .map(|t| tape.param(t))
            .collect();
        Self::from_slice(&vars)
    }

    /// Registers parameters as constants (inference).
    pub fn frozen<'a, T: Scalar>(tape: &mut Tape<'a, T>, params: &'a ModelParams<T>) -> Self {
        let vars: Vec<Var> = params
            .tensors()
            .into_iter()
            .map(|t| tape.input(t))
            .collect();
        Self::from_slice(&vars)
    }

    /// From leaves in [`PARAM_NAMES`] order.
    pub fn from_slice(v: &[Var]) -> Self {
        Self {
            embedding: v[0],
            h_out: v[1],
            h_in: v[2],
            bias: v[3],
            w_z: v[4],
            u_z: v[5],
            w_r: v[6],
            u_r: v[7],
            w_o: v[8],
            u_o: v[9],
            w_att: v[10],
            q: v[11],
            c: v[12],
            w1: v[13],
            w2: v[14],
            w3: v.get(15).copied(),
        }
    }

    pub fn all(&self) -> Vec<Var> {
        let mut v = vec![
            self.embedding,
            self.h_out,
            self.h_in,
            self.bias,
            self.w_z,
            self.u_z,
            self.w_r,
            self.u_r,
            self.w_o,
            self.u_o,
            self.w_att,
            self.q,
            self.c,
            self.w1,
            self.w2,
        ];
        v.extend(self.w3);
        v
    }
}

/// `x · Wᵀ`.
fn linear<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, w: Var) -> Result<Var> {
    let wt = tape.transpose(w)?;
    tape.matmul(x, wt)
}

fn mask_column<T: Scalar>(mask: &[bool]) -> Tensor<T> {
    Tensor::column(
        mask.iter()
            .map(|&m| if m { T::one() } else { T::zero() })
            .collect(),
    )
}

/// Runs `steps` gated propagation steps from `init` (`n × d` node states).
pub fn ggnn_propagate<T: Scalar>(
    tape: &mut Tape<'_, T>,
    p: &ParamVars,
    graph: &PaddedGraph<T>,
    init: Var,
    steps: usize,
) -> Result<Var> {
    let a_out = tape.constant(graph.a_out.clone());
    let a_in = tape.constant(graph.a_in.clone());
    let mut v = init;
    for step in 1..=steps {
        let ctx = format!("ggnn step {step}");
        let inner = |tape: &mut Tape<'_, T>| -> Result<Var> {
            let out_msg = linear(tape, v, p.h_out)?;
            let out_msg = tape.matmul(a_out, out_msg)?;
            let in_msg = linear(tape, v, p.h_in)?;
            let in_msg = tape.matmul(a_in, in_msg)?;
            let a = tape.add(out_msg, in_msg)?;
            let a = tape.add_row(a, p.bias)?;

            let gate = |tape: &mut Tape<'_, T>, w: Var, u: Var, h: Var| -> Result<Var> {
                let x = linear(tape, a, w)?;
                let y = linear(tape, h, u)?;
                tape.add(x, y)
            };
            let z = gate(tape, p.w_z, p.u_z, v)?;
            let z = tape.sigmoid(z)?;
            let r = gate(tape, p.w_r, p.u_r, v)?;
            let r = tape.sigmoid(r)?;
            let rv = tape.mul(r, v)?;
            let cand = gate(tape, p.w_o, p.u_o, rv)?;
            let cand = tape.tanh(cand)?;
            let keep = tape.one_minus(z)?;
            let keep = tape.mul(keep, v)?;
            let update = tape.mul(z, cand)?;
            tape.add(keep, update)
        };
        v = inner(tape).map_err(|e| e.in_context(&ctx))?;
    }
    Ok(v)
}

/// Attention of each target over the session nodes.
///
/// Returns `(β, s_target)`: `β` is `m × n` (masked columns exactly zero) and
/// `s_target` is `m × d`, one row per target.
pub fn target_attention<T: Scalar>(
    tape: &mut Tape<'_, T>,
    states: Var,
    mask: &[bool],
    targets: Var,
    w_att: Var,
) -> Result<(Var, Var)> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::Degenerate(
            "target attention needs at least one real node".into(),
        ));
    }
    let tw = tape.matmul(targets, w_att)?;
    let st = tape.transpose(states)?;
    let scores = tape.matmul(tw, st)?;
    let beta = tape.softmax(scores, Some(mask))?;
    let s_target = tape.matmul(beta, states)?;
    Ok((beta, s_target))
}

/// `Σᵢ αᵢ vᵢ` with `αᵢ = qᵀ σ(W1 v_last + W2 vᵢ + c)`, unnormalized; returns `1 × d`.
pub fn global_attention<T: Scalar>(
    tape: &mut Tape<'_, T>,
    states: Var,
    mask: &[bool],
    last: Var,
    p: &ParamVars,
) -> Result<Var> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::Degenerate(
            "global attention needs at least one real node".into(),
        ));
    }
    let from_last = linear(tape, last, p.w1)?;
    let from_last = tape.add(from_last, p.c)?;
    let per_node = linear(tape, states, p.w2)?;
    let pre = tape.add_row(per_node, from_last)?;
    let act = tape.sigmoid(pre)?;
    let alpha = tape.matmul(act, p.q)?;
    let keep = tape.constant(mask_column(mask));
    let alpha = tape.mul(alpha, keep)?;
    let alpha_t = tape.transpose(alpha)?;
    tape.matmul(alpha_t, states)
}

/// Mean of the unmasked node states, `1 × d`.
pub fn average_pool<T: Scalar>(tape: &mut Tape<'_, T>, states: Var, mask: &[bool]) -> Result<Var> {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::Degenerate("average pooling over zero nodes".into()));
    }
    let w = T::one() / T::from_f64_lossy(count as f64);
    let weights = Tensor::row(
        mask.iter()
            .map(|&m| if m { w } else { T::zero() })
            .collect(),
    );
    let weights = tape.constant(weights);
    tape.matmul(weights, states)
}

/// Ingredients of the session embedding.
#[derive(Clone, Copy, Debug)]
pub struct SessionParts {
    /// `m × d`, one row per target (full variant only).
    pub target: Option<Var>,
    pub local: Var,
    pub global: Option<Var>,
    pub avg: Option<Var>,
}

/// Session embedding for the chosen variant.
///
/// The full variant yields `m × d` (one row per target); every other
/// variant yields a single shared `1 × d` row.
pub fn compose_session_embedding<T: Scalar>(
    tape: &mut Tape<'_, T>,
    parts: SessionParts,
    w3: Option<Var>,
    variant: Variant,
) -> Result<Var> {
    let blocks = variant.fusion_blocks();
    let w3_shape = w3.map(|w| tape.value(w).shape().to_vec());
    let d = tape.value(parts.local).cols();
    let expected = (blocks > 0).then(|| vec![d, blocks * d]);
    if w3_shape != expected {
        return Err(Error::Config(format!(
            "variant {variant} needs fusion matrix {expected:?}, got {w3_shape:?}"
        )));
    }
    let need = |v: Option<Var>, what: &str| {
        v.ok_or_else(|| Error::Contract(format!("variant {variant} needs the {what} embedding")))
    };
    match variant {
        Variant::Local => Ok(parts.local),
        Variant::Avg => need(parts.avg, "average"),
        Variant::Att => {
            let g = need(parts.global, "global")?;
            linear(tape, g, w3.expect("checked"))
        }
        Variant::LocalPlusAtt => {
            let g = need(parts.global, "global")?;
            let x = tape.concat_cols(&[parts.local, g])?;
            linear(tape, x, w3.expect("checked"))
        }
        Variant::Full => {
            // W3·[s_target; s_local; s_global] split by column blocks so the
            // shared half is computed once instead of per target.
            let target = need(parts.target, "target")?;
            let g = need(parts.global, "global")?;
            let w3 = w3.expect("checked");
            let w_target = tape.slice_cols(w3, 0, d)?;
            let w_rest = tape.slice_cols(w3, d, 3 * d)?;
            let per_target = linear(tape, target, w_target)?;
            let rest = tape.concat_cols(&[parts.local, g])?;
            let shared = linear(tape, rest, w_rest)?;
            tape.add_row(per_target, shared)
        }
    }
}

/// Scores `ẑ` (`1 × m`) and probabilities `ŷ = softmax(ẑ)` over real items.
///
/// `session` is either `m × d` (a row per target) or a shared `1 × d` row.
pub fn score_and_normalize<T: Scalar>(
    tape: &mut Tape<'_, T>,
    session: Var,
    candidates: Var,
) -> Result<(Var, Var)> {
    let m = tape.value(candidates).rows();
    let rows = tape.value(session).rows();
    let scores = if rows > 1 {
        if rows != m {
            return Err(Error::Dimension {
                op: "score_and_normalize",
                left: tape.value(session).shape().to_vec(),
                right: tape.value(candidates).shape().to_vec(),
            });
        }
        let prod = tape.mul(session, candidates)?;
        let col = tape.sum_cols(prod)?;
        tape.transpose(col)?
    } else {
        let st = tape.transpose(session)?;
        let col = tape.matmul(candidates, st)?;
        tape.transpose(col)?
    };
    let probs = tape.softmax(scores, None)?;
    Ok((scores, probs))
}

/// Loss of a `1 × m` probability row against `label`.
pub fn loss<T: Scalar>(
    tape: &mut Tape<'_, T>,
    probs: Var,
    label: usize,
    mode: LossMode,
) -> Result<Var> {
    let m = tape.value(probs).len();
    if label >= m {
        return Err(Error::Contract(format!(
            "label {label} out of range for {m} items"
        )));
    }
    let floor = T::from_f64_lossy(LOG_FLOOR);
    match mode {
        LossMode::Categorical => {
            let lp = tape.log_clamped(probs, floor)?;
            let picked = tape.pick(lp, label)?;
            tape.scale(picked, -T::one())
        }
        LossMode::Eq13 => {
            let mut onehot = Tensor::zeros(tape.value(probs).shape());
            onehot.data_mut()[label] = T::one();
            let y = tape.constant(onehot);
            let not_y = tape.one_minus(y)?;
            let lp = tape.log_clamped(probs, floor)?;
            let rest = tape.one_minus(probs)?;
            let lq = tape.log_clamped(rest, floor)?;
            let pos = tape.mul(y, lp)?;
            let neg = tape.mul(not_y, lq)?;
            let total = tape.add(pos, neg)?;
            let total = tape.sum(total)?;
            tape.scale(total, -T::one())
        }
    }
}

/// Handles produced by [`forward`].
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub states: Var,
    pub scores: Var,
    pub probs: Var,
}

/// Full forward pass for one padded session graph.
pub fn forward<T: Scalar>(
    tape: &mut Tape<'_, T>,
    p: &ParamVars,
    graph: &PaddedGraph<T>,
    config: VariantConfig,
) -> Result<Forward> {
    let num_items = tape.value(p.embedding).rows() - 1;
    if graph.last_slot >= graph.nodes.len() || !graph.mask[graph.last_slot] {
        return Err(Error::Contract("last slot must be a real node".into()));
    }
    if graph.nodes.iter().any(|&i| i > num_items) {
        return Err(Error::Contract(format!(
            "node index beyond {num_items} items"
        )));
    }
    let init = tape.gather_rows(p.embedding, &graph.nodes)?;
    let states = ggnn_propagate(tape, p, graph, init, config.ggnn_steps)?;
    let candidate_ids: Vec<usize> = (0..num_items).collect();
    let candidates = tape.gather_rows(p.embedding, &candidate_ids)?;
    let local = tape.gather_rows(states, &[graph.last_slot])?;

    let variant = config.variant;
    let target = if variant == Variant::Full {
        Some(target_attention(tape, states, &graph.mask, candidates, p.w_att)?.1)
    } else {
        None
    };
    let global = if matches!(
        variant,
        Variant::Full | Variant::Att | Variant::LocalPlusAtt
    ) {
        Some(global_attention(tape, states, &graph.mask, local, p)?)
    } else {
        None
    };
    let avg = if variant == Variant::Avg {
        Some(average_pool(tape, states, &graph.mask)?)
    } else {
        None
    };
    let session = compose_session_embedding(
        tape,
        SessionParts {
            target,
            local,
            global,
            avg,
        },
        p.w3,
        variant,
    )?;
    let (scores, probs) = score_and_normalize(tape, session, candidates)?;
    Ok(Forward {
        states,
        scores,
        probs,
    })
}

/// Probabilities over all `m` items for one padded graph.
pub fn predict<T: Scalar>(
    params: &ModelParams<T>,
    graph: &PaddedGraph<T>,
    config: VariantConfig,
) -> Result<Vec<T>> {
    let mut tape = Tape::new();
    let p = ParamVars::frozen(&mut tape, params);
    let out = forward(&mut tape, &p, graph, config)?;
    Ok(tape.value(out.probs).data().to_vec())
}
