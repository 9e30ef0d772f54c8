//! Session graphs: deduplicated nodes plus degree-normalized outgoing and
//! incoming adjacency built from consecutive clicks.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Directed weighted graph of one session prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionGraph {
    /// Unique item indices in first-occurrence order.
    pub nodes: Vec<usize>,
    /// Node slot of each prefix position.
    pub alias: Vec<usize>,
    /// `n × n`, row `u` holds `c(u→v) / Σ_w c(u→w)`.
    pub a_out: Vec<f64>,
    /// `n × n`, row `v` holds `c(u→v) / Σ_w c(w→v)`.
    pub a_in: Vec<f64>,
    pub last_slot: usize,
}

impl SessionGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn out_weight(&self, from: usize, to: usize) -> f64 {
        self.a_out[from * self.len() + to]
    }

    pub fn in_weight(&self, to: usize, from: usize) -> f64 {
        self.a_in[to * self.len() + from]
    }

    /// Edge list `u -> v : weight` over item indices, one line per edge.
    pub fn dump(&self) -> String {
        let n = self.len();
        let mut out = String::new();
        for u in 0..n {
            for v in 0..n {
                let w = self.out_weight(u, v);
                if w != 0.0 {
                    let _ = writeln!(out, "{} -> {} : {}", self.nodes[u], self.nodes[v], w);
                }
            }
        }
        out
    }
}

/// Strategy for turning a prefix into a [`SessionGraph`].
pub trait GraphConstruction {
    fn build(&self, prefix: &[usize]) -> Result<SessionGraph>;
}

/// Transition counts normalized by out-degree (outgoing) and in-degree
/// (incoming). Consecutive repeats produce self-loops.
#[derive(Clone, Copy, Debug, Default)]
pub struct DegreeNormalized;

impl GraphConstruction for DegreeNormalized {
    fn build(&self, prefix: &[usize]) -> Result<SessionGraph> {
        if prefix.is_empty() {
            return Err(Error::Contract(
                "cannot build a graph from an empty prefix".into(),
            ));
        }
        let mut slot_of = HashMap::new();
        let mut nodes = Vec::new();
        let alias: Vec<usize> = prefix
            .iter()
            .map(|&item| {
                *slot_of.entry(item).or_insert_with(|| {
                    nodes.push(item);
                    nodes.len() - 1
                })
            })
            .collect();

        let n = nodes.len();
        let mut counts = vec![0u32; n * n];
        for pair in alias.windows(2) {
            counts[pair[0] * n + pair[1]] += 1;
        }
        let mut out_deg = vec![0u32; n];
        let mut in_deg = vec![0u32; n];
        for u in 0..n {
            for v in 0..n {
                out_deg[u] += counts[u * n + v];
                in_deg[v] += counts[u * n + v];
            }
        }
        let mut a_out = vec![0.0; n * n];
        let mut a_in = vec![0.0; n * n];
        for u in 0..n {
            for v in 0..n {
                let c = counts[u * n + v];
                if c > 0 {
                    a_out[u * n + v] = f64::from(c) / f64::from(out_deg[u]);
                    a_in[v * n + u] = f64::from(c) / f64::from(in_deg[v]);
                }
            }
        }
        Ok(SessionGraph {
            last_slot: *alias.last().expect("non-empty"),
            nodes,
            alias,
            a_out,
            a_in,
        })
    }
}

pub fn build_graph(prefix: &[usize]) -> Result<SessionGraph> {
    DegreeNormalized.build(prefix)
}

/// One graph padded to a fixed node count.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedGraph<T: Scalar = f32> {
    /// Item index per slot; padding slots hold the reserved padding index.
    pub nodes: Vec<usize>,
    pub a_out: Tensor<T>,
    pub a_in: Tensor<T>,
    pub mask: Vec<bool>,
    pub alias: Vec<usize>,
    pub last_slot: usize,
}

impl<T: Scalar> PaddedGraph<T> {
    pub fn real_nodes(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn pad_matrix<T: Scalar>(src: &[f64], n: usize, max_n: usize) -> Tensor<T> {
    let mut t = Tensor::zeros(&[max_n, max_n]);
    for r in 0..n {
        for c in 0..n {
            t.data_mut()[r * max_n + c] = T::from_f64_lossy(src[r * n + c]);
        }
    }
    t
}

/// Pads one graph to `max_n` slots.
pub fn pad_graph<T: Scalar>(
    graph: &SessionGraph,
    max_n: usize,
    pad_index: usize,
) -> Result<PaddedGraph<T>> {
    let n = graph.len();
    if max_n < n {
        return Err(Error::Contract(format!(
            "padding size {max_n} is smaller than graph size {n}"
        )));
    }
    let mut nodes = graph.nodes.clone();
    nodes.resize(max_n, pad_index);
    let mut mask = vec![true; n];
    mask.resize(max_n, false);
    Ok(PaddedGraph {
        nodes,
        a_out: pad_matrix(&graph.a_out, n, max_n),
        a_in: pad_matrix(&graph.a_in, n, max_n),
        mask,
        alias: graph.alias.clone(),
        last_slot: graph.last_slot,
    })
}

/// Pads every graph of a batch to `max_n` slots.
pub fn pad_graphs<T: Scalar>(
    graphs: &[SessionGraph],
    max_n: usize,
    pad_index: usize,
) -> Result<Vec<PaddedGraph<T>>> {
    graphs
        .iter()
        .map(|g| pad_graph(g, max_n, pad_index))
        .collect()
}
