//! Test oracles written independently of the library's tensor code: plain
//! loops over nodes and targets, no tape, no shared helpers.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagnn::data::TrainExample;
use tagnn::model::{LossMode, ModelParams, Variant};
use tagnn::Tensor;

/// Degree-normalized adjacency by direct enumeration of consecutive pairs.
pub struct HandGraph {
    pub nodes: Vec<usize>,
    pub a_out: Vec<Vec<f64>>,
    pub a_in: Vec<Vec<f64>>,
    pub last: usize,
}

pub fn hand_graph(prefix: &[usize]) -> HandGraph {
    let mut nodes: Vec<usize> = Vec::new();
    for &x in prefix {
        if !nodes.contains(&x) {
            nodes.push(x);
        }
    }
    let slot = |x: usize| nodes.iter().position(|&y| y == x).unwrap();
    let n = nodes.len();
    let pairs: Vec<(usize, usize)> = prefix
        .windows(2)
        .map(|w| (slot(w[0]), slot(w[1])))
        .collect();
    let mut a_out = vec![vec![0.0; n]; n];
    let mut a_in = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            let c = pairs.iter().filter(|&&p| p == (u, v)).count();
            if c == 0 {
                continue;
            }
            let out_deg = pairs.iter().filter(|p| p.0 == u).count();
            let in_deg = pairs.iter().filter(|p| p.1 == v).count();
            a_out[u][v] = c as f64 / out_deg as f64;
            a_in[v][u] = c as f64 / in_deg as f64;
        }
    }
    HandGraph {
        last: slot(*prefix.last().unwrap()),
        nodes,
        a_out,
        a_in,
    }
}

fn mat(t: &Tensor<f64>) -> Vec<Vec<f64>> {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r)
        .map(|i| (0..c).map(|j| t.get(i, j)).collect())
        .collect()
}

/// `W x` for a `rows × cols` matrix.
fn apply(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Reference output for one prefix: `(scores, probabilities)` over `m` items.
pub fn reference_forward(
    p: &ModelParams<f64>,
    prefix: &[usize],
    variant: Variant,
    steps: usize,
) -> (Vec<f64>, Vec<f64>) {
    let g = hand_graph(prefix);
    let n = g.nodes.len();
    let d = p.embedding.shape()[1];
    let m = p.embedding.shape()[0] - 1;
    let emb = mat(&p.embedding);
    let (h_out, h_in) = (mat(&p.h_out), mat(&p.h_in));
    let bias = p.bias.data().to_vec();
    let (w_z, u_z, w_r, u_r, w_o, u_o) = (
        mat(&p.w_z),
        mat(&p.u_z),
        mat(&p.w_r),
        mat(&p.u_r),
        mat(&p.w_o),
        mat(&p.u_o),
    );

    let mut v: Vec<Vec<f64>> = g.nodes.iter().map(|&i| emb[i].clone()).collect();
    for _ in 0..steps {
        let msg_out: Vec<Vec<f64>> = v.iter().map(|x| apply(&h_out, x)).collect();
        let msg_in: Vec<Vec<f64>> = v.iter().map(|x| apply(&h_in, x)).collect();
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut a = bias.clone();
            for j in 0..n {
                for k in 0..d {
                    a[k] += g.a_out[i][j] * msg_out[j][k] + g.a_in[i][j] * msg_in[j][k];
                }
            }
            let (wa_z, uv_z) = (apply(&w_z, &a), apply(&u_z, &v[i]));
            let (wa_r, uv_r) = (apply(&w_r, &a), apply(&u_r, &v[i]));
            let z: Vec<f64> = (0..d).map(|k| sigmoid(wa_z[k] + uv_z[k])).collect();
            let r: Vec<f64> = (0..d).map(|k| sigmoid(wa_r[k] + uv_r[k])).collect();
            let rv: Vec<f64> = (0..d).map(|k| r[k] * v[i][k]).collect();
            let (wa_o, uv_o) = (apply(&w_o, &a), apply(&u_o, &rv));
            let cand: Vec<f64> = (0..d).map(|k| (wa_o[k] + uv_o[k]).tanh()).collect();
            next.push(
                (0..d)
                    .map(|k| (1.0 - z[k]) * v[i][k] + z[k] * cand[k])
                    .collect(),
            );
        }
        v = next;
    }

    let local = v[g.last].clone();
    let global = || {
        let (w1, w2) = (mat(&p.w1), mat(&p.w2));
        let q = p.q.data();
        let c = p.c.data();
        let from_last = apply(&w1, &local);
        let mut s = vec![0.0; d];
        for vi in &v {
            let wv = apply(&w2, vi);
            let alpha: f64 = (0..d)
                .map(|k| q[k] * sigmoid(from_last[k] + wv[k] + c[k]))
                .sum();
            for k in 0..d {
                s[k] += alpha * vi[k];
            }
        }
        s
    };
    let fuse = |parts: &[&[f64]]| -> Vec<f64> {
        let x: Vec<f64> = parts.iter().flat_map(|p| p.iter().copied()).collect();
        apply(&mat(p.w3.as_ref().unwrap()), &x)
    };

    let scores: Vec<f64> = match variant {
        Variant::Full => {
            let w_att = mat(&p.w_att);
            let g_emb = global();
            (0..m)
                .map(|j| {
                    let e = &emb[j];
                    // eᵀ W_att v_i
                    let raw: Vec<f64> = v
                        .iter()
                        .map(|vi| (0..d).map(|a| e[a] * dot(&w_att[a], vi)).sum())
                        .collect();
                    let beta = softmax(&raw);
                    let mut st = vec![0.0; d];
                    for (b, vi) in beta.iter().zip(&v) {
                        for k in 0..d {
                            st[k] += b * vi[k];
                        }
                    }
                    dot(&fuse(&[&st, &local, &g_emb]), e)
                })
                .collect()
        }
        other => {
            let s = match other {
                Variant::Local => local.clone(),
                Variant::Avg => (0..d)
                    .map(|k| v.iter().map(|vi| vi[k]).sum::<f64>() / n as f64)
                    .collect(),
                Variant::Att => fuse(&[&global()]),
                Variant::LocalPlusAtt => fuse(&[&local, &global()]),
                Variant::Full => unreachable!(),
            };
            (0..m).map(|j| dot(&s, &emb[j])).collect()
        }
    };
    let probs = softmax(&scores);
    (scores, probs)
}

pub fn reference_loss(probs: &[f64], label: usize, mode: LossMode) -> f64 {
    let lg = |x: f64| x.max(1e-12).ln();
    match mode {
        LossMode::Categorical => -lg(probs[label]),
        LossMode::Eq13 => -probs
            .iter()
            .enumerate()
            .map(|(i, &p)| if i == label { lg(p) } else { lg(1.0 - p) })
            .sum::<f64>(),
    }
}

pub fn random_prefix(rng: &mut ChaCha8Rng, len: usize, m: usize) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(0..m)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sessions whose next item is always `succ(last)` under a fixed
/// permutation, so every prefix has a single consistent label.
pub fn memorization_examples(sessions: usize, items: usize, seed: u64) -> Vec<TrainExample> {
    let mut r = rng(seed);
    let mut perm: Vec<usize> = (0..items).collect();
    for i in (1..items).rev() {
        perm.swap(i, r.gen_range(0..=i));
    }
    let succ = |x: usize| perm[x];
    let mut out = Vec::new();
    for _ in 0..sessions {
        let len = r.gen_range(2..=4);
        let mut s = vec![r.gen_range(0..items)];
        while s.len() < len {
            s.push(succ(*s.last().unwrap()));
        }
        for cut in 1..s.len() {
            out.push(TrainExample {
                prefix: s[..cut].to_vec(),
                label: s[cut],
            });
        }
    }
    out
}
