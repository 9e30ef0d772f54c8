//! Precision@k and MRR@k from raw score vectors, including the
//! tie-breaking rule (equal scores rank by ascending item index).

use tagnn::eval::{metrics_for, rank_topk, MetricAccumulator};

fn main() -> tagnn::Result<()> {
    let cases: [(&[f32], usize); 4] = [
        (&[0.1, 0.9, 0.5, 0.2], 1),
        (&[0.1, 0.9, 0.5, 0.2], 2),
        (&[0.3, 0.3, 0.3, 0.3], 3),
        (&[0.7, 0.1, 0.1, 0.1], 3),
    ];
    let k = 2;
    let mut acc = MetricAccumulator::default();
    for (scores, label) in cases {
        let ranked = rank_topk(scores, scores.len())?;
        let (hit, rr) = metrics_for(&ranked, label, k);
        println!("scores {scores:?} label {label}: ranking {ranked:?} hit {hit} rr {rr:.3}");
        acc.push(hit, rr);
    }
    let metrics = acc.finish(k)?;
    print!("{}", metrics.table());
    print!("{}", metrics.key_values());
    Ok(())
}
