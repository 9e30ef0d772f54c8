//! Train the full model on a toy dataset with a hidden rule (each item is
//! always followed by the same successor) and watch validation metrics.

use tagnn::data::TrainExample;
use tagnn::model::Variant;
use tagnn::train::{fit, EpochLog, TrainConfig};

fn toy_examples(items: usize) -> Vec<TrainExample> {
    let succ = |x: usize| (x * 3 + 1) % items;
    let mut out = Vec::new();
    for start in 0..items {
        for len in 2..=4 {
            let mut s = vec![(start + len) % items];
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
    }
    out
}

fn main() -> tagnn::Result<()> {
    let items = 25;
    let examples = toy_examples(items);
    let config = TrainConfig {
        dim: 16,
        batch_size: 16,
        lr: 0.01,
        decay_every: 5,
        max_epochs: 12,
        patience: 4,
        k: 5,
        variant: Variant::Full,
        ..TrainConfig::default()
    };
    println!("{} examples over {items} items", examples.len());
    println!("{}", EpochLog::HEADER);
    let outcome = fit(&examples, items, 0, &config, |e| println!("{}", e.line()))?;
    println!(
        "best epoch {} with validation MRR@{} = {:.2}",
        outcome.checkpoint.epoch, config.k, outcome.checkpoint.best_metric
    );
    Ok(())
}
