//! Train each session-representation variant with the same seed and budget
//! and compare test metrics.

use tagnn::cli::ablation_table;
use tagnn::data::TrainExample;
use tagnn::eval::evaluate;
use tagnn::model::Variant;
use tagnn::train::{fit, TrainConfig};

fn sessions(items: usize, offset: usize) -> Vec<TrainExample> {
    // Next item depends on the last two clicks, so longer context helps.
    let next = |a: usize, b: usize| (a + 2 * b + 1) % items;
    let mut out = Vec::new();
    for start in 0..items {
        let mut s = vec![start, (start + offset) % items];
        while s.len() < 5 {
            let n = s.len();
            s.push(next(s[n - 2], s[n - 1]));
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

fn main() -> tagnn::Result<()> {
    let items = 20;
    let train: Vec<TrainExample> = (1..4).flat_map(|o| sessions(items, o)).collect();
    let test = sessions(items, 5);
    let k = 5;
    let mut rows = Vec::new();
    for variant in Variant::ALL {
        let config = TrainConfig {
            dim: 12,
            batch_size: 20,
            lr: 0.01,
            max_epochs: 6,
            k,
            variant,
            ..TrainConfig::default()
        };
        let outcome = fit(&train, items, 0, &config, |_| {})?;
        let m = evaluate(
            &outcome.checkpoint.params,
            config.variant_config(),
            &test,
            k,
        )?;
        rows.push((variant, m));
    }
    print!("{}", ablation_table(&rows, k));
    Ok(())
}
