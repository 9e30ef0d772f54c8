//! Turn a click sequence into its session graph and pad it for batching.

use tagnn::graph::{build_graph, pad_graph};

fn main() -> tagnn::Result<()> {
    let prefix = [1, 2, 3, 2, 4];
    let g = build_graph(&prefix)?;
    println!("prefix      {prefix:?}");
    println!("nodes       {:?}", g.nodes);
    println!("alias       {:?}", g.alias);
    println!("last slot   {}", g.last_slot);
    print!("edges\n{}", g.dump());

    let n = g.len();
    println!("outgoing adjacency:");
    for u in 0..n {
        let row: Vec<String> = (0..n)
            .map(|v| format!("{:.2}", g.out_weight(u, v)))
            .collect();
        println!("  {}", row.join(" "));
    }
    println!("incoming adjacency:");
    for v in 0..n {
        let row: Vec<String> = (0..n)
            .map(|u| format!("{:.2}", g.in_weight(v, u)))
            .collect();
        println!("  {}", row.join(" "));
    }

    let padded = pad_graph::<f32>(&g, 6, 99)?;
    println!("padded nodes {:?}", padded.nodes);
    println!("mask         {:?}", padded.mask);
    Ok(())
}
