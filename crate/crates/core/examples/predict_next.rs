//! End to end through the command-line layer: write a prepared dataset,
//! train, save a checkpoint, and ask for next-item recommendations.

use std::io;

use tagnn::data::{save_examples, ItemVocabulary, TrainExample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("tagnn-predict-{}", std::process::id()));
    let data = dir.join("data");
    std::fs::create_dir_all(&data)?;

    let names = ["shoes", "socks", "laces", "polish", "brush", "insoles"];
    let mut vocab = ItemVocabulary::new();
    for n in names {
        vocab.intern(n);
    }
    vocab.save(&data.join("vocab.txt"))?;

    // shoes → socks → laces → polish → brush → insoles → shoes ...
    let mut examples = Vec::new();
    for start in 0..names.len() {
        for len in 2..=4 {
            let s: Vec<usize> = (0..len).map(|i| (start + i) % names.len()).collect();
            for cut in 1..len {
                examples.push(TrainExample {
                    prefix: s[..cut].to_vec(),
                    label: s[cut],
                });
            }
        }
    }
    save_examples(&data.join("train.txt"), &examples)?;

    let out = dir.join("run");
    let (d, o) = (data.to_string_lossy(), out.to_string_lossy());
    let train = [
        "tagnn", "train", "--data", &d, "--out", &o, "--d", "8", "--batch", "8", "--lr", "0.02",
        "--epochs", "15", "--k", "3",
    ];
    let mut sink = Vec::new();
    let code = tagnn::cli::run(train, &mut sink, &mut io::stderr());
    if code != 0 {
        return Err(format!("train exited with {code}").into());
    }

    let ckpt = out.join("model.ckpt");
    let c = ckpt.to_string_lossy();
    for session in ["shoes", "shoes,socks", "polish,brush"] {
        println!("session: {session}");
        let args = [
            "tagnn",
            "predict",
            "--checkpoint",
            &c,
            "--data",
            &d,
            "--session",
            session,
            "--k",
            "3",
        ];
        tagnn::cli::run(args, &mut io::stdout(), &mut io::stderr());
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
