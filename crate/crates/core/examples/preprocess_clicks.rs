//! Raw click log to training examples: parse, filter rare items and short
//! sessions, split by time, keep a recent fraction, expand prefixes.
//!
//! Uses a generated Yoochoose-style log so it runs without downloads. Pass a
//! real `yoochoose-clicks.dat` path as the first argument to use that
//! instead (the `tagnn preprocess` command does the same and writes files).

use std::io::{BufReader, Cursor};

use tagnn::data::{
    build_and_filter, expand_all, parse_events, select_recent, split_by_time, FilterConfig,
    Fraction, LogFormat, MS_PER_DAY,
};

fn synthetic_log() -> String {
    let mut s = String::new();
    for session in 0..200u32 {
        let day = 1 + session / 40;
        for step in 0..(2 + session % 4) {
            let item = 100 + (session * 7 + step * 3) % 15;
            s.push_str(&format!(
                "{session},2014-04-{day:02}T10:{:02}:{:02}.000Z,{item},0\n",
                session % 60,
                step
            ));
        }
    }
    s
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parsed = match std::env::args().nth(1) {
        Some(path) => parse_events(
            BufReader::new(std::fs::File::open(path)?),
            LogFormat::Yoochoose,
        )?,
        None => parse_events(Cursor::new(synthetic_log()), LogFormat::Yoochoose)?,
    };
    println!("rows {} (skipped {})", parsed.rows, parsed.skipped);
    if let Some(w) = parsed.warning() {
        println!("warning: {w}");
    }

    let (sessions, vocab) = build_and_filter(&parsed.events, FilterConfig::default())?;
    println!(
        "{} sessions over {} items after filtering",
        sessions.len(),
        vocab.len()
    );

    let (train, test) = split_by_time(sessions, MS_PER_DAY)?;
    let fraction: Fraction = "1/4".parse()?;
    let recent = select_recent(train.clone(), fraction);
    println!(
        "train {} sessions ({} kept at {fraction}), test {}",
        train.len(),
        recent.len(),
        test.len()
    );

    let examples = expand_all(&recent)?;
    println!("{} training examples; first few:", examples.len());
    for e in examples.iter().take(4) {
        let ids: Vec<&str> = e
            .prefix
            .iter()
            .map(|&i| vocab.external(i).unwrap())
            .collect();
        println!("  {:?} -> {}", ids, vocab.external(e.label).unwrap());
    }
    Ok(())
}
