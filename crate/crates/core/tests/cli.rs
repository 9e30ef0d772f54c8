mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tagnn::checkpoint::{save_checkpoint, Checkpoint};
use tagnn::data::{make_batches, save_examples, ItemVocabulary};
use tagnn::model::{ModelParams, Variant};
use tagnn::optim::AdamState;
use tagnn::train::{fit, train_epoch, TrainConfig};

use common::memorization_examples;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["tagnn"];
    full.extend_from_slice(args);
    let code = tagnn::cli::run(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Ten sessions; `x` and `y` occur once and are filtered, which leaves
/// session 7 with one item. Sessions 9 and 10 fall in the last day. The
/// `garbage` row is unparseable.
const FIXTURE: &str = "\
1,2014-04-01T10:00:00.000Z,a,0
1,2014-04-01T10:00:01.000Z,b,0
1,2014-04-01T10:00:02.000Z,c,0
2,2014-04-01T11:00:00.000Z,b,0
2,2014-04-01T11:00:01.000Z,c,0
2,2014-04-01T11:00:02.000Z,d,0
3,2014-04-01T12:00:00.000Z,a,0
3,2014-04-01T12:00:01.000Z,c,0
3,2014-04-01T12:00:02.000Z,d,0
4,2014-04-01T13:00:00.000Z,a,0
4,2014-04-01T13:00:01.000Z,b,0
4,2014-04-01T13:00:02.000Z,d,0
5,2014-04-01T14:00:00.000Z,c,0
5,2014-04-01T14:00:01.000Z,a,0
5,2014-04-01T14:00:02.000Z,b,0
6,2014-04-01T15:00:00.000Z,d,0
6,2014-04-01T15:00:01.000Z,a,0
7,2014-04-01T16:00:00.000Z,b,0
7,2014-04-01T16:00:01.000Z,x,0
8,2014-04-01T17:00:00.000Z,c,0
8,2014-04-01T17:00:01.000Z,d,0
garbage
9,2014-04-03T10:00:00.000Z,a,0
9,2014-04-03T10:00:01.000Z,b,0
9,2014-04-03T10:00:02.000Z,c,0
10,2014-04-03T09:00:00.000Z,d,0
10,2014-04-03T09:00:01.000Z,c,0
10,2014-04-03T09:00:02.000Z,y,0
";

const FIXTURE_STATS: &str = "\
rows=28
skipped_rows=1
sessions=9
items=4
train_sessions=7
test_sessions=2
train_examples=12
test_examples=3
warning=skipped 1 of 28 rows (3.57%)
";

fn write_fixture(dir: &Path) -> PathBuf {
    let p = dir.join("clicks.dat");
    fs::write(&p, FIXTURE).unwrap();
    p
}

#[test]
fn preprocess_fixture_stats_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write_fixture(dir.path());
    let out = dir.path().join("prep");
    let (code, stdout, stderr) = run(&[
        "preprocess",
        "--data",
        s(&raw),
        "--format",
        "yoochoose",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout, FIXTURE_STATS);
    assert_eq!(
        fs::read_to_string(out.join("stats.txt")).unwrap(),
        FIXTURE_STATS
    );
    assert_eq!(
        fs::read_to_string(out.join("vocab.txt")).unwrap(),
        "0\ta\n1\tb\n2\tc\n3\td\n"
    );
    // Session 1 (a b c) expands first.
    assert!(fs::read_to_string(out.join("train.txt"))
        .unwrap()
        .starts_with("1\t0\n2\t0,1\n"));
    assert_eq!(
        fs::read_to_string(out.join("test.txt")).unwrap(),
        "1\t0\n2\t0,1\n2\t3\n"
    );
}

#[test]
fn preprocess_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write_fixture(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(
            run(&[
                "preprocess",
                "--data",
                s(&raw),
                "--format",
                "yoochoose",
                "--out",
                s(out)
            ])
            .0,
            0
        );
    }
    for f in ["train.txt", "test.txt", "vocab.txt", "stats.txt"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn preprocess_fraction_keeps_ceiling_of_recent_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::new();
    for i in 0..128 {
        let (x, y) = (i % 4, (i + 1) % 4);
        text.push_str(&format!(
            "{i},2014-04-01T00:{:02}:{:02}.000Z,item{x},0\n",
            i / 60,
            i % 60
        ));
        text.push_str(&format!(
            "{i},2014-04-01T01:{:02}:{:02}.000Z,item{y},0\n",
            i / 60,
            i % 60
        ));
    }
    for i in 0..2 {
        text.push_str(&format!("t{i},2014-04-09T00:00:00.000Z,item{i},0\n"));
        text.push_str(&format!("t{i},2014-04-09T00:00:01.000Z,item{},0\n", i + 1));
    }
    let raw = dir.path().join("clicks.dat");
    fs::write(&raw, text).unwrap();
    let out = dir.path().join("prep");
    let (code, stdout, stderr) = run(&[
        "preprocess",
        "--data",
        s(&raw),
        "--format",
        "yoochoose",
        "--out",
        s(&out),
        "--fraction",
        "1/64",
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("train_sessions=2\n"), "{stdout}");
    assert!(stdout.contains("test_sessions=2\n"), "{stdout}");
}

#[test]
fn diginetica_format_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("sessionId;userId;itemId;timeframe;eventdate\n");
    for i in 0..10 {
        let day = if i < 8 { "2016-05-01" } else { "2016-05-20" };
        text.push_str(&format!("{i};;{};100;{day}\n", i % 3));
        text.push_str(&format!("{i};;{};200;{day}\n", (i + 1) % 3));
    }
    let raw = dir.path().join("train-item-views.csv");
    fs::write(&raw, text).unwrap();
    let out = dir.path().join("prep");
    let (code, stdout, stderr) = run(&[
        "preprocess",
        "--data",
        s(&raw),
        "--format",
        "diginetica",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(
        stdout.contains("sessions=10\n") && stdout.contains("test_sessions=2\n"),
        "{stdout}"
    );
}

#[test]
fn missing_input_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&[
        "preprocess",
        "--data",
        "/nonexistent/clicks.dat",
        "--format",
        "yoochoose",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("/nonexistent/clicks.dat"), "{err}");
    assert_eq!(
        run(&["train", "--data", "/nonexistent", "--out", s(dir.path())]).0,
        2
    );
}

#[test]
fn bad_values_and_unknown_config_keys_are_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["train", "--lr", "fast"]).0, 2);
    assert_eq!(run(&["train", "--variant", "huge"]).0, 2);
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "lr=0.01\nmystery=1\n").unwrap();
    let (code, _, err) = run(&["train", "--config", s(&cfg)]);
    assert_eq!(code, 2);
    assert!(err.contains("mystery"), "{err}");
}

/// Prepared directory with 20 items and memorization examples.
fn prepared(dir: &Path, ids: &str) -> PathBuf {
    let data = dir.join(format!("data-{ids}"));
    fs::create_dir_all(&data).unwrap();
    let mut vocab = ItemVocabulary::new();
    for i in 0..20 {
        vocab.intern(&format!("{ids}{i}"));
    }
    vocab.save(&data.join("vocab.txt")).unwrap();
    save_examples(&data.join("train.txt"), &memorization_examples(40, 20, 1)).unwrap();
    save_examples(&data.join("test.txt"), &memorization_examples(10, 20, 2)).unwrap();
    data
}

fn quick_train(dir: &Path, data: &Path, extra: &[&str]) -> (PathBuf, String) {
    let out = dir.join(format!("run-{}", extra.join("_").replace(['-', '/'], "")));
    let mut args = vec![
        "train",
        "--data",
        s(data),
        "--out",
        s(&out),
        "--d",
        "8",
        "--batch",
        "16",
        "--epochs",
        "2",
    ];
    args.extend_from_slice(extra);
    let (code, stdout, stderr) = run(&args);
    assert_eq!(code, 0, "{stderr}");
    (out, stdout)
}

#[test]
fn train_writes_checkpoint_and_log_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let (out, stdout) = quick_train(dir.path(), &data, &["--seed", "0"]);
    let log = fs::read_to_string(out.join("train_log.txt")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "epoch, lr, train_loss, val_p20, val_mrr20");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1, 1e-3, "), "{}", lines[1]);
    assert!(stdout.starts_with(&log));

    let (again, _) = quick_train(dir.path(), &data, &["--seed", "0", "--threads", "2"]);
    assert_eq!(
        fs::read_to_string(again.join("train_log.txt")).unwrap(),
        log
    );
    assert_eq!(
        fs::read(again.join("model.ckpt")).unwrap(),
        fs::read(out.join("model.ckpt")).unwrap()
    );
}

#[test]
fn train_routes_variant_and_loss_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let (out, _) = quick_train(dir.path(), &data, &["--variant", "L", "--loss", "eq13"]);
    let ckpt = tagnn::checkpoint::load_checkpoint(&out.join("model.ckpt")).unwrap();
    assert_eq!(ckpt.config.variant, Variant::Local);
    assert_eq!(ckpt.config.loss, tagnn::model::LossMode::Eq13);
    assert!(ckpt.params.w3.is_none());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# small run\nd=6\nepochs=1\nvariant=Avg\n").unwrap();
    let (out, _) = quick_train(
        dir.path(),
        &data,
        &["--config", s(&cfg), "--variant", "Att"],
    );
    let ckpt = tagnn::checkpoint::load_checkpoint(&out.join("model.ckpt")).unwrap();
    // Flags win over the file (d=8 from quick_train, variant Att); the file
    // wins over defaults where no flag is given.
    assert_eq!(ckpt.config.dim, 8);
    assert_eq!(ckpt.config.variant, Variant::Att);
}

#[test]
fn evaluate_defaults_to_k20_and_rejects_foreign_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let (out, _) = quick_train(dir.path(), &data, &[]);
    let ckpt = out.join("model.ckpt");
    let (code, stdout, stderr) = run(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&data)]);
    assert_eq!(code, 0, "{stderr}");
    // With m = 20 every label is in the top 20.
    assert!(stdout.contains("precision_at_20=100.00\n"), "{stdout}");
    assert!(stdout.contains("mrr_at_20="), "{stdout}");

    let (again_code, again, _) = run(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&data)]);
    assert_eq!((again_code, again), (0, stdout));

    let other = prepared(dir.path(), "other");
    assert_eq!(
        run(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&other)]).0,
        3
    );
    assert_eq!(
        run(&[
            "predict",
            "--checkpoint",
            s(&ckpt),
            "--data",
            s(&other),
            "--session",
            "other1"
        ])
        .0,
        3
    );
}

#[test]
fn corrupt_or_missing_checkpoint_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, b"not a checkpoint at all, just text").unwrap();
    assert_eq!(
        run(&["evaluate", "--checkpoint", s(&bad), "--data", s(&data)]).0,
        3
    );
    let missing = dir.path().join("missing.ckpt");
    assert_eq!(
        run(&["evaluate", "--checkpoint", s(&missing), "--data", s(&data)]).0,
        3
    );
}

#[test]
fn memorized_checkpoint_scores_p1_above_95() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let examples = memorization_examples(50, 20, 0);
    save_examples(&data.join("test.txt"), &examples).unwrap();
    let cfg = TrainConfig {
        dim: 32,
        batch_size: 10,
        lr: 0.01,
        l2: 0.0,
        decay_every: 1000,
        ..TrainConfig::default()
    };
    let mut params = ModelParams::<f32>::init(20, cfg.dim, cfg.variant, 0).unwrap();
    let mut state = AdamState::new(params.tensors());
    for epoch in 0..60 {
        let batches = make_batches(&examples, cfg.batch_size, epoch, params.pad_index()).unwrap();
        train_epoch(&mut params, &mut state, batches, cfg.lr, &cfg).unwrap();
    }
    let vocab = ItemVocabulary::load(&data.join("vocab.txt")).unwrap();
    let ckpt_path = dir.path().join("memo.ckpt");
    save_checkpoint(
        &ckpt_path,
        &Checkpoint {
            params,
            vocab_hash: vocab.fingerprint(),
            config: cfg,
            epoch: 60,
            best_metric: 0.0,
        },
    )
    .unwrap();
    let (code, stdout, stderr) = run(&[
        "evaluate",
        "--checkpoint",
        s(&ckpt_path),
        "--data",
        s(&data),
        "--k",
        "1",
    ]);
    assert_eq!(code, 0, "{stderr}");
    let p1: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("precision_at_1="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(p1 >= 95.0, "{stdout}");
}

#[test]
fn predict_outputs_k_ranked_lines() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let (out, _) = quick_train(dir.path(), &data, &[]);
    let ckpt = out.join("model.ckpt");
    let args = [
        "predict",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&data),
        "--session",
        "item3",
        "--k",
        "5",
        "--check-normalization",
    ];
    let (code, stdout, stderr) = run(&args);
    assert_eq!(code, 0, "{stderr}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 6);
    let mut last_p = f64::INFINITY;
    for (i, line) in lines[..5].iter().enumerate() {
        let f: Vec<&str> = line.split(' ').collect();
        assert_eq!(f[0], (i + 1).to_string());
        assert!(f[1].starts_with("item"));
        let p: f64 = f[2].parse().unwrap();
        assert!(p <= last_p);
        last_p = p;
    }
    let sum: f64 = lines[5]
        .strip_prefix("# probability_sum=")
        .unwrap()
        .parse()
        .unwrap();
    assert!((sum - 1.0).abs() < 1e-4, "{sum}");
    assert_eq!(run(&args).1, stdout);
}

#[test]
fn predict_dumps_graph() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let (out, _) = quick_train(dir.path(), &data, &[]);
    let (code, stdout, _) = run(&[
        "predict",
        "--checkpoint",
        s(&out.join("model.ckpt")),
        "--data",
        s(&data),
        "--session",
        "item1,item2,item3,item2,item4",
        "--k",
        "1",
        "--dump-graph",
    ]);
    assert_eq!(code, 0);
    let edges: Vec<&str> = stdout.lines().filter(|l| l.starts_with("# ")).collect();
    assert_eq!(
        edges,
        [
            "# item1 -> item2 : 1",
            "# item2 -> item3 : 0.5",
            "# item2 -> item4 : 0.5",
            "# item3 -> item2 : 1",
        ]
    );
}

#[test]
fn predict_unknown_item_is_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let (out, _) = quick_train(dir.path(), &data, &[]);
    let (code, _, err) = run(&[
        "predict",
        "--checkpoint",
        s(&out.join("model.ckpt")),
        "--data",
        s(&data),
        "--session",
        "item1,nope",
    ]);
    assert_eq!(code, 4);
    assert!(err.contains("nope"), "{err}");
}

#[test]
fn ablate_reports_five_variants_and_isolates_them() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "item");
    let out = dir.path().join("ablation");
    let (code, stdout, stderr) = run(&[
        "ablate",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--d",
        "4",
        "--epochs",
        "1",
        "--batch",
        "32",
        "--k",
        "5",
    ]);
    assert_eq!(code, 0, "{stderr}");
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    let names: Vec<&str> = rows
        .iter()
        .map(|r| r.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(names, ["full", "L", "Avg", "Att", "L_plus_Att"]);
    assert_eq!(
        fs::read_to_string(out.join("ablation.txt")).unwrap(),
        stdout
    );

    // Variant L trained alone matches its row in the sweep.
    let cfg = TrainConfig {
        dim: 4,
        max_epochs: 1,
        batch_size: 32,
        k: 5,
        variant: Variant::Local,
        ..TrainConfig::default()
    };
    let train = tagnn::data::load_examples(&data.join("train.txt")).unwrap();
    let test = tagnn::data::load_examples(&data.join("test.txt")).unwrap();
    let alone = fit(&train, 20, 0, &cfg, |_| {}).unwrap();
    let m =
        tagnn::eval::evaluate(&alone.checkpoint.params, cfg.variant_config(), &test, 5).unwrap();
    let expected = format!("{:<12} {:>8.2} {:>8.2}", "L", m.precision_at_k, m.mrr_at_k);
    assert_eq!(rows[1], expected);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_tagnn");
    let failed = Command::new(bin)
        .args([
            "preprocess",
            "--data",
            "/nonexistent",
            "--format",
            "yoochoose",
            "--out",
            "/tmp/x",
        ])
        .output()
        .unwrap();
    assert_eq!(failed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("/nonexistent"));
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8(help.stdout).unwrap();
    for cmd in ["preprocess", "train", "evaluate", "ablate", "predict"] {
        assert!(text.contains(cmd), "{text}");
    }
}
