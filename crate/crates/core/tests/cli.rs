mod common;

use std::fs;
use std::path::Path;

use common::{fixture, gazekex, ok, stderr};
use gazekex::eval::{aggregate, read_report};
use gazekex::pipeline::{AblationTable, CONFIG_ECHO};

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let out = ok(&gazekex(["--help"]));
    for cmd in ["osec", "dataset", "train", "evaluate", "analyze", "ablate", "gradcheck", "run"] {
        assert!(out.contains(cmd), "{cmd} missing from help");
    }
    let osec = ok(&gazekex(["osec", "--help"]));
    for cmd in ["build", "regularize", "normalize", "combine", "expand", "coverage"] {
        assert!(osec.contains(cmd), "osec {cmd} missing");
    }
}

#[test]
fn pipeline_on_fixtures_is_reproducible_from_its_echo() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&gazekex(["--config", s(&fixture("run.toml")), "--seed", "3", "--out-dir", s(&a), "run"]));
    let report = read_report(&a.join("report/report.json")).unwrap();
    assert_eq!(report.runs.len(), 4);
    assert!(report.runs.iter().all(|r| r.seed == 3));
    for sub in ["", "lexicon", "dataset", "report", "runs/ha/seed-3"] {
        assert!(a.join(sub).join(CONFIG_ECHO).is_file(), "no config echo in {sub:?}");
    }
    ok(&gazekex(["--config", s(&a.join(CONFIG_ECHO)), "--out-dir", s(&b), "run"]));
    for f in ["report/report.json", "runs/feat/seed-3/model.ckpt", "lexicon/expanded.tsv", CONFIG_ECHO] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn ha_without_lexicon_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let out = gazekex([
        "train",
        "--variant",
        "ha",
        "--train",
        s(&fixture("overfit_posts.jsonl")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("[train]") && err.contains("lexicon"), "{err}");
    assert!(!dir.path().join("model.ckpt").exists());
}

#[test]
fn bad_configs_fail_with_a_stage_tag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seeds = [1]\n[model]\nhidden_size = 3\n").unwrap();
    let out = gazekex(["--config", s(&cfg), "gradcheck"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("[config]"), "{}", stderr(&out));
    assert!(stderr(&out).contains("bad.toml:3"), "{}", stderr(&out));

    let out = gazekex(["--out-dir", s(dir.path()), "osec", "build", "--input", "/nonexistent.tsv", "--participants", "2"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("[osec build]"));
}

#[test]
fn ablation_grid_counts_and_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&gazekex(["--config", s(&fixture("run.toml")), "--out-dir", s(dir.path()), "ablate"]));
    let ab = dir.path().join("ablation");
    let lexicons: Vec<_> = fs::read_dir(ab.join("lexicons"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".tsv"))
        .collect();
    assert_eq!(lexicons.len(), 4, "{lexicons:?}");
    let table: AblationTable = serde_json::from_str(&fs::read_to_string(ab.join("cells.json")).unwrap()).unwrap();
    assert_eq!(table.cells.len(), 4 + 2);
    for cell in &table.cells {
        assert_eq!(cell.runs.len(), 2);
        let scores: Vec<_> = cell.runs.iter().map(|r| r.score).collect();
        assert_eq!(aggregate(&scores), cell.aggregate);
        let mean_p = scores.iter().map(|s| s.precision).sum::<f64>() / 2.0;
        assert!((cell.aggregate.precision - mean_p).abs() < 1e-15);
        assert_eq!(cell.regularization.is_none(), cell.lexicon.is_none());
    }
    let tsv = fs::read_to_string(ab.join("table.tsv")).unwrap();
    assert_eq!(tsv, out);
    for row in tsv.lines().filter(|l| l.starts_with("BiLSTM") || l.starts_with("Att-BiLSTM")) {
        assert!(row.contains("\t-\t-\t"), "{row}");
    }
}

#[test]
fn lexicon_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let build = |src: &str, out: &Path| {
        ok(&gazekex(["osec", "build", "--input", s(&fixture(src)), "--participants", "4", "--out", s(out)]))
    };
    build("osec_news.tsv", &p("news.tsv"));
    build("osec_wiki.tsv", &p("wiki.tsv"));
    ok(&gazekex([
        "osec",
        "regularize",
        "--lexicon",
        s(&p("news.tsv")),
        "--regularization",
        "freq+len",
        "--frequency",
        s(&fixture("frequency.tsv")),
        "--out",
        s(&p("news_fl.tsv")),
    ]));
    ok(&gazekex(["osec", "normalize", "--lexicon", s(&p("news_fl.tsv")), "--out", s(&p("norm.tsv"))]));
    ok(&gazekex(["osec", "combine", "--lexicon", s(&p("news.tsv")), s(&p("wiki.tsv")), "--out", s(&p("both.tsv"))]));
    let both = fs::read_to_string(p("both.tsv")).unwrap();
    assert!(both.contains("# corpus: osec_news+osec_wiki\n"), "{}", &both[..200]);
    assert_eq!(
        fs::read(p("news_fl.tsv")).unwrap(),
        fs::read(p("norm.tsv")).unwrap(),
        "normalizing a normalized lexicon changes nothing"
    );
    assert!(dir.path().join(CONFIG_ECHO).is_file());
}

#[test]
fn dataset_commands_and_split_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let posts = dir.path().join("posts.jsonl");
    let out = ok(&gazekex(["dataset", "build", "--input", s(&fixture("tweets.jsonl")), "--out", s(&posts)]));
    assert!(out.contains("kept 150 of 162"), "{out}");
    let split_dir = dir.path().join("split");
    let out = ok(&gazekex(["--seed", "13", "--out-dir", s(&split_dir), "dataset", "split", "--input", s(&posts), "--ratios", "0.8,0.1,0.1"]));
    assert!(out.contains("train 120 / dev 15 / test 15"), "{out}");
    let bad = gazekex(["--out-dir", s(&split_dir), "dataset", "split", "--input", s(&posts), "--ratios", "0.8,0.3,0.1"]);
    assert!(!bad.status.success());
}

#[test]
fn train_evaluate_and_analyze_from_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let posts = fixture("overfit_posts.jsonl");
    let run_toml = fixture("run.toml");
    let common = ["--config", s(&run_toml)];
    ok(&gazekex(["osec", "build", "--input", s(&fixture("osec_news.tsv")), "--participants", "4", "--out", s(&p("native.tsv"))]));
    ok(&gazekex(["osec", "expand", "--lexicon", s(&p("native.tsv")), "--posts", s(&posts), "--fill", "mean_filled", "--out", s(&p("lex.tsv"))]));
    for v in ["ha", "att"] {
        ok(&gazekex(
            common
                .iter()
                .copied()
                .chain(["train", "--variant", v, "--lexicon", s(&p("lex.tsv")), "--train", s(&posts), "--epochs", "2", "--out-dir", s(&p(v))]),
        ));
        assert!(p(v).join("train.log").is_file());
    }
    let eval_dir = p("eval");
    ok(&gazekex(["evaluate", "--checkpoint", s(&p("ha/model.ckpt")), "--posts", s(&posts), "--out-dir", s(&eval_dir)]));
    let train_report = read_report(&p("ha/report.json")).unwrap();
    let eval_report = read_report(&eval_dir.join("report.json")).unwrap();
    assert_eq!(train_report.runs[0].score, eval_report.runs[0].score);

    let rank_dir = p("rank");
    ok(&gazekex([
        "analyze",
        "rank",
        "--model-a",
        s(&p("ha/model.ckpt")),
        "--model-b",
        s(&p("att/model.ckpt")),
        "--posts",
        s(&posts),
        "--all-posts",
        "--out-dir",
        s(&rank_dir),
    ]));
    let hist = fs::read_to_string(rank_dir.join("rank_histogram.tsv")).unwrap();
    let rows: Vec<Vec<usize>> = hist.lines().skip(1).map(|l| l.split('\t').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.iter().map(|r| r[1]).sum::<usize>(), 50);
    assert_eq!(rows.iter().map(|r| r[2]).sum::<usize>(), 50);

    let gen_dir = p("gen");
    let out = ok(&gazekex([
        "analyze",
        "generalization",
        "--train",
        s(&posts),
        "--posts",
        s(&posts),
        "--checkpoint",
        s(&p("ha/model.ckpt")),
        "--out-dir",
        s(&gen_dir),
    ]));
    assert!(out.contains("generalization: 0"), "{out}");
}

#[test]
fn gradcheck_command_reports_each_variant() {
    let out = ok(&gazekex(["gradcheck", "--variant", "ha", "--variant", "feat"]));
    assert_eq!(out.lines().count(), 3, "{out}");
    let fail = gazekex(["gradcheck", "--variant", "baseline", "--tolerance", "1e-30"]);
    assert!(!fail.status.success());
    assert!(stderr(&fail).contains("[gradcheck]"));
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_gazekex"))
        .env("GAZEKEX_THREADS", "zero")
        .args(["--config", s(&fixture("run.toml")), "--out-dir", s(dir.path()), "--log-level", "error", "run"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("GAZEKEX_THREADS"), "{}", stderr(&out));
}
