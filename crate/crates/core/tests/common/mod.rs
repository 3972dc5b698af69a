#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn viewpoint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viewpoint"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = viewpoint(args);
    assert!(
        out.status.success(),
        "viewpoint {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn exit_code(args: &[&str]) -> i32 {
    viewpoint(args).status.code().expect("exited normally")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Runs every subcommand once under `dir` and returns the files written,
/// keyed by subcommand.
pub fn run_all(dir: &Path, seed: u64) -> Vec<(&'static str, PathBuf)> {
    let s = seed.to_string();
    let f = |name: &str| dir.join(name);
    std::fs::write(f("models.txt"), "chair_a\nchair_b\nchair_c\n").unwrap();
    run_ok(&[
        "gen-jobs",
        "--models",
        p(&f("models.txt")),
        "--tier",
        "directional",
        "--seed",
        &s,
        "--out",
        p(&f("jobs.jsonl")),
        "--holdout",
        "2",
    ]);
    run_ok(&[
        "glyphs",
        "--n",
        "144",
        "--k",
        "36",
        "--distribution",
        "peaked",
        "--peak-weight",
        "4",
        "--seed",
        &s,
        "--id-prefix",
        "r",
        "--out",
        p(&f("real.csv")),
        "--png-dir",
        p(&f("png")),
        "--size",
        "32",
    ]);
    run_ok(&[
        "glyphs",
        "--n",
        "1440",
        "--k",
        "36",
        "--seed",
        &s,
        "--id-prefix",
        "s",
        "--source",
        "synthetic",
        "--out",
        p(&f("pool.csv")),
    ]);
    std::fs::write(
        f("aug.cfg"),
        "occlusion_fraction=0.5\ncrop_prob=0.5\njpeg_quality=80\n",
    )
    .unwrap();
    run_ok(&[
        "augment",
        "--in",
        p(&f("png")),
        "--out",
        p(&f("aug")),
        "--audit",
        p(&f("audit.jsonl")),
        "--config",
        p(&f("aug.cfg")),
        "--seed",
        &s,
    ]);
    run_ok(&[
        "balance",
        "--manifest",
        p(&f("real.csv")),
        "--pool",
        p(&f("pool.csv")),
        "--seed",
        &s,
        "--out",
        p(&f("balanced.csv")),
        "--plan-out",
        p(&f("plan.jsonl")),
    ]);
    for loss in ["sm", "wsm"] {
        run_ok(&[
            "train",
            "--real",
            p(&f("real.csv")),
            "--synth",
            p(&f("pool.csv")),
            "--blend",
            "0.5",
            "--train-size",
            "200",
            "--loss",
            loss,
            "--sigma",
            "2",
            "--epochs",
            "2",
            "--lr",
            "0.001",
            "--image-size",
            "32",
            "--seed",
            &s,
            "--out",
            p(&f(&format!("{loss}.bin"))),
            "--log",
            p(&f(&format!("{loss}.log.csv"))),
        ]);
        run_ok(&[
            "eval",
            "--params",
            p(&f(&format!("{loss}.bin"))),
            "--manifest",
            p(&f("real.csv")),
            "--label",
            loss,
            "--out",
            p(&f(&format!("{loss}.report"))),
            "--per-bin",
            p(&f(&format!("{loss}.perbin.csv"))),
            "--predictions-out",
            p(&f(&format!("{loss}.pred.csv"))),
        ]);
    }
    run_ok(&[
        "report",
        p(&f("sm.report")),
        p(&f("wsm.report")),
        "--out",
        p(&f("table.txt")),
    ]);

    let mut files = vec![
        ("gen-jobs", f("jobs.jsonl")),
        ("gen-jobs", f("jobs.jsonl.split.json")),
        ("glyphs", f("real.csv")),
        ("glyphs", f("pool.csv")),
        ("augment", f("audit.jsonl")),
        ("balance", f("balanced.csv")),
        ("balance", f("plan.jsonl")),
        ("report", f("table.txt")),
    ];
    for loss in ["sm", "wsm"] {
        files.push(("train", f(&format!("{loss}.bin"))));
        files.push(("train", f(&format!("{loss}.log.csv"))));
        files.push(("eval", f(&format!("{loss}.report"))));
        files.push(("eval", f(&format!("{loss}.perbin.csv"))));
        files.push(("eval", f(&format!("{loss}.pred.csv"))));
    }
    let mut pngs: Vec<PathBuf> = std::fs::read_dir(f("png"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    pngs.sort();
    files.extend(pngs.into_iter().map(|x| ("glyphs", x)));
    let mut aug: Vec<PathBuf> = std::fs::read_dir(f("aug"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    aug.sort();
    files.extend(aug.into_iter().map(|x| ("augment", x)));
    files
}
