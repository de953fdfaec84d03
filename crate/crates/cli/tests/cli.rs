//! End-to-end runs of the `vgbench` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use vgbench::agent::load_checkpoint;
use vgbench::evalproto::EvalReport;

/// Settings that keep a training run to a few seconds.
const TINY: &[&str] = &[
    "preset=desk",
    "training_steps=200",
    "warmup_steps=100",
    "batch_size=8",
    "filters=4",
    "hidden_dim=16",
    "latent_dim=8",
    "eval_interval=100",
    "eval_episodes=1",
    "log_interval=50",
    "log_wall_time=false",
];

fn vgbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vgbench")).args(args).output().expect("binary runs")
}

fn with_sets<'a>(mut args: Vec<&'a str>, sets: &[&'a str]) -> Vec<&'a str> {
    for s in sets {
        args.push("--set");
        args.push(s);
    }
    args
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Kept after the run for inspection; lives under cargo's scratch dir.
fn tmp() -> PathBuf {
    tempfile::tempdir_in(env!("CARGO_TARGET_TMPDIR")).unwrap().keep()
}

fn train(dir: &Path, extra: &[&str]) -> Output {
    let d = dir.to_str().unwrap();
    let mut sets = TINY.to_vec();
    sets.extend_from_slice(extra);
    vgbench(&with_sets(vec!["train", "--out", d], &sets))
}

/// One shared tiny cartpole run.
fn trained() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tmp();
        assert_code(&train(&dir, &["checkpoint_interval=100"]), 0);
        dir
    })
}

#[test]
fn train_writes_loadable_checkpoint_and_logs() {
    let dir = trained();
    for f in ["config.resolved", "metrics.jsonl", "checkpoint.bin", "checkpoint_00000100.bin", "eval_curve.csv", "learning_curve.png"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let agent = load_checkpoint(&dir.join("checkpoint.bin")).unwrap();
    assert_eq!(agent.env_steps, 200);
    let curve = fs::read_to_string(dir.join("eval_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3, "{curve}");
    for line in fs::read_to_string(dir.join("metrics.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["event"].is_string() && v["step"].is_u64() && v["values"].is_object());
        assert!(v.get("wall_time").is_none());
    }
}

#[test]
fn same_seed_gives_identical_metrics_and_resolved_config_reproduces() {
    let first = trained();
    let second = tmp();
    assert_code(&train(&second, &["checkpoint_interval=100"]), 0);
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(first, "metrics.jsonl"), read(&second, "metrics.jsonl"));
    assert_eq!(read(first, "checkpoint.bin"), read(&second, "checkpoint.bin"));

    let third = tmp();
    let resolved = first.join("config.resolved");
    let out = vgbench(&["train", "--config", resolved.to_str().unwrap(), "--out", third.to_str().unwrap()]);
    assert_code(&out, 0);
    assert_eq!(read(first, "metrics.jsonl"), read(&third, "metrics.jsonl"));
}

#[test]
fn eval_writes_report_tables_that_round_trip() {
    let ckpt = trained().join("checkpoint.bin");
    let before = fs::read(&ckpt).unwrap();
    let dir = tmp();
    let sets = [
        "n_train_dynamics_seeds=2",
        "n_test_visual_seeds=2",
        "n_test_dynamics_per_visual=1",
        "columns=None,Floor,All",
        "method=drq",
    ];
    let args = with_sets(vec!["eval", "--checkpoint", ckpt.to_str().unwrap(), "--out", dir.to_str().unwrap()], &sets);
    assert_code(&vgbench(&args), 0);
    assert_eq!(fs::read(&ckpt).unwrap(), before, "eval must not modify its checkpoint");

    let report = EvalReport::load(&dir).unwrap();
    let labels: Vec<_> = report.columns.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, ["Train", "None", "Floor", "All"]);
    let t1 = fs::read_to_string(dir.join("table1.csv")).unwrap();
    assert!(t1.starts_with("method,domain,train,test,e_g\ndrq,cartpole,"), "{t1}");
    let t2 = fs::read_to_string(dir.join("table2.csv")).unwrap();
    assert!(t2.starts_with("method,domain,None,Floor,All\n"), "{t2}");
    assert_eq!(fs::read_to_string(dir.join("returns.csv")).unwrap().lines().count(), 1 + 2 + 3 * 2);
}

#[test]
fn eval_rejects_domain_mismatch_and_empty_grid() {
    let ckpt = trained().join("checkpoint.bin");
    let c = ckpt.to_str().unwrap();
    let dir = tmp();
    let d = dir.to_str().unwrap();
    assert_code(&vgbench(&["eval", "--checkpoint", c, "--out", d, "--set", "domain=reacher"]), 2);
    assert_code(&vgbench(&["eval", "--checkpoint", c, "--out", d, "--set", "n_test_visual_seeds=0"]), 2);
}

#[test]
fn gallery_tiles_and_manifest() {
    let dir = tmp();
    let d = dir.to_str().unwrap();
    assert_code(&vgbench(&["gallery", "--out", d, "--seeds", "0..9"]), 0);
    let img = image::open(dir.join("gallery.png")).unwrap();
    assert_eq!((img.width(), img.height()), (4 * 84, 3 * 84));
    let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 10);
    assert!(manifest.lines().next().unwrap().starts_with("tile=0 seed=0 "));

    let one = tmp();
    assert_code(&vgbench(&["gallery", "--out", one.to_str().unwrap(), "--seeds", "7", "--set", "domain=reacher"]), 0);
    let img = image::open(one.join("gallery.png")).unwrap();
    assert_eq!((img.width(), img.height()), (84, 84));
    assert_eq!(fs::read_to_string(one.join("manifest.txt")).unwrap().lines().count(), 1);
}

#[test]
fn sweep_is_deterministic_and_plots_every_point() {
    let run = || {
        let dir = tmp();
        let mut args = vec!["sweep", "--kind", "beta", "--grid", "0,1", "--out"];
        let d = dir.to_str().unwrap().to_string();
        args.push(&d);
        let sets = ["training_steps=60", "warmup_steps=30", "eval_interval=30", "batch_size=4"];
        let mut base = TINY.to_vec();
        base.retain(|s| !s.starts_with("training_steps") && !s.starts_with("warmup") && !s.starts_with("eval_interval"));
        base.extend_from_slice(&sets);
        assert_code(&vgbench(&with_sets(args, &base)), 0);
        dir
    };
    let (a, b) = (run(), run());
    for f in ["curves.csv", "final.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let fin = fs::read_to_string(a.join("final.csv")).unwrap();
    assert_eq!(fin.lines().count(), 3, "{fin}");
    assert!(a.join("sweep.png").exists());
    assert!(a.join("point_01").join("config.resolved").exists());
}

#[test]
fn analyze_variance_averages_checkpoints_and_attention_matches_frame_size() {
    let first = trained().join("checkpoint.bin");
    let other = tmp();
    assert_code(&train(&other, &["global_seed=2"]), 0);
    let second = other.join("checkpoint.bin");
    let curve = |ckpts: &[&Path]| -> Vec<f64> {
        let dir = tmp();
        let mut args = vec!["analyze", "--kind", "variance", "--out", dir.to_str().unwrap(), "--set", "analysis_renderings=4"];
        let paths: Vec<String> = ckpts.iter().map(|p| p.to_str().unwrap().to_string()).collect();
        for p in &paths {
            args.push("--checkpoint");
            args.push(p);
        }
        let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_code(&vgbench(&refs), 0);
        assert!(dir.join("variance.png").exists());
        fs::read_to_string(dir.join("variance.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let (a, b, both) = (curve(&[&first]), curve(&[&second]), curve(&[&first, &second]));
    assert_eq!(a.len(), 8, "one entry per latent dimension");
    for i in 0..a.len() {
        assert!((both[i] - (a[i] + b[i]) / 2.0).abs() < 1e-12);
    }

    let dir = tmp();
    let args = ["analyze", "--kind", "attention", "--checkpoint", first.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    assert_code(&vgbench(&args), 0);
    let overlay = image::open(dir.join("attention_0.png")).unwrap();
    assert_eq!((overlay.width(), overlay.height()), (84, 84));
    assert!(dir.join("heat_0.png").exists());
}

#[test]
fn exit_codes_distinguish_config_and_runtime_failures() {
    let dir = tmp();
    let d = dir.to_str().unwrap();
    assert_code(&vgbench(&["train", "--out", d, "--set", "pipeline=warp"]), 2);
    assert_code(&vgbench(&["train", "--out", d, "--set", "beta=1.5"]), 2);
    assert_code(&vgbench(&["train", "--out", d, "--set", "nonsense"]), 2);
    assert_code(&vgbench(&["train", "--config", "/definitely/missing.cfg"]), 2);
    assert_code(&vgbench(&["sweep", "--kind", "beta", "--grid", ",", "--out", d]), 2);
    assert_code(&vgbench(&["analyze", "--kind", "variance", "--out", d]), 2);
    assert_code(&vgbench(&["frobnicate"]), 2);
    assert_code(&vgbench(&["gallery", "--out", d, "--seeds", "4..2"]), 2);

    let missing = dir.join("nope.bin");
    assert_code(&vgbench(&["eval", "--checkpoint", missing.to_str().unwrap(), "--out", d]), 3);
    let garbage = dir.join("garbage.bin");
    fs::write(&garbage, b"not a checkpoint").unwrap();
    assert_code(&vgbench(&["eval", "--checkpoint", garbage.to_str().unwrap(), "--out", d]), 3);
    let blocker = dir.join("file");
    fs::write(&blocker, b"x").unwrap();
    let under_file = blocker.join("sub");
    assert_code(&vgbench(&["gallery", "--out", under_file.to_str().unwrap(), "--seeds", "0"]), 3);

    let help = vgbench(&["--help"]);
    assert_code(&help, 0);
    let text = String::from_utf8_lossy(&help.stdout);
    for verb in ["train", "eval", "sweep", "gallery", "analyze"] {
        assert!(text.contains(verb), "{verb} missing from --help");
    }
}
