use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rrl_core::NetworkConfig;

fn rrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrl")).args(args).output().expect("spawn rrl")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_configs_match_presets() {
    for name in ["lenet5", "lenet5-rrl"] {
        let text = std::fs::read_to_string(configs_dir().join(format!("{name}.cfg"))).unwrap();
        let parsed = NetworkConfig::parse(&text).unwrap();
        assert_eq!(parsed, NetworkConfig::preset(name, 28, 1, 10).unwrap(), "{name}");
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrl(&["train", "--config", s(&dir.path().join("none.cfg")), "--data", s(dir.path()), "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "input 28 28 1\nclasses 10\nlayer warp 3\n").unwrap();
    let o = rrl(&["train", "--config", s(&cfg), "--data", s(dir.path()), "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&rrl(&["verify", "--bogus"])), 2);
    assert_eq!(code(&rrl(&["transform-boxes", "--boxes", "b", "--n", "4", "--width", "1", "--height", "1"])), 2);
}

#[test]
fn unreadable_data_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("lenet5.cfg");
    let o = rrl(&["train", "--config", s(&cfg), "--data", s(&dir.path().join("missing")), "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&o), 3);
    std::fs::write(dir.path().join("train-images-idx3-ubyte"), b"\x00\x00\x08\x04garbage").unwrap();
    std::fs::write(dir.path().join("train-labels-idx1-ubyte"), b"").unwrap();
    let o = rrl(&["train", "--config", s(&cfg), "--data", s(dir.path()), "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&o), 3);
}

#[test]
fn corrupt_checkpoint_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("bad.ckpt");
    std::fs::write(&ckpt, b"RRLC\x09").unwrap();
    let cfg = configs_dir().join("lenet5.cfg");
    let o = rrl(&["eval", "--config", s(&cfg), "--checkpoint", s(&ckpt), "--data", s(dir.path())]);
    assert_eq!(code(&o), 3);
}

#[test]
fn verify_all_passes() {
    let o = rrl(&["verify", "--suite", "all", "--trials", "25", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.lines().count() >= 8);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
}

#[test]
fn verify_is_deterministic() {
    let a = rrl(&["verify", "--suite", "window", "--trials", "50", "--seed", "3"]);
    let b = rrl(&["--threads", "1", "verify", "--suite", "window", "--trials", "50", "--seed", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn model_suite_fails_for_a_plain_network() {
    let cfg = configs_dir().join("lenet5.cfg");
    let o = rrl(&["verify", "--suite", "model", "--trials", "5", "--config", s(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL model invariance"));
}

#[test]
fn transform_boxes_prints_rotated_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let boxes = dir.path().join("boxes.txt");
    std::fs::write(&boxes, "car 10 20 30 50\nsign 0 0 100 80\n").unwrap();
    let o = rrl(&["transform-boxes", "--boxes", s(&boxes), "--n", "1", "--width", "100", "--height", "80"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "car 20 70 50 90\nsign 0 0 80 100\n");
    let o = rrl(&["transform-boxes", "--boxes", s(&boxes), "--n", "0", "--width", "100", "--height", "80"]);
    assert_eq!(stdout(&o), "car 10 20 30 50\nsign 0 0 100 80\n");
    std::fs::write(&boxes, "car 10 20 300 50\n").unwrap();
    let o = rrl(&["transform-boxes", "--boxes", s(&boxes), "--n", "1", "--width", "100", "--height", "80"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_eval_sweep_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = rrl(&["make-synthetic", "--out", s(&data), "--train", "64", "--test", "16", "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = configs_dir().join("lenet5-rrl.cfg");
    let train = |out: &Path, threads: &str| {
        let o = rrl(&[
            "--threads", threads, "train", "--config", s(&cfg), "--data", s(&data), "--out", s(out), "--epochs", "1", "--batch", "8",
            "--seed", "2",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    let log_a = train(&a, "4");
    let log_b = train(&b, "1");
    assert!(log_a.starts_with("epoch,mean_loss,train_accuracy\n1,"));
    assert_eq!(log_a, log_b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let eval = |rotate: &str| {
        let o = rrl(&["eval", "--config", s(&cfg), "--checkpoint", s(&a), "--data", s(&data), "--rotate", rotate, "--seed", "1"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let upright = eval("none");
    let lines: Vec<&str> = upright.lines().collect();
    assert!(lines[0].starts_with("accuracy "));
    assert_eq!(lines[1], "index,label,prediction");
    assert_eq!(lines.len(), 2 + 16);
    // Quarter-turn test images leave an invariant model's predictions unchanged.
    assert_eq!(upright, eval("rot"));
    assert_eq!(eval("rot+"), eval("rot+"));

    let o = rrl(&["sweep", "--config", s(&cfg), "--checkpoint", s(&a), "--data", s(&data), "--step-degrees", "90", "--limit", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "angle,agreement,mean_distance");
    assert_eq!(rows.len(), 5);

    let image = dir.path().join("img.pgm");
    let pixels: Vec<u8> = (0..28 * 28).map(|i| (i * 7 % 256) as u8).collect();
    rrl_core::data::write_pgm(&image, 28, 28, &pixels).unwrap();
    let grid = dir.path().join("grid.pgm");
    let o = rrl(&["dump-features", "--config", s(&cfg), "--checkpoint", s(&a), "--image", s(&image), "--layer", "1", "--out", s(&grid)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // Six 28x28 channels in a 3x2 grid with one-pixel gaps.
    let map = rrl_core::data::read_netpbm::<f32>(&grid).unwrap();
    assert_eq!(map.shape(), [1, 2 * 29 - 1, 3 * 29 - 1, 1]);
    let o = rrl(&["dump-features", "--config", s(&cfg), "--checkpoint", s(&a), "--image", s(&image), "--layer", "99", "--out", s(&grid)]);
    assert_eq!(code(&o), 2);

    let plain = configs_dir().join("lenet5.cfg");
    let o = rrl(&["eval", "--config", s(&plain), "--checkpoint", s(&a), "--data", s(&data)]);
    assert_eq!(code(&o), 0, "lenet5 and lenet5-rrl share a parameter layout");
}
