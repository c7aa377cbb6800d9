use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rrl_core::data::{
    load_idx, load_idx_dir, make_rot_testset, make_rotplus_testset, mask_dataset, read_netpbm, write_pgm,
    write_synthetic_split, Dataset, TRAIN_IMAGES, TRAIN_LABELS,
};
use rrl_core::geometry::{format_box_list, parse_box_list, rotate_bbox, LabeledBox};
use rrl_core::harness::{
    angle_sweep, sweep_csv, trend_experiment, verify_conv_rotation_identity, verify_layer_equivariance,
    verify_model_invariance, verify_window_invariance, LayerUnderTest,
};
use rrl_core::lbp::LbpMode;
use rrl_core::models::{evaluate, train, TrainConfig};
use rrl_core::nn::Checkpoint;
use rrl_core::{Error, Network, NetworkConfig, Precision, Scalar, Tensor};

use crate::{Command, Rotate, Suite};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn verification(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

/// Errors from reading data, checkpoints or images: I/O failures and files
/// whose contents cannot be decoded both count as unreadable input.
fn input(e: Error) -> Failure {
    match e {
        Error::Config { .. } | Error::Layer { .. } => usage(e.to_string()),
        _ => Failure { code: 3, message: e.to_string() },
    }
}

/// Errors from a computation on already-loaded inputs: mismatched shapes or
/// labels are the caller's mistake.
fn compute(e: Error) -> Failure {
    if e.is_io() {
        Failure { code: 3, message: e.to_string() }
    } else {
        usage(e.to_string())
    }
}

fn read_config(path: &Path) -> Outcome<NetworkConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    NetworkConfig::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(text: &str) -> Outcome {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure { code: 3, message: format!("writing output: {e}") }),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure { code: 3, message: format!("writing {}: {e}", path.display()) })
}

fn check_data_shape<T: Scalar>(config: &NetworkConfig, data: &Dataset<T>) -> Outcome {
    let [h, w, c] = config.input;
    match data.image_shape() {
        Some(s) if s != [1, h, w, c] => Err(usage(format!("data images are {:?}, config expects {h}x{w}x{c}", &s[1..]))),
        _ if data.classes() > config.classes => {
            Err(usage(format!("data has {} classes, config {}", data.classes(), config.classes)))
        }
        _ => Ok(()),
    }
}

fn load_checkpoint(path: &Path) -> Outcome<Checkpoint> {
    Checkpoint::load(path).map_err(input)
}

fn precision_of(ckpt: &Checkpoint) -> Outcome<Precision> {
    Precision::from_bits(ckpt.precision).ok_or_else(|| Failure { code: 3, message: format!("bad checkpoint precision {}", ckpt.precision) })
}

fn build<T: Scalar>(config: &NetworkConfig, ckpt: &Checkpoint) -> Outcome<Network<T>> {
    Network::from_checkpoint(config, ckpt).map_err(|e| usage(format!("checkpoint does not fit config: {e}")))
}

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Train { config, data, out, epochs, lr, batch, seed, precision, limit } => {
            let mut config = read_config(&config)?;
            if let Some(p) = precision {
                config.precision = p.parse().map_err(usage)?;
            }
            let cfg = TrainConfig { epochs, lr, batch, seed };
            match config.precision {
                Precision::F32 => train_cmd::<f32>(&config, &data, &out, &cfg, limit),
                Precision::F64 => train_cmd::<f64>(&config, &data, &out, &cfg, limit),
            }
        }
        Command::Eval { config, checkpoint, data, rotate, seed, limit } => {
            let config = read_config(&config)?;
            let ckpt = load_checkpoint(&checkpoint)?;
            match precision_of(&ckpt)? {
                Precision::F32 => eval_cmd::<f32>(&config, &ckpt, &data, rotate, seed, limit),
                Precision::F64 => eval_cmd::<f64>(&config, &ckpt, &data, rotate, seed, limit),
            }
        }
        Command::Verify { suite, trials, seed, config, checkpoint } => verify_cmd(suite, trials, seed, config.as_deref(), checkpoint.as_deref()),
        Command::Sweep { config, checkpoint, data, step_degrees, limit } => {
            let config = read_config(&config)?;
            let ckpt = load_checkpoint(&checkpoint)?;
            match precision_of(&ckpt)? {
                Precision::F32 => sweep_cmd::<f32>(&config, &ckpt, &data, step_degrees, limit),
                Precision::F64 => sweep_cmd::<f64>(&config, &ckpt, &data, step_degrees, limit),
            }
        }
        Command::DumpFeatures { config, checkpoint, image, layer, out } => {
            let config = read_config(&config)?;
            let ckpt = load_checkpoint(&checkpoint)?;
            match precision_of(&ckpt)? {
                Precision::F32 => dump_cmd::<f32>(&config, &ckpt, &image, layer, &out),
                Precision::F64 => dump_cmd::<f64>(&config, &ckpt, &image, layer, &out),
            }
        }
        Command::TransformBoxes { boxes, n, width, height } => {
            let text = std::fs::read_to_string(&boxes)
                .map_err(|e| Failure { code: 3, message: format!("reading {}: {e}", boxes.display()) })?;
            let list = parse_box_list(&text).map_err(|e| usage(format!("{}: {e}", boxes.display())))?;
            let rotated = list
                .into_iter()
                .map(|b| Ok(LabeledBox { bbox: rotate_bbox(b.bbox, n, width, height)?, label: b.label }))
                .collect::<Result<Vec<_>, Error>>()
                .map_err(|e| usage(e.to_string()))?;
            emit(&format_box_list(&rotated))
        }
        Command::MakeSynthetic { out, train, test, seed } => {
            write_synthetic_split(&out, train, test, seed).map_err(compute)?;
            emit(&format!("wrote {train} training and {test} test glyphs to {}\n", out.display()))
        }
        Command::Trend { data, configs, epochs, lr, batch, seed, train_limit, test_limit, csv } => {
            let named: Vec<(String, NetworkConfig)> = if configs.is_empty() {
                ["lenet5", "lenet5-rrl"]
                    .iter()
                    .map(|n| NetworkConfig::preset(n, 28, 1, 10).map(|c| (n.to_string(), c)).map_err(compute))
                    .collect::<Outcome<_>>()?
            } else {
                configs
                    .iter()
                    .map(|p| {
                        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                        read_config(p).map(|c| (name, c))
                    })
                    .collect::<Outcome<_>>()?
            };
            let (train_set, test_set) = load_idx_dir::<f32>(&data).map_err(input)?;
            let (train_set, test_set) = (train_set.take(train_limit), test_set.take(test_limit));
            for (_, c) in &named {
                check_data_shape(c, &train_set)?;
            }
            let cfg = TrainConfig { epochs, lr, batch, seed };
            let (report, _) = trend_experiment(&train_set, &test_set, &named, &cfg, seed, seed).map_err(compute)?;
            if let Some(path) = csv {
                write_file(&path, &report.to_csv())?;
            }
            emit(&report.to_markdown())
        }
    }
}

fn train_cmd<T: Scalar>(config: &NetworkConfig, data: &Path, out: &Path, cfg: &TrainConfig, limit: Option<usize>) -> Outcome {
    let set = load_idx::<T>(&data.join(TRAIN_IMAGES), &data.join(TRAIN_LABELS)).map_err(input)?;
    let set = mask_dataset(&set.take(limit.unwrap_or(usize::MAX))).map_err(compute)?;
    check_data_shape(config, &set)?;
    let mut net = Network::<T>::new(config, cfg.seed).map_err(compute)?;
    let stats = train(&mut net, &set, cfg).map_err(compute)?;
    net.to_checkpoint().save(out).map_err(compute)?;
    let mut s = String::from("epoch,mean_loss,train_accuracy\n");
    for e in stats {
        writeln!(s, "{},{:.6},{:.6}", e.epoch, e.mean_loss, e.train_accuracy).unwrap();
    }
    emit(&s)
}

fn test_split<T: Scalar>(data: &Path, limit: Option<usize>) -> Outcome<Dataset<T>> {
    let (_, test) = load_idx_dir::<T>(data).map_err(input)?;
    Ok(test.take(limit.unwrap_or(usize::MAX)))
}

fn eval_cmd<T: Scalar>(config: &NetworkConfig, ckpt: &Checkpoint, data: &Path, rotate: Rotate, seed: u64, limit: Option<usize>) -> Outcome {
    let net = build::<T>(config, ckpt)?;
    let test = test_split::<T>(data, limit)?;
    check_data_shape(config, &test)?;
    let set = match rotate {
        Rotate::None => mask_dataset(&test),
        Rotate::Rot => make_rot_testset(&test, seed),
        Rotate::RotPlus => make_rotplus_testset(&test, seed),
    }
    .map_err(compute)?;
    let result = evaluate(&net, &set).map_err(compute)?;
    let mut s = format!("accuracy {:.6} ({}/{})\nindex,label,prediction\n", result.accuracy(), result.correct, result.total);
    for (i, (l, p)) in set.labels().iter().zip(&result.predictions).enumerate() {
        writeln!(s, "{i},{l},{p}").unwrap();
    }
    emit(&s)
}

fn sweep_cmd<T: Scalar>(config: &NetworkConfig, ckpt: &Checkpoint, data: &Path, step: f64, limit: usize) -> Outcome {
    let net = build::<T>(config, ckpt)?;
    let test = test_split::<T>(data, Some(limit))?;
    check_data_shape(config, &test)?;
    let rows = angle_sweep(&net, test.images(), step).map_err(compute)?;
    emit(&sweep_csv(&rows))
}

/// Channels side by side in a near-square grid with one-pixel gaps, each
/// min-max scaled to 0..=255 (a constant channel becomes black).
fn feature_grid<T: Scalar>(t: &Tensor<T>) -> (usize, usize, Vec<u8>) {
    let [_, h, w, c] = t.shape();
    let cols = (1..=c).find(|k| k * k >= c).unwrap_or(1);
    let rows = c.div_ceil(cols);
    let (gw, gh) = (cols * (w + 1) - 1, rows * (h + 1) - 1);
    let mut px = vec![0u8; gw * gh];
    for ch in 0..c {
        let vals: Vec<f64> = (0..h * w).map(|i| t[[0, i / w, i % w, ch]].as_f64()).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (oy, ox) = ((ch / cols) * (h + 1), (ch % cols) * (w + 1));
        for (i, v) in vals.iter().enumerate() {
            let g = if hi > lo { ((v - lo) / (hi - lo) * 255.0).round() as u8 } else { 0 };
            px[(oy + i / w) * gw + ox + i % w] = g;
        }
    }
    (gw, gh, px)
}

fn dump_cmd<T: Scalar>(config: &NetworkConfig, ckpt: &Checkpoint, image: &Path, layer: usize, out: &Path) -> Outcome {
    let net = build::<T>(config, ckpt)?;
    let x = read_netpbm::<T>(image).map_err(input)?;
    if layer >= config.layers.len() {
        return Err(usage(format!("layer {layer} out of range (network has {})", config.layers.len())));
    }
    let trace = net.forward(&x).map_err(compute)?;
    let (w, h, px) = feature_grid(&trace.activations[layer + 1]);
    write_pgm(out, w, h, &px).map_err(compute)?;
    let [_, fh, fw, fc] = trace.activations[layer + 1].shape();
    emit(&format!("layer {layer} ({}): {fh}x{fw}x{fc} -> {}\n", config.layers[layer], out.display()))
}

fn verify_cmd(suite: Suite, trials: usize, seed: u64, config: Option<&Path>, checkpoint: Option<&Path>) -> Outcome {
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let mut s = String::new();
    let mut failed = 0;
    let mut line = |name: &str, ok: bool, detail: String| {
        failed += !ok as usize;
        writeln!(s, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" }).unwrap();
    };
    if matches!(suite, Suite::Window | Suite::All) {
        for (mode, size) in [(LbpMode::Ring8, 3), (LbpMode::Quarter4, 3), (LbpMode::Quarter4, 5)] {
            let r = verify_window_invariance(trials, size, mode, seed).map_err(compute)?;
            let detail = format!(
                "{} trials, {} checks, {} failures, {} oracle mismatches, {} tie trials, worst {:e}",
                r.trials, r.checks, r.failures, r.oracle_mismatches, r.tie_trials, r.worst
            );
            line(&format!("window {mode} F={size}"), r.passed(), detail);
        }
    }
    if matches!(suite, Suite::Layer | Suite::All) {
        let r = verify_layer_equivariance(trials, seed, LayerUnderTest::Rrl).map_err(compute)?;
        line("layer rrl+conv", r.passed(), format!("{} checks, {} failures, worst {:e}", r.checks, r.failures, r.worst));
        let sham = verify_layer_equivariance(trials, seed, LayerUnderTest::Identity).map_err(compute)?;
        line("layer identity stand-in must break", !sham.passed(), format!("{} of {} checks broke, worst {:e}", sham.failures, sham.checks, sham.worst));
        let cal = verify_conv_rotation_identity(trials, seed).map_err(compute)?;
        line("conv rotated-kernel identity", cal.passed(), format!("{} checks, worst {:e}", cal.checks, cal.worst));
    }
    if matches!(suite, Suite::Model | Suite::All) {
        let config = match config {
            Some(p) => read_config(p)?,
            None => NetworkConfig::preset("lenet5-rrl", 28, 1, 10).map_err(compute)?,
        };
        let net = match checkpoint {
            Some(p) => {
                let ckpt = load_checkpoint(p)?;
                build::<f64>(&config, &ckpt)?
            }
            None => Network::<f64>::new(&config, seed).map_err(compute)?,
        };
        let report = |net: &Network<f64>| verify_model_invariance(net, trials, seed).map_err(compute);
        let r = report(&net)?;
        line("model invariance (64-bit)", r.passed(), format!("{} inputs, {} failures, worst {:e}", r.inputs, r.failures, r.worst));
        let r = verify_model_invariance(&net.cast::<f32>(), trials, seed).map_err(compute)?;
        line("model invariance (32-bit)", r.passed(), format!("{} inputs, {} failures, worst {:e}", r.inputs, r.failures, r.worst));
        if config.layers.contains(&rrl_core::LayerSpec::GlobalRrl) {
            let without = net.with_config(&config.without_global_rrl()).map_err(compute)?;
            let r = report(&without)?;
            line("without globalrrl must break", !r.passed(), format!("worst {:e}", r.worst));
        }
        let [h, w, c] = config.input;
        if h == w && (h == 28 || h == 32) {
            let plain = NetworkConfig::preset("lenet5", h, c, config.classes).map_err(compute)?;
            let r = report(&Network::<f64>::new(&plain, seed).map_err(compute)?)?;
            line("plain lenet5 must break", !r.passed(), format!("worst {:e}", r.worst));
        }
    }
    emit(&s)?;
    if failed > 0 {
        Err(verification(format!("{failed} verification check(s) failed")))
    } else {
        Ok(())
    }
}
