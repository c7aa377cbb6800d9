//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any failure.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrl_core::data::{generate_glyphs, mask_dataset, Dataset};
use rrl_core::geometry::rotate_bbox;
use rrl_core::harness::{
    feature_distance, gradient_check, trend_experiment, verify_layer_equivariance, verify_model_invariance,
    verify_window_invariance, LayerUnderTest, TrendReport,
};
use rrl_core::lbp::LbpMode;
use rrl_core::models::TrainConfig;
use rrl_core::nn::Checkpoint;
use rrl_core::{BBox, Network, NetworkConfig, Tensor};

const SEED: u64 = 7;

struct Trained {
    report: TrendReport,
    baseline: Network<f32>,
    rrl: Network<f32>,
    test: Dataset<f32>,
}

fn train_config() -> TrainConfig {
    TrainConfig { epochs: 5, lr: 0.05, batch: 16, seed: SEED }
}

fn run_trend() -> (TrendReport, Vec<Network<f32>>, Dataset<f32>) {
    let train = generate_glyphs::<f32>(2000, 28, SEED).unwrap();
    let test = generate_glyphs::<f32>(1000, 28, SEED + 1).unwrap();
    let configs: Vec<(String, NetworkConfig)> = ["lenet5", "lenet5-rrl"]
        .iter()
        .map(|n| (n.to_string(), NetworkConfig::preset(n, 28, 1, 10).unwrap()))
        .collect();
    let (report, nets) = trend_experiment(&train, &test, &configs, &train_config(), SEED, SEED).unwrap();
    (report, nets, test)
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let (report, mut nets, test) = run_trend();
        let rrl = nets.pop().unwrap();
        let baseline = nets.pop().unwrap();
        Trained { report, baseline, rrl, test }
    })
}

fn window_invariance() -> Result<String, String> {
    let mut notes = Vec::new();
    let mut ok = true;
    for (mode, size) in [(LbpMode::Ring8, 3), (LbpMode::Quarter4, 3), (LbpMode::Quarter4, 5)] {
        let r = verify_window_invariance(10_000, size, mode, SEED).map_err(|e| e.to_string())?;
        ok &= r.passed() && r.tie_trials > 0;
        notes.push(format!("{mode} F={size}: {} checks, {} failures, {} oracle mismatches", r.checks, r.failures, r.oracle_mismatches));
    }
    if ok { Ok(notes.join("; ")) } else { Err(notes.join("; ")) }
}

fn layer_equivariance() -> Result<String, String> {
    let r = verify_layer_equivariance(1000, SEED, LayerUnderTest::Rrl).map_err(|e| e.to_string())?;
    let sham = verify_layer_equivariance(1000, SEED, LayerUnderTest::Identity).map_err(|e| e.to_string())?;
    let msg = format!("worst {:.3e} over {} checks; identity stand-in worst {:.3e}", r.worst, r.checks, sham.worst);
    if r.passed() && !sham.passed() { Ok(msg) } else { Err(msg) }
}

fn model_invariance() -> Result<String, String> {
    let e = |e: rrl_core::Error| e.to_string();
    let config = NetworkConfig::preset("lenet5-rrl", 28, 1, 10).map_err(e)?;
    let random = Network::<f64>::new(&config, SEED).map_err(e)?;
    let r64 = verify_model_invariance(&random, 200, SEED).map_err(e)?;
    let r32 = verify_model_invariance(&random.cast::<f32>(), 200, SEED).map_err(e)?;

    // trained weights, through a checkpoint round trip, at both precisions
    let t = trained();
    let ckpt = Checkpoint::from_bytes(&t.rrl.to_checkpoint().to_bytes().map_err(e)?).map_err(e)?;
    let loaded = Network::<f32>::from_checkpoint(&config, &ckpt).map_err(e)?;
    let t32 = verify_model_invariance(&loaded, 50, SEED + 1).map_err(e)?;
    let t64 = verify_model_invariance(&loaded.cast::<f64>(), 50, SEED + 1).map_err(e)?;

    let no_global = verify_model_invariance(&random.with_config(&config.without_global_rrl()).map_err(e)?, 20, SEED).map_err(e)?;
    let plain = Network::<f64>::new(&NetworkConfig::preset("lenet5", 28, 1, 10).map_err(e)?, SEED).map_err(e)?;
    let no_rrl = verify_model_invariance(&plain, 20, SEED).map_err(e)?;

    let msg = format!(
        "random f64 {:.3e}, f32 {:.3e}; trained f64 {:.3e}, f32 {:.3e}; anti-tests: no globalrrl {:.3e}, no rrl {:.3e}",
        r64.worst, r32.worst, t64.worst, t32.worst, no_global.worst, no_rrl.worst
    );
    let ok = r64.passed() && r32.passed() && t64.passed() && t32.passed() && !no_global.passed() && !no_rrl.passed();
    if ok { Ok(msg) } else { Err(msg) }
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Layer-wise checks through the public API: each layer is wrapped as
/// `x -> <layer(x), w>` for a fixed random `w`.
fn layer_gradients() -> Result<f64, String> {
    use rrl_core::nn::*;
    use rrl_core::rrl::{global_rrl, rrl_backward, rrl_forward, ChannelPolicy};
    use rrl_core::WindowGrid;

    let e = |e: rrl_core::Error| e.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut rand_t = |shape: [usize; 4]| Tensor::<f64>::from_fn(shape, |_| rng.gen_range(-1.0..1.0));
    let dot = |a: &Tensor<f64>, b: &Tensor<f64>| a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum::<f64>();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut check = |x: &Tensor<f64>, analytic: &Tensor<f64>, f: &dyn Fn(&Tensor<f64>) -> f64| {
        for i in 0..x.len() {
            let (mut a, mut b) = (x.clone(), x.clone());
            a.as_mut_slice()[i] += h;
            b.as_mut_slice()[i] -= h;
            worst = worst.max(rel(analytic.as_slice()[i], (f(&a) - f(&b)) / (2.0 * h)));
        }
    };

    let x = rand_t([2, 7, 7, 3]);
    let conv = ConvParams { kernels: rand_t([4, 3, 3, 3]), bias: vec![0.1, 0.2, -0.1, 0.0], stride: 2, padding: 1 };
    let w = rand_t(conv_forward(&x, &conv).map_err(e)?.shape());
    let (gx, gp) = conv_backward(&x, &conv, &w).map_err(e)?;
    check(&x, &gx, &|x| dot(&conv_forward(x, &conv).unwrap(), &w));
    check(&conv.kernels, &gp.kernels, &|k| dot(&conv_forward(&x, &ConvParams { kernels: k.clone(), ..conv.clone() }).unwrap(), &w));

    let x = rand_t([2, 6, 6, 2]);
    let w = rand_t([2, 3, 3, 2]);
    let (_, arg) = maxpool2_forward(&x).map_err(e)?;
    check(&x, &maxpool2_backward(&w, &arg, x.shape()).map_err(e)?, &|x| dot(&maxpool2_forward(x).unwrap().0, &w));
    check(&x, &avgpool2_backward(&w, x.shape()).map_err(e)?, &|x| dot(&avgpool2_forward(x).unwrap(), &w));
    let w = rand_t(x.shape());
    check(&x, &relu_backward(&x, &w).map_err(e)?, &|x| dot(&relu_forward(x), &w));

    let x = rand_t([2, 1, 1, 6]);
    let dense = DenseParams { weights: rand_t([1, 1, 6, 4]).into_vec(), bias: vec![0.0, 0.1, 0.2, 0.3], inputs: 6, outputs: 4 };
    let w = rand_t([2, 1, 1, 4]);
    check(&x, &dense_backward(&x, &dense, &w).map_err(e)?.0, &|x| dot(&dense_forward(x, &dense).unwrap(), &w));

    let logits = rand_t([2, 1, 1, 5]);
    let (_, g) = softmax_cross_entropy(&logits, &[1, 4]).map_err(e)?;
    check(&logits, &g, &|l| softmax_cross_entropy(l, &[1, 4]).unwrap().0);

    // rotation layers: piecewise linear, differentiate where the choice holds
    let x = rand_t([1, 7, 7, 2]);
    let grid = WindowGrid::new(7, 7, 3, 2, 1).map_err(e)?;
    let (y, rec) = rrl_forward(&x, &grid, LbpMode::Ring8, ChannelPolicy::Independent).map_err(e)?;
    let w = rand_t(y.shape());
    check(&x, &rrl_backward(&w, &rec).map_err(e)?, &|x| dot(&rrl_forward(x, &grid, LbpMode::Ring8, ChannelPolicy::Independent).unwrap().0, &w));
    let x = rand_t([1, 6, 6, 3]);
    let (_, grec) = global_rrl(&x).map_err(e)?;
    let w = rand_t(x.shape());
    check(&x, &rrl_backward(&w, &grec).map_err(e)?, &|x| dot(&global_rrl(x).unwrap().0, &w));
    Ok(worst)
}

fn gradients() -> Result<String, String> {
    let layer = layer_gradients()?;
    let config = NetworkConfig::preset("lenet5-rrl", 28, 1, 10).map_err(|e| e.to_string())?;
    let net = Network::<f64>::new(&config, SEED).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let x = Tensor::from_fn([2, 28, 28, 1], |_| rng.gen_range(0.0..1.0));
    let r = gradient_check(&net, &x, &[3, 8], 300, 1e-6, SEED).map_err(|e| e.to_string())?;
    let msg = format!("layer-wise worst {layer:.3e}; lenet5-rrl worst {:.3e} over {} coords ({} skipped at kinks)", r.worst_relative, r.checked, r.skipped);
    if layer < 1e-4 && r.worst_relative < 1e-3 && r.checked >= 500 { Ok(msg) } else { Err(msg) }
}

fn trend() -> Result<String, String> {
    let t = trained();
    let (base, rrl) = (t.report.row("lenet5").unwrap(), t.report.row("lenet5-rrl").unwrap());
    let gap = 100.0 * (rrl.rot - base.rot);
    let msg = format!(
        "lenet5 upright {:.1}% rot {:.1}% rot+ {:.1}%; lenet5-rrl upright {:.1}% rot {:.1}% rot+ {:.1}% (per-prediction equal: {}); gap {gap:.1} pp",
        100.0 * base.upright,
        100.0 * base.rot,
        100.0 * base.rotplus,
        100.0 * rrl.upright,
        100.0 * rrl.rot,
        100.0 * rrl.rotplus,
        rrl.rot_matches_upright
    );
    if rrl.rot_matches_upright && rrl.rot == rrl.upright && gap >= 15.0 { Ok(msg) } else { Err(msg) }
}

fn rotplus() -> Result<String, String> {
    let t = trained();
    let images = mask_dataset(&t.test).map_err(|e| e.to_string())?.take(100);
    let angles: Vec<f64> = (1..30).map(|k| 12.0 * k as f64).collect();
    let mean = |net: &Network<f32>, x: &Tensor<f32>| -> f64 {
        angles.iter().map(|&a| feature_distance(net, x, a).unwrap()).sum::<f64>() / angles.len() as f64
    };
    let pairs: Vec<(f64, f64)> = images.images().iter().map(|x| (mean(&t.rrl, x), mean(&t.baseline, x))).collect();
    let wins = pairs.iter().filter(|(r, b)| r < b).count();
    let avg = |f: fn(&(f64, f64)) -> f64| pairs.iter().map(f).sum::<f64>() / pairs.len() as f64;
    let msg = format!(
        "RRL features closer on {wins}/100 images (mean normalized distance: lenet5-rrl {:.3}, lenet5 {:.3})",
        avg(|p| p.0),
        avg(|p| p.1)
    );
    if wins >= 80 { Ok(msg) } else { Err(msg) }
}

fn bbox() -> Result<String, String> {
    let (w, h) = (12usize, 9usize);
    let mut checked = 0;
    for x1 in 0..w {
        for x2 in x1 + 1..=w {
            for y1 in 0..h {
                for y2 in y1 + 1..=h {
                    let b = BBox::new(x1, y1, x2, y2).unwrap();
                    for n in 0..4u8 {
                        let got = rotate_bbox(b, n, w, h).map_err(|e| e.to_string())?;
                        if got != mask_oracle(b, n, w, h) {
                            return Err(format!("{b} turned {n}: got {got}"));
                        }
                        checked += 1;
                    }
                    let (mut r, mut cw, mut ch) = (b, w, h);
                    for _ in 0..4 {
                        r = rotate_bbox(r, 1, cw, ch).unwrap();
                        (cw, ch) = (ch, cw);
                    }
                    if r != b {
                        return Err(format!("{b}: four turns gave {r}"));
                    }
                }
            }
        }
    }
    Ok(format!("{checked} box/turn pairs match the mask oracle"))
}

fn mask_oracle(b: BBox, n: u8, w: usize, h: usize) -> BBox {
    let mask = Tensor::<f32>::from_fn([1, h, w, 1], |[_, y, x, _]| {
        ((b.x1..b.x2).contains(&x) && (b.y1..b.y2).contains(&y)) as u8 as f32
    });
    let r = mask.rot90(n as i64);
    let (mut x1, mut y1, mut x2, mut y2) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..r.height() {
        for x in 0..r.width() {
            if r[[0, y, x, 0]] == 1.0 {
                (x1, y1, x2, y2) = (x1.min(x), y1.min(y), x2.max(x + 1), y2.max(y + 1));
            }
        }
    }
    BBox { x1, y1, x2, y2 }
}

fn determinism() -> Result<String, String> {
    let e = |e: rrl_core::Error| e.to_string();
    let w1 = format!("{:?}", verify_window_invariance(2000, 5, LbpMode::Quarter4, SEED).map_err(e)?);
    let w2 = format!("{:?}", verify_window_invariance(2000, 5, LbpMode::Quarter4, SEED).map_err(e)?);
    let l1 = format!("{:?}", verify_layer_equivariance(200, SEED, LayerUnderTest::Rrl).map_err(e)?);
    let l2 = format!("{:?}", verify_layer_equivariance(200, SEED, LayerUnderTest::Rrl).map_err(e)?);

    // the trend run again from scratch on one thread: same checkpoints, same table
    let t = trained();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let (report, nets, _) = pool.install(run_trend);
    let same_table = report.to_csv() == t.report.to_csv() && report.to_markdown() == t.report.to_markdown();
    let same_weights = nets[0].to_checkpoint().to_bytes().map_err(e)? == t.baseline.to_checkpoint().to_bytes().map_err(e)?
        && nets[1].to_checkpoint().to_bytes().map_err(e)? == t.rrl.to_checkpoint().to_bytes().map_err(e)?;
    let ok = w1 == w2 && l1 == l2 && same_table && same_weights;
    let msg = format!("suite reports equal: {}; trend table equal: {same_table}; checkpoints equal: {same_weights}", w1 == w2 && l1 == l2);
    if ok { Ok(msg) } else { Err(msg) }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<String, String>); 8] = [
        ("1 window invariance", window_invariance),
        ("2 layer equivariance", layer_equivariance),
        ("3 end-to-end invariance", model_invariance),
        ("4 gradient correctness", gradients),
        ("5 quarter-turn accuracy trend", trend),
        ("6 rot+ feature distance trend", rotplus),
        ("7 bbox transform", bbox),
        ("8 determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("PASS criterion {name} ({secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {msg}");
            }
        }
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
