use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::models::Network;
use crate::nn::softmax_cross_entropy;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    pub checked: usize,
    /// Coordinates whose perturbation changed a rotation, pooling winner or
    /// ReLU mask, so the loss is not smooth there.
    pub skipped: usize,
    /// Worst `|a - n| / max(|a|, |n|, 1e-6)`.
    pub worst_relative: f64,
}

/// Central differences of the mean cross-entropy against backpropagation,
/// for `coords` randomly chosen parameter entries and `coords` input entries.
pub fn gradient_check(
    net: &Network<f64>,
    x: &Tensor<f64>,
    labels: &[usize],
    coords: usize,
    step: f64,
    seed: u64,
) -> Result<GradientReport> {
    let trace = net.forward(x)?;
    let signature = trace.signature();
    let (_, g) = softmax_cross_entropy(trace.logits(), labels)?;
    let analytic = net.backward(&trace, &g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradientReport { checked: 0, skipped: 0, worst_relative: 0.0 };
    let mut record = |plus: Result<(f64, Vec<u64>)>, minus: Result<(f64, Vec<u64>)>, a: f64| -> Result<()> {
        let ((lp, sp), (lm, sm)) = (plus?, minus?);
        if sp != signature || sm != signature {
            report.skipped += 1;
            return Ok(());
        }
        let n = (lp - lm) / (2.0 * step);
        report.checked += 1;
        report.worst_relative = report.worst_relative.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        Ok(())
    };
    let eval = |net: &Network<f64>, x: &Tensor<f64>| -> Result<(f64, Vec<u64>)> {
        let t = net.forward(x)?;
        Ok((softmax_cross_entropy(t.logits(), labels)?.0, t.signature()))
    };

    let sizes: Vec<usize> = net.params().iter().map(|(_, _, v)| v.len()).collect();
    let total: usize = sizes.iter().sum();
    for flat in sample(&mut rng, total, coords.min(total)).into_vec() {
        let (mut array, mut index) = (0, flat);
        while index >= sizes[array] {
            index -= sizes[array];
            array += 1;
        }
        let mut plus = net.clone();
        plus.params_mut()[array][index] += step;
        let mut minus = net.clone();
        minus.params_mut()[array][index] -= step;
        record(eval(&plus, x), eval(&minus, x), analytic.params[array][index])?;
    }
    for i in sample(&mut rng, x.len(), coords.min(x.len())).into_vec() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.as_mut_slice()[i] += step;
        xm.as_mut_slice()[i] -= step;
        record(eval(net, &xp), eval(net, &xm), analytic.input.as_slice()[i])?;
    }
    Ok(report)
}
