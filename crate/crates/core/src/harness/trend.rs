use crate::data::{make_rot_testset, make_rotplus_testset, mask_dataset, Dataset};
use crate::error::Result;
use crate::models::{evaluate, train, Network, NetworkConfig, TrainConfig};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TrendRow {
    pub model: String,
    pub upright: f64,
    pub rot: f64,
    pub rotplus: f64,
    /// Rot-set predictions identical to upright predictions, image by image.
    pub rot_matches_upright: bool,
    pub upright_predictions: Vec<usize>,
    pub rot_predictions: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
}

impl TrendReport {
    pub fn row(&self, model: &str) -> Option<&TrendRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| model | upright | rot | rot+ |\n|---|---|---|---|\n");
        for r in &self.rows {
            s.push_str(&format!("| {} | {:.1} | {:.1} | {:.1} |\n", r.model, 100.0 * r.upright, 100.0 * r.rot, 100.0 * r.rotplus));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,upright,rot,rotplus\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.6},{:.6},{:.6}\n", r.model, r.upright, r.rot, r.rotplus));
        }
        s
    }
}

/// Trains every `(name, config)` on masked upright `train_set` and scores it
/// on the masked upright test set and its rot and rot+ versions.
pub fn trend_experiment<T: Scalar>(
    train_set: &Dataset<T>,
    test_set: &Dataset<T>,
    configs: &[(String, NetworkConfig)],
    train_config: &TrainConfig,
    init_seed: u64,
    test_seed: u64,
) -> Result<(TrendReport, Vec<Network<T>>)> {
    let train_set = mask_dataset(train_set)?;
    let upright = mask_dataset(test_set)?;
    let rot = make_rot_testset(test_set, test_seed)?;
    let rotplus = make_rotplus_testset(test_set, test_seed)?;
    let mut rows = Vec::new();
    let mut nets = Vec::new();
    for (name, config) in configs {
        let mut net = Network::<T>::new(config, init_seed)?;
        train(&mut net, &train_set, train_config)?;
        let up = evaluate(&net, &upright)?;
        let r = evaluate(&net, &rot)?;
        let rp = evaluate(&net, &rotplus)?;
        rows.push(TrendRow {
            model: name.clone(),
            upright: up.accuracy(),
            rot: r.accuracy(),
            rotplus: rp.accuracy(),
            rot_matches_upright: up.predictions == r.predictions,
            upright_predictions: up.predictions,
            rot_predictions: r.predictions,
        });
        nets.push(net);
    }
    Ok((TrendReport { rows }, nets))
}
