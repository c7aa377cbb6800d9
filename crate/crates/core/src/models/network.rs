use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{LayerSpec, NetworkConfig};
use crate::error::{Error, Result};
use crate::lbp::LbpMode;
use crate::nn::{
    avgpool2_backward, avgpool2_forward, conv_backward, conv_forward, dense_backward, dense_forward, maxpool2_backward,
    maxpool2_forward, relu_backward, relu_forward, softmax_cross_entropy, Checkpoint, ConvParams, DenseParams,
    ParamRecord,
};
use crate::rrl::{global_rrl, rrl_backward, rrl_forward, ChannelPolicy, RotationRecord};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, WindowGrid};

#[derive(Clone, Debug, PartialEq)]
enum Layer<T> {
    Rrl { grid: WindowGrid, mode: LbpMode, policy: ChannelPolicy },
    Conv(ConvParams<T>),
    MaxPool,
    AvgPool,
    Relu,
    GlobalRrl,
    Flatten,
    Dense(DenseParams<T>),
    Softmax,
}

/// A built network: the config plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    config: NetworkConfig,
    layers: Vec<Layer<T>>,
}

/// Per-layer side information a forward pass keeps for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub enum Aux {
    None,
    Rotations(RotationRecord),
    Argmax(Vec<usize>),
    /// The layer is a ReLU; its input holds the mask.
    Relu,
}

/// Everything one forward pass produced. `activations[0]` is the input and
/// `activations[i + 1]` the output of layer `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<T> {
    pub activations: Vec<Tensor<T>>,
    pub aux: Vec<Aux>,
}

impl<T: Scalar> Trace<T> {
    pub fn logits(&self) -> &Tensor<T> {
        self.activations.last().expect("trace holds the input")
    }

    /// The discrete choices of the pass: rotations, pooling winners and ReLU
    /// activity. Two passes with equal signatures ran the same piecewise-linear
    /// branch, so finite differences between them are free of kinks.
    pub fn signature(&self) -> Vec<u64> {
        let mut sig = Vec::new();
        for (i, aux) in self.aux.iter().enumerate() {
            match aux {
                Aux::Rotations(r) => sig.extend(r.rotations().iter().map(|&k| k as u64)),
                Aux::Argmax(a) => sig.extend(a.iter().map(|&k| k as u64)),
                Aux::Relu => sig.extend(self.activations[i].as_slice().iter().map(|&v| (v > T::zero()) as u64)),
                Aux::None => {}
            }
        }
        sig
    }
}

/// Gradients of every parameter array (in [`Network::param_names`] order)
/// and of the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub params: Vec<Vec<T>>,
    pub input: Tensor<T>,
}

impl<T: Scalar> Network<T> {
    /// Builds the network with Glorot-uniform weights and zero biases drawn
    /// from `seed`.
    pub fn new(config: &NetworkConfig, seed: u64) -> Result<Self> {
        let shapes = config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(config.layers.len());
        let mut shape = config.input;
        for (i, spec) in config.layers.iter().enumerate() {
            let [h, w, c] = shape;
            layers.push(match *spec {
                LayerSpec::Rrl { mode, policy, stride, padding } => {
                    let Some(&LayerSpec::Conv { size, .. }) = config.layers.get(i + 1) else { unreachable!("validated") };
                    Layer::Rrl { grid: WindowGrid::new(h, w, size, stride, padding)?, mode, policy }
                }
                LayerSpec::Conv { size, out_channels, stride, padding } => {
                    Layer::Conv(ConvParams::glorot(&mut rng, size, c, out_channels, stride, padding))
                }
                LayerSpec::MaxPool => Layer::MaxPool,
                LayerSpec::AvgPool => Layer::AvgPool,
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::GlobalRrl => Layer::GlobalRrl,
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Dense { outputs } => Layer::Dense(DenseParams::glorot(&mut rng, h * w * c, outputs)),
                LayerSpec::Softmax => Layer::Softmax,
            });
            shape = shapes[i];
        }
        Ok(Network { config: config.clone(), layers })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Same network, parameters converted to another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Rrl { grid, mode, policy } => Layer::Rrl { grid: *grid, mode: *mode, policy: *policy },
                Layer::Conv(p) => Layer::Conv(ConvParams {
                    kernels: p.kernels.cast(),
                    bias: p.bias.iter().map(|&b| U::of(b.as_f64())).collect(),
                    stride: p.stride,
                    padding: p.padding,
                }),
                Layer::MaxPool => Layer::MaxPool,
                Layer::AvgPool => Layer::AvgPool,
                Layer::Relu => Layer::Relu,
                Layer::GlobalRrl => Layer::GlobalRrl,
                Layer::Flatten => Layer::Flatten,
                Layer::Dense(p) => Layer::Dense(DenseParams {
                    weights: p.weights.iter().map(|&v| U::of(v.as_f64())).collect(),
                    bias: p.bias.iter().map(|&v| U::of(v.as_f64())).collect(),
                    inputs: p.inputs,
                    outputs: p.outputs,
                }),
                Layer::Softmax => Layer::Softmax,
            })
            .collect();
        Network { config: self.config.clone(), layers }
    }

    /// Copies this network's parameters into a network built from
    /// `config`, which must have the same parameter layout.
    pub fn with_config(&self, config: &NetworkConfig) -> Result<Self> {
        let mut net = Network::new(config, 0)?;
        net.load_params(&self.to_checkpoint())?;
        Ok(net)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let [h, w, c] = self.config.input;
        if x.shape()[1..] != [h, w, c] {
            return Err(Error::Shape(format!("network expects [N, {h}, {w}, {c}] input, got {:?}", x.shape())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Trace<T>> {
        self.check_input(x)?;
        let mut activations = vec![x.clone()];
        let mut aux = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = activations.last().unwrap();
            let (out, extra) = match layer {
                Layer::Rrl { grid, mode, policy } => {
                    let (y, rec) = rrl_forward(input, grid, *mode, *policy)?;
                    (y, Aux::Rotations(rec))
                }
                Layer::Conv(p) => (conv_forward(input, p)?, Aux::None),
                Layer::MaxPool => {
                    let (y, arg) = maxpool2_forward(input)?;
                    (y, Aux::Argmax(arg))
                }
                Layer::AvgPool => (avgpool2_forward(input)?, Aux::None),
                Layer::Relu => (relu_forward(input), Aux::Relu),
                Layer::GlobalRrl => {
                    let (y, rec) = global_rrl(input)?;
                    (y, Aux::Rotations(rec))
                }
                Layer::Flatten => (input.clone().reshape([input.batch(), 1, 1, input.per_sample()])?, Aux::None),
                Layer::Dense(p) => (dense_forward(input, p)?, Aux::None),
                Layer::Softmax => (input.clone(), Aux::None),
            };
            activations.push(out);
            aux.push(extra);
        }
        Ok(Trace { activations, aux })
    }

    pub fn logits(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x)?.activations.pop().unwrap())
    }

    /// Index of the first dense layer: its input is the pre-classifier
    /// feature vector.
    pub fn feature_layer(&self) -> usize {
        self.layers.iter().position(|l| matches!(l, Layer::Dense(_))).unwrap_or(self.layers.len())
    }

    /// Flattened pre-classifier features, `[N, 1, 1, D]`.
    pub fn features(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let trace = self.forward(x)?;
        let f = &trace.activations[self.feature_layer()];
        f.clone().reshape([f.batch(), 1, 1, f.per_sample()])
    }

    /// Backpropagates `grad_logits` through the pass recorded in `trace`.
    pub fn backward(&self, trace: &Trace<T>, grad_logits: &Tensor<T>) -> Result<Gradients<T>> {
        if trace.activations.len() != self.layers.len() + 1 || trace.aux.len() != self.layers.len() {
            return Err(Error::Shape("trace does not belong to this network".into()));
        }
        if grad_logits.shape() != trace.logits().shape() {
            return Err(Error::Shape(format!("gradient {:?} for logits {:?}", grad_logits.shape(), trace.logits().shape())));
        }
        let mut grad = grad_logits.clone();
        let mut params_rev: Vec<Vec<T>> = Vec::new();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.activations[i];
            grad = match (layer, &trace.aux[i]) {
                (Layer::Rrl { .. } | Layer::GlobalRrl, Aux::Rotations(rec)) => rrl_backward(&grad, rec)?,
                (Layer::Conv(p), _) => {
                    let (gx, g) = conv_backward(x, p, &grad)?;
                    params_rev.push(g.bias);
                    params_rev.push(g.kernels.into_vec());
                    gx
                }
                (Layer::MaxPool, Aux::Argmax(arg)) => maxpool2_backward(&grad, arg, x.shape())?,
                (Layer::AvgPool, _) => avgpool2_backward(&grad, x.shape())?,
                (Layer::Relu, _) => relu_backward(x, &grad)?,
                (Layer::Flatten, _) => grad.reshape(x.shape())?,
                (Layer::Dense(p), _) => {
                    let (gx, g) = dense_backward(x, p, &grad)?;
                    params_rev.push(g.bias);
                    params_rev.push(g.weights);
                    gx
                }
                (Layer::Softmax, _) => grad,
                _ => return Err(Error::Shape(format!("trace entry {i} does not match layer kind"))),
            };
        }
        params_rev.reverse();
        Ok(Gradients { params: params_rev, input: grad })
    }

    /// Mean cross-entropy of a batch and its gradients.
    pub fn loss_and_gradients(&self, x: &Tensor<T>, labels: &[usize]) -> Result<(T, Gradients<T>)> {
        let trace = self.forward(x)?;
        let (loss, g) = softmax_cross_entropy(trace.logits(), labels)?;
        Ok((loss, self.backward(&trace, &g)?))
    }

    /// Names of the parameter arrays, numbered per layer kind: `conv1.kernels`,
    /// `conv1.bias`, ..., `dense1.weights`, ...
    pub fn param_names(&self) -> Vec<String> {
        self.params().into_iter().map(|(name, _, _)| name).collect()
    }

    /// `(name, shape, values)` for every parameter array in layer order.
    pub fn params(&self) -> Vec<(String, Vec<usize>, &[T])> {
        let mut out = Vec::new();
        let (mut convs, mut denses) = (0, 0);
        for layer in &self.layers {
            match layer {
                Layer::Conv(p) => {
                    convs += 1;
                    out.push((format!("conv{convs}.kernels"), p.kernels.shape().to_vec(), p.kernels.as_slice()));
                    out.push((format!("conv{convs}.bias"), vec![p.bias.len()], &p.bias[..]));
                }
                Layer::Dense(p) => {
                    denses += 1;
                    out.push((format!("dense{denses}.weights"), vec![p.inputs, p.outputs], &p.weights[..]));
                    out.push((format!("dense{denses}.bias"), vec![p.outputs], &p.bias[..]));
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(p) => {
                    out.push(p.kernels.as_mut_slice());
                    out.push(&mut p.bias[..]);
                }
                Layer::Dense(p) => {
                    out.push(&mut p.weights[..]);
                    out.push(&mut p.bias[..]);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, _, v)| v.len()).sum()
    }

    /// `params -= lr * grads` for every array.
    pub fn sgd_step(&mut self, grads: &[Vec<T>], lr: T) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != grads.len() {
            return Err(Error::Shape(format!("{} parameter arrays, {} gradients", params.len(), grads.len())));
        }
        for (p, g) in params.iter_mut().zip(grads) {
            crate::nn::sgd_step(p, g, lr)?;
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            precision: T::BITS,
            params: self
                .params()
                .into_iter()
                .map(|(name, shape, values)| ParamRecord { name, shape, values: values.iter().map(|v| v.as_f64()).collect() })
                .collect(),
        }
    }

    /// Overwrites parameters from a checkpoint with matching names and shapes.
    pub fn load_params(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = self.params().into_iter().map(|(n, s, _)| (n, s)).collect();
        if expected.len() != ckpt.params.len() {
            return Err(Error::Checkpoint(format!("network has {} parameter arrays, checkpoint {}", expected.len(), ckpt.params.len())));
        }
        for ((name, shape), rec) in expected.iter().zip(&ckpt.params) {
            if *name != rec.name || *shape != rec.shape {
                return Err(Error::Checkpoint(format!("expected {name} {shape:?}, found {} {:?}", rec.name, rec.shape)));
            }
        }
        for (dst, rec) in self.params_mut().into_iter().zip(&ckpt.params) {
            for (d, &v) in dst.iter_mut().zip(&rec.values) {
                *d = T::of(v);
            }
        }
        Ok(())
    }

    pub fn from_checkpoint(config: &NetworkConfig, ckpt: &Checkpoint) -> Result<Self> {
        let mut net = Network::new(config, 0)?;
        net.load_params(ckpt)?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_input(n: usize, size: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn([n, size, size, 1], |_| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn logit_count_and_params() {
        let c = NetworkConfig::preset("lenet5", 28, 1, 10).unwrap();
        let net = Network::<f64>::new(&c, 1).unwrap();
        assert_eq!(net.logits(&random_input(2, 28, 0)).unwrap().shape(), [2, 1, 1, 10]);
        assert_eq!(net.param_count(), 6 * 25 + 6 + 16 * 150 + 16 + 400 * 120 + 120 + 120 * 84 + 84 + 84 * 10 + 10);
        assert!(net.logits(&random_input(1, 27, 0)).is_err());
    }

    #[test]
    fn rrl_preset_is_invariant_plain_is_not() {
        let x = random_input(1, 28, 3);
        let rrl = Network::<f64>::new(&NetworkConfig::preset("lenet5-rrl", 28, 1, 10).unwrap(), 2).unwrap();
        let plain = Network::<f64>::new(&NetworkConfig::preset("lenet5", 28, 1, 10).unwrap(), 2).unwrap();
        let y = rrl.logits(&x).unwrap();
        for n in 1..4 {
            assert!(rrl.logits(&x.rot90(n)).unwrap().max_abs_diff(&y).unwrap() <= 1e-12);
        }
        assert!(plain.logits(&x.rot90(1)).unwrap().max_abs_diff(&plain.logits(&x).unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn batch_is_concatenation_of_singles() {
        let net = Network::<f64>::new(&NetworkConfig::preset("lenet5-rrl", 28, 1, 10).unwrap(), 4).unwrap();
        let x = random_input(2, 28, 5);
        let both = net.logits(&x).unwrap();
        let singles = Tensor::stack(&[net.logits(&x.sample(0)).unwrap(), net.logits(&x.sample(1)).unwrap()]).unwrap();
        assert_eq!(both, singles);
    }

    #[test]
    fn checkpoint_round_trip_and_cast() {
        let c = NetworkConfig::preset("lenet5-rrl", 28, 1, 10).unwrap();
        let net = Network::<f32>::new(&c, 9).unwrap();
        let ckpt = Checkpoint::from_bytes(&net.to_checkpoint().to_bytes().unwrap()).unwrap();
        assert_eq!(Network::<f32>::from_checkpoint(&c, &ckpt).unwrap(), net);
        assert_eq!(net.cast::<f64>().cast::<f32>(), net);
        let other = NetworkConfig::preset("lenet5-rrl", 28, 1, 7).unwrap();
        assert!(Network::<f32>::from_checkpoint(&other, &ckpt).is_err());
        assert!(net.with_config(&c.without_global_rrl()).is_ok());
    }

    #[test]
    fn seeds_are_reproducible() {
        let c = NetworkConfig::preset("lenet5", 28, 1, 10).unwrap();
        assert_eq!(Network::<f32>::new(&c, 1).unwrap(), Network::<f32>::new(&c, 1).unwrap());
        assert_ne!(Network::<f32>::new(&c, 1).unwrap(), Network::<f32>::new(&c, 2).unwrap());
    }
}
