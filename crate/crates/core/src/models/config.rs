use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lbp::LbpMode;
use crate::rrl::ChannelPolicy;
use crate::tensor::WindowGrid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn bits(self) -> u8 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            32 => Some(Precision::F32),
            64 => Some(Precision::F64),
            _ => None,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits())
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.parse::<u8>().ok().and_then(Precision::from_bits).ok_or_else(|| format!("precision must be 32 or 64, got `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    /// Window canonicalization. The window size is taken from the following
    /// convolution, which must consume the tiling (stride = size, no padding).
    Rrl { mode: LbpMode, policy: ChannelPolicy, stride: usize, padding: usize },
    Conv { size: usize, out_channels: usize, stride: usize, padding: usize },
    MaxPool,
    AvgPool,
    Relu,
    GlobalRrl,
    Flatten,
    Dense { outputs: usize },
    /// Marks the logits as class scores. The network itself outputs logits;
    /// the loss applies softmax.
    Softmax,
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Rrl { mode, policy, stride, padding } => write!(f, "rrl {mode} {policy} {stride} {padding}"),
            LayerSpec::Conv { size, out_channels, stride, padding } => write!(f, "conv {size} {out_channels} {stride} {padding}"),
            LayerSpec::MaxPool => f.write_str("maxpool"),
            LayerSpec::AvgPool => f.write_str("avgpool"),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::GlobalRrl => f.write_str("globalrrl"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::Dense { outputs } => write!(f, "dense {outputs}"),
            LayerSpec::Softmax => f.write_str("softmax"),
        }
    }
}

/// Preset names accepted by [`NetworkConfig::preset`].
pub const PRESETS: [&str; 3] = ["lenet5", "lenet5-rrl", "lenet5-rrl-shared"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    /// `(height, width, channels)` of one input image.
    pub input: [usize; 3],
    pub classes: usize,
    pub precision: Precision,
    pub layers: Vec<LayerSpec>,
}

impl NetworkConfig {
    /// LeNet-5 variants for `size x size x channels` inputs (`size` must be
    /// 28 or 32 for the shapes to work out).
    pub fn preset(name: &str, size: usize, channels: usize, classes: usize) -> Result<Self> {
        use LayerSpec::*;
        let pad = if size == 28 { 2 } else { 0 };
        let rrl = |policy, padding| Rrl { mode: LbpMode::Quarter4, policy, stride: 1, padding };
        let layers = match name {
            "lenet5" => vec![
                Conv { size: 5, out_channels: 6, stride: 1, padding: pad },
                Relu,
                MaxPool,
                Conv { size: 5, out_channels: 16, stride: 1, padding: 0 },
                Relu,
                MaxPool,
                Flatten,
                Dense { outputs: 120 },
                Relu,
                Dense { outputs: 84 },
                Relu,
                Dense { outputs: classes },
            ],
            "lenet5-rrl" | "lenet5-rrl-shared" => {
                let policy = if name == "lenet5-rrl" { ChannelPolicy::Independent } else { ChannelPolicy::Shared };
                vec![
                    rrl(policy, pad),
                    Conv { size: 5, out_channels: 6, stride: 5, padding: 0 },
                    Relu,
                    MaxPool,
                    rrl(policy, 0),
                    Conv { size: 5, out_channels: 16, stride: 5, padding: 0 },
                    Relu,
                    MaxPool,
                    GlobalRrl,
                    Flatten,
                    Dense { outputs: 120 },
                    Relu,
                    Dense { outputs: 84 },
                    Relu,
                    Dense { outputs: classes },
                ]
            }
            _ => return Err(Error::Config { line: 0, message: format!("unknown preset `{name}` (known: {})", PRESETS.join(", ")) }),
        };
        let config = NetworkConfig { input: [size, size, channels], classes, precision: Precision::F32, layers };
        config.validate()?;
        Ok(config)
    }

    /// Parses the line-oriented text format:
    ///
    /// ```text
    /// input 28 28 1
    /// classes 10
    /// precision 32
    /// layer rrl quarter4 independent 1 2
    /// layer conv 5 6 5
    /// layer maxpool
    /// ```
    ///
    /// `rrl` takes mode, policy and optional stride and padding (default 1
    /// and 0); `conv` takes size, output channels, stride and optional
    /// padding. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut input = None;
        let mut classes = None;
        let mut precision = None;
        let mut layers = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| Error::Config { line, message };
            let content = raw.split('#').next().unwrap_or("");
            let words: Vec<&str> = content.split_whitespace().collect();
            let Some((&key, args)) = words.split_first() else { continue };
            let nums = |args: &[&str], min: usize, max: usize| -> Result<Vec<usize>> {
                if args.len() < min || args.len() > max {
                    return Err(err(format!("`{key}` expects {min}..={max} numbers, got {}", args.len())));
                }
                args.iter().map(|a| a.parse::<usize>().map_err(|_| err(format!("`{a}` is not a non-negative integer")))).collect()
            };
            match key {
                "input" => {
                    if input.is_some() {
                        return Err(err("duplicate `input`".into()));
                    }
                    let v = nums(args, 3, 3)?;
                    input = Some([v[0], v[1], v[2]]);
                }
                "classes" => {
                    if classes.is_some() {
                        return Err(err("duplicate `classes`".into()));
                    }
                    classes = Some(nums(args, 1, 1)?[0]);
                }
                "precision" => {
                    if precision.is_some() {
                        return Err(err("duplicate `precision`".into()));
                    }
                    let [p] = args else { return Err(err("`precision` expects 32 or 64".into())) };
                    precision = Some(p.parse::<Precision>().map_err(err)?);
                }
                "layer" => layers.push(parse_layer(args).map_err(err)?),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        let missing = |what: &str| Error::Config { line: 0, message: format!("missing `{what}` line") };
        let config = NetworkConfig {
            input: input.ok_or_else(|| missing("input"))?,
            classes: classes.ok_or_else(|| missing("classes"))?,
            precision: precision.unwrap_or_default(),
            layers,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_text(&self) -> String {
        let [h, w, c] = self.input;
        let mut s = format!("input {h} {w} {c}\nclasses {}\nprecision {}\n", self.classes, self.precision);
        for l in &self.layers {
            s.push_str(&format!("layer {l}\n"));
        }
        s
    }

    /// Checks layer ordering rules and propagates shapes. Returns the output
    /// shape `(height, width, channels)` of every layer.
    pub fn validate(&self) -> Result<Vec<[usize; 3]>> {
        let bad = |index: usize, message: String| Error::Layer { index, message };
        let [h0, w0, c0] = self.input;
        if h0 == 0 || w0 == 0 || c0 == 0 {
            return Err(bad(0, format!("input {h0}x{w0}x{c0} has an empty dimension")));
        }
        if self.classes == 0 {
            return Err(bad(0, "class count must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(bad(0, "no layers".into()));
        }
        let has_rotation = self.layers.iter().any(|l| matches!(l, LayerSpec::Rrl { .. } | LayerSpec::GlobalRrl));
        if has_rotation && h0 != w0 {
            return Err(bad(0, format!("rotation layers need square inputs, got {h0}x{w0}")));
        }
        let mut shape = self.input;
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut seen_global = false;
        let mut seen_flat = false;
        for (i, layer) in self.layers.iter().enumerate() {
            let [h, w, c] = shape;
            shape = match *layer {
                LayerSpec::Rrl { mode, stride, padding, .. } => {
                    let Some(&LayerSpec::Conv { size, stride: cs, padding: cp, .. }) = self.layers.get(i + 1) else {
                        return Err(bad(i, "rrl must be immediately followed by a conv".into()));
                    };
                    if cs != size || cp != 0 {
                        return Err(bad(i + 1, format!("conv after rrl must have stride {size} and no padding to consume the tiling")));
                    }
                    mode.check_window(size).map_err(|e| bad(i, e.to_string()))?;
                    if h != w {
                        return Err(bad(i, format!("rrl needs a square map, got {h}x{w}")));
                    }
                    let g = WindowGrid::new(h, w, size, stride, padding).map_err(|e| bad(i, e.to_string()))?;
                    [size * g.out_h(), size * g.out_w(), c]
                }
                LayerSpec::Conv { size, out_channels, stride, padding } => {
                    if out_channels == 0 {
                        return Err(bad(i, "conv needs at least one output channel".into()));
                    }
                    let g = WindowGrid::new(h, w, size, stride, padding).map_err(|e| bad(i, e.to_string()))?;
                    [g.out_h(), g.out_w(), out_channels]
                }
                LayerSpec::MaxPool | LayerSpec::AvgPool => {
                    if h % 2 != 0 || w % 2 != 0 {
                        return Err(bad(i, format!("2x2 pooling needs even sides, got {h}x{w}")));
                    }
                    [h / 2, w / 2, c]
                }
                LayerSpec::Relu => shape,
                LayerSpec::GlobalRrl => {
                    if seen_global {
                        return Err(bad(i, "at most one globalrrl".into()));
                    }
                    if seen_flat {
                        return Err(bad(i, "globalrrl must come before flatten and dense layers".into()));
                    }
                    if h != w {
                        return Err(bad(i, format!("globalrrl needs a square map, got {h}x{w}")));
                    }
                    seen_global = true;
                    shape
                }
                LayerSpec::Flatten => {
                    seen_flat = true;
                    [1, 1, h * w * c]
                }
                LayerSpec::Dense { outputs } => {
                    if h != 1 || w != 1 {
                        return Err(bad(i, format!("dense needs a flattened input, got {h}x{w}x{c}")));
                    }
                    if outputs == 0 {
                        return Err(bad(i, "dense needs at least one output".into()));
                    }
                    seen_flat = true;
                    [1, 1, outputs]
                }
                LayerSpec::Softmax => {
                    if i + 1 != self.layers.len() {
                        return Err(bad(i, "softmax must be the last layer".into()));
                    }
                    shape
                }
            };
            if matches!(layer, LayerSpec::Conv { .. } | LayerSpec::MaxPool | LayerSpec::AvgPool | LayerSpec::Rrl { .. }) && seen_flat {
                return Err(bad(i, "spatial layer after flatten".into()));
            }
            shapes.push(shape);
        }
        let last = self.layers.len() - 1;
        if shape != [1, 1, self.classes] {
            return Err(bad(last, format!("network ends in {:?}, expected [1, 1, {}]", shape, self.classes)));
        }
        Ok(shapes)
    }

    pub fn rotation_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, LayerSpec::Rrl { .. } | LayerSpec::GlobalRrl)).count()
    }

    /// The same network with the global RRL removed (parameters line up, so a
    /// checkpoint of the full network loads into it).
    pub fn without_global_rrl(&self) -> Self {
        let mut c = self.clone();
        c.layers.retain(|l| *l != LayerSpec::GlobalRrl);
        c
    }
}

fn parse_layer(args: &[&str]) -> std::result::Result<LayerSpec, String> {
    let Some((&kind, rest)) = args.split_first() else { return Err("`layer` needs a type".into()) };
    let nums = |min: usize, max: usize| -> std::result::Result<Vec<usize>, String> {
        if rest.len() < min || rest.len() > max {
            return Err(format!("`layer {kind}` expects {min}..={max} arguments, got {}", rest.len()));
        }
        rest.iter().map(|a| a.parse::<usize>().map_err(|_| format!("`{a}` is not a non-negative integer"))).collect()
    };
    let bare = |spec: LayerSpec| if rest.is_empty() { Ok(spec) } else { Err(format!("`layer {kind}` takes no arguments")) };
    match kind {
        "rrl" => {
            if rest.len() != 2 && rest.len() != 4 {
                return Err("`layer rrl` expects <mode> <policy> [stride padding]".into());
            }
            let mode: LbpMode = rest[0].parse()?;
            let policy: ChannelPolicy = rest[1].parse()?;
            let (stride, padding) = if rest.len() == 4 {
                let p = |a: &str| a.parse::<usize>().map_err(|_| format!("`{a}` is not a non-negative integer"));
                (p(rest[2])?, p(rest[3])?)
            } else {
                (1, 0)
            };
            Ok(LayerSpec::Rrl { mode, policy, stride, padding })
        }
        "conv" => {
            let v = nums(3, 4)?;
            Ok(LayerSpec::Conv { size: v[0], out_channels: v[1], stride: v[2], padding: v.get(3).copied().unwrap_or(0) })
        }
        "dense" => Ok(LayerSpec::Dense { outputs: nums(1, 1)?[0] }),
        "maxpool" => bare(LayerSpec::MaxPool),
        "avgpool" => bare(LayerSpec::AvgPool),
        "relu" => bare(LayerSpec::Relu),
        "globalrrl" => bare(LayerSpec::GlobalRrl),
        "flatten" => bare(LayerSpec::Flatten),
        "softmax" => bare(LayerSpec::Softmax),
        other => Err(format!("unknown layer type `{other}`")),
    }
}
