//! Layer graphs, train types, and the two stock architectures.
//!
//! A [`NetworkSpec`] is a flat, ordered list of layers. Layers before a
//! `SplitHalves` run on the shared trunk; after the split every layer is tagged
//! with the stream it belongs to, and `DuelingAggregate` merges the value and
//! advantage streams back into one Q-vector. A spec without a split is a plain
//! feed-forward stack whose last layer emits the Q-vector directly.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d { kernel: usize, stride: usize, padding: usize, in_channels: usize, out_channels: usize },
    MaxPool2d { kernel: usize, stride: usize },
    Relu,
    Flatten,
    Dense { fan_in: usize, fan_out: usize },
    SplitHalves,
    DuelingAggregate,
}

impl LayerKind {
    pub fn has_weights(&self) -> bool {
        matches!(self, LayerKind::Conv2d { .. } | LayerKind::Dense { .. })
    }

    /// `(weight shape, bias length)` for parametrised layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, usize)> {
        match *self {
            LayerKind::Conv2d { kernel, in_channels, out_channels, .. } => {
                Some((vec![kernel, kernel, in_channels, out_channels], out_channels))
            }
            LayerKind::Dense { fan_in, fan_out } => Some((vec![fan_in, fan_out], fan_out)),
            _ => None,
        }
    }

    /// Weight plus bias count.
    pub fn weight_count(&self) -> u64 {
        match self.param_shapes() {
            Some((w, b)) => w.iter().product::<usize>() as u64 + b as u64,
            None => 0,
        }
    }
}

/// Which branch of a dueling network a layer runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Trunk,
    Value,
    Advantage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub stream: Stream,
    pub trainable: bool,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self { name: name.into(), kind, stream: Stream::Trunk, trainable: true }
    }

    pub fn on(mut self, stream: Stream) -> Self {
        self.stream = stream;
        self
    }
}

/// How many fully connected layer groups are fine-tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainType {
    E2e,
    Last4,
    Last3,
    Last2,
}

impl TrainType {
    pub const ALL: [TrainType; 4] = [TrainType::E2e, TrainType::Last4, TrainType::Last3, TrainType::Last2];

    /// Number of trailing FC groups trained, `None` for end-to-end.
    pub fn trained_groups(self) -> Option<usize> {
        match self {
            TrainType::E2e => None,
            TrainType::Last4 => Some(4),
            TrainType::Last3 => Some(3),
            TrainType::Last2 => Some(2),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrainType::E2e => "e2e",
            TrainType::Last4 => "last4",
            TrainType::Last3 => "last3",
            TrainType::Last2 => "last2",
        }
    }
}

impl fmt::Display for TrainType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainType {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e2e" => Ok(TrainType::E2e),
            "last4" => Ok(TrainType::Last4),
            "last3" => Ok(TrainType::Last3),
            "last2" => Ok(TrainType::Last2),
            other => Err(NnError::InvalidSpec(format!("unknown train type '{other}'"))),
        }
    }
}

/// Per-layer shapes resolved by [`NetworkSpec::resolve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShapes {
    /// Per-item input shape (for `DuelingAggregate`, the advantage input).
    pub input: Vec<usize>,
    /// Per-item output shape (for `SplitHalves`, the shape of one half).
    pub output: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        let spec = Self { input_shape, layers };
        spec.resolve()?;
        Ok(spec)
    }

    pub fn is_dueling(&self) -> bool {
        self.layers.iter().any(|l| l.kind == LayerKind::SplitHalves)
    }

    /// Walk the graph, checking that consecutive shapes chain, and return the
    /// per-layer shapes.
    pub fn resolve(&self) -> Result<Vec<LayerShapes>, NnError> {
        let bad = |msg: String| Err(NnError::InvalidSpec(msg));
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return bad("input shape must be non-empty with positive dims".into());
        }
        let mut names = std::collections::HashSet::new();
        let mut trunk = Some(self.input_shape.clone());
        let mut value: Option<Vec<usize>> = None;
        let mut advantage: Option<Vec<usize>> = None;
        let mut split_seen = false;
        let mut merged = false;
        let mut out = Vec::with_capacity(self.layers.len());

        for layer in &self.layers {
            if !names.insert(layer.name.as_str()) {
                return bad(format!("duplicate layer name '{}'", layer.name));
            }
            if merged && layer.kind != LayerKind::DuelingAggregate {
                return bad(format!("layer '{}' follows the dueling aggregate", layer.name));
            }
            if layer.kind == LayerKind::DuelingAggregate {
                if merged || !split_seen {
                    return bad("dueling aggregate requires exactly one preceding split".into());
                }
                let (v, a) = (value.take().unwrap(), advantage.take().unwrap());
                if v != [1] {
                    return bad(format!("value stream must end in width 1, got {v:?}"));
                }
                if a.len() != 1 {
                    return bad(format!("advantage stream must be flat, got {a:?}"));
                }
                out.push(LayerShapes { input: a.clone(), output: a });
                merged = true;
                continue;
            }
            if layer.kind == LayerKind::SplitHalves {
                if split_seen || layer.stream != Stream::Trunk {
                    return bad("only one trunk split is supported".into());
                }
                let t = trunk.take().unwrap();
                if t.len() != 1 || !t[0].is_multiple_of(2) {
                    return bad(format!("split-halves needs an even flat input, got {t:?}"));
                }
                let half = vec![t[0] / 2];
                out.push(LayerShapes { input: t, output: half.clone() });
                value = Some(half.clone());
                advantage = Some(half);
                split_seen = true;
                continue;
            }

            let slot = match (layer.stream, split_seen) {
                (Stream::Trunk, false) => &mut trunk,
                (Stream::Value, true) => &mut value,
                (Stream::Advantage, true) => &mut advantage,
                _ => {
                    return bad(format!(
                        "layer '{}' is on the {:?} stream in the wrong position",
                        layer.name, layer.stream
                    ))
                }
            };
            let input = slot.clone().unwrap();
            let output = layer_output_shape(&layer.name, &layer.kind, &input)?;
            *slot = Some(output.clone());
            out.push(LayerShapes { input, output });
        }

        if split_seen && !merged {
            return bad("split streams are never merged".into());
        }
        if !split_seen {
            let t = trunk.unwrap();
            if t.len() != 1 {
                return bad(format!("plain network must end flat, got {t:?}"));
            }
        }
        Ok(out)
    }

    /// Length of the output Q-vector.
    pub fn output_len(&self) -> Result<usize, NnError> {
        let shapes = self.resolve()?;
        match shapes.last() {
            Some(s) => Ok(s.output[0]),
            None => {
                if self.input_shape.len() == 1 {
                    Ok(self.input_shape[0])
                } else {
                    Err(NnError::InvalidSpec("empty network with non-flat input".into()))
                }
            }
        }
    }

    /// Depth of each dense layer counted from the output, one group per
    /// depth; parallel stream layers at the same depth share a group.
    /// Non-dense layers map to `None`.
    pub fn fc_groups(&self) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.layers.len()];
        let mut value_count = 0;
        let mut adv_count = 0;
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            if !matches!(layer.kind, LayerKind::Dense { .. }) {
                continue;
            }
            match layer.stream {
                Stream::Value => {
                    value_count += 1;
                    depth[idx] = Some(value_count);
                }
                Stream::Advantage => {
                    adv_count += 1;
                    depth[idx] = Some(adv_count);
                }
                Stream::Trunk => {
                    let next = value_count.max(adv_count) + 1;
                    value_count = next;
                    adv_count = next;
                    depth[idx] = Some(next);
                }
            }
        }
        depth
    }

    /// Set per-layer trainable flags for a train type.
    pub fn apply_train_type(&mut self, tt: TrainType) {
        let groups = self.fc_groups();
        for (layer, group) in self.layers.iter_mut().zip(groups) {
            layer.trainable = match tt.trained_groups() {
                None => true,
                Some(p) => matches!(group, Some(g) if g <= p),
            };
        }
    }

    pub fn with_train_type(mut self, tt: TrainType) -> Self {
        self.apply_train_type(tt);
        self
    }

    /// Architecture-only text (trainable flags excluded).
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let dims: Vec<String> = self.input_shape.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "input {}", dims.join("x"));
        for l in &self.layers {
            let stream = match l.stream {
                Stream::Trunk => "trunk",
                Stream::Value => "value",
                Stream::Advantage => "advantage",
            };
            let kind = match l.kind {
                LayerKind::Conv2d { kernel, stride, padding, in_channels, out_channels } => {
                    format!("conv2d k={kernel} s={stride} p={padding} in={in_channels} out={out_channels}")
                }
                LayerKind::MaxPool2d { kernel, stride } => format!("maxpool2d k={kernel} s={stride}"),
                LayerKind::Relu => "relu".into(),
                LayerKind::Flatten => "flatten".into(),
                LayerKind::Dense { fan_in, fan_out } => format!("dense in={fan_in} out={fan_out}"),
                LayerKind::SplitHalves => "split-halves".into(),
                LayerKind::DuelingAggregate => "dueling-aggregate".into(),
            };
            let _ = writeln!(s, "{} {} {}", l.name, stream, kind);
        }
        s
    }

    /// 64-bit FNV-1a of [`canonical_text`](Self::canonical_text).
    pub fn digest(&self) -> u64 {
        fnv1a64(self.canonical_text().as_bytes())
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

fn layer_output_shape(name: &str, kind: &LayerKind, input: &[usize]) -> Result<Vec<usize>, NnError> {
    let bad = |msg: String| Err(NnError::InvalidSpec(format!("layer '{name}': {msg}")));
    match *kind {
        LayerKind::Conv2d { kernel, stride, padding, in_channels, out_channels } => {
            if input.len() != 3 || input[2] != in_channels {
                return bad(format!("expects [H, W, {in_channels}], got {input:?}"));
            }
            if kernel == 0 || stride == 0 || out_channels == 0 {
                return bad("kernel, stride and channels must be positive".into());
            }
            let (h, w) = (input[0] + 2 * padding, input[1] + 2 * padding);
            if h < kernel || w < kernel {
                return bad(format!("kernel {kernel} larger than padded input {h}x{w}"));
            }
            Ok(vec![(h - kernel) / stride + 1, (w - kernel) / stride + 1, out_channels])
        }
        LayerKind::MaxPool2d { kernel, stride } => {
            if input.len() != 3 {
                return bad(format!("expects [H, W, C], got {input:?}"));
            }
            if kernel == 0 || stride == 0 || input[0] < kernel || input[1] < kernel {
                return bad(format!("pool {kernel}/{stride} does not fit {input:?}"));
            }
            Ok(vec![(input[0] - kernel) / stride + 1, (input[1] - kernel) / stride + 1, input[2]])
        }
        LayerKind::Relu => Ok(input.to_vec()),
        LayerKind::Flatten => Ok(vec![input.iter().product()]),
        LayerKind::Dense { fan_in, fan_out } => {
            if input != [fan_in] {
                return bad(format!("expects [{fan_in}], got {input:?}"));
            }
            if fan_out == 0 {
                return bad("fan_out must be positive".into());
            }
            Ok(vec![fan_out])
        }
        LayerKind::SplitHalves | LayerKind::DuelingAggregate => unreachable!("handled by resolve"),
    }
}

fn conv(name: &str, kernel: usize, stride: usize, padding: usize, in_c: usize, out_c: usize) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Conv2d { kernel, stride, padding, in_channels: in_c, out_channels: out_c })
}

fn dense(name: &str, fan_in: usize, fan_out: usize) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Dense { fan_in, fan_out })
}

fn pool(name: &str) -> LayerSpec {
    LayerSpec::new(name, LayerKind::MaxPool2d { kernel: 3, stride: 2 })
}

fn relu(name: &str) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Relu)
}

/// Value and advantage streams: hidden widths shared by both, then the
/// heads, then the aggregate.
fn dueling_tail(layers: &mut Vec<LayerSpec>, split_width: usize, hidden: &[usize], action_count: usize) {
    layers.push(LayerSpec::new("split", LayerKind::SplitHalves));
    let mut width = split_width;
    for (k, &h) in hidden.iter().enumerate() {
        let n = k + 1;
        layers.push(dense(&format!("v_fc{n}"), width, h).on(Stream::Value));
        layers.push(relu(&format!("v_relu{n}")).on(Stream::Value));
        layers.push(dense(&format!("a_fc{n}"), width, h).on(Stream::Advantage));
        layers.push(relu(&format!("a_relu{n}")).on(Stream::Advantage));
        width = h;
    }
    layers.push(dense("value_head", width, 1).on(Stream::Value));
    layers.push(dense("advantage_head", width, action_count).on(Stream::Advantage));
    layers.push(LayerSpec::new("dueling", LayerKind::DuelingAggregate));
}

fn check_actions(action_count: usize) -> Result<(), NnError> {
    if action_count < 1 {
        return Err(NnError::InvalidSpec("action_count must be at least 1".into()));
    }
    Ok(())
}

/// The 227x227x3 AlexNet-style dueling network used for cost accounting.
pub fn build_reference_network(action_count: usize) -> Result<NetworkSpec, NnError> {
    check_actions(action_count)?;
    let mut layers = vec![
        conv("conv1", 11, 4, 0, 3, 96),
        relu("relu1"),
        pool("pool1"),
        conv("conv2", 5, 1, 2, 96, 256),
        relu("relu2"),
        pool("pool2"),
        conv("conv3", 3, 1, 1, 256, 384),
        relu("relu3"),
        conv("conv4", 3, 1, 1, 384, 384),
        relu("relu4"),
        conv("conv5", 3, 1, 1, 384, 256),
        relu("relu5"),
        pool("pool5"),
        LayerSpec::new("flatten", LayerKind::Flatten),
        dense("fc6", 9216, 4096),
        relu("relu6"),
    ];
    dueling_tail(&mut layers, 2048, &[1024, 1024, 512], action_count);
    NetworkSpec::new(vec![227, 227, 3], layers)
}

/// Small dueling network with the same FC group structure as the reference,
/// sized for CPU training.
pub fn build_desk_network(height: usize, width: usize, action_count: usize) -> Result<NetworkSpec, NnError> {
    check_actions(action_count)?;
    let probe = |k: usize, s: usize, x: usize| if x >= k { (x - k) / s + 1 } else { 0 };
    let (h1, w1) = (probe(5, 2, height), probe(5, 2, width));
    let (h2, w2) = (probe(3, 2, h1), probe(3, 2, w1));
    if h2 == 0 || w2 == 0 {
        return Err(NnError::InvalidSpec(format!("input {height}x{width} too small for the desk network")));
    }
    let mut layers = vec![
        conv("conv1", 5, 2, 0, 3, 16),
        relu("relu1"),
        conv("conv2", 3, 2, 0, 16, 32),
        relu("relu2"),
        LayerSpec::new("flatten", LayerKind::Flatten),
        dense("fc6", h2 * w2 * 32, 256),
        relu("relu6"),
    ];
    dueling_tail(&mut layers, 128, &[64, 64, 32], action_count);
    NetworkSpec::new(vec![height, width, 3], layers)
}

/// Single dense layer, no dueling head.
pub fn build_linear_network(inputs: usize, outputs: usize) -> Result<NetworkSpec, NnError> {
    check_actions(outputs)?;
    NetworkSpec::new(vec![inputs], vec![dense("linear", inputs, outputs)])
}
