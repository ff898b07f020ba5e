use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{self, ConvGeometry, ParamGrads};
use super::spec::{LayerKind, LayerShapes, NetworkSpec, Stream, TrainType};
use super::tensor::Tensor;
use super::NnError;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f32, beta2: f32, eps: f32 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m_w: Vec<f32>,
    v_w: Vec<f32>,
    m_b: Vec<f32>,
    v_b: Vec<f32>,
}

/// Result of one gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub loss: f32,
    /// `y - Q(s, a)` per sample, measured before the update.
    pub td_errors: Vec<f32>,
}

/// Huber threshold on the TD error.
pub const HUBER_DELTA: f32 = 1.0;

/// A network: spec, weights, and optimizer state for its trainable layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<LayerShapes>,
    params: Vec<Option<LayerParams>>,
    optimizer: Optimizer,
    moments: Vec<Option<Moments>>,
    steps: u64,
}

enum Cache {
    None,
    Conv(Vec<f32>),
    Dense(Tensor),
    Pool(Vec<u32>),
    Relu(Tensor),
}

#[derive(Default)]
struct Streams {
    trunk: Option<Tensor>,
    value: Option<Tensor>,
    advantage: Option<Tensor>,
}

impl Streams {
    fn slot(&mut self, stream: Stream) -> &mut Option<Tensor> {
        match stream {
            Stream::Trunk => &mut self.trunk,
            Stream::Value => &mut self.value,
            Stream::Advantage => &mut self.advantage,
        }
    }
}

impl Network {
    /// He-uniform conv weights, Xavier-uniform dense weights, zero biases.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(spec, |kind, n| {
            let limit = match *kind {
                LayerKind::Conv2d { kernel, in_channels, .. } => (6.0 / (kernel * kernel * in_channels) as f64).sqrt(),
                LayerKind::Dense { fan_in, fan_out } => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                _ => 0.0,
            } as f32;
            (0..n).map(|_| rng.gen_range(-limit..=limit)).collect()
        })
    }

    pub fn zeroed(spec: NetworkSpec) -> Result<Self, NnError> {
        Self::build(spec, |_, n| vec![0.0; n])
    }

    fn build(spec: NetworkSpec, mut init: impl FnMut(&LayerKind, usize) -> Vec<f32>) -> Result<Self, NnError> {
        let shapes = spec.resolve()?;
        let params: Vec<Option<LayerParams>> = spec
            .layers
            .iter()
            .map(|l| {
                l.kind.param_shapes().map(|(wshape, blen)| {
                    let n = wshape.iter().product();
                    LayerParams {
                        weight: Tensor::new(wshape, init(&l.kind, n)).expect("init length"),
                        bias: Tensor::zeros(vec![blen]),
                    }
                })
            })
            .collect();
        let moments = vec![None; params.len()];
        Ok(Self { spec, shapes, params, optimizer: Optimizer::default(), moments, steps: 0 })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn optimizer(&self) -> Optimizer {
        self.optimizer
    }

    pub fn set_optimizer(&mut self, optimizer: Optimizer) {
        self.optimizer = optimizer;
        self.reset_optimizer_state();
    }

    pub fn reset_optimizer_state(&mut self) {
        self.moments.iter_mut().for_each(|m| *m = None);
        self.steps = 0;
    }

    /// Apply a freeze mask. Optimizer state is reset.
    pub fn set_train_type(&mut self, tt: TrainType) {
        self.spec.apply_train_type(tt);
        self.reset_optimizer_state();
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<(), NnError> {
        let layer = self
            .spec
            .layers
            .iter_mut()
            .find(|l| l.name == name)
            .ok_or_else(|| NnError::InvalidSpec(format!("no layer named '{name}'")))?;
        layer.trainable = trainable;
        Ok(())
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.spec.input_shape
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().map(|s| s.output[0]).unwrap_or_else(|| self.spec.input_shape[0])
    }

    pub fn layer_params(&self) -> impl Iterator<Item = (&str, &LayerParams)> {
        self.spec.layers.iter().zip(&self.params).filter_map(|(l, p)| p.as_ref().map(|p| (l.name.as_str(), p)))
    }

    pub fn params(&self, name: &str) -> Option<&LayerParams> {
        self.index_of(name).and_then(|i| self.params[i].as_ref())
    }

    pub fn params_mut(&mut self, name: &str) -> Option<&mut LayerParams> {
        self.index_of(name).and_then(move |i| self.params[i].as_mut())
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.spec.layers.iter().position(|l| l.name == name)
    }

    /// Make this network's weights a bit-identical copy of `other`'s.
    pub fn copy_weights_from(&mut self, other: &Network) -> Result<(), NnError> {
        if self.spec.digest() != other.spec.digest() {
            return Err(NnError::SpecMismatch { expected: self.spec.digest(), actual: other.spec.digest() });
        }
        self.params.clone_from(&other.params);
        Ok(())
    }

    /// Fresh copy of the weights with no optimizer state.
    pub fn target_copy(&self) -> Network {
        let mut copy = self.clone();
        copy.reset_optimizer_state();
        copy
    }

    pub fn weights_bit_equal(&self, other: &Network) -> bool {
        self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => {
                    bits_equal(a.weight.data(), b.weight.data()) && bits_equal(a.bias.data(), b.bias.data())
                }
                (None, None) => true,
                _ => false,
            })
    }

    pub(crate) fn replace_params(&mut self, name: &str, params: LayerParams) -> Result<(), NnError> {
        let idx = self.index_of(name).ok_or_else(|| NnError::InvalidSpec(format!("no layer named '{name}'")))?;
        match &self.params[idx] {
            Some(cur) if cur.weight.shape() == params.weight.shape() && cur.bias.shape() == params.bias.shape() => {
                self.params[idx] = Some(params);
                Ok(())
            }
            Some(cur) => Err(NnError::ShapeMismatch {
                context: format!("layer '{name}'"),
                expected: cur.weight.shape().to_vec(),
                actual: params.weight.shape().to_vec(),
            }),
            None => Err(NnError::InvalidSpec(format!("layer '{name}' has no weights"))),
        }
    }

    fn check_input(&self, batch: &Tensor) -> Result<(), NnError> {
        if batch.shape().len() != self.spec.input_shape.len() + 1 || batch.shape()[1..] != self.spec.input_shape[..] {
            let mut expected = vec![batch.batch()];
            expected.extend_from_slice(&self.spec.input_shape);
            return Err(NnError::ShapeMismatch {
                context: "network input".into(),
                expected,
                actual: batch.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Q-values `[B, actions]` for a batch `[B, input_shape..]`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor, NnError> {
        self.check_input(batch)?;
        let (out, _) = self.run(batch, usize::MAX);
        Ok(out)
    }

    /// Q-values for a single observation.
    pub fn q_values(&self, observation: &[f32]) -> Result<Vec<f32>, NnError> {
        let batch = Tensor::stack(&[observation], &self.spec.input_shape)?;
        Ok(self.forward(&batch)?.into_data())
    }

    fn geometry(&self, idx: usize) -> ConvGeometry {
        let LayerKind::Conv2d { kernel, stride, padding, .. } = self.spec.layers[idx].kind else {
            unreachable!("not a conv layer")
        };
        let s = &self.shapes[idx];
        ConvGeometry {
            in_h: s.input[0],
            in_w: s.input[1],
            in_c: s.input[2],
            out_h: s.output[0],
            out_w: s.output[1],
            out_c: s.output[2],
            kernel,
            stride,
            padding,
        }
    }

    /// Forward pass; layers at index `>= record_from` keep what backward needs.
    fn run(&self, batch: &Tensor, record_from: usize) -> (Tensor, Vec<Cache>) {
        let mut streams = Streams { trunk: Some(batch.clone()), ..Default::default() };
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        for (idx, layer) in self.spec.layers.iter().enumerate() {
            let record = idx >= record_from;
            match layer.kind {
                LayerKind::SplitHalves => {
                    let (v, a) = layers::split_forward(&streams.trunk.take().unwrap());
                    streams.value = Some(v);
                    streams.advantage = Some(a);
                    caches.push(Cache::None);
                    continue;
                }
                LayerKind::DuelingAggregate => {
                    let q =
                        layers::dueling_forward(streams.value.as_ref().unwrap(), streams.advantage.as_ref().unwrap());
                    streams.trunk = Some(q);
                    caches.push(Cache::None);
                    continue;
                }
                _ => {}
            }
            let slot = streams.slot(layer.stream);
            let x = slot.take().unwrap();
            let (y, cache) = match layer.kind {
                LayerKind::Conv2d { .. } => {
                    let p = self.params[idx].as_ref().unwrap();
                    let (y, cols) = layers::conv_forward(&x, p.weight.data(), p.bias.data(), &self.geometry(idx));
                    (y, if record { Cache::Conv(cols) } else { Cache::None })
                }
                LayerKind::Dense { fan_in, fan_out } => {
                    let p = self.params[idx].as_ref().unwrap();
                    let y = layers::dense_forward(&x, p.weight.data(), p.bias.data(), fan_in, fan_out);
                    (y, if record { Cache::Dense(x) } else { Cache::None })
                }
                LayerKind::MaxPool2d { kernel, stride } => {
                    let (y, arg) = layers::maxpool_forward(&x, kernel, stride);
                    (y, if record { Cache::Pool(arg) } else { Cache::None })
                }
                LayerKind::Relu => {
                    let y = layers::relu_forward(&x);
                    let cache = if record { Cache::Relu(y.clone()) } else { Cache::None };
                    (y, cache)
                }
                LayerKind::Flatten => {
                    let b = x.batch();
                    let n = x.item_len();
                    (x.reshape(vec![b, n]).expect("flatten"), Cache::None)
                }
                LayerKind::SplitHalves | LayerKind::DuelingAggregate => unreachable!(),
            };
            *streams.slot(layer.stream) = Some(y);
            caches.push(cache);
        }
        (streams.trunk.take().unwrap(), caches)
    }

    /// Backward pass from `dL/dQ`; returns per-layer parameter gradients for
    /// layers at index `>= stop`, and the input gradient when `input_grad` is
    /// set and `stop == 0`.
    fn backprop(
        &self,
        caches: &[Cache],
        grad_q: Tensor,
        stop: usize,
        input_grad: bool,
    ) -> (Vec<Option<ParamGrads>>, Option<Tensor>) {
        let n = self.spec.layers.len();
        let mut grads: Vec<Option<ParamGrads>> = (0..n).map(|_| None).collect();
        let mut streams = Streams { trunk: Some(grad_q), ..Default::default() };
        for idx in (stop..n).rev() {
            let layer = &self.spec.layers[idx];
            match layer.kind {
                LayerKind::DuelingAggregate => {
                    let (dv, da) = layers::dueling_backward(&streams.trunk.take().unwrap());
                    streams.value = Some(dv);
                    streams.advantage = Some(da);
                    continue;
                }
                LayerKind::SplitHalves => {
                    let dt =
                        layers::split_backward(streams.value.as_ref().unwrap(), streams.advantage.as_ref().unwrap());
                    streams.trunk = Some(dt);
                    continue;
                }
                _ => {}
            }
            // Stream layers below `stop` may still be pending on the other branch.
            let Some(dy) = streams.slot(layer.stream).take() else {
                continue;
            };
            let need_dx = idx > stop || (stop == 0 && input_grad);
            let dx = match (&layer.kind, &caches[idx]) {
                (LayerKind::Conv2d { .. }, Cache::Conv(cols)) => {
                    let p = self.params[idx].as_ref().unwrap();
                    let (dx, g) = layers::conv_backward(cols, p.weight.data(), &dy, &self.geometry(idx), need_dx);
                    grads[idx] = Some(g);
                    dx
                }
                (LayerKind::Dense { fan_in, fan_out }, Cache::Dense(input)) => {
                    let p = self.params[idx].as_ref().unwrap();
                    let (dx, g) = layers::dense_backward(input, p.weight.data(), &dy, *fan_in, *fan_out, need_dx);
                    grads[idx] = Some(g);
                    dx
                }
                (LayerKind::MaxPool2d { .. }, Cache::Pool(arg)) => {
                    let mut shape = vec![dy.batch()];
                    shape.extend_from_slice(&self.shapes[idx].input);
                    Some(layers::maxpool_backward(arg, &dy, &shape))
                }
                (LayerKind::Relu, Cache::Relu(out)) => Some(layers::relu_backward(out, &dy)),
                (LayerKind::Flatten, _) => {
                    let mut shape = vec![dy.batch()];
                    shape.extend_from_slice(&self.shapes[idx].input);
                    Some(dy.reshape(shape).expect("unflatten"))
                }
                _ => unreachable!("missing cache for layer {}", layer.name),
            };
            if let Some(dx) = dx {
                if need_dx {
                    *streams.slot(layer.stream) = Some(dx);
                }
            }
        }
        let dx = if stop == 0 && input_grad { streams.trunk.take() } else { None };
        (grads, dx)
    }

    fn first_trainable(&self) -> Option<usize> {
        self.spec.layers.iter().position(|l| l.trainable && l.kind.has_weights())
    }

    /// Gradients of `sum(grad_q * Q(batch))` with respect to every layer's
    /// parameters and to the input batch.
    pub fn gradients(&self, batch: &Tensor, grad_q: &Tensor) -> Result<(Vec<(String, ParamGrads)>, Tensor), NnError> {
        self.check_input(batch)?;
        let (q, caches) = self.run(batch, 0);
        if q.shape() != grad_q.shape() {
            return Err(NnError::ShapeMismatch {
                context: "output gradient".into(),
                expected: q.shape().to_vec(),
                actual: grad_q.shape().to_vec(),
            });
        }
        let (grads, dx) = self.backprop(&caches, grad_q.clone(), 0, true);
        let named = self.spec.layers.iter().zip(grads).filter_map(|(l, g)| g.map(|g| (l.name.clone(), g))).collect();
        Ok((named, dx.expect("input gradient")))
    }

    /// One importance-weighted Huber step on `Q(s, a)` towards `targets`.
    /// Only trainable layers are updated; on a non-finite loss nothing changes.
    pub fn train_step(
        &mut self,
        batch: &Tensor,
        targets: &[f32],
        actions: &[usize],
        is_weights: &[f32],
        lr: f32,
    ) -> Result<StepStats, NnError> {
        self.check_input(batch)?;
        let b = batch.batch();
        if targets.len() != b || actions.len() != b || is_weights.len() != b {
            return Err(NnError::ShapeMismatch {
                context: "train_step targets/actions/weights".into(),
                expected: vec![b],
                actual: vec![targets.len(), actions.len(), is_weights.len()],
            });
        }
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(NnError::InvalidArgument(format!("learning rate {lr}")));
        }
        let n_actions = self.output_len();
        if let Some(&bad) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(NnError::InvalidArgument(format!("action {bad} out of range 0..{n_actions}")));
        }

        let first = self.first_trainable();
        let (q, caches) = self.run(batch, first.unwrap_or(usize::MAX));
        let mut grad_q = Tensor::zeros(q.shape().to_vec());
        let mut td_errors = Vec::with_capacity(b);
        let mut loss = 0.0f64;
        for k in 0..b {
            let q_sa = q.item(k)[actions[k]];
            let td = targets[k] - q_sa;
            td_errors.push(td);
            let abs = td.abs();
            let (l, dl) = if abs <= HUBER_DELTA {
                (0.5 * td * td, -td)
            } else {
                (HUBER_DELTA * (abs - 0.5 * HUBER_DELTA), -HUBER_DELTA * td.signum())
            };
            loss += (is_weights[k] * l) as f64;
            grad_q.data_mut()[k * n_actions + actions[k]] = is_weights[k] * dl / b as f32;
        }
        let loss = (loss / b as f64) as f32;
        if !loss.is_finite() || !td_errors.iter().all(|t| t.is_finite()) {
            return Err(NnError::Divergence { loss });
        }

        if let Some(first) = first {
            let (grads, _) = self.backprop(&caches, grad_q, first, false);
            self.steps += 1;
            for (idx, g) in grads.into_iter().enumerate() {
                let Some(g) = g else { continue };
                if !self.spec.layers[idx].trainable {
                    continue;
                }
                self.apply_update(idx, &g, lr);
            }
        }
        Ok(StepStats { loss, td_errors })
    }

    fn apply_update(&mut self, idx: usize, g: &ParamGrads, lr: f32) {
        let params = self.params[idx].as_mut().expect("trainable layer has params");
        match self.optimizer {
            Optimizer::Sgd => {
                sgd(params.weight.data_mut(), &g.weight, lr);
                sgd(params.bias.data_mut(), &g.bias, lr);
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let m = self.moments[idx].get_or_insert_with(|| Moments {
                    m_w: vec![0.0; g.weight.len()],
                    v_w: vec![0.0; g.weight.len()],
                    m_b: vec![0.0; g.bias.len()],
                    v_b: vec![0.0; g.bias.len()],
                });
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let hp = AdamStep { lr, beta1, beta2, eps, c1, c2 };
                hp.apply(params.weight.data_mut(), &g.weight, &mut m.m_w, &mut m.v_w);
                hp.apply(params.bias.data_mut(), &g.bias, &mut m.m_b, &mut m.v_b);
            }
        }
    }
}

fn sgd(w: &mut [f32], g: &[f32], lr: f32) {
    for (w, g) in w.iter_mut().zip(g) {
        *w -= lr * g;
    }
}

struct AdamStep {
    lr: f32,
    beta1: f32,
    beta2: f32,
    eps: f32,
    c1: f32,
    c2: f32,
}

impl AdamStep {
    fn apply(&self, w: &mut [f32], g: &[f32], m: &mut [f32], v: &mut [f32]) {
        for (((w, &g), m), v) in w.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / self.c1;
            let v_hat = *v / self.c2;
            *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

fn bits_equal(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}
