//! Dense ReLU networks with hand-written backpropagation and Adam.
//!
//! Batches are row-major: one sample per row. Weights are stored
//! `fan_in x fan_out` so a layer computes `x W + b`.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{BinReader, BinWriter};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(input: usize, hidden: &[usize], output: usize, activation: Activation) -> Self {
        Architecture {
            input,
            hidden: hidden.to_vec(),
            output,
            activation,
        }
    }

    /// `(fan_in, fan_out)` for every layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input;
        for &h in self.hidden.iter().chain(std::iter::once(&self.output)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameters of one multilayer perceptron.
///
/// Every mutation gives the network a new stamp, so caches produced before the
/// mutation are rejected by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Mlp {
    arch: Architecture,
    layers: Vec<Layer>,
    stamp: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.layers == other.layers
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    stamp: u64,
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros(arch: &Architecture) -> Self {
        Gradients {
            layers: arch
                .layer_dims()
                .into_iter()
                .map(|(i, o)| Layer {
                    weight: Array2::zeros((i, o)),
                    bias: Array1::zeros(o),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weight.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }

    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weight.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

impl Mlp {
    /// Uniform initialization in `+-1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(i, o)| {
                let bound = 1.0 / (i as f64).sqrt();
                let mut draw = || rng.random_range(-bound..bound);
                let weight = Array2::from_shape_simple_fn((i, o), &mut draw);
                let bias = Array1::from_shape_simple_fn(o, &mut draw);
                Layer { weight, bias }
            })
            .collect();
        Mlp {
            arch,
            layers,
            stamp: fresh_stamp(),
        }
    }

    pub fn zeros(arch: Architecture) -> Self {
        let layers = Gradients::zeros(&arch).layers;
        Mlp {
            arch,
            layers,
            stamp: fresh_stamp(),
        }
    }

    /// Builds a network from explicit layers, checking that shapes chain.
    pub fn from_layers(activation: Activation, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.ncols() {
                return Err(Error::Shape(format!("layer {k}: bias/weight mismatch")));
            }
            if k > 0 && layers[k - 1].weight.ncols() != l.weight.nrows() {
                return Err(Error::Shape(format!("layer {k} does not chain")));
            }
        }
        let arch = Architecture {
            input: layers[0].weight.nrows(),
            hidden: layers[..layers.len() - 1]
                .iter()
                .map(|l| l.weight.ncols())
                .collect(),
            output: layers.last().unwrap().weight.ncols(),
            activation,
        };
        Ok(Mlp {
            arch,
            layers,
            stamp: fresh_stamp(),
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.arch.num_params()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params_flat().iter().all(|v| v.is_finite())
    }

    /// Batched forward pass keeping the activations needed by `backward`.
    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if input.ncols() != self.arch.input {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.arch.input,
                input.ncols()
            )));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = x.dot(&layer.weight) + &layer.bias;
            let a = if k == last {
                match self.arch.activation {
                    Activation::Identity => z.clone(),
                    Activation::Tanh => z.mapv(f64::tanh),
                }
            } else {
                z.mapv(|v| v.max(0.0))
            };
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        let cache = ForwardCache {
            stamp: self.stamp,
            inputs,
            pre,
            output: x.clone(),
        };
        Ok((x, cache))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.arch.input {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.arch.input,
                input.ncols()
            )));
        }
        let last = self.layers.len() - 1;
        let mut x = input.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weight) + &layer.bias;
            if k == last {
                if self.arch.activation == Activation::Tanh {
                    z.mapv_inplace(f64::tanh);
                }
            } else {
                z.mapv_inplace(|v| v.max(0.0));
            }
            x = z;
        }
        Ok(x)
    }

    /// Single-sample convenience wrapper around [`Mlp::predict`].
    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Gradients of a scalar loss given `dL/d(output)`. Returns parameter
    /// gradients and `dL/d(input)`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<'_, f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if cache.stamp != self.stamp {
            return Err(Error::Shape(
                "forward cache is stale or belongs to another network".into(),
            ));
        }
        if output_grad.dim() != cache.output.dim() {
            return Err(Error::Shape(format!(
                "output gradient shape {:?} does not match output {:?}",
                output_grad.dim(),
                cache.output.dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = match self.arch.activation {
            Activation::Identity => output_grad.to_owned(),
            Activation::Tanh => {
                let mut d = output_grad.to_owned();
                Zip::from(&mut d)
                    .and(&cache.output)
                    .for_each(|g, &y| *g *= 1.0 - y * y);
                d
            }
        };
        for k in (0..=last).rev() {
            if k != last {
                Zip::from(&mut delta)
                    .and(&cache.pre[k])
                    .for_each(|g, &z| {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    });
            }
            let weight = cache.inputs[k].t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            let next = delta.dot(&self.layers[k].weight.t());
            grads.push(Layer { weight, bias });
            delta = next;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }

    fn check_same_arch(&self, other: &Mlp) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::Shape(format!(
                "architecture mismatch: {:?} vs {:?}",
                self.arch, other.arch
            )));
        }
        Ok(())
    }
}

/// `target <- tau * online + (1 - tau) * target`, elementwise.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    target.check_same_arch(online)?;
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        Zip::from(&mut t.weight)
            .and(&o.weight)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        Zip::from(&mut t.bias)
            .and(&o.bias)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
    target.stamp = fresh_stamp();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(arch: &Architecture, config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: Gradients::zeros(arch),
            v: Gradients::zeros(arch),
        }
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != params.layers.len()
            || grads
                .layers
                .iter()
                .zip(&params.layers)
                .any(|(g, p)| g.weight.dim() != p.weight.dim() || g.bias.dim() != p.bias.dim())
        {
            return Err(Error::Shape("gradient shapes do not match parameters".into()));
        }
        if self.m.layers.len() != params.layers.len()
            || self
                .m
                .layers
                .iter()
                .zip(&params.layers)
                .any(|(m, p)| m.weight.dim() != p.weight.dim())
        {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        if let Some((k, _)) = grads
            .layers
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.weight.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())))
        {
            return Err(Error::non_finite(format!("gradient of layer {k}")));
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for ((p, g), (m, v)) in params
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.layers.iter_mut().zip(self.v.layers.iter_mut()))
        {
            Zip::from(&mut p.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .and(&g.weight)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut p.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        params.stamp = fresh_stamp();
        Ok(())
    }
}

/// Concatenates two batches column-wise.
pub fn hstack(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Array2::zeros((a.nrows(), a.ncols() + b.ncols()));
    out.slice_mut(s![.., ..a.ncols()]).assign(&a);
    out.slice_mut(s![.., a.ncols()..]).assign(&b);
    out
}

// ---------------------------------------------------------------------------
// Checkpoint files
//
// Layout (all integers little-endian):
//   magic        8 bytes  "PRLMLP\0\0"
//   version      u32      CHECKPOINT_VERSION
//   count        u32      number of networks
//   per network:
//     name       u32 length + UTF-8 bytes
//     input      u32
//     n_hidden   u32, followed by n_hidden u32 widths
//     output     u32
//     activation u8       0 = identity, 1 = tanh
//     params     u64 count + f64 values; per layer, weights row-major
//                (fan_in x fan_out) then biases
// ---------------------------------------------------------------------------

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PRLMLP\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub(crate) fn write_network(w: &mut BinWriter, net: &Mlp) {
    let a = net.arch();
    w.u32(a.input as u32);
    w.u32(a.hidden.len() as u32);
    for &h in &a.hidden {
        w.u32(h as u32);
    }
    w.u32(a.output as u32);
    w.u8(match a.activation {
        Activation::Identity => 0,
        Activation::Tanh => 1,
    });
    w.f64s(&net.params_flat());
}

pub(crate) fn read_network(r: &mut BinReader<'_>) -> Result<Mlp> {
    let input = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    if n_hidden > 64 {
        return Err(r.error("implausible hidden layer count"));
    }
    let hidden = (0..n_hidden)
        .map(|_| r.u32().map(|h| h as usize))
        .collect::<Result<Vec<_>>>()?;
    let output = r.u32()? as usize;
    let activation = match r.u8()? {
        0 => Activation::Identity,
        1 => Activation::Tanh,
        other => return Err(r.error(format!("unknown activation tag {other}"))),
    };
    let arch = Architecture {
        input,
        hidden,
        output,
        activation,
    };
    let params = r.f64s()?;
    let mut net = Mlp::zeros(arch);
    net.set_params_flat(&params)
        .map_err(|e| r.error(e.to_string()))?;
    Ok(net)
}

pub fn encode_networks(nets: &[(&str, &Mlp)]) -> Vec<u8> {
    let mut w = BinWriter::new();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.u32(nets.len() as u32);
    for (name, net) in nets {
        w.str(name);
        write_network(&mut w, net);
    }
    w.into_inner()
}

pub fn decode_networks(bytes: &[u8], path: &str) -> Result<Vec<(String, Mlp)>> {
    let mut r = BinReader::new(bytes, path);
    r.expect(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(r.error(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let name = r.str()?;
        out.push((name, read_network(&mut r)?));
    }
    r.finish()?;
    Ok(out)
}

pub fn save_networks(path: &Path, nets: &[(&str, &Mlp)]) -> Result<()> {
    fs::write(path, encode_networks(nets))?;
    Ok(())
}

pub fn load_networks(path: &Path) -> Result<Vec<(String, Mlp)>> {
    let bytes = fs::read(path)?;
    decode_networks(&bytes, &path.display().to_string())
}

/// Loads the network called `name` from a checkpoint file.
pub fn load_network(path: &Path, name: &str) -> Result<Mlp> {
    load_networks(path)?
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, net)| net)
        .ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            reason: format!("no network named `{name}`"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(seed: u64, act: Activation) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::new(Architecture::new(3, &[4], 2, act), &mut rng)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(Architecture::new(5, &[7, 3], 4, Activation::Tanh));
        let out = net.predict_one(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap();
        assert_eq!(out, vec![0.0; 4]);
    }

    #[test]
    fn identity_single_layer() {
        let layer = Layer {
            weight: Array2::eye(3),
            bias: Array1::zeros(3),
        };
        let net = Mlp::from_layers(Activation::Identity, vec![layer]).unwrap();
        assert_eq!(net.predict_one(&[0.3, -1.5, 2.0]).unwrap(), vec![0.3, -1.5, 2.0]);
    }

    #[test]
    fn from_layers_rejects_bad_chain() {
        let a = Layer {
            weight: Array2::zeros((3, 4)),
            bias: Array1::zeros(4),
        };
        let b = Layer {
            weight: Array2::zeros((5, 1)),
            bias: Array1::zeros(1),
        };
        assert!(Mlp::from_layers(Activation::Identity, vec![a, b]).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = tiny(0, Activation::Tanh);
        assert!(net.predict(array![[1.0, 2.0]].view()).is_err());
        let (_, cache) = net.forward(array![[1.0, 2.0, 3.0]].view()).unwrap();
        assert!(net.backward(&cache, array![[1.0, 2.0, 3.0]].view()).is_err());
    }

    #[test]
    fn stale_cache_rejected() {
        let mut net = tiny(0, Activation::Tanh);
        let (_, cache) = net.forward(array![[1.0, 2.0, 3.0]].view()).unwrap();
        let other = tiny(0, Activation::Tanh);
        assert!(other.backward(&cache, array![[1.0, 1.0]].view()).is_err());
        let flat = net.params_flat();
        net.set_params_flat(&flat).unwrap();
        assert!(net.backward(&cache, array![[1.0, 1.0]].view()).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let net = tiny(3, Activation::Tanh);
        let (_, cache) = net.forward(array![[0.2, -0.4, 0.9]].view()).unwrap();
        let (g, dx) = net.backward(&cache, Array2::zeros((1, 2)).view()).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tanh_derivative_at_zero_is_one() {
        // Output bias only: pre-activation is zero, so dL/db equals dL/dy.
        let layer = Layer {
            weight: Array2::zeros((2, 1)),
            bias: Array1::zeros(1),
        };
        let net = Mlp::from_layers(Activation::Tanh, vec![layer]).unwrap();
        let (y, cache) = net.forward(array![[0.7, -0.1]].view()).unwrap();
        assert_eq!(y[[0, 0]], 0.0);
        let (g, _) = net.backward(&cache, array![[0.37]].view()).unwrap();
        assert_eq!(g.layers[0].bias[0], 0.37);
    }

    #[test]
    fn soft_update_extremes() {
        let online = tiny(1, Activation::Tanh);
        let mut target = tiny(2, Activation::Tanh);
        let before = target.clone();
        soft_update(&mut target, &online, 0.0).unwrap();
        assert_eq!(target, before);
        soft_update(&mut target, &online, 1.0).unwrap();
        assert_eq!(target, online);

        let arch = Architecture::new(1, &[], 1, Activation::Identity);
        let mut t = Mlp::zeros(arch.clone());
        let mut o = Mlp::zeros(arch);
        o.set_params_flat(&[1.0, 1.0]).unwrap();
        soft_update(&mut t, &o, 0.005).unwrap();
        assert_eq!(t.params_flat(), vec![0.005, 0.005]);

        let wrong = Mlp::zeros(Architecture::new(3, &[5], 2, Activation::Tanh));
        assert!(soft_update(&mut target, &wrong, 0.5).is_err());
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut net = tiny(4, Activation::Identity);
        let before = net.params_flat();
        let mut opt = AdamState::new(net.arch(), AdamConfig::default());
        let zero = Gradients::zeros(net.arch());
        for _ in 0..3 {
            opt.step(&mut net, &zero).unwrap();
        }
        assert_eq!(net.params_flat(), before);
        assert_eq!(opt.step, 3);
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        let arch = Architecture::new(1, &[], 1, Activation::Identity);
        let mut net = Mlp::zeros(arch.clone());
        let mut opt = AdamState::new(&arch, AdamConfig::with_lr(0.01));
        let mut g = Gradients::zeros(&arch);
        g.layers[0].weight[[0, 0]] = 1.0;
        opt.step(&mut net, &g).unwrap();
        // m_hat = 1, v_hat = 1 -> delta = lr / (1 + eps)
        let expected = -0.01 / (1.0 + 1e-8);
        assert!((net.params_flat()[0] - expected).abs() < 1e-15);
        let first = net.params_flat()[0];
        opt.step(&mut net, &g).unwrap();
        assert!(net.params_flat()[0] < first);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut net = tiny(5, Activation::Identity);
        let mut opt = AdamState::new(net.arch(), AdamConfig::default());
        let mut g = Gradients::zeros(net.arch());
        g.layers[1].bias[0] = f64::NAN;
        let err = opt.step(&mut net, &g).unwrap_err();
        assert!(err.to_string().contains("layer 1"));
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(decode_networks(b"not a checkpoint", "x").is_err());
        let net = tiny(6, Activation::Tanh);
        let mut bytes = encode_networks(&[("actor", &net)]);
        bytes.push(0);
        assert!(decode_networks(&bytes, "x").is_err());
    }
}
