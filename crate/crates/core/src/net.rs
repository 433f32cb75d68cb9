//! Minimal feedforward engine: sigmoid MLPs, per-example SGD on mean MSE,
//! and end-to-end training of chains of sub-networks with per-network
//! freezing. Everything is double precision; divergence (non-finite loss)
//! is surfaced, never clamped.

use crate::error::CoreError;
use rand::Rng;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    /// Row-major fan_out x fan_in.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

/// Eight-lane unrolled dot product. The lane split makes the reduction
/// order explicit so the compiler can vectorize it without changing
/// results run to run.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut lanes = [0.0f64; 8];
    for (xa, xb) in ca.zip(cb) {
        for k in 0..8 {
            lanes[k] += xa[k] * xb[k];
        }
    }
    let mut acc: f64 = lanes.iter().sum();
    for (xa, xb) in ra.iter().zip(rb) {
        acc += xa * xb;
    }
    acc
}

impl Layer {
    /// y = sigmoid(W x + b)
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.cols);
        out.clear();
        for i in 0..self.rows {
            let row = &self.w[i * self.cols..(i + 1) * self.cols];
            out.push(sigmoid(self.b[i] + dot(row, x)));
        }
    }
}

/// A fully-connected sigmoid network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    pub(crate) layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub eta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { eta: 15.0 }
    }
}

impl TrainConfig {
    pub fn new(eta: f64) -> Self {
        TrainConfig { eta }
    }
}

impl Mlp {
    /// Weights ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    pub fn init<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self, CoreError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(CoreError::InvalidConfig(format!(
                "bad layer sizes {layer_sizes:?}"
            )));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (cols, rows) = (w[0], w[1]);
                let bound = 1.0 / (cols as f64).sqrt();
                Layer {
                    w: (0..rows * cols)
                        .map(|_| rng.random_range(-bound..bound))
                        .collect(),
                    b: vec![0.0; rows],
                    rows,
                    cols,
                }
            })
            .collect();
        Ok(Mlp {
            sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, CoreError> {
        if x.len() != self.input_size() {
            return Err(CoreError::Dimension(format!(
                "input has {} components, net expects {}",
                x.len(),
                self.input_size()
            )));
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Flat view of all parameters, weights then biases per layer. Used by
    /// the gradient checker.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in &mut self.layers {
            if idx < l.w.len() {
                return &mut l.w[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return &mut l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }
}

/// One sub-network inside a training chain.
pub struct ChainLink<'a> {
    pub net: &'a mut Mlp,
    pub trainable: bool,
}

impl<'a> ChainLink<'a> {
    pub fn trainable(net: &'a mut Mlp) -> Self {
        ChainLink {
            net,
            trainable: true,
        }
    }
    pub fn frozen(net: &'a mut Mlp) -> Self {
        ChainLink {
            net,
            trainable: false,
        }
    }
}

fn check_chain(chain: &[ChainLink], x: &[f64], target: &[f64]) -> Result<(), CoreError> {
    if chain.is_empty() {
        return Err(CoreError::InvalidConfig("empty chain".into()));
    }
    if x.len() != chain[0].net.input_size() {
        return Err(CoreError::Dimension(format!(
            "chain input {} vs {}",
            x.len(),
            chain[0].net.input_size()
        )));
    }
    for pair in chain.windows(2) {
        if pair[0].net.output_size() != pair[1].net.input_size() {
            return Err(CoreError::Dimension(format!(
                "chain link output {} feeds input {}",
                pair[0].net.output_size(),
                pair[1].net.input_size()
            )));
        }
    }
    if target.len() != chain.last().unwrap().net.output_size() {
        return Err(CoreError::Dimension(format!(
            "target {} vs chain output {}",
            target.len(),
            chain.last().unwrap().net.output_size()
        )));
    }
    Ok(())
}

pub fn chain_forward(chain: &[ChainLink], x: &[f64]) -> Result<Vec<f64>, CoreError> {
    let mut cur = x.to_vec();
    for link in chain {
        cur = link.net.forward(&cur)?;
    }
    Ok(cur)
}

/// One SGD step on the whole chain: forward, mean-MSE loss against `target`,
/// backpropagate through every link, update only the trainable ones.
/// Returns the pre-update loss.
///
/// Gradients everywhere are taken at the pre-update parameters; each layer
/// propagates its input delta before overwriting its own weights.
pub fn train_step(
    chain: &mut [ChainLink],
    x: &[f64],
    target: &[f64],
    cfg: &TrainConfig,
) -> Result<f64, CoreError> {
    check_chain(chain, x, target)?;

    // Forward, keeping every activation. acts[0] is the input; one entry per
    // layer after that, across all links.
    let mut acts: Vec<Vec<f64>> = Vec::new();
    acts.push(x.to_vec());
    for link in chain.iter() {
        for layer in &link.net.layers {
            let mut out = Vec::new();
            layer.forward(acts.last().unwrap(), &mut out);
            acts.push(out);
        }
    }
    let y = acts.last().unwrap();
    let n_out = y.len() as f64;
    let loss = y
        .iter()
        .zip(target)
        .map(|(yi, ti)| (yi - ti) * (yi - ti))
        .sum::<f64>()
        / n_out;
    if !loss.is_finite() {
        return Err(CoreError::Divergence {
            generation: 0,
            epoch: 0,
            iteration: 0,
            context: "train_step".into(),
        });
    }

    // delta = dL/dy at the chain output.
    let mut delta: Vec<f64> = y
        .iter()
        .zip(target)
        .map(|(yi, ti)| 2.0 * (yi - ti) / n_out)
        .collect();

    let eta = cfg.eta;
    let mut act_idx = acts.len() - 1;
    for (li, link) in chain.iter_mut().enumerate().rev() {
        let trainable = link.trainable;
        for layer in link.net.layers.iter_mut().rev() {
            let a_out = &acts[act_idx];
            let a_in = &acts[act_idx - 1];
            act_idx -= 1;
            // Through the sigmoid.
            for (d, a) in delta.iter_mut().zip(a_out) {
                *d *= a * (1.0 - a);
            }
            let first_layer = li == 0 && act_idx == 0;
            let mut delta_in = if first_layer {
                Vec::new()
            } else {
                vec![0.0; layer.cols]
            };
            for (i, &dp) in delta.iter().enumerate() {
                let edp = eta * dp;
                let row = &mut layer.w[i * layer.cols..(i + 1) * layer.cols];
                match (trainable, first_layer) {
                    (true, false) => {
                        for ((w, di), &aj) in row.iter_mut().zip(delta_in.iter_mut()).zip(a_in) {
                            *di += *w * dp;
                            *w -= edp * aj;
                        }
                    }
                    (true, true) => {
                        for (w, &aj) in row.iter_mut().zip(a_in) {
                            *w -= edp * aj;
                        }
                    }
                    (false, false) => {
                        for (di, &w) in delta_in.iter_mut().zip(row.iter()) {
                            *di += w * dp;
                        }
                    }
                    (false, true) => {}
                }
                if trainable {
                    layer.b[i] -= edp;
                }
            }
            if !first_layer {
                delta = delta_in;
            }
        }
    }
    Ok(loss)
}

/// Analytic gradient of the chain loss w.r.t. every parameter, extracted as
/// (p_before - p_after) from a unit-learning-rate `train_step` on a clone
/// with every link trainable. One Vec per link, `Mlp::params` order.
pub fn chain_gradients(
    chain: &[&Mlp],
    x: &[f64],
    target: &[f64],
) -> Result<Vec<Vec<f64>>, CoreError> {
    let mut clones: Vec<Mlp> = chain.iter().map(|n| (*n).clone()).collect();
    let before: Vec<Vec<f64>> = clones.iter().map(Mlp::params).collect();
    {
        let mut links: Vec<ChainLink> = clones.iter_mut().map(ChainLink::trainable).collect();
        train_step(&mut links, x, target, &TrainConfig::new(1.0))?;
    }
    Ok(clones
        .iter()
        .zip(before)
        .map(|(net, b)| {
            net.params()
                .iter()
                .zip(b)
                .map(|(after, before)| before - after)
                .collect()
        })
        .collect())
}

/// Which parameter of a chain is perturbed by the finite difference.
#[derive(Clone, Copy)]
struct Perturbation {
    net: usize,
    layer: usize,
    row: usize,
    /// Weight column, or None for the bias.
    col: Option<usize>,
}

/// sigma(u) - sigma(u - du), accurate to full relative precision even for
/// tiny du (plain subtraction of two sigmoids cancels catastrophically).
/// Uses sigma(u) - sigma(v) = sinh((u-v)/2) / (2 cosh(u/2) cosh(v/2)).
fn sigmoid_diff(u: f64, du: f64) -> f64 {
    let v = u - du;
    (du / 2.0).sinh() / (2.0 * (u / 2.0).cosh() * (v / 2.0).cosh())
}

/// Central difference (L(p+h) - L(p-h)) / 2h, evaluated by propagating the
/// two perturbed networks as a pair: the +h activations and their exact
/// difference from the -h ones. Subtracting two independently computed
/// losses would drown gradients below ~1e-11 in rounding noise.
fn central_difference(
    chain: &[&Mlp],
    x: &[f64],
    target: &[f64],
    pert: Perturbation,
    h: f64,
) -> f64 {
    let mut act = x.to_vec(); // activations of the +h network
    let mut diff = vec![0.0; x.len()]; // act minus the -h network's
    for (ni, net) in chain.iter().enumerate() {
        for (li, layer) in net.layers.iter().enumerate() {
            let here = ni == pert.net && li == pert.layer;
            let mut z = Vec::with_capacity(layer.rows);
            let mut dz = Vec::with_capacity(layer.rows);
            for i in 0..layer.rows {
                let row = &layer.w[i * layer.cols..(i + 1) * layer.cols];
                let mut zi = layer.b[i];
                let mut dzi = 0.0;
                for j in 0..layer.cols {
                    zi += row[j] * act[j];
                    dzi += row[j] * diff[j];
                }
                if here && i == pert.row {
                    match pert.col {
                        Some(j) => {
                            zi += h * act[j];
                            dzi += h * (2.0 * act[j] - diff[j]);
                        }
                        None => {
                            zi += h;
                            dzi += 2.0 * h;
                        }
                    }
                }
                z.push(zi);
                dz.push(dzi);
            }
            act = z.iter().map(|&u| sigmoid(u)).collect();
            diff = z
                .iter()
                .zip(&dz)
                .map(|(&u, &du)| sigmoid_diff(u, du))
                .collect();
        }
    }
    let n_out = act.len() as f64;
    // L+ - L- = sum dy * (y+ + y- - 2t) / n, with y- = y+ - dy.
    let dl: f64 = act
        .iter()
        .zip(&diff)
        .zip(target)
        .map(|((&y, &dy), &t)| dy * (2.0 * y - dy - 2.0 * t))
        .sum::<f64>()
        / n_out;
    dl / (2.0 * h)
}

/// Max over all parameters of the relative error between the analytic
/// gradient and a central finite difference with step `h`.
pub fn grad_check(chain: &[&Mlp], x: &[f64], target: &[f64], h: f64) -> Result<f64, CoreError> {
    assert!(h > 0.0);
    let analytic = chain_gradients(chain, x, target)?;
    let mut max_rel: f64 = 0.0;
    for (ni, net) in chain.iter().enumerate() {
        let mut flat = analytic[ni].iter();
        for (li, layer) in net.layers.iter().enumerate() {
            let mut slots: Vec<Perturbation> = Vec::new();
            for i in 0..layer.rows {
                for j in 0..layer.cols {
                    slots.push(Perturbation {
                        net: ni,
                        layer: li,
                        row: i,
                        col: Some(j),
                    });
                }
            }
            for i in 0..layer.rows {
                slots.push(Perturbation {
                    net: ni,
                    layer: li,
                    row: i,
                    col: None,
                });
            }
            for pert in slots {
                let g = *flat.next().expect("params() order matches layers");
                let numeric = central_difference(chain, x, target, pert, h);
                let rel = (g - numeric).abs() / numeric.abs().max(1e-8);
                max_rel = max_rel.max(rel);
            }
        }
    }
    Ok(max_rel)
}

const MLP_MAGIC: &[u8; 4] = b"SMLP";
const MLP_VERSION: u32 = 1;

pub fn serialize_mlp(net: &Mlp, out: &mut Vec<u8>) {
    out.extend_from_slice(MLP_MAGIC);
    out.extend_from_slice(&MLP_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.sizes.len() as u32).to_le_bytes());
    for &s in &net.sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for l in &net.layers {
        for v in l.w.iter().chain(&l.b) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn deserialize_mlp(data: &[u8], pos: &mut usize) -> Result<Mlp, CoreError> {
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], CoreError> {
        if *pos + n > data.len() {
            return Err(CoreError::Format("truncated network data".into()));
        }
        let s = &data[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(pos, 4)? != MLP_MAGIC {
        return Err(CoreError::Format("not a serialized network".into()));
    }
    let version = u32::from_le_bytes(take(pos, 4)?.try_into().unwrap());
    if version != MLP_VERSION {
        return Err(CoreError::Version {
            found: version,
            expected: MLP_VERSION,
        });
    }
    let n_sizes = u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()) as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(CoreError::Format(format!(
            "implausible layer count {n_sizes}"
        )));
    }
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        let s = u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()) as usize;
        if s == 0 {
            return Err(CoreError::Format("zero layer size".into()));
        }
        sizes.push(s);
    }
    let mut layers = Vec::with_capacity(n_sizes - 1);
    for w in sizes.windows(2) {
        let (cols, rows) = (w[0], w[1]);
        let raw = take(pos, (rows * cols + rows) * 8)?;
        let mut vals = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let w: Vec<f64> = vals.by_ref().take(rows * cols).collect();
        let b: Vec<f64> = vals.collect();
        layers.push(Layer { w, b, rows, cols });
    }
    Ok(Mlp { sizes, layers })
}
