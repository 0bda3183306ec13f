//! Feed-forward autoencoder: weight initialization, forward pass with
//! cached activations, hand-derived backpropagation, reconstruction loss
//! and gradient clipping.
//!
//! The initializer doubles as the fresh-weight distribution used by soft
//! resets, so it is a first-class type rather than a constructor detail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation value.
    #[inline]
    fn grad(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config("layer dimensions must be >= 1".into()));
        }
        Ok(LayerSpec { in_dim, out_dim, activation })
    }
}

/// Encoder/decoder specs for the widths `[D, h1, ..., d]`: ReLU hidden
/// layers, identity embedding layer, mirrored decoder with an identity
/// output layer.
pub fn autoencoder_specs(widths: &[usize]) -> Result<(Vec<LayerSpec>, Vec<LayerSpec>)> {
    if widths.len() < 2 {
        return Err(Error::Config("need at least input and embedding widths".into()));
    }
    let mut encoder = Vec::with_capacity(widths.len() - 1);
    for i in 0..widths.len() - 1 {
        let act = if i + 2 == widths.len() { Activation::Identity } else { Activation::Relu };
        encoder.push(LayerSpec::new(widths[i], widths[i + 1], act)?);
    }
    let rev: Vec<usize> = widths.iter().rev().copied().collect();
    let mut decoder = Vec::with_capacity(rev.len() - 1);
    for i in 0..rev.len() - 1 {
        let act = if i + 2 == rev.len() { Activation::Identity } else { Activation::Relu };
        decoder.push(LayerSpec::new(rev[i], rev[i + 1], act)?);
    }
    Ok((encoder, decoder))
}

/// One dense layer: `out = act(in * weights + biases)` with `weights`
/// stored `in_dim x out_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub biases: Vec<f64>,
}

/// Uniform `[-1/sqrt(fan_in), +1/sqrt(fan_in)]` weights, zero biases.
/// Also the distribution fresh weights are drawn from during soft resets.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct InitDistribution;

impl InitDistribution {
    pub fn scale(&self, fan_in: usize) -> f64 {
        1.0 / (fan_in as f64).sqrt()
    }

    pub fn sample_weight(&self, rng: &mut SeededRng, fan_in: usize) -> f64 {
        let s = self.scale(fan_in);
        rng.next_uniform(-s, s)
    }

    pub fn sample_layer(&self, rng: &mut SeededRng, spec: &LayerSpec) -> Layer {
        let mut weights = DenseMatrix::zeros(spec.in_dim, spec.out_dim);
        for v in weights.data_mut() {
            *v = self.sample_weight(rng, spec.in_dim);
        }
        Layer { weights, biases: vec![0.0; spec.out_dim] }
    }
}

/// All parameters of the autoencoder. `version` increments on every
/// mutation so stale forward caches can be rejected in `backward`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    encoder: Vec<Layer>,
    decoder: Vec<Layer>,
    encoder_specs: Vec<LayerSpec>,
    decoder_specs: Vec<LayerSpec>,
    version: u64,
}

impl NetworkParams {
    pub fn input_dim(&self) -> usize {
        self.encoder_specs[0].in_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder_specs.last().unwrap().out_dim
    }

    pub fn encoder(&self) -> &[Layer] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Layer] {
        &self.decoder
    }

    pub fn encoder_specs(&self) -> &[LayerSpec] {
        &self.encoder_specs
    }

    pub fn decoder_specs(&self) -> &[LayerSpec] {
        &self.decoder_specs
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn encoder_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.encoder
    }

    pub(crate) fn decoder_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.decoder
    }

    /// Total parameter count (weights + biases).
    pub fn param_count(&self) -> usize {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .map(|l| l.weights.data().len() + l.biases.len())
            .sum()
    }
}

fn check_chain(specs: &[LayerSpec], what: &str) -> Result<()> {
    for w in specs.windows(2) {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::Shape(format!(
                "{what} layers do not chain: {} -> {}",
                w[0].out_dim, w[1].in_dim
            )));
        }
    }
    Ok(())
}

pub fn init_network(
    encoder_specs: &[LayerSpec],
    decoder_specs: &[LayerSpec],
    init: &InitDistribution,
    rng: &mut SeededRng,
) -> Result<NetworkParams> {
    if encoder_specs.is_empty() || decoder_specs.is_empty() {
        return Err(Error::Config("encoder and decoder need at least one layer".into()));
    }
    check_chain(encoder_specs, "encoder")?;
    check_chain(decoder_specs, "decoder")?;
    let d = encoder_specs.last().unwrap().out_dim;
    if decoder_specs[0].in_dim != d {
        return Err(Error::Shape(format!(
            "decoder input {} does not match embedding dim {d}",
            decoder_specs[0].in_dim
        )));
    }
    if decoder_specs.last().unwrap().out_dim != encoder_specs[0].in_dim {
        return Err(Error::Shape("decoder output does not match input dim".into()));
    }
    let encoder = encoder_specs.iter().map(|s| init.sample_layer(rng, s)).collect();
    let decoder = decoder_specs.iter().map(|s| init.sample_layer(rng, s)).collect();
    Ok(NetworkParams {
        encoder,
        decoder,
        encoder_specs: encoder_specs.to_vec(),
        decoder_specs: decoder_specs.to_vec(),
        version: 0,
    })
}

/// Activations of one stack: `pre[l]` and `act[l]` per layer, with the
/// stack input kept separately as `act0`.
#[derive(Clone, Debug)]
struct StackCache {
    pre: Vec<DenseMatrix>,
    act: Vec<DenseMatrix>,
}

/// Forward pass output plus everything `backward` needs.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub embedding: DenseMatrix,
    pub reconstruction: Option<DenseMatrix>,
    input: DenseMatrix,
    enc: StackCache,
    dec: Option<StackCache>,
    version: u64,
}

fn run_stack(layers: &[Layer], specs: &[LayerSpec], input: &DenseMatrix) -> Result<StackCache> {
    let mut pre = Vec::with_capacity(layers.len());
    let mut act = Vec::with_capacity(layers.len());
    let mut cur = input;
    for (layer, spec) in layers.iter().zip(specs) {
        let mut z = cur.matmul(&layer.weights)?;
        for i in 0..z.rows() {
            let row = z.row_mut(i);
            for (v, b) in row.iter_mut().zip(&layer.biases) {
                *v += b;
            }
        }
        let mut a = z.clone();
        if spec.activation != Activation::Identity {
            for v in a.data_mut() {
                *v = spec.activation.apply(*v);
            }
        }
        pre.push(z);
        act.push(a);
        cur = act.last().unwrap();
    }
    Ok(StackCache { pre, act })
}

/// Encoder + decoder forward with cached activations.
pub fn forward(params: &NetworkParams, batch: &DenseMatrix) -> Result<ForwardPass> {
    if batch.cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {} columns, network expects {}",
            batch.cols(),
            params.input_dim()
        )));
    }
    let enc = run_stack(&params.encoder, &params.encoder_specs, batch)?;
    let embedding = enc.act.last().unwrap().clone();
    let dec = run_stack(&params.decoder, &params.decoder_specs, &embedding)?;
    let reconstruction = dec.act.last().unwrap().clone();
    Ok(ForwardPass {
        embedding,
        reconstruction: Some(reconstruction),
        input: batch.clone(),
        enc,
        dec: Some(dec),
        version: params.version,
    })
}

/// Encoder-only forward (no reconstruction; cheaper for DEC and for
/// embedding data at evaluation or reclustering time).
pub fn forward_encoder(params: &NetworkParams, batch: &DenseMatrix) -> Result<ForwardPass> {
    if batch.cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {} columns, network expects {}",
            batch.cols(),
            params.input_dim()
        )));
    }
    let enc = run_stack(&params.encoder, &params.encoder_specs, batch)?;
    let embedding = enc.act.last().unwrap().clone();
    Ok(ForwardPass { embedding, reconstruction: None, input: batch.clone(), enc, dec: None, version: params.version })
}

/// Mean squared error over all entries.
pub fn reconstruction_loss(batch: &DenseMatrix, recon: &DenseMatrix) -> Result<f64> {
    if batch.rows() != recon.rows() || batch.cols() != recon.cols() {
        return Err(Error::Shape("reconstruction shape mismatch".into()));
    }
    let n = batch.data().len() as f64;
    let mut s = 0.0;
    for (x, z) in batch.data().iter().zip(recon.data()) {
        let d = z - x;
        s += d * d;
    }
    Ok(s / n)
}

/// d(reconstruction_loss)/d(recon) = 2 (recon - batch) / (rows * cols).
pub fn reconstruction_loss_grad(batch: &DenseMatrix, recon: &DenseMatrix) -> Result<DenseMatrix> {
    if batch.rows() != recon.rows() || batch.cols() != recon.cols() {
        return Err(Error::Shape("reconstruction shape mismatch".into()));
    }
    let scale = 2.0 / batch.data().len() as f64;
    let mut g = recon.clone();
    for (v, x) in g.data_mut().iter_mut().zip(batch.data()) {
        *v = (*v - x) * scale;
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerGrads {
    pub weights: DenseMatrix,
    pub biases: Vec<f64>,
}

/// Gradients mirroring `NetworkParams` shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetGrads {
    pub encoder: Vec<LayerGrads>,
    pub decoder: Vec<LayerGrads>,
}

impl NetGrads {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        let make = |layers: &[Layer]| {
            layers
                .iter()
                .map(|l| LayerGrads {
                    weights: DenseMatrix::zeros(l.weights.rows(), l.weights.cols()),
                    biases: vec![0.0; l.biases.len()],
                })
                .collect()
        };
        NetGrads { encoder: make(&params.encoder), decoder: make(&params.decoder) }
    }

    pub fn sq_norm(&self) -> f64 {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .map(|g| g.weights.sq_sum() + g.biases.iter().map(|b| b * b).sum::<f64>())
            .sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.encoder.iter_mut().chain(&mut self.decoder) {
            g.weights.scale(factor);
            for b in &mut g.biases {
                *b *= factor;
            }
        }
    }

    /// `self += other * factor`; shapes must match.
    pub fn add_scaled(&mut self, other: &NetGrads, factor: f64) -> Result<()> {
        if self.encoder.len() != other.encoder.len() || self.decoder.len() != other.decoder.len() {
            return Err(Error::Shape("gradient layer count mismatch".into()));
        }
        for (a, b) in self
            .encoder
            .iter_mut()
            .chain(&mut self.decoder)
            .zip(other.encoder.iter().chain(&other.decoder))
        {
            a.weights.add_scaled(&b.weights, factor)?;
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y * factor;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .all(|g| g.weights.is_finite() && g.biases.iter().all(|b| b.is_finite()))
    }
}

fn backprop_stack(
    layers: &[Layer],
    specs: &[LayerSpec],
    cache: &StackCache,
    stack_input: &DenseMatrix,
    mut grad_out: DenseMatrix,
) -> Result<(Vec<LayerGrads>, DenseMatrix)> {
    let mut grads: Vec<LayerGrads> = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        // dZ = dA ⊙ act'(pre)
        let pre = &cache.pre[l];
        for (g, p) in grad_out.data_mut().iter_mut().zip(pre.data()) {
            *g *= specs[l].activation.grad(*p);
        }
        let below = if l == 0 { stack_input } else { &cache.act[l - 1] };
        let d_w = below.matmul_tn(&grad_out)?;
        let mut d_b = vec![0.0; layers[l].biases.len()];
        for i in 0..grad_out.rows() {
            for (acc, g) in d_b.iter_mut().zip(grad_out.row(i)) {
                *acc += g;
            }
        }
        let next = grad_out.matmul_nt(&layers[l].weights)?;
        grads.push(LayerGrads { weights: d_w, biases: d_b });
        grad_out = next;
    }
    grads.reverse();
    Ok((grads, grad_out))
}

/// Backpropagate upstream gradients on the embedding and/or the
/// reconstruction through the cached forward pass.
pub fn backward(
    params: &NetworkParams,
    fwd: &ForwardPass,
    grad_embedding: Option<&DenseMatrix>,
    grad_reconstruction: Option<&DenseMatrix>,
) -> Result<NetGrads> {
    if fwd.version != params.version {
        return Err(Error::Contract(
            "backward called with a cache from an older parameter version".into(),
        ));
    }
    let rows = fwd.input.rows();
    let d = params.embedding_dim();
    let mut grad_h = DenseMatrix::zeros(rows, d);
    let mut decoder_grads = None;
    if let Some(g_rec) = grad_reconstruction {
        let dec_cache = fwd
            .dec
            .as_ref()
            .ok_or_else(|| Error::Contract("reconstruction gradient for an encoder-only forward".into()))?;
        if g_rec.rows() != rows || g_rec.cols() != params.input_dim() {
            return Err(Error::Shape("reconstruction gradient shape mismatch".into()));
        }
        let (grads, to_embedding) =
            backprop_stack(&params.decoder, &params.decoder_specs, dec_cache, &fwd.embedding, g_rec.clone())?;
        decoder_grads = Some(grads);
        grad_h.add_scaled(&to_embedding, 1.0)?;
    }
    if let Some(g_emb) = grad_embedding {
        if g_emb.rows() != rows || g_emb.cols() != d {
            return Err(Error::Shape("embedding gradient shape mismatch".into()));
        }
        grad_h.add_scaled(g_emb, 1.0)?;
    }
    let (encoder, _) = backprop_stack(&params.encoder, &params.encoder_specs, &fwd.enc, &fwd.input, grad_h)?;
    let decoder = decoder_grads.unwrap_or_else(|| {
        params
            .decoder
            .iter()
            .map(|l| LayerGrads {
                weights: DenseMatrix::zeros(l.weights.rows(), l.weights.cols()),
                biases: vec![0.0; l.biases.len()],
            })
            .collect()
    });
    let grads = NetGrads { encoder, decoder };
    if !grads.is_finite() {
        return Err(Error::Numerical("non-finite gradients in backward".into()));
    }
    Ok(grads)
}

/// Clip the global l2 norm of network gradients (plus the centroid
/// gradient block when given) to `max_l2`, preserving direction.
/// Returns the pre-clip norm.
pub fn clip_gradients(
    net: &mut NetGrads,
    centroids: Option<&mut DenseMatrix>,
    max_l2: f64,
) -> f64 {
    assert!(max_l2 > 0.0, "clip threshold must be positive");
    let mut sq = net.sq_norm();
    if let Some(c) = centroids.as_ref() {
        sq += c.sq_sum();
    }
    let norm = sq.sqrt();
    if norm > max_l2 {
        let f = max_l2 / norm;
        net.scale(f);
        if let Some(c) = centroids {
            c.scale(f);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(rng: &mut SeededRng, rows: usize, cols: usize) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = rng.next_uniform(-1.0, 1.0);
        }
        m
    }

    fn small_net(rng: &mut SeededRng) -> NetworkParams {
        let (enc, dec) = autoencoder_specs(&[6, 5, 3]).unwrap();
        init_network(&enc, &dec, &InitDistribution, rng).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let (enc, dec) = autoencoder_specs(&[8, 4, 2]).unwrap();
        let a = init_network(&enc, &dec, &InitDistribution, &mut SeededRng::new(1)).unwrap();
        let b = init_network(&enc, &dec, &InitDistribution, &mut SeededRng::new(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let (enc, dec) = autoencoder_specs(&[4, 4]).unwrap();
        let params = init_network(&enc, &dec, &InitDistribution, &mut SeededRng::new(2)).unwrap();
        for layer in params.encoder().iter().chain(params.decoder()) {
            assert!(layer.weights.data().iter().all(|w| w.abs() <= 0.5));
            assert!(layer.biases.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn init_weights_symmetric_around_zero() {
        let mut rng = SeededRng::new(3);
        let spec = LayerSpec::new(100, 100, Activation::Relu).unwrap();
        let layer = InitDistribution.sample_layer(&mut rng, &spec);
        let mean = layer.weights.data().iter().sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn init_rejects_non_chaining_specs() {
        let enc = vec![LayerSpec::new(4, 3, Activation::Relu).unwrap(), LayerSpec::new(2, 2, Activation::Identity).unwrap()];
        let dec = vec![LayerSpec::new(2, 4, Activation::Identity).unwrap()];
        assert!(matches!(
            init_network(&enc, &dec, &InitDistribution, &mut SeededRng::new(0)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn forward_identity_net_passes_batch_through() {
        let spec = vec![LayerSpec::new(2, 2, Activation::Identity).unwrap()];
        let mut params = init_network(&spec, &spec, &InitDistribution, &mut SeededRng::new(4)).unwrap();
        for layer in params.encoder_mut() {
            let eye = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
            layer.weights = eye;
            layer.biases = vec![0.0, 0.0];
        }
        let batch = DenseMatrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 3.0]]).unwrap();
        let fwd = forward_encoder(&params, &batch).unwrap();
        assert_eq!(fwd.embedding, batch);
    }

    #[test]
    fn forward_zero_input_zero_bias_zero_embedding() {
        let mut rng = SeededRng::new(5);
        let params = small_net(&mut rng);
        let batch = DenseMatrix::zeros(3, 6);
        let fwd = forward_encoder(&params, &batch).unwrap();
        assert!(fwd.embedding.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_per_sample_oracle() {
        let mut rng = SeededRng::new(6);
        let params = small_net(&mut rng);
        let batch = random_batch(&mut rng, 4, 6);
        let fwd = forward(&params, &batch).unwrap();
        // independent scalar-loop reimplementation
        for r in 0..batch.rows() {
            let mut cur: Vec<f64> = batch.row(r).to_vec();
            for (layer, spec) in params.encoder().iter().zip(params.encoder_specs()) {
                let mut next = vec![0.0; spec.out_dim];
                for (j, nj) in next.iter_mut().enumerate() {
                    let mut s = layer.biases[j];
                    for (i, c) in cur.iter().enumerate() {
                        s += c * layer.weights.get(i, j);
                    }
                    *nj = spec.activation.apply(s);
                }
                cur = next;
            }
            for (j, &v) in cur.iter().enumerate() {
                assert!((fwd.embedding.get(r, j) - v).abs() < 1e-12);
            }
        }
        assert_eq!(fwd.reconstruction.as_ref().unwrap().cols(), 6);
    }

    #[test]
    fn reconstruction_loss_cases() {
        let x = DenseMatrix::from_rows(&[vec![0.0]]).unwrap();
        let z = DenseMatrix::from_rows(&[vec![2.0]]).unwrap();
        assert_eq!(reconstruction_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(reconstruction_loss(&x, &z).unwrap(), 4.0);
        let mut rng = SeededRng::new(7);
        let a = random_batch(&mut rng, 5, 4);
        let b = random_batch(&mut rng, 5, 4);
        let mut expect = 0.0;
        for i in 0..5 {
            for j in 0..4 {
                expect += (a.get(i, j) - b.get(i, j)).powi(2);
            }
        }
        expect /= 20.0;
        assert!((reconstruction_loss(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn backward_zero_upstream_gives_zero_grads() {
        let mut rng = SeededRng::new(8);
        let params = small_net(&mut rng);
        let batch = random_batch(&mut rng, 3, 6);
        let fwd = forward(&params, &batch).unwrap();
        let zero_h = DenseMatrix::zeros(3, 3);
        let zero_r = DenseMatrix::zeros(3, 6);
        let grads = backward(&params, &fwd, Some(&zero_h), Some(&zero_r)).unwrap();
        assert_eq!(grads.sq_norm(), 0.0);
    }

    #[test]
    fn backward_rejects_stale_cache() {
        let mut rng = SeededRng::new(9);
        let mut params = small_net(&mut rng);
        let batch = random_batch(&mut rng, 3, 6);
        let fwd = forward(&params, &batch).unwrap();
        params.encoder_mut()[0].biases[0] += 0.1; // bumps version
        let zero_h = DenseMatrix::zeros(3, 3);
        assert!(matches!(
            backward(&params, &fwd, Some(&zero_h), None),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn backward_matches_finite_differences_for_reconstruction() {
        let mut rng = SeededRng::new(10);
        let (enc, dec) = autoencoder_specs(&[5, 4, 2]).unwrap();
        let mut params = init_network(&enc, &dec, &InitDistribution, &mut rng).unwrap();
        let batch = random_batch(&mut rng, 4, 5);
        let fwd = forward(&params, &batch).unwrap();
        let g_rec = reconstruction_loss_grad(&batch, fwd.reconstruction.as_ref().unwrap()).unwrap();
        let grads = backward(&params, &fwd, None, Some(&g_rec)).unwrap();

        let h = 1e-5;
        let loss_at = |p: &NetworkParams| {
            let f = forward(p, &batch).unwrap();
            reconstruction_loss(&batch, f.reconstruction.as_ref().unwrap()).unwrap()
        };
        let mut checked = 0;
        for layer_idx in 0..2 {
            for widx in 0..params.encoder()[layer_idx].weights.data().len() {
                let orig = params.encoder()[layer_idx].weights.data()[widx];
                params.encoder_mut()[layer_idx].weights.data_mut()[widx] = orig + h;
                let up = loss_at(&params);
                params.encoder_mut()[layer_idx].weights.data_mut()[widx] = orig - h;
                let down = loss_at(&params);
                params.encoder_mut()[layer_idx].weights.data_mut()[widx] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads.encoder[layer_idx].weights.data()[widx];
                let denom = an.abs().max(fd.abs()).max(1e-8);
                assert!((an - fd).abs() / denom < 1e-4, "layer {layer_idx} w{widx}: {an} vs {fd}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn backward_linear_layer_closed_form() {
        // single linear encoder layer, loss = MSE(H, X): dW = 2 X^T (H - X) / (n d)
        let spec = vec![LayerSpec::new(3, 3, Activation::Identity).unwrap()];
        let mut rng = SeededRng::new(11);
        let params = init_network(&spec, &spec, &InitDistribution, &mut rng).unwrap();
        let batch = random_batch(&mut rng, 6, 3);
        let fwd = forward_encoder(&params, &batch).unwrap();
        let g_h = reconstruction_loss_grad(&batch, &fwd.embedding).unwrap();
        let grads = backward(&params, &fwd, Some(&g_h), None).unwrap();
        let mut diff = fwd.embedding.clone();
        diff.add_scaled(&batch, -1.0).unwrap();
        diff.scale(2.0 / 18.0);
        let expect = batch.matmul_tn(&diff).unwrap();
        for (a, b) in grads.encoder[0].weights.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn clip_gradients_cases() {
        let mut rng = SeededRng::new(12);
        let params = small_net(&mut rng);
        let mut grads = NetGrads::zeros_like(&params);
        grads.encoder[0].weights.set(0, 0, 3.0);
        grads.encoder[0].weights.set(0, 1, 4.0);
        let pre = clip_gradients(&mut grads, None, 10.0);
        assert_eq!(pre, 5.0);
        assert_eq!(grads.encoder[0].weights.get(0, 0), 3.0); // untouched below threshold

        let pre = clip_gradients(&mut grads, None, 1.0);
        assert_eq!(pre, 5.0);
        assert!((grads.encoder[0].weights.get(0, 0) - 0.6).abs() < 1e-12);
        assert!((grads.encoder[0].weights.get(0, 1) - 0.8).abs() < 1e-12);
        assert!((grads.sq_norm().sqrt() - 1.0).abs() < 1e-12);
    }
}
