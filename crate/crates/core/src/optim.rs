//! Adam optimizer with per-parameter moments. The centroid block (DEC and
//! IDEC learn cluster centers as parameters) is stored separately so BRB
//! momentum resets can zero exactly that block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{NetGrads, NetworkParams};
use crate::numerics::DenseMatrix;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMoments {
    pub m_w: DenseMatrix,
    pub v_w: DenseMatrix,
    pub m_b: Vec<f64>,
    pub v_b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatMoments {
    pub m: DenseMatrix,
    pub v: DenseMatrix,
}

/// First/second moment estimates for every parameter, plus the shared
/// step counter `t`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub t: u64,
    encoder: Vec<LayerMoments>,
    decoder: Vec<LayerMoments>,
    centroids: Option<MatMoments>,
}

impl AdamState {
    pub fn new(params: &NetworkParams, centroids: Option<&DenseMatrix>, cfg: AdamConfig) -> Self {
        let make = |layers: &[crate::net::Layer]| {
            layers
                .iter()
                .map(|l| LayerMoments {
                    m_w: DenseMatrix::zeros(l.weights.rows(), l.weights.cols()),
                    v_w: DenseMatrix::zeros(l.weights.rows(), l.weights.cols()),
                    m_b: vec![0.0; l.biases.len()],
                    v_b: vec![0.0; l.biases.len()],
                })
                .collect()
        };
        AdamState {
            cfg,
            t: 0,
            encoder: make(params.encoder()),
            decoder: make(params.decoder()),
            centroids: centroids.map(|c| MatMoments {
                m: DenseMatrix::zeros(c.rows(), c.cols()),
                v: DenseMatrix::zeros(c.rows(), c.cols()),
            }),
        }
    }

    pub fn has_centroid_block(&self) -> bool {
        self.centroids.is_some()
    }

    pub fn centroid_moments(&self) -> Option<&MatMoments> {
        self.centroids.as_ref()
    }

    pub fn network_moments(&self) -> (&[LayerMoments], &[LayerMoments]) {
        (&self.encoder, &self.decoder)
    }

    /// Zero the centroid moment block. Returns false (no-op) when
    /// centroids are not optimizer-owned (DCN).
    pub(crate) fn zero_centroid_moments(&mut self) -> bool {
        match &mut self.centroids {
            Some(mm) => {
                mm.m.scale(0.0);
                mm.v.scale(0.0);
                true
            }
            None => false,
        }
    }

    /// Zero the network moment blocks (optional after a soft reset; off by
    /// default).
    pub(crate) fn zero_network_moments(&mut self) {
        for lm in self.encoder.iter_mut().chain(&mut self.decoder) {
            lm.m_w.scale(0.0);
            lm.v_w.scale(0.0);
            lm.m_b.iter_mut().for_each(|x| *x = 0.0);
            lm.v_b.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

#[inline]
fn adam_update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// One Adam step over the network parameters and, when present, the
/// centroid parameter block. Bias correction uses the shared counter.
pub fn adam_step(
    params: &mut NetworkParams,
    centroids: Option<&mut DenseMatrix>,
    net_grads: &NetGrads,
    centroid_grads: Option<&DenseMatrix>,
    state: &mut AdamState,
) -> Result<()> {
    if net_grads.encoder.len() != state.encoder.len() || net_grads.decoder.len() != state.decoder.len() {
        return Err(Error::Shape("gradient/moment layer count mismatch".into()));
    }
    state.t += 1;
    let bias1 = 1.0 - state.cfg.beta1.powi(state.t as i32);
    let bias2 = 1.0 - state.cfg.beta2.powi(state.t as i32);
    let cfg = state.cfg;

    for (layer, (grad, mom)) in params
        .encoder_mut()
        .iter_mut()
        .zip(net_grads.encoder.iter().zip(state.encoder.iter_mut()))
    {
        adam_update_slice(layer.weights.data_mut(), grad.weights.data(), mom.m_w.data_mut(), mom.v_w.data_mut(), &cfg, bias1, bias2);
        adam_update_slice(&mut layer.biases, &grad.biases, &mut mom.m_b, &mut mom.v_b, &cfg, bias1, bias2);
    }
    for (layer, (grad, mom)) in params
        .decoder_mut()
        .iter_mut()
        .zip(net_grads.decoder.iter().zip(state.decoder.iter_mut()))
    {
        adam_update_slice(layer.weights.data_mut(), grad.weights.data(), mom.m_w.data_mut(), mom.v_w.data_mut(), &cfg, bias1, bias2);
        adam_update_slice(&mut layer.biases, &grad.biases, &mut mom.m_b, &mut mom.v_b, &cfg, bias1, bias2);
    }
    match (centroids, centroid_grads, state.centroids.as_mut()) {
        (Some(c), Some(g), Some(mm)) => {
            if c.rows() != g.rows() || c.cols() != g.cols() {
                return Err(Error::Shape("centroid gradient shape mismatch".into()));
            }
            adam_update_slice(c.data_mut(), g.data(), mm.m.data_mut(), mm.v.data_mut(), &cfg, bias1, bias2);
        }
        (None, None, _) => {}
        (Some(_), None, _) | (None, Some(_), _) => {
            return Err(Error::Contract("centroids and centroid gradients must be passed together".into()))
        }
        (Some(_), Some(_), None) => {
            return Err(Error::Contract("AdamState was built without a centroid block".into()))
        }
    }
    Ok(())
}
