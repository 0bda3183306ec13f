//! BRB: periodic soft weight resets interleaved with reclustering and
//! centroid-momentum resets, plus the two ablation procedures
//! (disentangled target refresh and embedding-noise reclustering).
//!
//! A soft reset interpolates every in-scope weight with a freshly sampled
//! initial weight, new_w = alpha * w + (1 - alpha) * phi. By default only
//! the encoder's hidden layers are reset; the embedding layer and decoder
//! opt in via flags. Biases interpolate against zero, matching their
//! initialization.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{forward_encoder, InitDistribution, NetworkParams};
use crate::numerics::DenseMatrix;
use crate::objectives::{dcn_assign, Algorithm, ClusterState};
use crate::optim::AdamState;
use crate::recluster::{recluster_embeddings, ReclusterConfig};
use crate::rng::SeededRng;
use crate::data::subsample_indices;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrbVariant {
    Brb,
    ResetOnly,
    ReclusterOnly,
    Disentangled,
    Noise,
    Off,
}

impl BrbVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "brb" => Ok(BrbVariant::Brb),
            "reset_only" | "reset" => Ok(BrbVariant::ResetOnly),
            "recluster_only" | "recluster" => Ok(BrbVariant::ReclusterOnly),
            "disentangled" => Ok(BrbVariant::Disentangled),
            "noise" => Ok(BrbVariant::Noise),
            "off" | "none" => Ok(BrbVariant::Off),
            other => Err(Error::Config(format!("unknown BRB variant '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BrbVariant::Brb => "brb",
            BrbVariant::ResetOnly => "reset_only",
            BrbVariant::ReclusterOnly => "recluster_only",
            BrbVariant::Disentangled => "disentangled",
            BrbVariant::Noise => "noise",
            BrbVariant::Off => "off",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BrbConfig {
    pub variant: BrbVariant,
    /// Reset interpolation factor alpha in (0, 1].
    pub alpha: f64,
    /// Reset interval T in epochs.
    pub interval: usize,
    pub reset_embedding_layer: bool,
    pub reset_decoder: bool,
    pub momentum_reset: bool,
    /// Also zero the network parameter moments after a soft reset
    /// (off by default; centroid moments are governed by momentum_reset).
    pub reset_network_moments: bool,
    pub noise_beta: f64,
    pub recluster: ReclusterConfig,
}

impl BrbConfig {
    pub fn defaults(k: usize) -> Self {
        BrbConfig {
            variant: BrbVariant::Brb,
            alpha: 0.8,
            interval: 20,
            reset_embedding_layer: false,
            reset_decoder: false,
            momentum_reset: true,
            reset_network_moments: false,
            noise_beta: 0.3,
            recluster: ReclusterConfig::kmeans(k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if self.interval == 0 {
            return Err(Error::Config("reset interval T must be >= 1".into()));
        }
        if self.noise_beta < 0.0 {
            return Err(Error::Config("noise beta must be >= 0".into()));
        }
        self.recluster.validate()
    }
}

/// Which parameter groups a soft reset touches.
#[derive(Clone, Copy, Debug)]
pub struct ResetScope {
    pub encoder_hidden: bool,
    pub embedding_layer: bool,
    pub decoder: bool,
}

impl ResetScope {
    pub fn from_config(cfg: &BrbConfig) -> Self {
        ResetScope {
            encoder_hidden: true,
            embedding_layer: cfg.reset_embedding_layer,
            decoder: cfg.reset_decoder,
        }
    }
}

/// Soft-reset the in-scope layers: weights interpolate with fresh draws
/// from the initial weight distribution, biases shrink toward zero.
/// Out-of-scope parameters are left bit-identical and consume no
/// randomness.
pub fn soft_reset(
    params: &mut NetworkParams,
    init: &InitDistribution,
    alpha: f64,
    scope: &ResetScope,
    rng: &mut SeededRng,
) {
    let n_enc = params.encoder().len();
    let specs = params.encoder_specs().to_vec();
    for (idx, layer) in params.encoder_mut().iter_mut().enumerate() {
        let is_embedding = idx + 1 == n_enc;
        let touch = if is_embedding { scope.embedding_layer } else { scope.encoder_hidden };
        if !touch {
            continue;
        }
        let fan_in = specs[idx].in_dim;
        for w in layer.weights.data_mut() {
            let phi = init.sample_weight(rng, fan_in);
            *w = alpha * *w + (1.0 - alpha) * phi;
        }
        for b in &mut layer.biases {
            *b *= alpha;
        }
    }
    if scope.decoder {
        let dec_specs = params.decoder_specs().to_vec();
        for (idx, layer) in params.decoder_mut().iter_mut().enumerate() {
            let fan_in = dec_specs[idx].in_dim;
            for w in layer.weights.data_mut() {
                let phi = init.sample_weight(rng, fan_in);
                *w = alpha * *w + (1.0 - alpha) * phi;
            }
            for b in &mut layer.biases {
                *b *= alpha;
            }
        }
    }
}

/// Zero the optimizer moments of the centroid parameter block. Network
/// moments and the step counter are untouched. Returns false (no-op) when
/// the state has no centroid block (DCN).
pub fn momentum_reset(adam: &mut AdamState) -> bool {
    adam.zero_centroid_moments()
}

/// One BRB event record, including wall-clock split per phase.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BrbEvent {
    pub epoch: usize,
    pub variant: BrbVariant,
    pub subsample_used: usize,
    pub centroids_replaced: bool,
    pub momentum_reset_applied: bool,
    pub reset_s: f64,
    pub embed_s: f64,
    pub cluster_s: f64,
    pub momentum_reset_s: f64,
}

impl BrbEvent {
    pub fn total_s(&self) -> f64 {
        self.reset_s + self.embed_s + self.cluster_s + self.momentum_reset_s
    }
}

/// Embed rows of `x` (all of them, or `indices` when given) with the
/// encoder, in fixed 4096-row slices to bound peak memory. Slicing is
/// independent of callers and thread counts, so results are bit-identical
/// to one whole-matrix pass.
pub fn embed_dataset(
    params: &NetworkParams,
    x: &DenseMatrix,
    indices: Option<&[usize]>,
) -> Result<DenseMatrix> {
    const SLICE: usize = 4096;
    let rows: Vec<usize> = match indices {
        Some(idx) => idx.to_vec(),
        None => (0..x.rows()).collect(),
    };
    let mut out = DenseMatrix::zeros(rows.len(), params.embedding_dim());
    let mut at = 0;
    while at < rows.len() {
        let hi = (at + SLICE).min(rows.len());
        let chunk = x.select_rows(&rows[at..hi]);
        let emb = forward_encoder(params, &chunk)?.embedding;
        for (r, i) in (at..hi).enumerate() {
            out.row_mut(i).copy_from_slice(emb.row(r));
        }
        at = hi;
    }
    Ok(out)
}

fn replace_centroids(
    algorithm: Algorithm,
    params: &NetworkParams,
    cluster: &mut ClusterState,
    new_centroids: DenseMatrix,
    data_x: &DenseMatrix,
) -> Result<()> {
    if new_centroids.rows() != cluster.k() {
        return Err(Error::Contract("reclustering changed the number of clusters".into()));
    }
    cluster.centroids = new_centroids;
    if algorithm == Algorithm::Dcn {
        // stale counts would freeze the moved centers; restart the online
        // means and refresh the persistent assignments against the new
        // centroids
        for c in cluster.counts.iter_mut() {
            *c = 1;
        }
        let emb = embed_dataset(params, data_x, None)?;
        cluster.assignments = dcn_assign(&emb, &cluster.centroids)?;
    }
    Ok(())
}

/// Apply the configured BRB variant at an epoch boundary. Returns None
/// when the schedule does not fire (epoch 0, off-interval epochs, or
/// variant `off`). The experiment rng drives subsampling, fresh weight
/// draws and reclustering, in that order.
#[allow(clippy::too_many_arguments)]
pub fn apply_brb(
    algorithm: Algorithm,
    params: &mut NetworkParams,
    adam: &mut AdamState,
    cluster: &mut ClusterState,
    epoch: usize,
    cfg: &BrbConfig,
    data_x: &DenseMatrix,
    init: &InitDistribution,
    rng: &mut SeededRng,
) -> Result<Option<BrbEvent>> {
    if cfg.variant == BrbVariant::Off || epoch == 0 || epoch % cfg.interval != 0 {
        return Ok(None);
    }
    cfg.validate()?;
    let mut event = BrbEvent {
        epoch,
        variant: cfg.variant,
        subsample_used: 0,
        centroids_replaced: false,
        momentum_reset_applied: false,
        reset_s: 0.0,
        embed_s: 0.0,
        cluster_s: 0.0,
        momentum_reset_s: 0.0,
    };
    let scope = ResetScope::from_config(cfg);
    let n = data_x.rows();

    let run_momentum_reset = |adam: &mut AdamState, event: &mut BrbEvent| {
        if cfg.momentum_reset {
            let t0 = Instant::now();
            event.momentum_reset_applied = momentum_reset(adam);
            event.momentum_reset_s = t0.elapsed().as_secs_f64();
        }
    };

    match cfg.variant {
        BrbVariant::Off => unreachable!(),
        BrbVariant::ResetOnly => {
            let t0 = Instant::now();
            soft_reset(params, init, cfg.alpha, &scope, rng);
            if cfg.reset_network_moments {
                adam.zero_network_moments();
            }
            event.reset_s = t0.elapsed().as_secs_f64();
        }
        BrbVariant::Brb => {
            let t0 = Instant::now();
            soft_reset(params, init, cfg.alpha, &scope, rng);
            if cfg.reset_network_moments {
                adam.zero_network_moments();
            }
            event.reset_s = t0.elapsed().as_secs_f64();

            let idx = subsample_indices(n, cfg.recluster.subsample, rng);
            event.subsample_used = idx.len();
            let t1 = Instant::now();
            let emb = embed_dataset(params, data_x, Some(&idx))?;
            event.embed_s = t1.elapsed().as_secs_f64();

            let t2 = Instant::now();
            let (centroids, _) = recluster_embeddings(&emb, &cfg.recluster, rng)?;
            event.cluster_s = t2.elapsed().as_secs_f64();
            replace_centroids(algorithm, params, cluster, centroids, data_x)?;
            event.centroids_replaced = true;
            if algorithm.centroids_are_parameters() {
                run_momentum_reset(adam, &mut event);
            }
        }
        BrbVariant::ReclusterOnly => {
            let idx = subsample_indices(n, cfg.recluster.subsample, rng);
            event.subsample_used = idx.len();
            let t1 = Instant::now();
            let emb = embed_dataset(params, data_x, Some(&idx))?;
            event.embed_s = t1.elapsed().as_secs_f64();
            let t2 = Instant::now();
            let (centroids, _) = recluster_embeddings(&emb, &cfg.recluster, rng)?;
            event.cluster_s = t2.elapsed().as_secs_f64();
            replace_centroids(algorithm, params, cluster, centroids, data_x)?;
            event.centroids_replaced = true;
            if algorithm.centroids_are_parameters() {
                run_momentum_reset(adam, &mut event);
            }
        }
        BrbVariant::Disentangled => {
            let idx = subsample_indices(n, cfg.recluster.subsample, rng);
            event.subsample_used = idx.len();
            let t0 = Instant::now();
            let mut copy = params.clone();
            soft_reset(&mut copy, init, cfg.alpha, &scope, rng);
            event.reset_s = t0.elapsed().as_secs_f64();

            let t1 = Instant::now();
            let perturbed = embed_dataset(&copy, data_x, Some(&idx))?;
            let unperturbed = embed_dataset(params, data_x, Some(&idx))?;
            event.embed_s = t1.elapsed().as_secs_f64();

            let t2 = Instant::now();
            let labels = dcn_assign(&perturbed, &cluster.centroids)?;
            let k = cluster.k();
            let d = cluster.centroids.cols();
            let mut sums = DenseMatrix::zeros(k, d);
            let mut counts = vec![0usize; k];
            for (row, &label) in labels.iter().enumerate() {
                counts[label] += 1;
                let acc = sums.row_mut(label);
                for (a, v) in acc.iter_mut().zip(unperturbed.row(row)) {
                    *a += v;
                }
            }
            let mut centroids = cluster.centroids.clone();
            for j in 0..k {
                if counts[j] > 0 {
                    let inv = 1.0 / counts[j] as f64;
                    let src: Vec<f64> = sums.row(j).iter().map(|v| v * inv).collect();
                    centroids.row_mut(j).copy_from_slice(&src);
                }
                // empty label class keeps its previous centroid
            }
            event.cluster_s = t2.elapsed().as_secs_f64();
            replace_centroids(algorithm, params, cluster, centroids, data_x)?;
            event.centroids_replaced = true;
            if algorithm.centroids_are_parameters() {
                run_momentum_reset(adam, &mut event);
            }
        }
        BrbVariant::Noise => {
            let idx = subsample_indices(n, cfg.recluster.subsample, rng);
            event.subsample_used = idx.len();
            let t1 = Instant::now();
            let mut emb = embed_dataset(params, data_x, Some(&idx))?;
            event.embed_s = t1.elapsed().as_secs_f64();
            let d = emb.cols();
            for i in 0..emb.rows() {
                let row = emb.row_mut(i);
                let h_norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                let eps: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
                if h_norm == 0.0 {
                    continue; // scale undefined on a zero embedding; add nothing
                }
                let e_norm = eps.iter().map(|v| v * v).sum::<f64>().sqrt();
                if e_norm == 0.0 {
                    continue;
                }
                let scale = cfg.noise_beta * h_norm / e_norm;
                for (v, e) in row.iter_mut().zip(&eps) {
                    *v += scale * e;
                }
            }
            let t2 = Instant::now();
            let (centroids, _) = recluster_embeddings(&emb, &cfg.recluster, rng)?;
            event.cluster_s = t2.elapsed().as_secs_f64();
            replace_centroids(algorithm, params, cluster, centroids, data_x)?;
            event.centroids_replaced = true;
            if algorithm.centroids_are_parameters() {
                run_momentum_reset(adam, &mut event);
            }
        }
    }
    Ok(Some(event))
}
