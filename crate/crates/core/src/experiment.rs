//! Experiment orchestration: dataset preparation, reconstruction
//! pretraining, clustering initialization, the clustering training loop
//! with BRB events and per-epoch evaluation, embedding export and the
//! multi-seed suite runner.
//!
//! Every run is a deterministic function of (config, seed). The master
//! seed is split into fixed per-purpose streams so the schedule of one
//! consumer (say, augmentation) can never shift another's.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::brb::{apply_brb, embed_dataset};
use crate::config::{DatasetSpec, ExperimentConfig};
use crate::data::{
    augment_batch, load_dense_csv, make_blobs, subsample_indices, z_transform, Dataset,
};
use crate::error::{Error, Result};
use crate::log::{
    ExperimentLog, LogLine, MetricRecord, Phase, RunSummary, SCHEMA_VERSION,
};
use crate::metrics::{
    ari, class_distance_summary, cluster_label_change, clustering_accuracy, distance_ratio_hist,
    nmi,
};
use crate::net::{
    autoencoder_specs, backward, clip_gradients, forward, forward_encoder, init_network,
    reconstruction_loss, reconstruction_loss_grad, InitDistribution, NetworkParams,
};
use crate::objectives::{
    combined_loss_and_grads, dcn_assign, dcn_center_update, Algorithm, BatchTargets, ClusterState,
};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::recluster::{kmeans, ReclusterAlgorithm, ReclusterConfig};
use crate::rng::SeededRng;

// Per-purpose rng streams derived from the experiment seed.
const STREAM_INIT: u64 = 1;
const STREAM_PRETRAIN_SHUFFLE: u64 = 2;
const STREAM_CLUSTER_SHUFFLE: u64 = 3;
const STREAM_AUGMENT: u64 = 4;
const STREAM_BRB: u64 = 5;
const STREAM_INIT_CLUSTER: u64 = 6;
const STREAM_DATA: u64 = 7;
const STREAM_EVAL: u64 = 8;
const STREAM_HOLDOUT: u64 = 9;

/// Bins of the logged distance-ratio histograms.
const RHO_BINS: usize = 20;

pub struct RunArtifacts {
    pub log: ExperimentLog,
    pub params: NetworkParams,
    pub cluster: ClusterState,
    pub dataset: Dataset,
}

/// Load (or synthesize) and standardize the configured dataset.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut ds = match &cfg.dataset {
        DatasetSpec::Csv { path, label_column, geometry } => {
            let mut ds = load_dense_csv(path, *label_column)?;
            if let Some(g) = geometry {
                if g.pixels() != ds.dim() {
                    return Err(Error::Config(format!(
                        "geometry {}x{}x{} does not match {} features",
                        g.height,
                        g.width,
                        g.channels,
                        ds.dim()
                    )));
                }
                ds.geometry = Some(*g);
            }
            ds
        }
        DatasetSpec::Blobs { k, per_cluster, dim, separation, spread } => {
            let mut rng = SeededRng::derive(cfg.seed, STREAM_DATA);
            make_blobs(*k, *per_cluster, *dim, *separation, *spread, &mut rng)?
        }
    };
    z_transform(&mut ds);
    Ok(ds)
}

/// Cluster count: explicit `k`, else derived from labels.
pub fn resolve_k(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<usize> {
    match (cfg.k, dataset.num_classes()) {
        (Some(k), _) => Ok(k),
        (None, Some(k)) => Ok(k),
        (None, None) => Err(Error::Config(
            "k must be set explicitly for unlabeled datasets".into(),
        )),
    }
}

fn build_network(cfg: &ExperimentConfig, input_dim: usize, k: usize) -> Result<NetworkParams> {
    let d = cfg.embedding_dim.unwrap_or(k);
    let mut widths = Vec::with_capacity(cfg.hidden.len() + 2);
    widths.push(input_dim);
    widths.extend_from_slice(&cfg.hidden);
    widths.push(d);
    let (enc, dec) = autoencoder_specs(&widths)?;
    let mut rng = SeededRng::derive(cfg.seed, STREAM_INIT);
    init_network(&enc, &dec, &InitDistribution, &mut rng)
}

/// Reconstruction-only pretraining. A seeded holdout slice (10% of rows,
/// capped at 1000) is excluded from the batches; its reconstruction loss
/// before and after training lands in the run summary as a sanity gate.
/// With zero effective epochs the fresh initialization is returned
/// untouched (scenario 2).
pub fn run_pretraining(
    params: &mut NetworkParams,
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    log: &mut ExperimentLog,
) -> Result<(Option<f64>, Option<f64>)> {
    let epochs = cfg.effective_pretrain_epochs();
    if epochs == 0 {
        return Ok((None, None));
    }
    let n = dataset.n();
    let holdout_size = (n / 10).min(1000);
    let mut holdout_rng = SeededRng::derive(cfg.seed, STREAM_HOLDOUT);
    let holdout: Vec<usize> =
        if holdout_size > 0 { subsample_indices(n, holdout_size, &mut holdout_rng) } else { Vec::new() };
    let mut in_holdout = vec![false; n];
    for &i in &holdout {
        in_holdout[i] = true;
    }
    let train_rows: Vec<usize> = (0..n).filter(|&i| !in_holdout[i]).collect();
    let holdout_x = (!holdout.is_empty()).then(|| dataset.x.select_rows(&holdout));

    let eval_holdout = |params: &NetworkParams| -> Result<Option<f64>> {
        match &holdout_x {
            Some(hx) => {
                let fwd = forward(params, hx)?;
                Ok(Some(reconstruction_loss(hx, fwd.reconstruction.as_ref().unwrap())?))
            }
            None => Ok(None),
        }
    };
    let initial = eval_holdout(params)?;

    let mut adam = AdamState::new(params, None, AdamConfig::with_lr(cfg.lr));
    let mut rng_shuffle = SeededRng::derive(cfg.seed, STREAM_PRETRAIN_SHUFFLE);
    let mut order = train_rows;
    for epoch in 0..epochs {
        let t0 = Instant::now();
        rng_shuffle.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = dataset.x.select_rows(chunk);
            let fwd = forward(params, &batch)?;
            let recon = fwd.reconstruction.as_ref().unwrap();
            let loss = reconstruction_loss(&batch, recon)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("pretrain epoch {epoch}: loss went non-finite")));
            }
            let grad = reconstruction_loss_grad(&batch, recon)?;
            let mut grads = backward(params, &fwd, None, Some(&grad))?;
            if let Some(clip) = cfg.grad_clip {
                clip_gradients(&mut grads, None, clip);
            }
            adam_step(params, None, &grads, None, &mut adam)?;
            loss_sum += loss;
            batches += 1;
        }
        let mean = loss_sum / batches.max(1) as f64;
        log.push(LogLine::Metrics(MetricRecord {
            epoch,
            phase: Phase::Pretrain,
            acc: None,
            nmi: None,
            ari: None,
            intra_cd: None,
            inter_cd: None,
            silhouette: None,
            cl_change: None,
            loss_total: mean,
            loss_ssl: mean,
            loss_cluster: 0.0,
            decoder_grad_norm: 0.0,
            epoch_s: t0.elapsed().as_secs_f64(),
        }));
    }
    let final_ = eval_holdout(params)?;
    Ok((initial, final_))
}

/// k-means on the (subsample-capped) embeddings of the current network.
/// DEC/IDEC then treat the resulting centroids as optimizer parameters;
/// DCN starts its per-cluster counts at 1 with full-data assignments.
pub fn init_clustering(
    params: &NetworkParams,
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    k: usize,
) -> Result<ClusterState> {
    let mut rng = SeededRng::derive(cfg.seed, STREAM_INIT_CLUSTER);
    let n = dataset.n();
    let idx = subsample_indices(n, cfg.subsample_size.min(n).max(k), &mut rng);
    let emb = embed_dataset(params, &dataset.x, Some(&idx))?;
    let km_cfg = ReclusterConfig {
        algorithm: ReclusterAlgorithm::Kmeans,
        k,
        max_iters: cfg.recluster_max_iters,
        tol: cfg.recluster_tol,
        subsample: idx.len().max(k),
    };
    let res = kmeans(&emb, &km_cfg, &mut rng)?;
    let full = embed_dataset(params, &dataset.x, None)?;
    let assignments = dcn_assign(&full, &res.centroids)?;
    let counts = vec![1u64; k];
    Ok(ClusterState { centroids: res.centroids, assignments, counts })
}

struct EpochStats {
    loss_total: f64,
    loss_ssl: f64,
    loss_cluster: f64,
    decoder_grad_norm: f64,
}

/// The clustering phase: per epoch, an optional BRB event at the epoch
/// boundary, shuffled minibatch updates (with the augmented objectives
/// when augmentation is enabled), DCN's post-step assignment and center
/// updates, and scheduled evaluation.
#[allow(clippy::too_many_arguments)]
pub fn run_clustering(
    params: &mut NetworkParams,
    adam: &mut AdamState,
    cluster: &mut ClusterState,
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    k: usize,
    log: &mut ExperimentLog,
) -> Result<()> {
    let alg = cfg.algorithm;
    let weights = cfg.weights();
    let aug_cfg = cfg.augment_config(dataset.geometry.as_ref());
    let brb_cfg = cfg.brb_config(k);
    brb_cfg.validate()?;
    let n = dataset.n();
    let mut rng_shuffle = SeededRng::derive(cfg.seed, STREAM_CLUSTER_SHUFFLE);
    let mut rng_aug = SeededRng::derive(cfg.seed, STREAM_AUGMENT);
    let mut rng_brb = SeededRng::derive(cfg.seed, STREAM_BRB);
    let mut rng_eval = SeededRng::derive(cfg.seed, STREAM_EVAL);
    let eval_idx = subsample_indices(n, cfg.eval_subsample.min(n), &mut rng_eval);
    let eval_labels: Option<Vec<usize>> =
        dataset.y.as_ref().map(|y| eval_idx.iter().map(|&i| y[i]).collect());

    let mut prev_labels: Option<Vec<usize>> = None;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.clustering_epochs {
        let t0 = Instant::now();
        if let Some(event) = apply_brb(
            alg,
            params,
            adam,
            cluster,
            epoch,
            &brb_cfg,
            &dataset.x,
            &InitDistribution,
            &mut rng_brb,
        )? {
            log.push(LogLine::BrbEvent(event));
        }

        rng_shuffle.shuffle(&mut order);
        let mut stats = EpochStats { loss_total: 0.0, loss_ssl: 0.0, loss_cluster: 0.0, decoder_grad_norm: 0.0 };
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = dataset.x.select_rows(chunk);
            let aug = if aug_cfg.enabled {
                Some(augment_batch(&batch, dataset.geometry.as_ref(), &aug_cfg, &mut rng_aug))
            } else {
                None
            };
            let targets = (alg == Algorithm::Dcn).then(|| BatchTargets {
                dec_p: None,
                assignments: Some(chunk.iter().map(|&i| cluster.assignments[i]).collect()),
            });
            let mut out = combined_loss_and_grads(
                alg,
                params,
                cluster,
                &batch,
                aug.as_ref(),
                &weights,
                targets,
            )
            .map_err(|e| Error::Numerical(format!("clustering epoch {epoch}: {e}")))?;
            if let Some(clip) = cfg.grad_clip {
                clip_gradients(&mut out.net_grads, out.centroid_grads.as_mut(), clip);
            }
            let dec_sq: f64 = out.net_grads.decoder.iter().map(|g| {
                g.weights.sq_sum() + g.biases.iter().map(|b| b * b).sum::<f64>()
            }).sum();
            stats.decoder_grad_norm += dec_sq.sqrt();
            match alg {
                Algorithm::Dec | Algorithm::Idec => {
                    adam_step(
                        params,
                        Some(&mut cluster.centroids),
                        &out.net_grads,
                        out.centroid_grads.as_ref(),
                        adam,
                    )?;
                }
                Algorithm::Dcn => {
                    adam_step(params, None, &out.net_grads, None, adam)?;
                    // reassign the batch under the updated encoder, then
                    // stream the online center updates in batch order
                    let emb = forward_encoder(params, &batch)?.embedding;
                    let new_assign = dcn_assign(&emb, &cluster.centroids)?;
                    for (pos, &i) in chunk.iter().enumerate() {
                        cluster.assignments[i] = new_assign[pos];
                        dcn_center_update(
                            &mut cluster.centroids,
                            &mut cluster.counts,
                            emb.row(pos),
                            new_assign[pos],
                        )?;
                    }
                }
            }
            stats.loss_total += out.loss.total;
            stats.loss_ssl += out.loss.ssl;
            stats.loss_cluster += out.loss.cluster;
            batches += 1;
        }
        let bn = batches.max(1) as f64;

        let is_last = epoch + 1 == cfg.clustering_epochs;
        if epoch % cfg.eval_every == 0 || is_last {
            let emb_full = embed_dataset(params, &dataset.x, None)?;
            let pred = dcn_assign(&emb_full, &cluster.centroids)?;
            let (acc_v, nmi_v, ari_v) = match dataset.y.as_ref() {
                Some(y) => {
                    let k_eval = k
                        .max(y.iter().copied().max().unwrap_or(0) + 1)
                        .max(pred.iter().copied().max().unwrap_or(0) + 1);
                    (
                        Some(clustering_accuracy(y, &pred, k_eval)?),
                        Some(nmi(y, &pred)? * 100.0),
                        Some(ari(y, &pred)? * 100.0),
                    )
                }
                None => (None, None, None),
            };
            let cl = match prev_labels.as_ref() {
                Some(prev) => Some(cluster_label_change(&pred, prev)?),
                None => None,
            };
            let mut intra = None;
            let mut inter = None;
            let mut sil = None;
            if epoch % cfg.eval_cd_every == 0 || is_last {
                let sub = emb_full.select_rows(&eval_idx);
                if let Some(sub_y) = eval_labels.as_ref() {
                    if sub_y.iter().collect::<std::collections::BTreeSet<_>>().len() >= 2 {
                        let summary = class_distance_summary(&sub, sub_y)?;
                        intra = Some(summary.intra_cd);
                        inter = Some(summary.inter_cd);
                        sil = Some(summary.silhouette);
                    }
                }
                if k >= 2 {
                    let mut hist = distance_ratio_hist(&sub, &cluster.centroids, RHO_BINS)?;
                    hist.epoch = epoch;
                    log.push(LogLine::Rho(hist));
                }
            }
            prev_labels = Some(pred);
            log.push(LogLine::Metrics(MetricRecord {
                epoch,
                phase: Phase::Cluster,
                acc: acc_v,
                nmi: nmi_v,
                ari: ari_v,
                intra_cd: intra,
                inter_cd: inter,
                silhouette: sil,
                cl_change: cl,
                loss_total: stats.loss_total / bn,
                loss_ssl: stats.loss_ssl / bn,
                loss_cluster: stats.loss_cluster / bn,
                decoder_grad_norm: stats.decoder_grad_norm / bn,
                epoch_s: t0.elapsed().as_secs_f64(),
            }));
        }
    }
    Ok(())
}

fn summarize(log: &ExperimentLog, pretrain_holdout: (Option<f64>, Option<f64>)) -> RunSummary {
    let mut summary = RunSummary::default();
    let mut best = |slot: &mut Option<f64>, v: Option<f64>| {
        if let Some(v) = v {
            *slot = Some(slot.map_or(v, |cur: f64| cur.max(v)));
        }
    };
    for m in log.metrics() {
        match m.phase {
            Phase::Pretrain => summary.pretrain_s += m.epoch_s,
            Phase::Cluster => {
                summary.cluster_s += m.epoch_s;
                summary.epochs = summary.epochs.max(m.epoch + 1);
                summary.last_acc = m.acc.or(summary.last_acc);
                summary.last_nmi = m.nmi.or(summary.last_nmi);
                summary.last_ari = m.ari.or(summary.last_ari);
                best(&mut summary.best_acc, m.acc);
                best(&mut summary.best_nmi, m.nmi);
                best(&mut summary.best_ari, m.ari);
            }
        }
    }
    summary.brb_events = log.brb_events().count();
    summary.total_s = summary.pretrain_s + summary.cluster_s;
    summary.pretrain_holdout_initial = pretrain_holdout.0;
    summary.pretrain_holdout_final = pretrain_holdout.1;
    summary
}

/// Run the full pipeline for one config: load data, init network,
/// scenario-1 pretraining, k-means initialization, clustering with BRB,
/// summary. The log is written through `log` incrementally so a
/// numerical abort leaves a flushable partial log.
pub fn run_experiment_into(cfg: &ExperimentConfig, log: &mut ExperimentLog) -> Result<RunArtifacts> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    let k = resolve_k(cfg, &dataset)?;
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    log.push(LogLine::Config {
        schema: SCHEMA_VERSION,
        config: serde_json::to_value(cfg).expect("config serializes"),
    });
    let mut params = build_network(cfg, dataset.dim(), k)?;
    let holdout = run_pretraining(&mut params, &dataset, cfg, log)?;
    let mut cluster = init_clustering(&params, &dataset, cfg, k)?;
    let centroids_are_params = cfg.algorithm.centroids_are_parameters();
    let mut adam = AdamState::new(
        &params,
        centroids_are_params.then_some(&cluster.centroids),
        AdamConfig::with_lr(cfg.lr),
    );
    run_clustering(&mut params, &mut adam, &mut cluster, &dataset, cfg, k, log)?;
    log.push(LogLine::Summary(summarize(log, holdout)));
    if let Some(path) = &cfg.export_embeddings {
        export_embeddings(&params, &dataset, &cluster, path)?;
    }
    if let Some(path) = &cfg.save_params {
        save_checkpoint(&params, &cluster, path)?;
    }
    Ok(RunArtifacts { log: std::mem::take(log), params, cluster, dataset })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let mut log = ExperimentLog::default();
    run_experiment_into(cfg, &mut log)
}

/// CSV export of the embedded dataset: d embedding columns, the true
/// label (-1 when unlabeled) and the predicted label. Floats are written
/// in shortest round-trip form, so reading the file back reproduces them
/// exactly.
pub fn export_embeddings(
    params: &NetworkParams,
    dataset: &Dataset,
    cluster: &ClusterState,
    path: &Path,
) -> Result<()> {
    use std::io::Write;
    let emb = embed_dataset(params, &dataset.x, None)?;
    let pred = dcn_assign(&emb, &cluster.centroids)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..emb.rows() {
        let mut fields: Vec<String> = emb.row(i).iter().map(|v| format!("{v}")).collect();
        let label = dataset.y.as_ref().map_or(-1i64, |y| y[i] as i64);
        fields.push(format!("{label}"));
        fields.push(format!("{}", pred[i]));
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub cluster: ClusterState,
}

pub fn save_checkpoint(params: &NetworkParams, cluster: &ClusterState, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let ckpt = Checkpoint { params: params.clone(), cluster: cluster.clone() };
    std::fs::write(path, serde_json::to_string(&ckpt).expect("checkpoint serializes"))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: 0, message: format!("bad checkpoint: {e}") })
}

/// Mean and population standard deviation (a single run reports std 0).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteRow {
    pub name: String,
    pub runs: usize,
    pub last_acc_mean: Option<f64>,
    pub last_acc_std: Option<f64>,
    pub last_nmi_mean: Option<f64>,
    pub last_nmi_std: Option<f64>,
    pub last_ari_mean: Option<f64>,
    pub last_ari_std: Option<f64>,
    pub best_acc_mean: Option<f64>,
    pub best_acc_std: Option<f64>,
    /// mean(last ACC) - mean(baseline last ACC).
    pub delta_acc_vs_baseline: Option<f64>,
    /// 100 * delta / baseline mean.
    pub rel_acc_vs_baseline_pct: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
}

impl SuiteSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "name,runs,last_acc_mean,last_acc_std,last_nmi_mean,last_nmi_std,last_ari_mean,last_ari_std,best_acc_mean,best_acc_std,delta_acc_vs_baseline,rel_acc_vs_baseline_pct\n",
        );
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.name,
                r.runs,
                fmt(r.last_acc_mean),
                fmt(r.last_acc_std),
                fmt(r.last_nmi_mean),
                fmt(r.last_nmi_std),
                fmt(r.last_ari_mean),
                fmt(r.last_ari_std),
                fmt(r.best_acc_mean),
                fmt(r.best_acc_std),
                fmt(r.delta_acc_vs_baseline),
                fmt(r.rel_acc_vs_baseline_pct),
            ));
        }
        out
    }
}

pub struct SuiteResult {
    pub summary: SuiteSummary,
    /// (config name, seed, log) per run, in execution order.
    pub logs: Vec<(String, u64, ExperimentLog)>,
}

/// Run every (config, seed) pair and aggregate mean +/- std per config,
/// with improvement columns against the designated baseline config.
pub fn run_suite(
    configs: &[ExperimentConfig],
    seeds: &[u64],
    baseline: usize,
) -> Result<SuiteResult> {
    if configs.is_empty() || seeds.is_empty() {
        return Err(Error::Config("suite needs at least one config and one seed".into()));
    }
    if baseline >= configs.len() {
        return Err(Error::Config(format!("baseline index {baseline} out of range")));
    }
    let mut logs = Vec::new();
    let mut per_config: Vec<Vec<RunSummary>> = vec![Vec::new(); configs.len()];
    for (ci, base_cfg) in configs.iter().enumerate() {
        for &seed in seeds {
            let mut cfg = base_cfg.clone();
            cfg.seed = seed;
            let artifacts = run_experiment(&cfg)?;
            let summary = artifacts
                .log
                .summary()
                .cloned()
                .ok_or_else(|| Error::Contract("run finished without a summary".into()))?;
            per_config[ci].push(summary);
            logs.push((cfg.name.clone(), seed, artifacts.log));
        }
    }
    let collect = |sums: &[RunSummary], f: fn(&RunSummary) -> Option<f64>| -> Option<Vec<f64>> {
        sums.iter().map(f).collect()
    };
    let baseline_acc = collect(&per_config[baseline], |s| s.last_acc).map(|v| mean_std(&v).0);
    let mut rows = Vec::new();
    for (ci, cfg) in configs.iter().enumerate() {
        let sums = &per_config[ci];
        let acc = collect(sums, |s| s.last_acc).map(|v| mean_std(&v));
        let nmi_v = collect(sums, |s| s.last_nmi).map(|v| mean_std(&v));
        let ari_v = collect(sums, |s| s.last_ari).map(|v| mean_std(&v));
        let best = collect(sums, |s| s.best_acc).map(|v| mean_std(&v));
        let delta = match (acc, baseline_acc) {
            (Some((m, _)), Some(b)) if ci != baseline => Some(m - b),
            _ => None,
        };
        let rel = match (delta, baseline_acc) {
            (Some(d), Some(b)) if b.abs() > 1e-12 => Some(100.0 * d / b),
            _ => None,
        };
        rows.push(SuiteRow {
            name: cfg.name.clone(),
            runs: sums.len(),
            last_acc_mean: acc.map(|v| v.0),
            last_acc_std: acc.map(|v| v.1),
            last_nmi_mean: nmi_v.map(|v| v.0),
            last_nmi_std: nmi_v.map(|v| v.1),
            last_ari_mean: ari_v.map(|v| v.0),
            last_ari_std: ari_v.map(|v| v.1),
            best_acc_mean: best.map(|v| v.0),
            best_acc_std: best.map(|v| v.1),
            delta_acc_vs_baseline: delta,
            rel_acc_vs_baseline_pct: rel,
        });
    }
    Ok(SuiteResult { summary: SuiteSummary { rows }, logs })
}
