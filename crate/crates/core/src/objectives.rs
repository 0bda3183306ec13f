//! The three centroid-based clustering objectives.
//!
//! DEC and IDEC minimize KL(P || Q) between the Student-t soft assignment
//! kernel Q and the sharpened target P, with centroids as optimizer-owned
//! parameters. DCN alternates gradient steps on a hard-assignment
//! compression loss with online SGD-k-Means center updates. All losses are
//! averaged over the batch so the loss-weight defaults keep their meaning
//! across batch sizes. Targets (P for DEC/IDEC, hard assignments for DCN)
//! are frozen while a gradient is taken.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{
    backward, forward, forward_encoder, reconstruction_loss, reconstruction_loss_grad, NetGrads,
    NetworkParams,
};
use crate::numerics::{pairwise_sq_dists, DenseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dec,
    Idec,
    Dcn,
}

impl Algorithm {
    /// (lambda_ssl, lambda_cluster) defaults: DEC clusters with the KL
    /// loss alone, IDEC keeps the reconstruction loss at weight 0.1 on the
    /// cluster term, DCN uses 0.025.
    pub fn default_weights(self) -> LossWeights {
        match self {
            Algorithm::Dec => LossWeights { ssl: 0.0, cluster: 1.0 },
            Algorithm::Idec => LossWeights { ssl: 1.0, cluster: 0.1 },
            Algorithm::Dcn => LossWeights { ssl: 1.0, cluster: 0.025 },
        }
    }

    /// DEC/IDEC learn centroids by gradient; DCN updates them explicitly.
    pub fn centroids_are_parameters(self) -> bool {
        !matches!(self, Algorithm::Dcn)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dec" => Ok(Algorithm::Dec),
            "idec" => Ok(Algorithm::Idec),
            "dcn" => Ok(Algorithm::Dcn),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dec => "dec",
            Algorithm::Idec => "idec",
            Algorithm::Dcn => "dcn",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub ssl: f64,
    pub cluster: f64,
}

/// Centroids plus the algorithm-specific assignment state. DCN keeps a
/// persistent hard assignment per sample and a per-cluster update count;
/// DEC/IDEC leave both empty (their soft assignments are recomputed from
/// the centroid parameters whenever needed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub centroids: DenseMatrix,
    pub assignments: Vec<usize>,
    pub counts: Vec<u64>,
}

impl ClusterState {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }
}

/// Student-t kernel (one degree of freedom): u_ij = 1/(1+||z_i - mu_j||^2)
/// and its row-normalization Q.
fn student_kernel(h: &DenseMatrix, centroids: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if centroids.rows() == 0 {
        return Err(Error::Config("soft assignment needs at least one centroid".into()));
    }
    let mut u = pairwise_sq_dists(h, centroids)?;
    for v in u.data_mut() {
        *v = 1.0 / (1.0 + *v);
    }
    let mut q = u.clone();
    for i in 0..q.rows() {
        let row = q.row_mut(i);
        let s: f64 = row.iter().sum();
        if s <= 0.0 {
            return Err(Error::Numerical("soft assignment row summed to zero".into()));
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Ok((u, q))
}

/// Soft assignments Q: q_ij proportional to (1+||z_i - mu_j||^2)^-1,
/// rows on the simplex.
pub fn dec_soft_assign(h: &DenseMatrix, centroids: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(student_kernel(h, centroids)?.1)
}

/// Sharpened target distribution P from Q:
/// p_ij = (q_ij^2 / f_j) / sum_j'(q_ij'^2 / f_j'), f_j = sum_i q_ij.
pub fn dec_target(q: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, k) = (q.rows(), q.cols());
    let mut freq = vec![0.0; k];
    for i in 0..n {
        for (f, v) in freq.iter_mut().zip(q.row(i)) {
            *f += v;
        }
    }
    if let Some(j) = freq.iter().position(|&f| f <= 0.0) {
        return Err(Error::Numerical(format!("degenerate cluster {j}: soft frequency is zero")));
    }
    let mut p = DenseMatrix::zeros(n, k);
    for i in 0..n {
        let row = p.row_mut(i);
        let qrow = q.row(i);
        let mut s = 0.0;
        for j in 0..k {
            let v = qrow[j] * qrow[j] / freq[j];
            row[j] = v;
            s += v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Ok(p)
}

/// KL(P || Q) summed over all rows and clusters (0 log 0 = 0).
pub fn dec_kl_loss(p: &DenseMatrix, q: &DenseMatrix) -> Result<f64> {
    if p.rows() != q.rows() || p.cols() != q.cols() {
        return Err(Error::Shape("KL operands differ in shape".into()));
    }
    let mut s = 0.0;
    for (pv, qv) in p.data().iter().zip(q.data()) {
        if *pv > 0.0 {
            if *qv <= 0.0 {
                return Err(Error::Numerical("KL divergence with zero q and positive p".into()));
            }
            s += pv * (pv / qv).ln();
        }
    }
    Ok(s)
}

/// Nearest-centroid hard assignment; ties go to the lowest index.
pub fn dcn_assign(h: &DenseMatrix, centroids: &DenseMatrix) -> Result<Vec<usize>> {
    let d = pairwise_sq_dists(h, centroids)?;
    let k = centroids.rows();
    let mut out = Vec::with_capacity(h.rows());
    for i in 0..h.rows() {
        let row = d.row(i);
        let mut best = 0;
        for j in 1..k {
            if row[j] < row[best] {
                best = j;
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Batch-averaged DCN compression loss:
/// (1/B) * 1/2 * sum_i ||z_i - mu_{a_i}||^2 with frozen assignments.
pub fn dcn_cluster_loss(
    h: &DenseMatrix,
    centroids: &DenseMatrix,
    assignments: &[usize],
) -> Result<f64> {
    if assignments.len() != h.rows() {
        return Err(Error::Shape("one assignment per sample required".into()));
    }
    let k = centroids.rows();
    let mut s = 0.0;
    for (i, &j) in assignments.iter().enumerate() {
        if j >= k {
            return Err(Error::Input(format!("assignment {j} out of range (k={k})")));
        }
        let z = h.row(i);
        let c = centroids.row(j);
        for t in 0..z.len() {
            let diff = z[t] - c[t];
            s += diff * diff;
        }
    }
    Ok(0.5 * s / h.rows() as f64)
}

/// Online SGD-k-Means center update: mu_j <- mu_j - (1/c_j)(mu_j - z),
/// then c_j is incremented. Reproduces the running mean of the points
/// streamed into cluster j when counts start at 1.
pub fn dcn_center_update(
    centroids: &mut DenseMatrix,
    counts: &mut [u64],
    z: &[f64],
    j: usize,
) -> Result<()> {
    if j >= centroids.rows() || j >= counts.len() {
        return Err(Error::Input(format!("cluster index {j} out of range")));
    }
    if z.len() != centroids.cols() {
        return Err(Error::Shape("sample dimension does not match centroids".into()));
    }
    if counts[j] == 0 {
        return Err(Error::Contract("DCN counts must stay >= 1".into()));
    }
    let step = 1.0 / counts[j] as f64;
    let c = centroids.row_mut(j);
    for (cv, zv) in c.iter_mut().zip(z) {
        *cv -= step * (*cv - zv);
    }
    counts[j] += 1;
    Ok(())
}

/// Targets frozen for one gradient step: the DEC/IDEC target distribution
/// or the DCN hard assignments of the batch.
#[derive(Clone, Debug)]
pub struct BatchTargets {
    pub dec_p: Option<DenseMatrix>,
    pub assignments: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// lambda_ssl * ssl + lambda_cluster * cluster.
    pub total: f64,
    /// Unweighted self-supervised (reconstruction) term; 0 when inactive.
    pub ssl: f64,
    /// Unweighted clustering term.
    pub cluster: f64,
}

/// Everything a training step produces.
#[derive(Debug)]
pub struct StepOutput {
    pub loss: LossBreakdown,
    pub net_grads: NetGrads,
    /// Some for DEC/IDEC (centroids are parameters), None for DCN.
    pub centroid_grads: Option<DenseMatrix>,
    pub targets: BatchTargets,
    /// Embedding of the (unaugmented) batch under the current parameters.
    pub embedding: DenseMatrix,
}

/// DEC/IDEC clustering gradient pieces for one KL term.
/// weight w multiplies the whole term (already includes 1/B and any 1/2).
/// Returns (grad wrt H, grad wrt centroids).
fn kl_grads(
    h: &DenseMatrix,
    centroids: &DenseMatrix,
    u: &DenseMatrix,
    q: &DenseMatrix,
    p: &DenseMatrix,
    w: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (n, k) = (h.rows(), centroids.rows());
    // W_ij = (p_ij - q_ij) u_ij
    let mut wmat = DenseMatrix::zeros(n, k);
    for ((wv, pv), (qv, uv)) in wmat
        .data_mut()
        .iter_mut()
        .zip(p.data())
        .zip(q.data().iter().zip(u.data()))
    {
        *wv = (pv - qv) * uv;
    }
    let mut row_sums = vec![0.0; n];
    let mut col_sums = vec![0.0; k];
    for i in 0..n {
        for (j, v) in wmat.row(i).iter().enumerate() {
            row_sums[i] += v;
            col_sums[j] += v;
        }
    }
    // dL/dz_i = 2w * (rowsum_i z_i - (W M)_i)
    let wm = wmat.matmul(centroids)?;
    let mut grad_h = DenseMatrix::zeros(n, h.cols());
    for i in 0..n {
        let zi = h.row(i);
        let wmi = wm.row(i);
        let g = grad_h.row_mut(i);
        for t in 0..zi.len() {
            g[t] = 2.0 * w * (row_sums[i] * zi[t] - wmi[t]);
        }
    }
    // dL/dmu_j = 2w * (colsum_j mu_j - (W^T H)_j)
    let wth = wmat.matmul_tn(h)?;
    let mut grad_m = DenseMatrix::zeros(k, centroids.cols());
    for j in 0..k {
        let mj = centroids.row(j);
        let wj = wth.row(j);
        let g = grad_m.row_mut(j);
        for t in 0..mj.len() {
            g[t] = 2.0 * w * (col_sums[j] * mj[t] - wj[t]);
        }
    }
    Ok((grad_h, grad_m))
}

/// DCN compression gradient for one term: dL/dz_i = w (z_i - mu_{a_i}).
fn dcn_grads(
    h: &DenseMatrix,
    centroids: &DenseMatrix,
    assignments: &[usize],
    w: f64,
) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(h.rows(), h.cols());
    for (i, &j) in assignments.iter().enumerate() {
        let z = h.row(i);
        let c = centroids.row(j);
        let row = g.row_mut(i);
        for t in 0..z.len() {
            row[t] = w * (z[t] - c[t]);
        }
    }
    g
}

fn validate_aug(batch: &DenseMatrix, aug: Option<&DenseMatrix>) -> Result<()> {
    if let Some(a) = aug {
        if a.rows() != batch.rows() || a.cols() != batch.cols() {
            return Err(Error::Shape("augmented batch must align row-for-row with the batch".into()));
        }
    }
    Ok(())
}

/// Combined loss and analytic gradients for one batch.
///
/// When `aug` is given, the self-supervised term averages the plain and
/// augmented reconstructions, and the clustering term follows the
/// augmentation-consistent variants: the augmented samples inherit the
/// original samples' targets (P rows for DEC/IDEC, hard assignments for
/// DCN) and are never re-assigned.
///
/// `targets` may be passed in (DCN training uses the persistent
/// assignments); otherwise they are computed here from the unaugmented
/// batch: P from the current Q, assignments by nearest centroid.
pub fn combined_loss_and_grads(
    algorithm: Algorithm,
    params: &NetworkParams,
    state: &ClusterState,
    batch: &DenseMatrix,
    aug: Option<&DenseMatrix>,
    weights: &LossWeights,
    targets: Option<BatchTargets>,
) -> Result<StepOutput> {
    validate_aug(batch, aug)?;
    let b = batch.rows() as f64;
    let use_decoder = weights.ssl != 0.0;
    let fwd = if use_decoder { forward(params, batch)? } else { forward_encoder(params, batch)? };
    let fwd_aug = match aug {
        Some(a) => Some(if use_decoder { forward(params, a)? } else { forward_encoder(params, a)? }),
        None => None,
    };

    // --- self-supervised (reconstruction) term ---
    let mut ssl = 0.0;
    let mut grad_rec = None;
    let mut grad_rec_aug = None;
    if use_decoder {
        let half = if aug.is_some() { 0.5 } else { 1.0 };
        let rec = fwd.reconstruction.as_ref().unwrap();
        ssl += half * reconstruction_loss(batch, rec)?;
        let mut g = reconstruction_loss_grad(batch, rec)?;
        g.scale(half * weights.ssl);
        grad_rec = Some(g);
        if let (Some(a), Some(fa)) = (aug, fwd_aug.as_ref()) {
            let rec_a = fa.reconstruction.as_ref().unwrap();
            ssl += half * reconstruction_loss(a, rec_a)?;
            let mut g = reconstruction_loss_grad(a, rec_a)?;
            g.scale(half * weights.ssl);
            grad_rec_aug = Some(g);
        }
    }

    // --- clustering term ---
    let h = &fwd.embedding;
    let mut cluster = 0.0;
    let mut grad_h = DenseMatrix::zeros(h.rows(), h.cols());
    let mut grad_h_aug = fwd_aug.as_ref().map(|f| DenseMatrix::zeros(f.embedding.rows(), f.embedding.cols()));
    let mut centroid_grads = None;
    let targets = match algorithm {
        Algorithm::Dec | Algorithm::Idec => {
            let (u, q) = student_kernel(h, &state.centroids)?;
            let p = match targets {
                Some(BatchTargets { dec_p: Some(p), .. }) => p,
                _ => dec_target(&q)?,
            };
            let half = if aug.is_some() { 0.5 } else { 1.0 };
            let w = weights.cluster * half / b;
            cluster += half * dec_kl_loss(&p, &q)? / b;
            let (gh, gm) = kl_grads(h, &state.centroids, &u, &q, &p, w)?;
            grad_h.add_scaled(&gh, 1.0)?;
            let mut grad_m = gm;
            if let Some(fa) = fwd_aug.as_ref() {
                let ha = &fa.embedding;
                let (ua, qa) = student_kernel(ha, &state.centroids)?;
                cluster += half * dec_kl_loss(&p, &qa)? / b;
                let (gha, gma) = kl_grads(ha, &state.centroids, &ua, &qa, &p, w)?;
                grad_h_aug.as_mut().unwrap().add_scaled(&gha, 1.0)?;
                grad_m.add_scaled(&gma, 1.0)?;
            }
            centroid_grads = Some(grad_m);
            BatchTargets { dec_p: Some(p), assignments: None }
        }
        Algorithm::Dcn => {
            let assignments = match targets {
                Some(BatchTargets { assignments: Some(a), .. }) => a,
                _ => dcn_assign(h, &state.centroids)?,
            };
            if aug.is_some() {
                // 1/4 sum(||z - mu||^2 + ||z_aug - mu||^2), batch-averaged
                cluster += 0.5 * dcn_cluster_loss(h, &state.centroids, &assignments)?;
                let ha = &fwd_aug.as_ref().unwrap().embedding;
                cluster += 0.5 * dcn_cluster_loss(ha, &state.centroids, &assignments)?;
                let w = weights.cluster * 0.5 / b;
                grad_h.add_scaled(&dcn_grads(h, &state.centroids, &assignments, w), 1.0)?;
                grad_h_aug
                    .as_mut()
                    .unwrap()
                    .add_scaled(&dcn_grads(ha, &state.centroids, &assignments, w), 1.0)?;
            } else {
                cluster += dcn_cluster_loss(h, &state.centroids, &assignments)?;
                let w = weights.cluster / b;
                grad_h.add_scaled(&dcn_grads(h, &state.centroids, &assignments, w), 1.0)?;
            }
            BatchTargets { dec_p: None, assignments: Some(assignments) }
        }
    };

    let total = weights.ssl * ssl + weights.cluster * cluster;
    if !total.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss (ssl={ssl}, cluster={cluster})")));
    }

    // --- backprop ---
    let mut net_grads = backward(params, &fwd, Some(&grad_h), grad_rec.as_ref())?;
    if let Some(fa) = fwd_aug.as_ref() {
        let g = backward(params, fa, grad_h_aug.as_ref(), grad_rec_aug.as_ref())?;
        net_grads.add_scaled(&g, 1.0)?;
    }

    Ok(StepOutput {
        loss: LossBreakdown { total, ssl, cluster },
        net_grads,
        centroid_grads,
        targets,
        embedding: fwd.embedding,
    })
}

/// Loss only, with frozen targets and explicit centroids. Used by the
/// finite-difference oracles: perturbing `params` or `centroids` re-runs
/// the smooth part of the objective while P / the hard assignments stay
/// fixed, which is exactly the function the analytic gradients
/// differentiate.
pub fn combined_loss_with_targets(
    algorithm: Algorithm,
    params: &NetworkParams,
    centroids: &DenseMatrix,
    batch: &DenseMatrix,
    aug: Option<&DenseMatrix>,
    weights: &LossWeights,
    targets: &BatchTargets,
) -> Result<LossBreakdown> {
    validate_aug(batch, aug)?;
    let b = batch.rows() as f64;
    let use_decoder = weights.ssl != 0.0;
    let fwd = if use_decoder { forward(params, batch)? } else { forward_encoder(params, batch)? };
    let fwd_aug = match aug {
        Some(a) => Some(if use_decoder { forward(params, a)? } else { forward_encoder(params, a)? }),
        None => None,
    };
    let half = if aug.is_some() { 0.5 } else { 1.0 };

    let mut ssl = 0.0;
    if use_decoder {
        ssl += half * reconstruction_loss(batch, fwd.reconstruction.as_ref().unwrap())?;
        if let (Some(a), Some(fa)) = (aug, fwd_aug.as_ref()) {
            ssl += half * reconstruction_loss(a, fa.reconstruction.as_ref().unwrap())?;
        }
    }

    let mut cluster = 0.0;
    match algorithm {
        Algorithm::Dec | Algorithm::Idec => {
            let p = targets
                .dec_p
                .as_ref()
                .ok_or_else(|| Error::Contract("DEC/IDEC loss requires a target distribution".into()))?;
            let q = dec_soft_assign(&fwd.embedding, centroids)?;
            cluster += half * dec_kl_loss(p, &q)? / b;
            if let Some(fa) = fwd_aug.as_ref() {
                let qa = dec_soft_assign(&fa.embedding, centroids)?;
                cluster += half * dec_kl_loss(p, &qa)? / b;
            }
        }
        Algorithm::Dcn => {
            let assignments = targets
                .assignments
                .as_ref()
                .ok_or_else(|| Error::Contract("DCN loss requires assignments".into()))?;
            if aug.is_some() {
                cluster += 0.5 * dcn_cluster_loss(&fwd.embedding, centroids, assignments)?;
                cluster +=
                    0.5 * dcn_cluster_loss(&fwd_aug.as_ref().unwrap().embedding, centroids, assignments)?;
            } else {
                cluster += dcn_cluster_loss(&fwd.embedding, centroids, assignments)?;
            }
        }
    }
    Ok(LossBreakdown { total: weights.ssl * ssl + weights.cluster * cluster, ssl, cluster })
}
