//! Centroid-producing clustering used by BRB's reclustering step and by
//! clustering initialization: Lloyd k-means with k-means++ seeding, the
//! seeding alone, and alternating k-medoids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{pairwise_sq_dists, DenseMatrix};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReclusterAlgorithm {
    Kmeans,
    /// k-means++ seeding without Lloyd refinement.
    KmeansPpInit,
    Kmedoids,
}

impl ReclusterAlgorithm {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(ReclusterAlgorithm::Kmeans),
            "kmeans_pp_init" | "kmeans++init" | "kmeans++-init" => Ok(ReclusterAlgorithm::KmeansPpInit),
            "kmedoids" | "k-medoids" => Ok(ReclusterAlgorithm::Kmedoids),
            other => Err(Error::Config(format!("unknown reclustering algorithm '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReclusterAlgorithm::Kmeans => "kmeans",
            ReclusterAlgorithm::KmeansPpInit => "kmeans_pp_init",
            ReclusterAlgorithm::Kmedoids => "kmedoids",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReclusterConfig {
    pub algorithm: ReclusterAlgorithm,
    pub k: usize,
    pub max_iters: usize,
    /// Relative inertia change below which Lloyd iterations stop.
    pub tol: f64,
    /// Points drawn (without replacement) when reclustering a dataset.
    pub subsample: usize,
}

impl ReclusterConfig {
    pub fn kmeans(k: usize) -> Self {
        ReclusterConfig {
            algorithm: ReclusterAlgorithm::Kmeans,
            k,
            max_iters: 300,
            tol: 1e-6,
            subsample: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if self.subsample < self.k {
            return Err(Error::Config("subsample size must be >= k".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct KmeansResult {
    pub centroids: DenseMatrix,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct KmedoidsResult {
    pub centroids: DenseMatrix,
    pub medoid_indices: Vec<usize>,
    pub assignments: Vec<usize>,
    /// Sum of Euclidean distances of every point to its medoid.
    pub cost: f64,
}

/// k-means++ seeding: the first center is uniform, later centers are
/// sampled proportional to the squared distance to the nearest chosen
/// center. If every remaining point has zero distance (duplicates), the
/// next center is drawn uniformly from the unchosen points.
pub fn kmeans_pp_seed(points: &DenseMatrix, k: usize, rng: &mut SeededRng) -> Result<DenseMatrix> {
    let n = points.rows();
    if n < k {
        return Err(Error::Input(format!("{n} points cannot seed {k} centers")));
    }
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let mut chosen = vec![false; n];
    let mut centers = Vec::with_capacity(k);
    let first = rng.next_index(n);
    chosen[first] = true;
    centers.push(first);
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // float round-off can leave acc just below total; fall back to
            // the last positive-weight point
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // all remaining mass is on duplicates of chosen centers
            let remaining: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            remaining[rng.next_index(remaining.len())]
        };
        chosen[next] = true;
        centers.push(next);
        for i in 0..n {
            let d = sq_dist(points.row(i), points.row(next));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    Ok(points.select_rows(&centers))
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..a.len() {
        let d = a[t] - b[t];
        s += d * d;
    }
    s
}

fn assign_nearest(points: &DenseMatrix, centers: &DenseMatrix) -> Result<(Vec<usize>, f64)> {
    let d = pairwise_sq_dists(points, centers)?;
    let k = centers.rows();
    let mut assignments = Vec::with_capacity(points.rows());
    let mut inertia = 0.0;
    for i in 0..points.rows() {
        let row = d.row(i);
        let mut best = 0;
        for j in 1..k {
            if row[j] < row[best] {
                best = j;
            }
        }
        assignments.push(best);
        inertia += row[best];
    }
    Ok((assignments, inertia))
}

/// Lloyd k-means with k-means++ seeding, single initialization. Empty
/// clusters are repaired by seizing the point currently farthest from its
/// assigned center. The within-cluster sum of squares is checked to be
/// nonincreasing every iteration.
pub fn kmeans(points: &DenseMatrix, cfg: &ReclusterConfig, rng: &mut SeededRng) -> Result<KmeansResult> {
    cfg.validate()?;
    let n = points.rows();
    let k = cfg.k;
    let d = points.cols();
    if n < k {
        return Err(Error::Input(format!("{n} points cannot form {k} clusters")));
    }
    let mut centers = kmeans_pp_seed(points, k, rng)?;
    let (mut assignments, mut inertia) = assign_nearest(points, &centers)?;
    let mut iterations = 0;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        // means of the current assignment
        let mut sums = DenseMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &j) in assignments.iter().enumerate() {
            counts[j] += 1;
            let row = sums.row_mut(j);
            for (acc, v) in row.iter_mut().zip(points.row(i)) {
                *acc += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                for v in sums.row_mut(j) {
                    *v *= inv;
                }
            } else {
                sums.row_mut(j).copy_from_slice(centers.row(j));
            }
        }
        centers = sums;
        // farthest-point seizure for empty clusters
        let empties: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
        if !empties.is_empty() {
            let dmat = pairwise_sq_dists(points, &centers)?;
            let mut seized = vec![false; n];
            for &j in &empties {
                let mut far = (f64::NEG_INFINITY, usize::MAX);
                for i in 0..n {
                    if seized[i] {
                        continue;
                    }
                    let dist = dmat.get(i, assignments[i]);
                    if dist > far.0 {
                        far = (dist, i);
                    }
                }
                let donor = far.1;
                seized[donor] = true;
                centers.row_mut(j).copy_from_slice(points.row(donor));
            }
        }
        let (new_assignments, new_inertia) = assign_nearest(points, &centers)?;
        assert!(
            new_inertia <= inertia * (1.0 + 1e-9) + 1e-12,
            "k-means inertia increased: {inertia} -> {new_inertia}"
        );
        let rel_change = if inertia > 0.0 { (inertia - new_inertia) / inertia } else { 0.0 };
        let unchanged = new_assignments == assignments;
        assignments = new_assignments;
        inertia = new_inertia;
        if unchanged || rel_change.abs() <= cfg.tol {
            break;
        }
    }
    Ok(KmeansResult { centroids: centers, assignments, inertia, iterations })
}

/// Alternating ("Voronoi") k-medoids on Euclidean distances, seeded with
/// k-means++. Every returned center is one of the input points.
pub fn kmedoids(points: &DenseMatrix, cfg: &ReclusterConfig, rng: &mut SeededRng) -> Result<KmedoidsResult> {
    cfg.validate()?;
    let n = points.rows();
    let k = cfg.k;
    if n < k {
        return Err(Error::Input(format!("{n} points cannot form {k} clusters")));
    }
    // k-means++ picks data points, so reverse-lookup the seed indices.
    let seeds = kmeans_pp_seed(points, k, rng)?;
    let mut medoids: Vec<usize> = (0..k)
        .map(|j| {
            (0..n)
                .find(|&i| points.row(i) == seeds.row(j))
                .expect("seed must be a data point")
        })
        .collect();

    let dist = |a: usize, b: usize| sq_dist(points.row(a), points.row(b)).sqrt();
    let mut assignments = vec![0usize; n];
    for _ in 0..cfg.max_iters {
        // assignment step
        for i in 0..n {
            let mut best = 0;
            let mut best_d = dist(i, medoids[0]);
            for (j, &m) in medoids.iter().enumerate().skip(1) {
                let dd = dist(i, m);
                if dd < best_d {
                    best_d = dd;
                    best = j;
                }
            }
            assignments[i] = best;
        }
        // medoid update: the member minimizing the within-cluster
        // distance sum (ties to the lowest point index)
        let mut changed = false;
        for j in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == j).collect();
            if members.is_empty() {
                continue;
            }
            let mut best = (f64::INFINITY, usize::MAX);
            for &cand in &members {
                let cost: f64 = members.iter().map(|&o| dist(cand, o)).sum();
                if cost < best.0 {
                    best = (cost, cand);
                }
            }
            if best.1 != medoids[j] {
                medoids[j] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // final assignment against the settled medoids
    for i in 0..n {
        let mut best = 0;
        let mut best_d = dist(i, medoids[0]);
        for (j, &m) in medoids.iter().enumerate().skip(1) {
            let dd = dist(i, m);
            if dd < best_d {
                best_d = dd;
                best = j;
            }
        }
        assignments[i] = best;
    }
    let cost = (0..n).map(|i| dist(i, medoids[assignments[i]])).sum();
    Ok(KmedoidsResult {
        centroids: points.select_rows(&medoids),
        medoid_indices: medoids,
        assignments,
        cost,
    })
}

/// Dispatch to the configured algorithm; returns centroids in the input
/// space plus labels for the given points. Never changes k.
pub fn recluster_embeddings(
    embeddings: &DenseMatrix,
    cfg: &ReclusterConfig,
    rng: &mut SeededRng,
) -> Result<(DenseMatrix, Vec<usize>)> {
    match cfg.algorithm {
        ReclusterAlgorithm::Kmeans => {
            let res = kmeans(embeddings, cfg, rng)?;
            Ok((res.centroids, res.assignments))
        }
        ReclusterAlgorithm::KmeansPpInit => {
            let centers = kmeans_pp_seed(embeddings, cfg.k, rng)?;
            let (assignments, _) = assign_nearest(embeddings, &centers)?;
            Ok((centers, assignments))
        }
        ReclusterAlgorithm::Kmedoids => {
            let res = kmedoids(embeddings, cfg, rng)?;
            Ok((res.centroids, res.assignments))
        }
    }
}
