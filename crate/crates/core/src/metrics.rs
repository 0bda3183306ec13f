//! Clustering evaluation metrics: Hungarian-matched accuracy, NMI, ARI,
//! intra-/inter-class distance, silhouette, cluster-label change between
//! epochs, and the closest/second-closest centroid distance-ratio
//! histogram.
//!
//! Conventions. ACC and NMI are reported scaled to [0, 100] by the
//! harness (the functions here return the natural ranges and the harness
//! scales); entropies use the natural logarithm, which cancels in NMI's
//! ratio. Distance metrics operate on l2-normalized embeddings and take
//! ground-truth labels. Ties anywhere resolve to the lowest index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hungarian::solve_assignment;
use crate::numerics::DenseMatrix;

fn check_pair(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Input(format!("label vectors differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Input("label vectors are empty".into()));
    }
    Ok(())
}

/// Contingency counts with dense relabeling of whatever label values
/// appear. Returns (table, row sums, col sums).
fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<u64>>, Vec<u64>, Vec<u64>) {
    let ka = a.iter().copied().max().unwrap_or(0) + 1;
    let kb = b.iter().copied().max().unwrap_or(0) + 1;
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let rows: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let mut cols = vec![0u64; kb];
    for r in &table {
        for (c, v) in cols.iter_mut().zip(r) {
            *c += v;
        }
    }
    (table, rows, cols)
}

/// True when the two partitions are identical up to relabeling: every
/// nonempty row of the contingency table has exactly one nonzero entry
/// and so does every nonempty column.
fn partitions_identical(table: &[Vec<u64>], rows: &[u64], cols: &[u64]) -> bool {
    for (r, &sum) in table.iter().zip(rows) {
        if sum == 0 {
            continue;
        }
        if r.iter().filter(|&&v| v > 0).count() != 1 {
            return false;
        }
    }
    for (j, &sum) in cols.iter().enumerate() {
        if sum == 0 {
            continue;
        }
        if table.iter().filter(|r| r[j] > 0).count() != 1 {
            return false;
        }
    }
    true
}

/// Hungarian-matched clustering accuracy in [0, 100]: the best fraction of
/// agreeing labels over all bijections between predicted and true labels.
pub fn clustering_accuracy(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    if k == 0 {
        return Err(Error::Input("k must be >= 1".into()));
    }
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::Input(format!("label out of range: true {t} / pred {p} with k={k}")));
        }
    }
    let mut profit = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        profit[t][p] += 1;
    }
    let max = profit.iter().flatten().copied().max().unwrap_or(0) as f64;
    let mut cost = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            cost.set(i, j, max - profit[i][j] as f64);
        }
    }
    let assign = solve_assignment(&cost)?;
    let matched: u64 = assign.iter().enumerate().map(|(i, &j)| profit[i][j]).sum();
    Ok(100.0 * matched as f64 / y_true.len() as f64)
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.ln();
        }
    }
    h
}

/// Normalized mutual information 2 I(a,b)/(H(a)+H(b)) in [0, 1]. Exactly 1
/// iff the partitions are identical up to relabeling (including the case
/// where both are a single cluster); 0 when either partition carries no
/// information about the other.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    check_pair(a, b)?;
    let (table, rows, cols) = contingency(a, b);
    if partitions_identical(&table, &rows, &cols) {
        return Ok(1.0);
    }
    let n = a.len() as f64;
    let h_a = entropy(&rows, n);
    let h_b = entropy(&cols, n);
    if h_a + h_b == 0.0 {
        // both single-cluster is caught above; unreachable but safe
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let pij = c as f64 / n;
                mi += pij * ((n * c as f64) / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((2.0 * mi / (h_a + h_b)).clamp(0.0, 1.0))
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index in [-1, 1]: pair-counting agreement adjusted for
/// chance under the hypergeometric model. Degenerate instances (both
/// partitions trivial, zero denominator) return 1 when the partitions are
/// equal and 0 otherwise.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    check_pair(a, b)?;
    let (table, rows, cols) = contingency(a, b);
    let n = a.len() as u64;
    let sum_ij: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(if partitions_identical(&table, &rows, &cols) { 1.0 } else { 0.0 });
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom.abs() < f64::EPSILON {
        return Ok(if partitions_identical(&table, &rows, &cols) { 1.0 } else { 0.0 });
    }
    Ok((sum_ij - expected) / denom)
}

/// l2-normalize each row; zero rows are left untouched.
fn l2_normalize_rows(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    out
}

/// Per-sample (intra, inter) distances on l2-normalized embeddings:
/// intra = mean distance to the other members of the sample's class
/// (None for singleton classes), inter = mean distance to the nearest
/// other class (None when no other class exists).
fn class_distances(
    embeddings: &DenseMatrix,
    y: &[usize],
) -> Result<Vec<(Option<f64>, Option<f64>)>> {
    if y.len() != embeddings.rows() {
        return Err(Error::Input("one label per embedding row required".into()));
    }
    let normed = l2_normalize_rows(embeddings);
    let k = y.iter().copied().max().unwrap_or(0) + 1;
    let mut class_sizes = vec![0usize; k];
    for &l in y {
        class_sizes[l] += 1;
    }
    let n = y.len();
    let d = normed.cols();
    let out: Vec<(Option<f64>, Option<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = normed.row(i);
            let mut sums = vec![0.0f64; k];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let xj = normed.row(j);
                let mut s = 0.0;
                for t in 0..d {
                    let diff = xi[t] - xj[t];
                    s += diff * diff;
                }
                sums[y[j]] += s.sqrt();
            }
            let own = y[i];
            let intra = if class_sizes[own] >= 2 {
                Some(sums[own] / (class_sizes[own] - 1) as f64)
            } else {
                None
            };
            let mut inter: Option<f64> = None;
            for (m, &size) in class_sizes.iter().enumerate() {
                if m == own || size == 0 {
                    continue;
                }
                let mean = sums[m] / size as f64;
                if inter.map_or(true, |cur| mean < cur) {
                    inter = Some(mean);
                }
            }
            (intra, inter)
        })
        .collect();
    Ok(out)
}

/// Intra-CD, inter-CD and silhouette from a single quadratic pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassDistanceSummary {
    pub intra_cd: f64,
    pub inter_cd: f64,
    pub silhouette: f64,
}

/// Compute all three class-distance diagnostics at once (the pairwise
/// pass dominates, so the harness calls this rather than the individual
/// metrics).
pub fn class_distance_summary(
    embeddings: &DenseMatrix,
    y_true: &[usize],
) -> Result<ClassDistanceSummary> {
    let per = class_distances(embeddings, y_true)?;
    let mut intra_sum = 0.0;
    let mut intra_n = 0usize;
    let mut inter_sum = 0.0;
    let mut inter_n = 0usize;
    let mut sil_sum = 0.0;
    let mut sil_n = 0usize;
    for (a, b) in per.iter() {
        if let Some(a) = a {
            intra_sum += a;
            intra_n += 1;
        }
        if let Some(b) = b {
            inter_sum += b;
            inter_n += 1;
        }
        if let (Some(a), Some(b)) = (a, b) {
            let denom = a.max(*b);
            sil_sum += if denom > 0.0 { (b - a) / denom } else { 0.0 };
            sil_n += 1;
        }
    }
    if inter_n == 0 {
        return Err(Error::Input("inter-class distance needs at least two classes".into()));
    }
    if sil_n == 0 {
        return Err(Error::Input("silhouette needs at least two classes with members".into()));
    }
    Ok(ClassDistanceSummary {
        intra_cd: if intra_n == 0 { 0.0 } else { intra_sum / intra_n as f64 },
        inter_cd: inter_sum / inter_n as f64,
        silhouette: sil_sum / sil_n as f64,
    })
}

/// Dataset means of the per-sample intra- and inter-class distances.
/// Samples in singleton classes are skipped for the intra mean.
pub fn intra_inter_cd(embeddings: &DenseMatrix, y_true: &[usize]) -> Result<(f64, f64)> {
    let per = class_distances(embeddings, y_true)?;
    let intra: Vec<f64> = per.iter().filter_map(|(a, _)| *a).collect();
    let inter: Vec<f64> = per.iter().filter_map(|(_, b)| *b).collect();
    if inter.is_empty() {
        return Err(Error::Input("inter-class distance needs at least two classes".into()));
    }
    let intra_mean = if intra.is_empty() { 0.0 } else { intra.iter().sum::<f64>() / intra.len() as f64 };
    Ok((intra_mean, inter.iter().sum::<f64>() / inter.len() as f64))
}

/// Mean silhouette coefficient (b - a)/max(a, b) over samples with a
/// defined intra distance, on l2-normalized embeddings and ground-truth
/// classes.
pub fn silhouette(embeddings: &DenseMatrix, y_true: &[usize]) -> Result<f64> {
    Ok(class_distance_summary(embeddings, y_true)?.silhouette)
}

/// Cluster-label change between consecutive epochs:
/// (1 - NMI(current, previous)) * 100. Exactly 0 iff the assignments are
/// identical up to relabeling.
pub fn cluster_label_change(current: &[usize], previous: &[usize]) -> Result<f64> {
    Ok((1.0 - nmi(current, previous)?) * 100.0)
}

/// Histogram of rho = d1/d2 (closest over second-closest centroid
/// distance) over samples; rho in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceRatioHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub epoch: usize,
}

impl DistanceRatioHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bin the per-sample distance ratios rho into `bins` equal-width bins
/// over [0, 1]; rho = 1 lands in the last bin. A sample lying on two
/// coincident centroids (d2 = 0) counts as rho = 1.
pub fn distance_ratio_hist(
    embeddings: &DenseMatrix,
    centroids: &DenseMatrix,
    bins: usize,
) -> Result<DistanceRatioHistogram> {
    if centroids.rows() < 2 {
        return Err(Error::Input("distance ratios need k >= 2 centroids".into()));
    }
    if bins == 0 {
        return Err(Error::Input("need at least one bin".into()));
    }
    let sq = crate::numerics::pairwise_sq_dists(embeddings, centroids)?;
    let mut counts = vec![0u64; bins];
    for i in 0..embeddings.rows() {
        let row = sq.row(i);
        let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
        for &v in row {
            if v < d1 {
                d2 = d1;
                d1 = v;
            } else if v < d2 {
                d2 = v;
            }
        }
        let rho = if d2 <= 0.0 { 1.0 } else { (d1.sqrt() / d2.sqrt()).min(1.0) };
        let bin = ((rho * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    let edges = (0..=bins).map(|b| b as f64 / bins as f64).collect();
    Ok(DistanceRatioHistogram { edges, counts, epoch: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn factorial_accuracy(y_true: &[usize], y_pred: &[usize], k: usize) -> f64 {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0usize;
        fn go(perm: &mut Vec<usize>, s: usize, yt: &[usize], yp: &[usize], best: &mut usize) {
            if s == perm.len() {
                let m = yt.iter().zip(yp).filter(|(&t, &p)| perm[p] == t).count();
                if m > *best {
                    *best = m;
                }
                return;
            }
            for i in s..perm.len() {
                perm.swap(s, i);
                go(perm, s + 1, yt, yp, best);
                perm.swap(s, i);
            }
        }
        go(&mut perm, 0, y_true, y_pred, &mut best);
        100.0 * best as f64 / y_true.len() as f64
    }

    #[test]
    fn accuracy_perfect_and_permuted() {
        let y = vec![0, 0, 1, 1];
        assert_eq!(clustering_accuracy(&y, &y, 2).unwrap(), 100.0);
        let flipped = vec![1, 1, 0, 0];
        assert_eq!(clustering_accuracy(&y, &flipped, 2).unwrap(), 100.0);
    }

    #[test]
    fn accuracy_matches_factorial_brute_force() {
        let mut rng = SeededRng::new(41);
        for _ in 0..200 {
            let k = 2 + rng.next_index(5); // (up to 6)
            let n = 2 + rng.next_index(29);
            let y_true: Vec<usize> = (0..n).map(|_| rng.next_index(k)).collect();
            let y_pred: Vec<usize> = (0..n).map(|_| rng.next_index(k)).collect();
            let fast = clustering_accuracy(&y_true, &y_pred, k).unwrap();
            let brute = factorial_accuracy(&y_true, &y_pred, k);
            assert!((fast - brute).abs() < 1e-9, "k={k} n={n}: {fast} vs {brute}");
        }
    }

    #[test]
    fn accuracy_invariant_under_relabeling() {
        let mut rng = SeededRng::new(42);
        let y_true: Vec<usize> = (0..60).map(|_| rng.next_index(4)).collect();
        let y_pred: Vec<usize> = (0..60).map(|_| rng.next_index(4)).collect();
        let base = clustering_accuracy(&y_true, &y_pred, 4).unwrap();
        let perm = [2, 0, 3, 1];
        let relabeled: Vec<usize> = y_pred.iter().map(|&p| perm[p]).collect();
        assert!((clustering_accuracy(&y_true, &relabeled, 4).unwrap() - base).abs() < 1e-12);
        let n_base = nmi(&y_true, &y_pred).unwrap();
        assert!((nmi(&y_true, &relabeled).unwrap() - n_base).abs() < 1e-12);
    }

    #[test]
    fn nmi_identical_is_exactly_one() {
        let a = vec![0, 1, 2, 1, 0, 2, 2];
        assert_eq!(nmi(&a, &a).unwrap(), 1.0);
        // relabeled copy too
        let b: Vec<usize> = a.iter().map(|&x| (x + 1) % 3).collect();
        assert_eq!(nmi(&a, &b).unwrap(), 1.0);
        // both single-cluster
        assert_eq!(nmi(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn nmi_independent_labels_near_zero() {
        let mut rng = SeededRng::new(43);
        let a: Vec<usize> = (0..10_000).map(|_| rng.next_index(4)).collect();
        let b: Vec<usize> = (0..10_000).map(|_| rng.next_index(4)).collect();
        assert!(nmi(&a, &b).unwrap() < 0.01);
    }

    #[test]
    fn nmi_matches_contingency_oracle() {
        let a = vec![0, 0, 1, 1, 1, 2];
        let b = vec![0, 1, 1, 1, 2, 2];
        let n = 6.0f64;
        // hand contingency: rows a, cols b
        let table = [[1.0f64, 1.0, 0.0], [0.0, 2.0, 1.0], [0.0, 0.0, 1.0]];
        let ra = [2.0f64, 3.0, 1.0];
        let cb = [1.0f64, 3.0, 2.0];
        let mut mi = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let c = table[i][j];
                if c > 0.0 {
                    mi += (c / n) * ((n * c) / (ra[i] * cb[j])).ln();
                }
            }
        }
        let h = |v: &[f64]| -> f64 { v.iter().map(|&c| -(c / n) * (c / n).ln()).sum() };
        let expect = 2.0 * mi / (h(&ra) + h(&cb));
        assert!((nmi(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn ari_cases() {
        let a = vec![0, 0, 1, 1, 2, 2];
        assert_eq!(ari(&a, &a).unwrap(), 1.0);

        // n = 6 hand instance vs pair-counting oracle
        let b = vec![0, 1, 1, 1, 2, 2];
        let n = 6;
        let mut same_both = 0.0;
        let mut same_a = 0.0;
        let mut same_b = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                if sa {
                    same_a += 1.0;
                }
                if sb {
                    same_b += 1.0;
                }
                if sa && sb {
                    same_both += 1.0;
                }
            }
        }
        let total = 15.0;
        let expected = same_a * same_b / total;
        let maxi = 0.5 * (same_a + same_b);
        let oracle = (same_both - expected) / (maxi - expected);
        assert!((ari(&a, &b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn ari_independent_near_zero_on_average() {
        let mut rng = SeededRng::new(44);
        let mut acc = 0.0;
        for _ in 0..100 {
            let a: Vec<usize> = (0..200).map(|_| rng.next_index(3)).collect();
            let b: Vec<usize> = (0..200).map(|_| rng.next_index(3)).collect();
            acc += ari(&a, &b).unwrap();
        }
        assert!((acc / 100.0).abs() < 0.01);
    }

    #[test]
    fn ari_symmetric() {
        let mut rng = SeededRng::new(45);
        let a: Vec<usize> = (0..50).map(|_| rng.next_index(4)).collect();
        let b: Vec<usize> = (0..50).map(|_| rng.next_index(3)).collect();
        assert_eq!(ari(&a, &b).unwrap(), ari(&b, &a).unwrap());
        assert!((nmi(&a, &b).unwrap() - nmi(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ari_degenerate_denominator() {
        // both trivial single-cluster partitions: equal -> 1
        assert_eq!(ari(&[0, 0], &[0, 0]).unwrap(), 1.0);
        // all singletons on both sides: identical up to relabeling -> 1
        assert_eq!(ari(&[0, 1, 2], &[2, 1, 0]).unwrap(), 1.0);
        // one trivial, one not -> 0
        assert_eq!(ari(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn intra_zero_for_repeated_points() {
        let e = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let y = vec![0, 0, 1, 1];
        let (intra, inter) = intra_inter_cd(&e, &y).unwrap();
        assert_eq!(intra, 0.0);
        assert!(inter > 0.0);
    }

    #[test]
    fn intra_inter_match_loop_oracle() {
        let mut rng = SeededRng::new(46);
        let mut e = DenseMatrix::zeros(20, 3);
        for v in e.data_mut() {
            *v = rng.next_uniform(-1.0, 1.0);
        }
        let y: Vec<usize> = (0..20).map(|i| i % 3).collect();
        let (intra, inter) = intra_inter_cd(&e, &y).unwrap();

        // quadratic oracle on normalized rows
        let norm = |row: &[f64]| {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.iter().map(|v| v / n).collect::<Vec<_>>()
        };
        let rows: Vec<Vec<f64>> = (0..20).map(|i| norm(e.row(i))).collect();
        let dist = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        let mut intra_terms = Vec::new();
        let mut inter_terms = Vec::new();
        for i in 0..20 {
            let same: Vec<usize> = (0..20).filter(|&j| j != i && y[j] == y[i]).collect();
            intra_terms
                .push(same.iter().map(|&j| dist(&rows[i], &rows[j])).sum::<f64>() / same.len() as f64);
            let mut best = f64::INFINITY;
            for m in 0..3 {
                if m == y[i] {
                    continue;
                }
                let other: Vec<usize> = (0..20).filter(|&j| y[j] == m).collect();
                let mean =
                    other.iter().map(|&j| dist(&rows[i], &rows[j])).sum::<f64>() / other.len() as f64;
                best = best.min(mean);
            }
            inter_terms.push(best);
        }
        let intra_o = intra_terms.iter().sum::<f64>() / 20.0;
        let inter_o = inter_terms.iter().sum::<f64>() / 20.0;
        assert!((intra - intra_o).abs() < 1e-12);
        assert!((inter - inter_o).abs() < 1e-12);
    }

    #[test]
    fn silhouette_tight_separated_blobs_near_one() {
        let mut rng = SeededRng::new(47);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (li, center) in [[10.0, 0.0], [0.0, 10.0]].iter().enumerate() {
            for _ in 0..15 {
                rows.push(vec![
                    center[0] + 0.01 * rng.next_gaussian(),
                    center[1] + 0.01 * rng.next_gaussian(),
                ]);
                y.push(li);
            }
        }
        let e = DenseMatrix::from_rows(&rows).unwrap();
        assert!(silhouette(&e, &y).unwrap() > 0.9);
    }

    #[test]
    fn silhouette_random_split_near_zero() {
        let mut rng = SeededRng::new(48);
        let mut rows = Vec::new();
        for _ in 0..60 {
            rows.push(vec![rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()]);
        }
        let e = DenseMatrix::from_rows(&rows).unwrap();
        let y: Vec<usize> = (0..60).map(|i| i % 2).collect();
        assert!(silhouette(&e, &y).unwrap().abs() < 0.12);
    }

    #[test]
    fn silhouette_matches_per_sample_oracle() {
        let mut rng = SeededRng::new(49);
        let mut e = DenseMatrix::zeros(12, 2);
        for v in e.data_mut() {
            *v = rng.next_uniform(-1.0, 1.0);
        }
        let y: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let s = silhouette(&e, &y).unwrap();
        let per = class_distances(&e, &y).unwrap();
        let oracle: f64 = per
            .iter()
            .map(|(a, b)| {
                let (a, b) = (a.unwrap(), b.unwrap());
                (b - a) / a.max(b)
            })
            .sum::<f64>()
            / 12.0;
        assert!((s - oracle).abs() < 1e-12);
    }

    #[test]
    fn cl_change_cases() {
        let a = vec![0, 1, 0, 1, 2];
        assert_eq!(cluster_label_change(&a, &a).unwrap(), 0.0);
        let mut rng = SeededRng::new(50);
        let x: Vec<usize> = (0..10_000).map(|_| rng.next_index(5)).collect();
        let z: Vec<usize> = (0..10_000).map(|_| rng.next_index(5)).collect();
        let change = cluster_label_change(&x, &z).unwrap();
        assert!(change > 99.0, "independent assignments: {change}");
        // consistency with nmi by construction
        let m = nmi(&x, &z).unwrap();
        assert!((change - (1.0 - m) * 100.0).abs() < 1e-12);
    }

    #[test]
    fn distance_ratio_edge_cases() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![4.0, 0.0]]).unwrap();
        // sample on centroid 0 -> rho = 0; sample equidistant -> rho = 1
        let e = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let hist = distance_ratio_hist(&e, &m, 10).unwrap();
        assert_eq!(hist.counts[0], 1);
        assert_eq!(hist.counts[9], 1);
        assert_eq!(hist.total(), 2);
        // coincident centroids: d2 = 0 -> rho = 1
        let mc = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let ec = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let h2 = distance_ratio_hist(&ec, &mc, 4).unwrap();
        assert_eq!(h2.counts[3], 1);
    }

    #[test]
    fn distance_ratio_matches_two_smallest_scan() {
        let mut rng = SeededRng::new(51);
        let mut e = DenseMatrix::zeros(40, 3);
        for v in e.data_mut() {
            *v = rng.next_uniform(-2.0, 2.0);
        }
        let mut m = DenseMatrix::zeros(5, 3);
        for v in m.data_mut() {
            *v = rng.next_uniform(-2.0, 2.0);
        }
        let hist = distance_ratio_hist(&e, &m, 20).unwrap();
        let mut oracle = vec![0u64; 20];
        for i in 0..40 {
            let mut ds: Vec<f64> = (0..5)
                .map(|j| {
                    (0..3)
                        .map(|t| (e.get(i, t) - m.get(j, t)).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            ds.sort_by(f64::total_cmp);
            let rho = if ds[1] <= 0.0 { 1.0 } else { ds[0] / ds[1] };
            assert!((0.0..=1.0).contains(&rho));
            oracle[((rho * 20.0) as usize).min(19)] += 1;
        }
        assert_eq!(hist.counts, oracle);
        assert_eq!(hist.total(), 40);
    }
}
