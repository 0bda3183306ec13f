//! Minimum-cost assignment (Hungarian algorithm, shortest augmenting path
//! with potentials, O(n^3)) for square cost matrices. Used to match
//! predicted cluster labels to ground-truth classes.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Returns `assign` with `assign[row] = col` minimizing the total cost.
pub fn solve_assignment(cost: &DenseMatrix) -> Result<Vec<usize>> {
    let n = cost.rows();
    if n == 0 || cost.cols() != n {
        return Err(Error::Input(format!(
            "assignment needs a nonempty square matrix, got {}x{}",
            cost.rows(),
            cost.cols()
        )));
    }
    if !cost.is_finite() {
        return Err(Error::Numerical("assignment costs must be finite".into()));
    }
    // 1-indexed arrays; p[j] is the row matched to column j, column 0 is
    // the virtual start.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    Ok(assign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn total(cost: &DenseMatrix, assign: &[usize]) -> f64 {
        assign.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum()
    }

    fn brute_force(cost: &DenseMatrix) -> f64 {
        let n = cost.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let c = p.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum::<f64>();
            if c < best {
                best = c;
            }
        });
        best
    }

    fn permute(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
        if start == items.len() {
            visit(items);
            return;
        }
        for i in start..items.len() {
            items.swap(start, i);
            permute(items, start + 1, visit);
            items.swap(start, i);
        }
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = SeededRng::new(21);
        for n in 1..=6 {
            for _ in 0..30 {
                let mut cost = DenseMatrix::zeros(n, n);
                for v in cost.data_mut() {
                    *v = rng.next_uniform(0.0, 10.0);
                }
                let assign = solve_assignment(&cost).unwrap();
                let mut seen = vec![false; n];
                for &j in &assign {
                    assert!(!seen[j], "column used twice");
                    seen[j] = true;
                }
                assert!((total(&cost, &assign) - brute_force(&cost)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_non_square() {
        assert!(solve_assignment(&DenseMatrix::zeros(2, 3)).is_err());
        assert!(solve_assignment(&DenseMatrix::zeros(0, 0)).is_err());
    }
}
