use crate::error::{PasdfError, Result};
use crate::geom::PointCloud;

/// Minimum-cost perfect assignment on a square cost matrix (row-major, `n × n`).
/// Returns `assignment[row] = column`. Shortest augmenting paths with dual
/// potentials, O(n³).
pub fn hungarian(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(PasdfError::input(format!("cost matrix has {} entries, expected {n}²", cost.len())));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(PasdfError::input("cost matrix contains non-finite entries"));
    }
    // 1-based internally; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let slack = cost[(r - 1) * n + col - 1] - u[r] - v[col];
                if slack < min_slack[col] {
                    min_slack[col] = slack;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    next = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        if owner[col] != 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    Ok(assignment)
}

/// Optimal bijection cost `Σ_i ‖a_i − b_σ(i)‖` (summed in index order) together with σ.
pub fn emd_assignment(a: &PointCloud, b: &PointCloud) -> Result<(f64, Vec<usize>)> {
    if a.len() != b.len() {
        return Err(PasdfError::input(format!(
            "EMD needs equal-size clouds, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    a.ensure_non_empty("emd")?;
    let n = a.len();
    let mut cost = Vec::with_capacity(n * n);
    for p in a.points() {
        cost.extend(b.points().iter().map(|q| (p - q).norm()));
    }
    let sigma = hungarian(&cost, n)?;
    let total = sigma.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total, sigma))
}

/// Earth mover's distance per point: optimal bijection cost divided by |a|.
pub fn emd(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(emd_assignment(a, b)?.0 / a.len() as f64)
}
