//! Square linear assignment (Hungarian method with dual potentials).

/// Minimum-cost permutation for a square cost matrix: `perm[row] = col`.
///
/// Among optimal permutations the lexicographically smallest is returned.
/// Entries must be finite.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let k = cost.len();
    assert!(
        cost.iter().all(|r| r.len() == k),
        "cost matrix must be square"
    );
    assert!(
        cost.iter().flatten().all(|c| c.is_finite()),
        "cost entries must be finite"
    );
    if k == 0 {
        return Vec::new();
    }

    let all: Vec<usize> = (0..k).collect();
    let (_, best) = solve(cost, &all, &all);
    let scale: f64 = cost.iter().flatten().fold(1.0, |m, c| m.max(c.abs()));
    let tol = 1e-9 * scale * k as f64;

    // Fix rows in order, taking the smallest column that still admits an
    // optimal completion.
    let mut perm = Vec::with_capacity(k);
    let mut free_cols: Vec<usize> = all.clone();
    let mut prefix = 0.0;
    for row in 0..k {
        let rest_rows: Vec<usize> = (row + 1..k).collect();
        let mut chosen = None;
        for (ci, &col) in free_cols.iter().enumerate() {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != col).collect();
            let (_, rest) = solve(cost, &rest_rows, &rest_cols);
            if prefix + cost[row][col] + rest <= best + tol {
                chosen = Some(ci);
                break;
            }
        }
        // The optimum is always reachable from some column; fall back to the
        // cheapest completion if rounding rejected every candidate.
        let ci = chosen.unwrap_or_else(|| {
            let mut best_ci = 0;
            let mut best_val = f64::INFINITY;
            for (ci, &col) in free_cols.iter().enumerate() {
                let rest_cols: Vec<usize> =
                    free_cols.iter().copied().filter(|&c| c != col).collect();
                let (_, rest) = solve(cost, &rest_rows, &rest_cols);
                if cost[row][col] + rest < best_val {
                    best_val = cost[row][col] + rest;
                    best_ci = ci;
                }
            }
            best_ci
        });
        let col = free_cols.remove(ci);
        prefix += cost[row][col];
        perm.push(col);
    }
    perm
}

/// Total cost of `perm`, summed row by row.
pub fn assignment_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
}

/// Optimal assignment of the sub-matrix `rows × cols` (equal lengths).
/// Returns the column chosen for each listed row and the total cost.
fn solve(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> (Vec<usize>, f64) {
    let n = rows.len();
    debug_assert_eq!(n, cols.len());
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let at = |i: usize, j: usize| cost[rows[i - 1]][cols[j - 1]];

    // 1-based potentials; p[j] = row matched to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0, j) - u[i0] - v[j];
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
            assign[p[j] - 1] = cols[j - 1];
        }
    }
    let total = assign
        .iter()
        .enumerate()
        .map(|(i, &c)| cost[rows[i]][c])
        .sum();
    (assign, total)
}
