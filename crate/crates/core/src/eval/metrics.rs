use crate::error::{Error, Result};

/// Maximum-weight perfect matching on a rectangular weight table, padded to
/// square with zeros. Returns `row -> column` for every row.
pub fn hungarian_max(weights: &[Vec<f64>]) -> Vec<usize> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, |r| r.len());
    let m = rows.max(cols);
    if m == 0 {
        return Vec::new();
    }
    let top = weights.iter().flatten().cloned().fold(0.0, f64::max);
    let cost = |i: usize, j: usize| -> f64 {
        let w = if i < rows && j < cols { weights[i][j] } else { 0.0 };
        top - w
    };
    // potentials and matching over 1-based indices, column 0 is a sentinel
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
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
    let mut assign = vec![0; m];
    for j in 1..=m {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign.truncate(rows);
    assign
}

fn contingency(a: &[usize], b: &[usize]) -> Vec<Vec<f64>> {
    let ra = a.iter().max().map_or(0, |m| m + 1);
    let rb = b.iter().max().map_or(0, |m| m + 1);
    let mut t = vec![vec![0.0; rb]; ra];
    for (&x, &y) in a.iter().zip(b) {
        t[x][y] += 1.0;
    }
    t
}

fn entropy(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    counts.filter(|&c| c > 0.0).map(|c| -(c / n) * (c / n).ln()).sum()
}

/// `I(A; B) / sqrt(H(A) H(B))` with natural logs. Two single-cluster
/// labelings score 1; a single cluster against a split scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    check(a, b)?;
    let n = a.len() as f64;
    let t = contingency(a, b);
    let ra: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let rb: Vec<f64> = (0..t[0].len()).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let ha = entropy(ra.iter().copied(), n);
    let hb = entropy(rb.iter().copied(), n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in t.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                mi += (c / n) * (c * n / (ra[i] * rb[j])).ln();
            }
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

fn check(a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Empty("assignments"));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "clustering metrics",
            expected: a.len().to_string(),
            actual: b.len().to_string(),
        });
    }
    Ok(())
}

/// `(ACC, NMI)`. ACC uses the best one-to-one cluster-to-class matching.
pub fn clustering_metrics(assignments: &[usize], labels: &[usize]) -> Result<(f64, f64)> {
    check(assignments, labels)?;
    let t = contingency(assignments, labels);
    let matching = hungarian_max(&t);
    let matched: f64 = matching
        .iter()
        .enumerate()
        .map(|(i, &j)| t[i].get(j).copied().unwrap_or(0.0))
        .sum();
    let acc = matched / assignments.len() as f64;
    Ok((acc, nmi(assignments, labels)?))
}
