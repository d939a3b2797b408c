//! Mann-Whitney U test.

use super::dist::normal_two_tailed;
use super::{clamp_p, Method, StatsError, TestResult};

/// Largest `n_a * n_b` for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 64;

/// Midranks (1-based) of the pooled sample and the tie-group sizes.
pub fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of arrangements giving each value of U for sample sizes
/// `(n_a, n_b)`, indexed by U.
pub fn u_distribution(n_a: usize, n_b: usize) -> Vec<f64> {
    let max_u = n_a * n_b;
    // c[i][j][u]: ways for i items of a and j of b. Rolled over j.
    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n_a + 1];
    for row in prev.iter_mut() {
        row[0] = 1.0;
    }
    for j in 1..=n_b {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n_a + 1];
        cur[0][0] = 1.0;
        for i in 1..=n_a {
            for u in 0..=max_u {
                // Largest element from b adds nothing; from a it beats the j b's.
                let from_b = prev[i][u];
                let from_a = if u >= j { cur[i - 1][u - j] } else { 0.0 };
                cur[i][u] = from_b + from_a;
            }
        }
        prev = cur;
    }
    prev[n_a].clone()
}

/// `U = R_a - n_a (n_a + 1) / 2`. Exact p by enumeration for small tie-free
/// samples, otherwise the normal approximation with tie and continuity
/// corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return Err(StatsError::Input(
            "each sample needs at least one observation".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::Input("non-finite observation".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let u = ra - (na * (na + 1)) as f64 / 2.0;
    let has_ties = ties.iter().any(|&t| t > 1);
    if na * nb <= EXACT_LIMIT && !has_ties {
        let p = exact_p(u, na, nb);
        return Ok(TestResult {
            statistic: u,
            p,
            df: vec![],
            n: (na, nb),
            method: Method::MannWhitneyExact,
        });
    }
    let p = normal_p(u, na, nb, &ties);
    Ok(TestResult {
        statistic: u,
        p,
        df: vec![],
        n: (na, nb),
        method: Method::MannWhitneyNormal,
    })
}

/// Two-tailed exact p: twice the smaller tail, capped at 1.
pub fn exact_p(u: f64, na: usize, nb: usize) -> f64 {
    let dist = u_distribution(na, nb);
    let total: f64 = dist.iter().sum();
    let k = u.round() as usize;
    let lower: f64 = dist[..=k.min(dist.len() - 1)].iter().sum();
    let upper: f64 = dist[k.min(dist.len() - 1)..].iter().sum();
    clamp_p((2.0 * lower.min(upper) / total).min(1.0))
}

/// Normal approximation with tie correction of the variance and a 0.5
/// continuity correction.
pub fn normal_p(u: f64, na: usize, nb: usize, ties: &[usize]) -> f64 {
    let (n1, n2) = (na as f64, nb as f64);
    let n = n1 + n2;
    let mu = n1 * n2 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = if n > 1.0 {
        n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    clamp_p(normal_two_tailed(z))
}
