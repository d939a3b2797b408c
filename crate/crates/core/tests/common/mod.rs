#![allow(dead_code)]

use std::collections::BTreeMap;

/// Split-plot sums of squares written as explicit residual sums.
pub struct Ss {
    pub a: f64,
    pub s_a: f64,
    pub b: f64,
    pub ab: f64,
    pub bs_a: f64,
    pub total: f64,
}

pub fn brute_ss(values: &[Vec<f64>], groups: &[&str]) -> Ss {
    let n = values.len();
    let b = values[0].len();
    let all: Vec<f64> = values.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(k);
    }
    let subj_mean = |k: usize| values[k].iter().sum::<f64>() / b as f64;
    let group_mean = |g: &str| {
        let m = &members[g];
        m.iter().map(|&k| subj_mean(k)).sum::<f64>() / m.len() as f64
    };
    let cell_mean = |g: &str, j: usize| {
        let m = &members[g];
        m.iter().map(|&k| values[k][j]).sum::<f64>() / m.len() as f64
    };
    let level_mean = |j: usize| values.iter().map(|r| r[j]).sum::<f64>() / n as f64;
    let mut ss = Ss {
        a: 0.0,
        s_a: 0.0,
        b: 0.0,
        ab: 0.0,
        bs_a: 0.0,
        total: 0.0,
    };
    for k in 0..n {
        let g = groups[k];
        for j in 0..b {
            let y = values[k][j];
            ss.total += (y - grand).powi(2);
            ss.a += (group_mean(g) - grand).powi(2);
            ss.s_a += (subj_mean(k) - group_mean(g)).powi(2);
            ss.b += (level_mean(j) - grand).powi(2);
            ss.ab += (cell_mean(g, j) - group_mean(g) - level_mean(j) + grand).powi(2);
            ss.bs_a += (y - subj_mean(k) - cell_mean(g, j) + group_mean(g)).powi(2);
        }
    }
    ss
}

// Exact two-tailed p by enumerating every choice of ranks for sample a.
pub fn enumerate_p(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let na = a.len();
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = |v: f64| sorted.iter().position(|x| *x == v).unwrap() as f64 + 1.0;
    let u_obs = a.iter().map(|v| rank(*v)).sum::<f64>() - (na * (na + 1)) as f64 / 2.0;
    let (mut lower, mut upper, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let rs: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| i as f64 + 1.0)
            .sum();
        let u = rs - (na * (na + 1)) as f64 / 2.0;
        total += 1;
        if u <= u_obs {
            lower += 1;
        }
        if u >= u_obs {
            upper += 1;
        }
    }
    (
        u_obs,
        (2.0 * lower.min(upper) as f64 / total as f64).min(1.0),
    )
}

// lnΓ by the Stirling series after shifting the argument above 10.
pub fn ln_gamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn t_oracle(t: f64, df: f64) -> f64 {
    let c =
        ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let pdf = |x: f64| (c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    1.0 - 2.0 * simpson(pdf, 0.0, t.abs(), 200_000)
}

pub fn f_oracle(f: f64, d1: f64, d2: f64) -> f64 {
    let c = ln_gamma((d1 + d2) / 2.0) - ln_gamma(d1 / 2.0) - ln_gamma(d2 / 2.0)
        + d1 / 2.0 * (d1 / d2).ln();
    // x = s^2 removes the x^(d1/2 - 1) singularity at zero.
    let g = |s: f64| {
        if s == 0.0 {
            return if d1 == 1.0 { 2.0 * c.exp() } else { 0.0 };
        }
        let x = s * s;
        2.0 * s * (c + (d1 / 2.0 - 1.0) * x.ln() - (d1 + d2) / 2.0 * (1.0 + d1 * x / d2).ln()).exp()
    };
    1.0 - simpson(g, 0.0, f.sqrt(), 200_000)
}
