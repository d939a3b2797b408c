//! Student t-tests and Bonferroni-corrected pairwise comparisons.

use super::dist::t_two_tailed;
use super::{clamp_p, mean, variance, Method, MixedDesignTable, StatsError, TestResult};

/// `min(1, m p)` for each p of a family of `m` tests.
pub fn bonferroni(p: &[f64]) -> Vec<f64> {
    let m = p.len() as f64;
    p.iter().map(|v| (v * m).min(1.0)).collect()
}

/// One-sample t-test of `mean(x) = 0`.
pub fn one_sample_ttest(x: &[f64]) -> Result<TestResult, StatsError> {
    let mut r = paired_core(x)?;
    r.method = Method::OneSampleT;
    Ok(r)
}

/// `t = mean(d) / (sd(d) / sqrt(n))` on `d = post - pre`, `df = n - 1`.
pub fn paired_ttest(pre: &[f64], post: &[f64]) -> Result<TestResult, StatsError> {
    if pre.len() != post.len() {
        return Err(StatsError::Input(format!(
            "paired samples differ in length ({} vs {})",
            pre.len(),
            post.len()
        )));
    }
    let d: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).collect();
    paired_core(&d)
}

fn paired_core(d: &[f64]) -> Result<TestResult, StatsError> {
    let n = d.len();
    if n < 2 {
        return Err(StatsError::Input(
            "a t-test needs at least two observations".into(),
        ));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::Input("non-finite observation".into()));
    }
    let m = mean(d);
    let sd = variance(d).sqrt();
    let spread = d.iter().map(|v| (v - d[0]).abs()).fold(0.0, f64::max);
    if spread == 0.0 || !(sd > 0.0) {
        return Err(StatsError::Degenerate(
            "all differences are identical".into(),
        ));
    }
    let t = m / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    Ok(TestResult {
        statistic: t,
        p: clamp_p(t_two_tailed(t, df)),
        df: vec![df],
        n: (n, n),
        method: Method::PairedT,
    })
}

/// Pooled-variance two-sample t-test.
pub fn independent_ttest(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(StatsError::Input(
            "each sample needs at least two observations".into(),
        ));
    }
    let df = (na + nb - 2) as f64;
    let pooled = ((na - 1) as f64 * variance(a) + (nb - 1) as f64 * variance(b)) / df;
    if !(pooled > 0.0) {
        return Err(StatsError::Degenerate("both samples are constant".into()));
    }
    let t = (mean(a) - mean(b)) / (pooled * (1.0 / na as f64 + 1.0 / nb as f64)).sqrt();
    Ok(TestResult {
        statistic: t,
        p: clamp_p(t_two_tailed(t, df)),
        df: vec![df],
        n: (na, nb),
        method: Method::IndependentT,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Level held fixed (an event for HUD comparisons, a HUD for event pairs).
    pub within: String,
    pub first: String,
    pub second: String,
    pub test: TestResult,
    pub p_adjusted: f64,
}

/// Between levels compared at every within level with independent
/// t-tests; the family is all comparisons made.
pub fn posthoc_between(table: &MixedDesignTable) -> Result<Vec<Comparison>, StatsError> {
    let (t, _) = table.complete_cases();
    let groups = t.between_levels();
    let mut out = Vec::new();
    for level in t.within_levels() {
        for (i, g1) in groups.iter().enumerate() {
            for g2 in &groups[i + 1..] {
                let pick = |g: &str| -> Vec<f64> {
                    t.rows
                        .iter()
                        .filter(|r| r.within == level && r.between == g)
                        .map(|r| r.value)
                        .collect()
                };
                let test = independent_ttest(&pick(g1), &pick(g2))?;
                out.push(Comparison {
                    within: level.clone(),
                    first: g1.clone(),
                    second: g2.clone(),
                    test,
                    p_adjusted: 0.0,
                });
            }
        }
    }
    adjust(&mut out);
    Ok(out)
}

/// Within levels compared pairwise inside every between level with
/// paired t-tests; one family per between level.
pub fn posthoc_within(table: &MixedDesignTable) -> Result<Vec<Comparison>, StatsError> {
    let (t, _) = table.complete_cases();
    let levels = t.within_levels();
    let by_subject = t.by_subject();
    let subjects = t.subjects();
    let mut out = Vec::new();
    for g in t.between_levels() {
        let members: Vec<u32> = subjects
            .iter()
            .filter(|(_, s)| **s == g)
            .map(|(k, _)| *k)
            .collect();
        let mut family = Vec::new();
        for (i, l1) in levels.iter().enumerate() {
            for l2 in &levels[i + 1..] {
                let x: Vec<f64> = members.iter().map(|k| by_subject[k][l1]).collect();
                let y: Vec<f64> = members.iter().map(|k| by_subject[k][l2]).collect();
                let test = paired_ttest(&x, &y)?;
                family.push(Comparison {
                    within: g.clone(),
                    first: l1.clone(),
                    second: l2.clone(),
                    test,
                    p_adjusted: 0.0,
                });
            }
        }
        adjust(&mut family);
        out.extend(family);
    }
    Ok(out)
}

fn adjust(family: &mut [Comparison]) {
    let p: Vec<f64> = family.iter().map(|c| c.test.p).collect();
    for (c, adj) in family.iter_mut().zip(bonferroni(&p)) {
        c.p_adjusted = adj;
    }
}
