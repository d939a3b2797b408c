//! Two-way mixed (split-plot) ANOVA: one between-subjects factor A, one
//! within-subjects factor B, subjects nested in A.

use std::collections::BTreeMap;

use super::dist::f_upper;
use super::{clamp_p, MixedDesignTable, StatsError};

#[derive(Debug, Clone, PartialEq)]
pub struct EffectRow {
    pub ss: f64,
    pub df_num: f64,
    pub df_den: f64,
    pub f: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaResult {
    /// Between-subjects factor.
    pub between: EffectRow,
    /// Within-subjects factor.
    pub within: EffectRow,
    pub interaction: EffectRow,
    /// Subjects within groups (error term of the between effect).
    pub ss_subjects_error: f64,
    /// Within factor by subjects within groups (error of the other two).
    pub ss_within_error: f64,
    pub ss_total: f64,
    pub n_subjects: usize,
    /// Subjects dropped for missing levels.
    pub dropped: Vec<u32>,
}

/// Complete-case split-plot decomposition with F tests.
pub fn mixed_anova(table: &MixedDesignTable) -> Result<AnovaResult, StatsError> {
    let (t, dropped) = table.complete_cases();
    let groups = t.between_levels();
    let levels = t.within_levels();
    let subjects = t.subjects();
    let (a, b, n) = (groups.len(), levels.len(), subjects.len());
    if a < 2 {
        return Err(StatsError::Design(
            "the between factor needs at least two levels".into(),
        ));
    }
    if b < 2 {
        return Err(StatsError::Design(
            "the within factor needs at least two levels".into(),
        ));
    }
    for g in &groups {
        if subjects.values().filter(|s| *s == g).count() < 2 {
            return Err(StatsError::Design(format!(
                "group `{g}` needs at least two complete subjects"
            )));
        }
    }

    let values: Vec<f64> = t.rows.iter().map(|r| r.value).collect();
    let grand = values.iter().sum::<f64>() / values.len() as f64;
    let sq = |x: f64| x * x;

    let mut subj_sum: BTreeMap<u32, f64> = BTreeMap::new();
    let mut group_sum: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    let mut level_sum: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    let mut cell_sum: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for r in &t.rows {
        *subj_sum.entry(r.subject).or_default() += r.value;
        let g = group_sum.entry(&r.between).or_default();
        g.0 += r.value;
        g.1 += 1;
        let l = level_sum.entry(&r.within).or_default();
        l.0 += r.value;
        l.1 += 1;
        let c = cell_sum.entry((&r.between, &r.within)).or_default();
        c.0 += r.value;
        c.1 += 1;
    }
    let ss_total: f64 = values.iter().map(|v| sq(v - grand)).sum();
    let ss_a: f64 = group_sum
        .values()
        .map(|(s, k)| *k as f64 * sq(s / *k as f64 - grand))
        .sum();
    let ss_subj: f64 = subj_sum
        .values()
        .map(|s| b as f64 * sq(s / b as f64 - grand))
        .sum();
    let ss_b: f64 = level_sum
        .values()
        .map(|(s, k)| *k as f64 * sq(s / *k as f64 - grand))
        .sum();
    let ss_cells: f64 = cell_sum
        .values()
        .map(|(s, k)| *k as f64 * sq(s / *k as f64 - grand))
        .sum();
    let ss_sa = (ss_subj - ss_a).max(0.0);
    let ss_ab = (ss_cells - ss_a - ss_b).max(0.0);
    let ss_bsa = (ss_total - ss_subj - ss_b - ss_ab).max(0.0);

    let df_a = (a - 1) as f64;
    let df_sa = (n - a) as f64;
    let df_b = (b - 1) as f64;
    let df_ab = df_a * df_b;
    let df_bsa = df_b * df_sa;

    // Sums of squares below this are rounding residue of identical values.
    let scale: f64 = values
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let tol = 1e-24 * scale;
    let effect =
        |ss: f64, df: f64, err: f64, df_err: f64, name: &str| -> Result<EffectRow, StatsError> {
            if ss <= tol {
                return Ok(EffectRow {
                    ss,
                    df_num: df,
                    df_den: df_err,
                    f: 0.0,
                    p: 1.0,
                });
            }
            if err <= tol {
                return Err(StatsError::Degenerate(format!(
                    "error term of the {name} effect is zero"
                )));
            }
            let f = (ss / df) / (err / df_err);
            Ok(EffectRow {
                ss,
                df_num: df,
                df_den: df_err,
                f,
                p: clamp_p(f_upper(f, df, df_err)),
            })
        };
    Ok(AnovaResult {
        between: effect(ss_a, df_a, ss_sa, df_sa, "between")?,
        within: effect(ss_b, df_b, ss_bsa, df_bsa, "within")?,
        interaction: effect(ss_ab, df_ab, ss_bsa, df_bsa, "interaction")?,
        ss_subjects_error: ss_sa,
        ss_within_error: ss_bsa,
        ss_total,
        n_subjects: n,
        dropped,
    })
}
