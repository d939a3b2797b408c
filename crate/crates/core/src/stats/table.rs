//! Long-format tables for the mixed design and questionnaire ratings.

use std::collections::{BTreeMap, BTreeSet};

use super::StatsError;
use crate::physio::io::{CsvError, CsvTable};
use crate::physio::{FeatureRow, Group};

#[derive(Debug, Clone, PartialEq)]
pub struct MixedObs {
    pub subject: u32,
    /// Between-subjects level (HUD).
    pub between: String,
    /// Within-subjects level (event).
    pub within: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixedDesignTable {
    pub rows: Vec<MixedObs>,
}

impl MixedDesignTable {
    /// Checks that every subject sits in one between level and has each
    /// within level at most once.
    pub fn new(rows: Vec<MixedObs>) -> Result<Self, StatsError> {
        let mut group_of: BTreeMap<u32, &str> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !r.value.is_finite() {
                return Err(StatsError::Input(format!(
                    "subject {} has a non-finite value",
                    r.subject
                )));
            }
            if let Some(g) = group_of.insert(r.subject, &r.between) {
                if g != r.between {
                    return Err(StatsError::Design(format!(
                        "subject {} appears in two groups",
                        r.subject
                    )));
                }
            }
            if !seen.insert((r.subject, r.within.clone())) {
                return Err(StatsError::Design(format!(
                    "subject {} has level `{}` twice",
                    r.subject, r.within
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn from_features(
        rows: &[FeatureRow],
        value: impl Fn(&FeatureRow) -> f64,
    ) -> Result<Self, StatsError> {
        Self::new(
            rows.iter()
                .map(|r| MixedObs {
                    subject: r.subject,
                    between: r.group.to_string(),
                    within: r.event.to_string(),
                    value: value(r),
                })
                .collect(),
        )
    }

    pub fn between_levels(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.between.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn within_levels(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.within.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn subjects(&self) -> BTreeMap<u32, String> {
        self.rows
            .iter()
            .map(|r| (r.subject, r.between.clone()))
            .collect()
    }

    /// Drops subjects missing any within level; returns the dropped ids.
    pub fn complete_cases(&self) -> (Self, Vec<u32>) {
        let levels = self.within_levels().len();
        let mut count: BTreeMap<u32, usize> = BTreeMap::new();
        for r in &self.rows {
            *count.entry(r.subject).or_default() += 1;
        }
        let dropped: Vec<u32> = count
            .iter()
            .filter(|(_, n)| **n < levels)
            .map(|(s, _)| *s)
            .collect();
        let rows = self
            .rows
            .iter()
            .filter(|r| !dropped.contains(&r.subject))
            .cloned()
            .collect();
        (Self { rows }, dropped)
    }

    /// True when every between level has the same number of subjects.
    pub fn is_balanced(&self) -> bool {
        let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
        for g in self.subjects().values() {
            *sizes.entry(g.clone()).or_default() += 1;
        }
        sizes.values().collect::<BTreeSet<_>>().len() <= 1
    }

    /// Values of one subject by within level.
    pub fn by_subject(&self) -> BTreeMap<u32, BTreeMap<String, f64>> {
        let mut out: BTreeMap<u32, BTreeMap<String, f64>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.subject)
                .or_default()
                .insert(r.within.clone(), r.value);
        }
        out
    }

    /// The same table with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| MixedObs {
                    value: r.value * c,
                    ..r.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingRow {
    pub subject: u32,
    pub group: Group,
    pub question_id: String,
    pub rating: f64,
}

impl RatingRow {
    /// Event part of an event-bound question id such as `Dog:q1`.
    pub fn event_question(&self) -> Option<(crate::scenario::EventId, &str)> {
        let (ev, q) = self.question_id.split_once(':')?;
        Some((ev.parse().ok()?, q))
    }
}

pub const RATING_HEADER: [&str; 4] = ["subject", "group", "question_id", "rating"];

pub fn read_ratings(name: &str, text: &str) -> Result<Vec<RatingRow>, CsvError> {
    let t = CsvTable::parse(name, text, &RATING_HEADER)?;
    (0..t.len())
        .map(|i| {
            Ok(RatingRow {
                subject: t.get(i, 0)?,
                group: t.get(i, 1)?,
                question_id: t.get(i, 2)?,
                rating: t.finite(i, 3)?,
            })
        })
        .collect()
}

pub fn write_ratings(rows: &[RatingRow]) -> String {
    use std::fmt::Write;
    let mut out = format!("{}\n", RATING_HEADER.join(","));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.subject, r.group, r.question_id, r.rating
        );
    }
    out
}
