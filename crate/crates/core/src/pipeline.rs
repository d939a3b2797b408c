//! The four subcommands as library functions: simulate, cohort, analyze and
//! report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::hud::{cue_count_stats, Policy};
use crate::physio::io::{read_features, write_features, write_markers, write_signal, CsvError};
use crate::physio::synth::subject_trace;
use crate::physio::{
    process_trace, CohortSpec, EventMarker, FeatureRow, Group, PhysioConfig, PhysioError,
};
use crate::scenario::{load_scenario_file, bundled_scenario, EventId, ScenarioDef, ScenarioError};
use crate::sim::{run_scenario, LogOptions, RunLog, SimError};
use crate::stats::table::{read_ratings, write_ratings};
use crate::stats::{
    linear_regression, mann_whitney_u, mixed_anova, one_sample_ttest, posthoc_between,
    posthoc_within, AnovaResult, Comparison, MixedDesignTable, MixedObs, RatingRow, StatsError,
    TestResult,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Physio(#[from] PhysioError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl PipelineError {
    /// 1 for degenerate analyses, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Stats(
                StatsError::Degenerate(_) | StatsError::Singular(_) | StatsError::Design(_),
            )
            | PipelineError::Physio(PhysioError::Degenerate(_)) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Bundled,
    File(PathBuf),
}

impl ScenarioSource {
    /// `bundled` selects the bundled scenario; anything else is a path.
    pub fn parse(s: &str) -> Self {
        if s == "bundled" {
            ScenarioSource::Bundled
        } else {
            ScenarioSource::File(PathBuf::from(s))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioSource,
    pub policy: Policy,
    pub seed: u64,
    pub n_omn: usize,
    pub n_sel: usize,
    pub out: PathBuf,
    /// TOML file overriding module settings.
    pub config: Option<PathBuf>,
    /// Also write every subject's signal and marker files.
    pub write_signals: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSource::Bundled,
            policy: Policy::Omn,
            seed: 1,
            n_omn: 15,
            n_sel: 15,
            out: PathBuf::from("out"),
            config: None,
            write_signals: false,
        }
    }
}

pub fn load_run_scenario(cfg: &RunConfig) -> Result<ScenarioDef, PipelineError> {
    let mut sc = match &cfg.scenario {
        ScenarioSource::Bundled => bundled_scenario()?,
        ScenarioSource::File(p) => load_scenario_file(p)?,
    };
    if let Some(path) = &cfg.config {
        let text = read(path)?;
        sc.settings = sc
            .settings
            .with_overrides(&text)
            .map_err(|m| PipelineError::Config(format!("{}: {m}", path.display())))?;
    }
    validate_settings(&sc)?;
    sc.rng_seed = cfg.seed;
    Ok(sc)
}

fn validate_settings(sc: &ScenarioDef) -> Result<(), PipelineError> {
    let s = &sc.settings;
    s.controller
        .validate()
        .and_then(|_| s.hazard.validate())
        .and_then(|_| s.hud.validate())
        .and_then(|_| s.physio.validate())
        .map_err(PipelineError::Config)
}

pub struct SimulateOutput {
    pub log: RunLog,
    pub files: Vec<PathBuf>,
}

/// Runs the scenario and writes `state.csv`, `cues.csv` (selected policy),
/// `hazard.csv`, `motion.csv`, `cue_counts.csv`, `events.csv` and
/// `summary.txt` into the output directory.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutput, PipelineError> {
    let sc = load_run_scenario(cfg)?;
    let log = simulate(&sc, cfg.policy)?;
    let out = &cfg.out;
    let cue_stats = cue_count_stats(&log.cue_counts).ok();
    let mut summary = String::new();
    let s = &log.summary;
    let _ = writeln!(summary, "scenario: {}", sc.name);
    let _ = writeln!(summary, "seed: {}", cfg.seed);
    let _ = writeln!(summary, "policy: {}", cfg.policy);
    let _ = writeln!(summary, "ticks: {}", s.ticks);
    let _ = writeln!(
        summary,
        "events: {}",
        log.events
            .iter()
            .map(|e| e.id.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(summary, "distance_m: {:.1}", s.distance_m);
    let _ = writeln!(summary, "collisions: {}", s.collisions);
    let _ = writeln!(summary, "emergency_ticks: {}", s.emergency_ticks);
    let _ = writeln!(summary, "offset_ticks: {}", s.offset_ticks);
    let _ = writeln!(summary, "danger_alerts: {}", s.danger_alerts);
    let _ = writeln!(summary, "sign_chimes: {}", s.sign_chimes);
    if let Some(c) = cue_stats {
        let _ = writeln!(summary, "mean_cues_omn: {:.3}", c.mean_omn);
        let _ = writeln!(summary, "mean_cues_sel: {:.3}", c.mean_sel);
    }
    let files = [
        ("state.csv", log.state.as_str()),
        ("cues.csv", log.cues.as_str()),
        ("hazard.csv", log.hazard.as_str()),
        ("motion.csv", log.motion.as_str()),
    ]
    .into_iter()
    .map(|(name, text)| {
        let p = out.join(name);
        write(&p, text).map(|_| p)
    })
    .collect::<Result<Vec<_>, _>>()?;
    let mut files = files;
    for (name, text) in [
        ("cue_counts.csv", log.cue_counts_csv()),
        ("events.csv", log.events_csv()),
        ("summary.txt", summary),
    ] {
        let p = out.join(name);
        write(&p, &text)?;
        files.push(p);
    }
    Ok(SimulateOutput { log, files })
}

/// Full run with the cue log restricted to `policy`.
pub fn simulate(sc: &ScenarioDef, policy: Policy) -> Result<RunLog, PipelineError> {
    let opts = LogOptions {
        policies: vec![policy],
        ..LogOptions::default()
    };
    Ok(run_scenario(sc, opts, |_, _| {})?)
}

/// Event onsets in drive time taken from a run.
pub fn markers_from_log(log: &RunLog) -> Vec<EventMarker> {
    log.events
        .iter()
        .map(|e| EventMarker {
            event: e.id,
            t: e.t,
        })
        .collect()
}

/// Synthesises and processes every subject of the cohort in parallel.
pub fn cohort_features(
    spec: &CohortSpec,
    markers: &[EventMarker],
    drive_s: f64,
    cfg: &PhysioConfig,
) -> Result<Vec<FeatureRow>, PipelineError> {
    spec.validate()?;
    let per_subject: Vec<Result<Vec<FeatureRow>, PhysioError>> = spec
        .subjects()
        .par_iter()
        .map(|&(k, g)| {
            let (trace, _) = subject_trace(spec, k, g, markers, drive_s, cfg)?;
            Ok(process_trace(&trace, g, cfg)?.rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_subject {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Likert answers (1..7) to four questions per event plus two overall
/// questions, loosely tracking each subject's response strength.
pub fn synth_ratings(spec: &CohortSpec, rows: &[FeatureRow], seed: u64) -> Vec<RatingRow> {
    let mut out = Vec::new();
    let noise = Normal::new(0.0, 0.8).expect("valid sigma");
    for (k, g) in spec.subjects() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(spec.subject_seed(k) ^ seed.rotate_left(17) ^ 0xA11CE);
        for e in EventId::ALL {
            let d = rows
                .iter()
                .find(|r| r.subject == k && r.event == e)
                .map_or(0.0, |r| r.d_p2p);
            for (q, weight) in [("q1", 1.2), ("q2", -0.8), ("q3", 0.5), ("q4", 0.0)] {
                let v = 4.0 + weight * d + noise.sample(&mut rng);
                out.push(RatingRow {
                    subject: k,
                    group: g,
                    question_id: format!("{e}:{q}"),
                    rating: v.round().clamp(1.0, 7.0),
                });
            }
        }
        let shift = if g == Group::Sel { 1.0 } else { 0.0 };
        for q in ["trust", "usefulness"] {
            let v = 4.0 + shift + 1.2 * rng.gen::<f64>() - 0.6 + noise.sample(&mut rng);
            out.push(RatingRow {
                subject: k,
                group: g,
                question_id: q.to_string(),
                rating: v.round().clamp(1.0, 7.0),
            });
        }
    }
    out
}

/// Runs the scenario once, then synthesises the cohort and writes
/// `features.csv`, `ratings.csv`, `markers.csv` and optional signals.
pub fn cmd_cohort(cfg: &RunConfig) -> Result<Vec<FeatureRow>, PipelineError> {
    if cfg.n_omn == 0 || cfg.n_sel == 0 {
        return Err(PipelineError::Config(
            "each group needs at least one subject".into(),
        ));
    }
    let sc = load_run_scenario(cfg)?;
    let log = simulate(&sc, cfg.policy)?;
    let markers = markers_from_log(&log);
    let spec = CohortSpec::planted(cfg.n_omn, cfg.n_sel, cfg.seed);
    let physio = &sc.settings.physio;
    let rows = cohort_features(&spec, &markers, sc.duration_s, physio)?;
    write(&cfg.out.join("features.csv"), &write_features(&rows))?;
    write(
        &cfg.out.join("ratings.csv"),
        &write_ratings(&synth_ratings(&spec, &rows, cfg.seed)),
    )?;
    write(&cfg.out.join("markers.csv"), &write_markers(&markers))?;
    if cfg.write_signals {
        for (k, g) in spec.subjects() {
            let (trace, _) = subject_trace(&spec, k, g, &markers, sc.duration_s, physio)?;
            write(
                &cfg.out.join(format!("signals/subject_{k:03}.csv")),
                &write_signal(&trace),
            )?;
            write(
                &cfg.out.join(format!("signals/subject_{k:03}_markers.csv")),
                &write_markers(&trace.markers),
            )?;
        }
    }
    Ok(rows)
}

/// One line of the machine-readable report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub effect: String,
    pub statistic: f64,
    pub df: String,
    pub p: f64,
    pub adjusted_p: f64,
}

pub const REPORT_HEADER: &str = "effect,statistic,df,p,adjusted_p";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureAnalysis {
    pub anova: BTreeMap<&'static str, AnovaResult>,
    pub hud_posthoc: Vec<Comparison>,
    pub event_posthoc: Vec<Comparison>,
    /// Post versus Pre per event over all subjects, with the Bonferroni
    /// adjustment over the seven events.
    pub prepost: Vec<(EventId, TestResult, f64)>,
}

pub const ALPHA: f64 = 0.05;

type FeatureSelector = fn(&FeatureRow) -> f64;

const FEATURES: [(&str, FeatureSelector); 4] = [
    ("dP2P", |r| r.d_p2p),
    ("dMax", |r| r.d_max),
    ("dMean", |r| r.d_mean),
    ("dAcc", |r| r.d_acc),
];

pub fn analyze_features(rows: &[FeatureRow]) -> Result<FeatureAnalysis, PipelineError> {
    let mut anova = BTreeMap::new();
    for (name, f) in FEATURES {
        let table = MixedDesignTable::from_features(rows, f)?;
        anova.insert(name, mixed_anova(&table)?);
    }
    let p2p = MixedDesignTable::from_features(rows, |r| r.d_p2p)?;
    let hud_posthoc = posthoc_between(&p2p)?;
    let event_posthoc = posthoc_within(&p2p)?;
    let prepost = prepost_tests(rows)?;
    Ok(FeatureAnalysis {
        anova,
        hud_posthoc,
        event_posthoc,
        prepost,
    })
}

/// `Post = Pre` per event: one-sample t on ΔP2P over all subjects, which
/// equals the paired test of the two halves.
pub fn prepost_tests(
    rows: &[FeatureRow],
) -> Result<Vec<(EventId, TestResult, f64)>, PipelineError> {
    let mut tests = Vec::new();
    for e in EventId::ALL {
        let d: Vec<f64> = rows
            .iter()
            .filter(|r| r.event == e)
            .map(|r| r.d_p2p)
            .collect();
        if d.is_empty() {
            continue;
        }
        tests.push((e, one_sample_ttest(&d)?));
    }
    let adj = crate::stats::bonferroni(&tests.iter().map(|(_, t)| t.p).collect::<Vec<_>>());
    Ok(tests
        .into_iter()
        .zip(adj)
        .map(|((e, t), a)| (e, t, a))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingAnalysis {
    /// Mann-Whitney U per general question.
    pub u_tests: Vec<(String, TestResult, f64)>,
    /// Mixed ANOVA per event-bound question (suffix after the colon).
    pub anova: Vec<(String, AnovaResult)>,
    /// Mean ΔP2P of each event and HUD cell regressed on the cell means of
    /// the event-bound questions.
    pub regression: Option<crate::stats::Regression>,
    pub regression_predictors: Vec<String>,
}

pub fn analyze_ratings(
    ratings: &[RatingRow],
    features: &[FeatureRow],
) -> Result<RatingAnalysis, PipelineError> {
    let mut general: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut per_q: BTreeMap<String, Vec<MixedObs>> = BTreeMap::new();
    for r in ratings {
        match r.event_question() {
            Some((e, q)) => per_q.entry(q.to_string()).or_default().push(MixedObs {
                subject: r.subject,
                between: r.group.to_string(),
                within: e.to_string(),
                value: r.rating,
            }),
            None => {
                let slot = general.entry(&r.question_id).or_default();
                match r.group {
                    Group::Omn => slot.0.push(r.rating),
                    Group::Sel => slot.1.push(r.rating),
                }
            }
        }
    }
    let mut u_tests = Vec::new();
    for (q, (a, b)) in &general {
        if !a.is_empty() && !b.is_empty() {
            u_tests.push((q.to_string(), mann_whitney_u(a, b)?));
        }
    }
    let adj = crate::stats::bonferroni(&u_tests.iter().map(|(_, t)| t.p).collect::<Vec<_>>());
    let u_tests = u_tests
        .into_iter()
        .zip(adj)
        .map(|((q, t), a)| (q, t, a))
        .collect();

    let mut anova = Vec::new();
    for (q, obs) in &per_q {
        let table = MixedDesignTable::new(obs.clone())?;
        match mixed_anova(&table) {
            Ok(a) => anova.push((q.clone(), a)),
            Err(StatsError::Degenerate(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }

    let predictors: Vec<String> = per_q.keys().cloned().collect();
    let regression = if predictors.is_empty() || features.is_empty() {
        None
    } else {
        let mean = |vals: Vec<f64>| vals.iter().sum::<f64>() / vals.len().max(1) as f64;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for e in EventId::ALL {
            for g in [Group::Omn, Group::Sel] {
                let ys: Vec<f64> = features
                    .iter()
                    .filter(|r| r.event == e && r.group == g)
                    .map(|r| r.d_p2p)
                    .collect();
                if ys.is_empty() {
                    continue;
                }
                x.push(
                    predictors
                        .iter()
                        .map(|q| {
                            let id = format!("{e}:{q}");
                            mean(
                                ratings
                                    .iter()
                                    .filter(|r| r.group == g && r.question_id == id)
                                    .map(|r| r.rating)
                                    .collect(),
                            )
                        })
                        .collect(),
                );
                y.push(mean(ys));
            }
        }
        Some(linear_regression(&x, &y)?)
    };
    Ok(RatingAnalysis {
        u_tests,
        anova,
        regression,
        regression_predictors: predictors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub features: FeatureAnalysis,
    pub ratings: Option<RatingAnalysis>,
}

impl Report {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::new();
        let f_row = |name: String, e: &crate::stats::EffectRow| ReportRow {
            effect: name,
            statistic: e.f,
            df: format!("{}/{}", e.df_num, e.df_den),
            p: e.p,
            adjusted_p: e.p,
        };
        for (feat, a) in &self.features.anova {
            out.push(f_row(format!("{feat}:HUD"), &a.between));
            out.push(f_row(format!("{feat}:event"), &a.within));
            out.push(f_row(format!("{feat}:HUDxevent"), &a.interaction));
        }
        let t_row = |name: String, t: &TestResult, adj: f64| ReportRow {
            effect: name,
            statistic: t.statistic,
            df: t
                .df
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("/"),
            p: t.p,
            adjusted_p: adj,
        };
        for (e, t, adj) in &self.features.prepost {
            out.push(t_row(format!("dP2P:prepost:{e}"), t, *adj));
        }
        for c in &self.features.hud_posthoc {
            out.push(t_row(
                format!("dP2P:posthoc:{}:{}-{}", c.within, c.first, c.second),
                &c.test,
                c.p_adjusted,
            ));
        }
        for c in &self.features.event_posthoc {
            out.push(t_row(
                format!("dP2P:posthoc:{}:{}-{}", c.within, c.first, c.second),
                &c.test,
                c.p_adjusted,
            ));
        }
        if let Some(r) = &self.ratings {
            for (q, t, adj) in &r.u_tests {
                out.push(t_row(format!("rating:{q}:U"), t, *adj));
            }
            for (q, a) in &r.anova {
                out.push(f_row(format!("rating:{q}:HUD"), &a.between));
                out.push(f_row(format!("rating:{q}:event"), &a.within));
                out.push(f_row(format!("rating:{q}:HUDxevent"), &a.interaction));
            }
            if let Some(reg) = &r.regression {
                out.push(t_row(
                    "regression:dP2P~ratings".into(),
                    &reg.overall,
                    reg.overall.p,
                ));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in self.rows() {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e}",
                r.effect, r.statistic, r.df, r.p, r.adjusted_p
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let star = |p: f64| if p < ALPHA { " *" } else { "" };
        let _ = writeln!(
            s,
            "Mixed ANOVA (HUD between subjects, event within subjects)"
        );
        for (feat, a) in &self.features.anova {
            let _ = writeln!(
                s,
                "  {feat}  ({} subjects, {} dropped)",
                a.n_subjects,
                a.dropped.len()
            );
            for (name, e) in [
                ("HUD", &a.between),
                ("event", &a.within),
                ("HUD x event", &a.interaction),
            ] {
                let _ = writeln!(
                    s,
                    "    {name:<12} F({}, {}) = {:.3}, p = {:.4}{}",
                    e.df_num,
                    e.df_den,
                    e.f,
                    e.p,
                    star(e.p)
                );
            }
        }
        let _ = writeln!(
            s,
            "\nPost versus Pre (dP2P, two-tailed t, Bonferroni over events)"
        );
        for (e, t, adj) in &self.features.prepost {
            let _ = writeln!(
                s,
                "  {:<8} t({}) = {:.3}, p = {:.4}, adjusted p = {:.4}{}",
                e.as_str(),
                t.df[0],
                t.statistic,
                t.p,
                adj,
                star(*adj)
            );
        }
        let _ = writeln!(
            s,
            "\nHUD within each event (dP2P, independent t, Bonferroni)"
        );
        for c in &self.features.hud_posthoc {
            let _ = writeln!(
                s,
                "  {:<8} {} vs {}: t = {:.3}, adjusted p = {:.4}{}",
                c.within,
                c.first,
                c.second,
                c.test.statistic,
                c.p_adjusted,
                star(c.p_adjusted)
            );
        }
        let significant = self
            .features
            .event_posthoc
            .iter()
            .filter(|c| c.p_adjusted < ALPHA)
            .count();
        let _ = writeln!(
            s,
            "\nEvent pairs within each HUD (dP2P, paired t, Bonferroni): {} of {} significant",
            significant,
            self.features.event_posthoc.len()
        );
        if let Some(r) = &self.ratings {
            let _ = writeln!(s, "\nRatings");
            for (q, t, adj) in &r.u_tests {
                let _ = writeln!(
                    s,
                    "  {q:<12} U = {:.1}, p = {:.4}, adjusted p = {:.4}{}",
                    t.statistic,
                    t.p,
                    adj,
                    star(*adj)
                );
            }
            for (q, a) in &r.anova {
                let _ = writeln!(
                    s,
                    "  {q:<12} HUD F({}, {}) = {:.3}, p = {:.4}{}",
                    a.between.df_num,
                    a.between.df_den,
                    a.between.f,
                    a.between.p,
                    star(a.between.p)
                );
            }
            if let Some(reg) = &r.regression {
                let _ = writeln!(
                    s,
                    "\nRegression of cell-mean dP2P on {}: F({}, {}) = {:.3}, p = {:.4}, R2 = {:.3}, adjusted R2 = {:.3}",
                    r.regression_predictors.join(", "),
                    reg.overall.df[0],
                    reg.overall.df[1],
                    reg.overall.statistic,
                    reg.overall.p,
                    reg.r2,
                    reg.adj_r2
                );
            }
        }
        s
    }
}

/// Reads the tables, runs every analysis and writes `report.txt` and
/// `report.csv` into `out`.
pub fn cmd_analyze(
    features: &Path,
    ratings: Option<&Path>,
    out: &Path,
) -> Result<Report, PipelineError> {
    let rows = read_features(&features.display().to_string(), &read(features)?)?;
    let rating_rows = match ratings {
        Some(p) => Some(read_ratings(&p.display().to_string(), &read(p)?)?),
        None => None,
    };
    let report = Report {
        features: analyze_features(&rows)?,
        ratings: rating_rows
            .map(|r| analyze_ratings(&r, &rows))
            .transpose()?,
    };
    write(&out.join("report.txt"), &report.to_text())?;
    write(&out.join("report.csv"), &report.to_csv())?;
    Ok(report)
}

/// simulate, cohort and analyze into one output directory.
pub fn cmd_report(cfg: &RunConfig) -> Result<Report, PipelineError> {
    cmd_simulate(cfg)?;
    cmd_cohort(cfg)?;
    cmd_analyze(
        &cfg.out.join("features.csv"),
        Some(&cfg.out.join("ratings.csv")),
        &cfg.out,
    )
}
