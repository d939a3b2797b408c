//! HUD annotations: one candidate cue per detected object, filtered by the
//! omni-comprehensive (OMN) or selective (SEL) policy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Obb, Vec2};
use crate::hazard::{
    self, Audio, HazardAssessment, HazardConfig, PredictedObstacle, WarningState, WarningTracker,
};
use crate::scenario::{query_objects_within, ActorId, ActorKind, RoutePath, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HudError {
    #[error("cue log is empty")]
    EmptyLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HudConfig {
    pub detection_diameter_m: f64,
    /// Length of the ego navigation and road centre lines ahead of the car.
    pub nav_line_length_m: f64,
    pub nav_line_step_m: f64,
}

impl Default for HudConfig {
    fn default() -> Self {
        Self {
            detection_diameter_m: 150.0,
            nav_line_length_m: 60.0,
            nav_line_step_m: 5.0,
        }
    }
}

impl HudConfig {
    pub fn validate(&self) -> Result<(), String> {
        let ok = [
            self.detection_diameter_m,
            self.nav_line_length_m,
            self.nav_line_step_m,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err("HUD distances must be positive".into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Policy {
    Omn,
    Sel,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Omn => "OMN",
            Policy::Sel => "SEL",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "OMN" => Ok(Policy::Omn),
            "SEL" => Ok(Policy::Sel),
            _ => Err(format!("unknown policy `{s}` (expected OMN or SEL)")),
        }
    }
}

/// Box drawn around an object: footprint plus height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueBox {
    pub footprint: Obb,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cue {
    pub object_id: ActorId,
    pub kind: ActorKind,
    pub bbox: CueBox,
    pub label: String,
    pub icon_id: &'static str,
    /// The label billboard is rotated to face the driver.
    pub faces_ego: bool,
    pub distance_m: f64,
    pub speed_kmh: f64,
    pub dynamic: bool,
    /// Road section regulated by a sign or light.
    pub section: Option<u32>,
    pub severity: f64,
    pub warning_active: bool,
    pub warning: WarningState,
    pub nav_line: Option<Vec<Vec2>>,
}

/// All candidate cues of one tick plus the always-visible lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    pub t: f64,
    pub cues: Vec<Cue>,
    pub ego_nav_line: Vec<Vec2>,
    pub road_center_line: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CueSet {
    pub t: f64,
    pub policy: Policy,
    pub cues: Vec<Cue>,
    pub ego_nav_line: Vec<Vec2>,
    pub road_center_line: Vec<Vec2>,
}

impl CueSet {
    pub fn object_ids(&self) -> BTreeSet<ActorId> {
        self.cues.iter().map(|c| c.object_id).collect()
    }
}

/// Display name used in labels.
pub fn label_name(kind: ActorKind) -> &'static str {
    match kind {
        ActorKind::EgoCar | ActorKind::TrafficCar => "Car",
        ActorKind::Scooter => "Scooter",
        ActorKind::Pedestrian => "Pedestrian",
        ActorKind::Dog => "Dog",
        ActorKind::Ball => "Ball",
        ActorKind::StaticObject => "Object",
        ActorKind::TrafficLight => "Light",
        ActorKind::RoadSign => "Sign",
    }
}

pub fn icon_id(kind: ActorKind) -> &'static str {
    match kind {
        ActorKind::EgoCar | ActorKind::TrafficCar => "icon_car",
        ActorKind::Scooter => "icon_scooter",
        ActorKind::Pedestrian => "icon_pedestrian",
        ActorKind::Dog => "icon_animal",
        ActorKind::Ball => "icon_ball",
        ActorKind::StaticObject => "icon_obstacle",
        ActorKind::TrafficLight => "icon_light",
        ActorKind::RoadSign => "icon_sign",
    }
}

/// `"Car 40m 29km/h"`: distance in whole metres, speed in whole km/h.
pub fn format_label(kind: ActorKind, distance_m: f64, speed_ms: Option<f64>) -> String {
    match speed_ms {
        Some(v) => format!(
            "{} {}m {}km/h",
            label_name(kind),
            distance_m.round(),
            (v * 3.6).round()
        ),
        None => format!("{} {}m", label_name(kind), distance_m.round()),
    }
}

/// Per-tick inputs of `build_candidates` besides the world and assessments.
pub struct CandidateContext<'a> {
    pub route: &'a RoutePath,
    /// Predicted paths, used for the navigation lines of cars.
    pub obstacles: &'a [PredictedObstacle],
    pub tracker: &'a WarningTracker,
    pub hazard: &'a HazardConfig,
    pub hud: &'a HudConfig,
}

pub fn build_candidates(
    world: &WorldState,
    assessments: &[HazardAssessment],
    ctx: &CandidateContext<'_>,
) -> Candidates {
    let ego = &world.ego;
    let by_id: BTreeMap<ActorId, &HazardAssessment> =
        assessments.iter().map(|a| (a.object_id, a)).collect();
    let paths: BTreeMap<ActorId, &PredictedObstacle> =
        ctx.obstacles.iter().map(|o| (o.id, o)).collect();
    let d_warn = hazard::warning_distance(ego.speed, &ctx.hazard.reaction_model());
    let cues = query_objects_within(world, ego.position, ctx.hud.detection_diameter_m)
        .into_iter()
        .map(|a| {
            let clear;
            let assessment = match by_id.get(&a.id) {
                Some(x) => *x,
                None => {
                    clear = HazardAssessment::clear(a.id, d_warn);
                    &clear
                }
            };
            let sign_event = ctx
                .tracker
                .sign_event(a.id, world.t, ctx.hazard.sign_flash_s);
            let warning = hazard::warning_state(assessment, a.kind, sign_event, ctx.hazard);
            let distance_m = a.position.distance(ego.position);
            let speed = a.dynamic.then(|| a.speed());
            let nav_line = (a.kind == ActorKind::TrafficCar && a.dynamic)
                .then(|| paths.get(&a.id).map(|p| p.path.polyline()))
                .flatten();
            Cue {
                object_id: a.id,
                kind: a.kind,
                bbox: CueBox {
                    footprint: a.footprint(),
                    height: a.extent.height,
                },
                label: format_label(a.kind, distance_m, speed),
                icon_id: icon_id(a.kind),
                faces_ego: true,
                distance_m,
                speed_kmh: speed.unwrap_or(0.0) * 3.6,
                dynamic: a.dynamic,
                section: a.section,
                severity: assessment.severity,
                warning_active: assessment.warning_active,
                warning,
                nav_line,
            }
        })
        .collect();
    let s = ego.progress_s;
    let len = ctx.hud.nav_line_length_m;
    let step = ctx.hud.nav_line_step_m;
    Candidates {
        t: world.t,
        cues,
        ego_nav_line: ctx.route.polyline(s, s + len, ego.lateral_error, step),
        road_center_line: ctx.route.polyline(s, s + len, 0.0, step),
    }
}

/// Facts about the driving situation the selective policy relies on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionContext {
    pub current_section: u32,
    /// Vehicles ahead of the ego on its current or next route edge.
    pub preceding: BTreeSet<ActorId>,
    /// Vehicles the planner is checking right of way against.
    pub assessed: BTreeSet<ActorId>,
}

pub fn select_cues(candidates: &Candidates, policy: Policy, ctx: &SelectionContext) -> CueSet {
    let cues = candidates
        .cues
        .iter()
        .filter_map(|c| {
            if c.kind.is_signal() {
                let same = c.section == Some(ctx.current_section);
                return same.then(|| Cue {
                    nav_line: None,
                    ..c.clone()
                });
            }
            match policy {
                Policy::Omn => (c.dynamic || c.warning_active).then(|| c.clone()),
                Policy::Sel => {
                    let relevant_vehicle = c.dynamic
                        && c.kind.is_vehicle()
                        && (ctx.preceding.contains(&c.object_id)
                            || ctx.assessed.contains(&c.object_id));
                    let keep = relevant_vehicle || c.warning_active;
                    keep.then(|| Cue {
                        nav_line: if ctx.assessed.contains(&c.object_id) {
                            c.nav_line.clone()
                        } else {
                            None
                        },
                        ..c.clone()
                    })
                }
            }
        })
        .collect();
    CueSet {
        t: candidates.t,
        policy,
        cues,
        ego_nav_line: candidates.ego_nav_line.clone(),
        road_center_line: candidates.road_center_line.clone(),
    }
}

pub const CUE_LOG_HEADER: &str =
    "t,policy,object_id,kind,distance_m,speed_kmh,severity,flash_hz,audio,has_nav_line";

pub fn write_cue_rows(set: &CueSet, out: &mut String) {
    use std::fmt::Write;
    for c in &set.cues {
        let _ = writeln!(
            out,
            "{:.4},{},{},{},{:.0},{:.0},{:.4},{},{},{}",
            set.t,
            set.policy,
            c.object_id,
            c.kind,
            c.distance_m,
            c.speed_kmh,
            c.severity,
            c.warning.flash_hz,
            c.warning.audio.as_str(),
            c.nav_line.is_some()
        );
    }
}

/// Number of displayed cues under each policy at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueCount {
    pub t: f64,
    pub omn: usize,
    pub sel: usize,
}

pub const CUE_COUNT_HEADER: &str = "t,omn,sel";

#[derive(Debug, Clone, PartialEq)]
pub struct CueCountStats {
    pub ticks: usize,
    pub mean_omn: f64,
    pub mean_sel: f64,
    pub max_omn: usize,
    pub max_sel: usize,
    /// Ticks at which SEL shows more cues than OMN (zero under the subset law).
    pub sel_exceeds_omn: usize,
}

pub fn cue_count_stats(counts: &[CueCount]) -> Result<CueCountStats, HudError> {
    if counts.is_empty() {
        return Err(HudError::EmptyLog);
    }
    let n = counts.len() as f64;
    Ok(CueCountStats {
        ticks: counts.len(),
        mean_omn: counts.iter().map(|c| c.omn as f64).sum::<f64>() / n,
        mean_sel: counts.iter().map(|c| c.sel as f64).sum::<f64>() / n,
        max_omn: counts.iter().map(|c| c.omn).max().unwrap_or(0),
        max_sel: counts.iter().map(|c| c.sel).max().unwrap_or(0),
        sel_exceeds_omn: counts.iter().filter(|c| c.sel > c.omn).count(),
    })
}

/// True when an audio cue of this kind is playing in the set.
pub fn plays(set: &CueSet, audio: Audio) -> bool {
    set.cues.iter().any(|c| c.warning.audio == audio)
}
