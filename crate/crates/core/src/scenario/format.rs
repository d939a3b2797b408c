//! TOML scenario files.
//!
//! ```toml
//! name = "demo"
//! duration_s = 720.0        # default 720
//! tick_hz = 90.0            # default 90 (tick_dt = 1 / tick_hz)
//! rng_seed = 7
//!
//! [network]
//! closed_route = true
//! route = [0, 1, 2]
//! nodes = [{ id = 0, x = 0.0, y = 0.0, speed_limit = 13.9 }, ...]
//! edges = [{ from = 0, to = 1, lane = 0, section = 0 }, ...]
//!
//! [ego]
//! start_s = 0.0
//! start_speed = 0.0
//! [ego.vehicle]             # optional plant overrides
//! wheelbase = 2.8
//!
//! [[actors]]
//! id = 10
//! kind = "TrafficCar"       # see ActorKind
//! at = { s = 80.0, offset = 0.0 }   # route-relative, or `xy = [x, y]`
//! heading = 0.0             # optional, defaults to the route tangent
//! extent = [4.5, 1.8, 1.5]  # length, width, height (m)
//! motion = { type = "route", speed = 12.5, reverse = false }
//! # other motions: { type = "fixed" } (default), { type = "linear", velocity = [vx, vy] }
//! section = 0               # signs and lights: regulated road section
//! light = { green_s = 45.0, yellow_s = 4.0, red_s = 20.0, offset_s = 0.0 }
//!
//! [[events]]
//! id = "Dog"
//! trigger_time_s = 100.0
//! post_event_stop_s = 4.0
//! actor_id = 901
//! kind = "Dog"
//! extent = [0.9, 0.4, 0.6]
//! spawn = { ahead = 30.0, lateral = -6.0 }        # ego frame at trigger time
//! phases = [{ duration_s = 4.0, forward = 0.0, lateral = 3.0 }]
//! ```
//!
//! Optional `[controller]`, `[hazard]`, `[hud]` and `[physio]` sections carry
//! module parameters (see [`crate::config::Settings`]).

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use crate::avcontrol::VehicleParams;
use crate::config::Settings;
use crate::geom::Vec2;

use super::{
    ActorId, ActorKind, ActorState, Edge, EgoSpec, EventId, EventPhase, EventSpec, Extent,
    LightTiming, Motion, Node, NodeId, RoutePath, ScenarioDef, ScenarioError, WaypointNetwork,
    EGO_ID, MAX_ACTOR_SPEED,
};

/// The bundled twelve-minute urban scenario.
pub const BUNDLED_SCENARIO_TOML: &str = include_str!("../../scenarios/bundled.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    duration_s: Option<f64>,
    tick_hz: Option<f64>,
    rng_seed: Option<u64>,
    network: NetworkFile,
    ego: Option<EgoFile>,
    #[serde(default)]
    actors: Vec<ActorFile>,
    #[serde(default)]
    events: Vec<EventFile>,
    controller: Option<toml::Table>,
    hazard: Option<toml::Table>,
    hud: Option<toml::Table>,
    physio: Option<toml::Table>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    #[serde(default)]
    closed_route: bool,
    route: Vec<NodeId>,
    nodes: Vec<NodeFile>,
    edges: Vec<EdgeFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: NodeId,
    x: f64,
    y: f64,
    speed_limit: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    from: NodeId,
    to: NodeId,
    #[serde(default)]
    lane: u32,
    #[serde(default)]
    section: u32,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EgoFile {
    #[serde(default)]
    start_s: f64,
    #[serde(default)]
    start_speed: f64,
    vehicle: Option<VehicleParams>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteAnchor {
    s: f64,
    #[serde(default)]
    offset: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum MotionFile {
    Fixed,
    Linear {
        velocity: [f64; 2],
    },
    Route {
        speed: f64,
        offset: Option<f64>,
        #[serde(default)]
        reverse: bool,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightFile {
    green_s: f64,
    yellow_s: f64,
    red_s: f64,
    #[serde(default)]
    offset_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActorFile {
    id: ActorId,
    kind: ActorKind,
    at: Option<RouteAnchor>,
    xy: Option<[f64; 2]>,
    heading: Option<f64>,
    extent: [f64; 3],
    motion: Option<MotionFile>,
    section: Option<u32>,
    light: Option<LightFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpawnFile {
    ahead: f64,
    #[serde(default)]
    lateral: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseFile {
    duration_s: f64,
    #[serde(default)]
    forward: f64,
    #[serde(default)]
    lateral: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventFile {
    id: String,
    trigger_time_s: f64,
    #[serde(default)]
    post_event_stop_s: f64,
    actor_id: ActorId,
    kind: ActorKind,
    extent: [f64; 3],
    spawn: SpawnFile,
    phases: Vec<PhaseFile>,
}

fn parse_error(text: &str, err: toml::de::Error) -> ScenarioError {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    ScenarioError::Parse {
        line,
        column,
        message: err.message().trim().to_string(),
    }
}

/// Parses and validates scenario text.
pub fn load_scenario(text: &str) -> Result<ScenarioDef, ScenarioError> {
    let mut file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    let mut sections = toml::Table::new();
    for (key, table) in [
        ("controller", file.controller.take()),
        ("hazard", file.hazard.take()),
        ("hud", file.hud.take()),
        ("physio", file.physio.take()),
    ] {
        if let Some(t) = table {
            sections.insert(key.to_string(), toml::Value::Table(t));
        }
    }
    let settings =
        Settings::from_table(&sections).map_err(|m| ScenarioError::validation("settings", m))?;
    build(file, settings)
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioDef, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_scenario(&text)
}

/// Loads the bundled scenario and checks that all seven events are scripted.
pub fn bundled_scenario() -> Result<ScenarioDef, ScenarioError> {
    let def = load_scenario(BUNDLED_SCENARIO_TOML)?;
    def.require_all_events()?;
    Ok(def)
}

fn extent_from(field: &str, e: [f64; 3]) -> Result<Extent, ScenarioError> {
    let ext = Extent::new(e[0], e[1], e[2]);
    if !ext.is_valid() {
        return Err(ScenarioError::validation(
            field,
            "extent components must be positive",
        ));
    }
    Ok(ext)
}

fn build(file: ScenarioFile, settings: Settings) -> Result<ScenarioDef, ScenarioError> {
    let duration_s = file.duration_s.unwrap_or(720.0);
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(ScenarioError::validation("duration_s", "must be positive"));
    }
    let tick_hz = file.tick_hz.unwrap_or(90.0);
    if !(tick_hz.is_finite() && tick_hz > 0.0) {
        return Err(ScenarioError::validation("tick_hz", "must be positive"));
    }

    let network = WaypointNetwork {
        nodes: file
            .network
            .nodes
            .iter()
            .map(|n| Node {
                id: n.id,
                position: Vec2::new(n.x, n.y),
                speed_limit: n.speed_limit,
            })
            .collect(),
        edges: file
            .network
            .edges
            .iter()
            .map(|e| Edge {
                from: e.from,
                to: e.to,
                lane: e.lane,
                section: e.section,
            })
            .collect(),
        route: file.network.route.clone(),
        closed_route: file.network.closed_route,
    };
    network.validate()?;
    let route = RoutePath::from_network(&network)?;

    let ego_file = file.ego.unwrap_or_default();
    let ego = EgoSpec {
        start_s: ego_file.start_s,
        start_speed: ego_file.start_speed.max(0.0),
        vehicle: ego_file.vehicle.unwrap_or_default(),
    };
    ego.vehicle
        .validate()
        .map_err(|m| ScenarioError::validation("ego.vehicle", m))?;

    let mut ids = BTreeSet::from([EGO_ID]);
    let mut actors = Vec::new();
    let mut lights = Vec::new();
    for (i, a) in file.actors.iter().enumerate() {
        let field = format!("actors[{i}]");
        if !ids.insert(a.id) {
            return Err(ScenarioError::validation(
                format!("{field}.id"),
                format!("duplicate actor id {}", a.id),
            ));
        }
        if a.kind == ActorKind::EgoCar {
            return Err(ScenarioError::validation(
                format!("{field}.kind"),
                "the ego car is implicit",
            ));
        }
        let extent = extent_from(&format!("{field}.extent"), a.extent)?;
        let (position, anchor_s, anchor_offset) = match (&a.at, a.xy) {
            (Some(at), None) => (route.offset_point(at.s, at.offset), Some(at.s), at.offset),
            (None, Some(xy)) => (Vec2::new(xy[0], xy[1]), None, 0.0),
            _ => {
                return Err(ScenarioError::validation(
                    field,
                    "exactly one of `at` or `xy` is required",
                ));
            }
        };
        let default_heading = anchor_s.map_or(0.0, |s| route.heading_at(s));
        let mut heading = a.heading.unwrap_or(default_heading);
        let (motion, velocity) = match a.motion.as_ref().unwrap_or(&MotionFile::Fixed) {
            MotionFile::Fixed => (Motion::Fixed, Vec2::ZERO),
            MotionFile::Linear { velocity } => {
                let v = Vec2::new(velocity[0], velocity[1]);
                if v.norm() > 0.0 && a.heading.is_none() {
                    heading = v.angle();
                }
                (Motion::Linear, v)
            }
            MotionFile::Route {
                speed,
                offset,
                reverse,
            } => {
                let s = anchor_s.ok_or_else(|| {
                    ScenarioError::validation(
                        format!("{field}.at"),
                        "route motion needs a route anchor",
                    )
                })?;
                if *speed < 0.0 {
                    return Err(ScenarioError::validation(
                        format!("{field}.motion.speed"),
                        "negative speed",
                    ));
                }
                let offset = offset.unwrap_or(anchor_offset);
                if *reverse && a.heading.is_none() {
                    heading = crate::geom::wrap_angle(heading + std::f64::consts::PI);
                }
                let v = Vec2::from_angle(heading) * *speed;
                (
                    Motion::Route {
                        speed: *speed,
                        offset,
                        reverse: *reverse,
                        s: route.wrap_s(s),
                    },
                    v,
                )
            }
        };
        if !(velocity.norm() <= MAX_ACTOR_SPEED) {
            return Err(ScenarioError::validation(
                format!("{field}.motion"),
                "speed above 60 m/s",
            ));
        }
        match (a.kind, &a.light) {
            (ActorKind::TrafficLight, Some(l)) => {
                let timing = LightTiming {
                    green_s: l.green_s,
                    yellow_s: l.yellow_s,
                    red_s: l.red_s,
                    offset_s: l.offset_s,
                };
                if [timing.green_s, timing.yellow_s, timing.red_s]
                    .iter()
                    .any(|v| !(*v >= 0.0))
                    || timing.green_s + timing.yellow_s + timing.red_s <= 0.0
                {
                    return Err(ScenarioError::validation(
                        format!("{field}.light"),
                        "invalid light program",
                    ));
                }
                lights.push((a.id, timing));
            }
            (ActorKind::TrafficLight, None) => {
                return Err(ScenarioError::validation(
                    format!("{field}.light"),
                    "traffic lights need a program",
                ));
            }
            (_, Some(_)) => {
                return Err(ScenarioError::validation(
                    format!("{field}.light"),
                    "only traffic lights have a program",
                ));
            }
            _ => {}
        }
        if a.kind.is_signal() && a.section.is_none() {
            return Err(ScenarioError::validation(
                format!("{field}.section"),
                "signs and lights need a section",
            ));
        }
        actors.push(ActorState {
            id: a.id,
            kind: a.kind,
            position,
            velocity,
            heading,
            extent,
            dynamic: !matches!(motion, Motion::Fixed),
            motion,
            section: a.section,
        });
    }

    let mut events = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, e) in file.events.iter().enumerate() {
        let field = format!("events[{i}]");
        let id: EventId =
            e.id.parse()
                .map_err(|m: String| ScenarioError::validation(format!("{field}.id"), m))?;
        if !seen.insert(id) {
            return Err(ScenarioError::validation(
                format!("{field}.id"),
                format!("event {id} listed twice"),
            ));
        }
        if !(e.trigger_time_s >= 0.0 && e.trigger_time_s <= duration_s) {
            return Err(ScenarioError::validation(
                format!("{field}.trigger_time_s"),
                format!(
                    "trigger time {} outside [0, {duration_s}]",
                    e.trigger_time_s
                ),
            ));
        }
        if !(e.post_event_stop_s >= 0.0) {
            return Err(ScenarioError::validation(
                format!("{field}.post_event_stop_s"),
                "must be >= 0",
            ));
        }
        if !ids.insert(e.actor_id) {
            return Err(ScenarioError::validation(
                format!("{field}.actor_id"),
                format!("actor id {} already in use", e.actor_id),
            ));
        }
        if e.phases.is_empty() {
            return Err(ScenarioError::validation(
                format!("{field}.phases"),
                "at least one phase is required",
            ));
        }
        let mut phases = Vec::new();
        for p in &e.phases {
            if !(p.duration_s > 0.0) || p.forward.hypot(p.lateral) > MAX_ACTOR_SPEED {
                return Err(ScenarioError::validation(
                    format!("{field}.phases"),
                    "invalid phase",
                ));
            }
            phases.push(EventPhase {
                duration_s: p.duration_s,
                forward: p.forward,
                lateral: p.lateral,
            });
        }
        events.push(EventSpec {
            id,
            trigger_time_s: e.trigger_time_s,
            post_event_stop_s: e.post_event_stop_s,
            actor_id: e.actor_id,
            kind: e.kind,
            extent: extent_from(&format!("{field}.extent"), e.extent)?,
            spawn_ahead_m: e.spawn.ahead,
            spawn_lateral_m: e.spawn.lateral,
            phases,
        });
    }
    events.sort_by(|a, b| a.trigger_time_s.total_cmp(&b.trigger_time_s));

    Ok(ScenarioDef {
        name: file.name.unwrap_or_else(|| "scenario".to_string()),
        duration_s,
        tick_dt: 1.0 / tick_hz,
        network,
        route,
        ego,
        actors,
        lights,
        events,
        rng_seed: file.rng_seed.unwrap_or(0),
        settings,
    })
}
