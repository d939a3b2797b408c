//! Deterministic 2D world: waypoint network, scripted agents, traffic lights
//! and the timeline of hazard events.

mod format;
mod route;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::avcontrol::{self, ControlCommand, EgoState, VehicleParams};
use crate::config::Settings;
use crate::geom::Vec2;

pub use format::{load_scenario, load_scenario_file, bundled_scenario, BUNDLED_SCENARIO_TOML};
pub use route::{RoutePath, RouteProjection};

pub type ActorId = u32;
pub type NodeId = u32;

/// Id under which the ego vehicle appears in logs.
pub const EGO_ID: ActorId = 0;

/// Speed bound used to validate scripted actors.
pub const MAX_ACTOR_SPEED: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("cannot read scenario {path}: {message}")]
    Io { path: String, message: String },
}

impl ScenarioError {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// The seven scripted test events, in the bundled timeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventId {
    Dog,
    Ball,
    Scooter,
    Car1,
    Car2,
    Man1,
    Man2,
}

impl EventId {
    pub const ALL: [EventId; 7] = [
        EventId::Dog,
        EventId::Ball,
        EventId::Scooter,
        EventId::Car1,
        EventId::Car2,
        EventId::Man1,
        EventId::Man2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventId::Dog => "Dog",
            EventId::Ball => "Ball",
            EventId::Scooter => "Scooter",
            EventId::Car1 => "Car1",
            EventId::Car2 => "Car2",
            EventId::Man1 => "Man1",
            EventId::Man2 => "Man2",
        }
    }

    /// Scooter and Man1 are the ordinary situations; the rest are risky.
    pub fn is_risky(self) -> bool {
        !matches!(self, EventId::Scooter | EventId::Man1)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventId::ALL
            .iter()
            .copied()
            .find(|e| e.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown event id `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActorKind {
    EgoCar,
    TrafficCar,
    Scooter,
    Pedestrian,
    Dog,
    Ball,
    StaticObject,
    TrafficLight,
    RoadSign,
}

impl ActorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActorKind::EgoCar => "EgoCar",
            ActorKind::TrafficCar => "TrafficCar",
            ActorKind::Scooter => "Scooter",
            ActorKind::Pedestrian => "Pedestrian",
            ActorKind::Dog => "Dog",
            ActorKind::Ball => "Ball",
            ActorKind::StaticObject => "StaticObject",
            ActorKind::TrafficLight => "TrafficLight",
            ActorKind::RoadSign => "RoadSign",
        }
    }

    pub fn is_signal(self) -> bool {
        matches!(self, ActorKind::TrafficLight | ActorKind::RoadSign)
    }

    pub fn is_vehicle(self) -> bool {
        matches!(
            self,
            ActorKind::TrafficCar | ActorKind::Scooter | ActorKind::EgoCar
        )
    }
}

impl fmt::Display for ActorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Extent {
    pub const fn new(length: f64, width: f64, height: f64) -> Self {
        Self {
            length,
            width,
            height,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.length, self.width, self.height]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub position: Vec2,
    /// m/s
    pub speed_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub lane: u32,
    pub section: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaypointNetwork {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Node sequence driven by the ego vehicle.
    pub route: Vec<NodeId>,
    /// When set the route wraps from its last node back to the first.
    pub closed_route: bool,
}

impl WaypointNetwork {
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn edge(&self, from: NodeId, to: NodeId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(ScenarioError::validation(
                    "network.nodes",
                    format!("duplicate node id {}", n.id),
                ));
            }
            if !(n.speed_limit.is_finite() && n.speed_limit > 0.0) {
                return Err(ScenarioError::validation(
                    "network.nodes.speed_limit",
                    format!("node {} needs a positive speed limit", n.id),
                ));
            }
            if !n.position.is_finite() {
                return Err(ScenarioError::validation(
                    "network.nodes",
                    format!("node {} position", n.id),
                ));
            }
        }
        for e in &self.edges {
            if !ids.contains(&e.from) || !ids.contains(&e.to) {
                return Err(ScenarioError::validation(
                    "network.edges",
                    format!("edge {} -> {} references a missing node", e.from, e.to),
                ));
            }
        }
        Ok(())
    }
}

/// Scripted kinematics of a non-ego actor. Scripts ignore physics feedback.
#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    /// Never moves.
    Fixed,
    /// Keeps its current velocity.
    Linear,
    /// Drives along the ego route at constant speed with a lateral offset.
    Route {
        speed: f64,
        offset: f64,
        reverse: bool,
        s: f64,
    },
    /// Piecewise-constant velocity; each phase ends at an absolute time.
    Phases { phases: Vec<(f64, Vec2)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorState {
    pub id: ActorId,
    pub kind: ActorKind,
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
    pub extent: Extent,
    pub dynamic: bool,
    pub motion: Motion,
    /// Road section regulated by a sign or light.
    pub section: Option<u32>,
}

impl ActorState {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn footprint(&self) -> crate::geom::Obb {
        crate::geom::Obb::new(
            self.position,
            self.heading,
            self.extent.length,
            self.extent.width,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LightPhase {
    Green,
    Yellow,
    Red,
}

impl LightPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            LightPhase::Green => "green",
            LightPhase::Yellow => "yellow",
            LightPhase::Red => "red",
        }
    }
}

/// Fixed-cycle traffic-light program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightTiming {
    pub green_s: f64,
    pub yellow_s: f64,
    pub red_s: f64,
    pub offset_s: f64,
}

impl LightTiming {
    pub fn phase_at(&self, t: f64) -> LightPhase {
        let cycle = self.green_s + self.yellow_s + self.red_s;
        let u = (t + self.offset_s).rem_euclid(cycle);
        if u < self.green_s {
            LightPhase::Green
        } else if u < self.green_s + self.yellow_s {
            LightPhase::Yellow
        } else {
            LightPhase::Red
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightState {
    pub id: ActorId,
    pub phase: LightPhase,
}

/// One velocity phase of an event actor, expressed in the ego frame at trigger time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventPhase {
    pub duration_s: f64,
    /// m/s along the ego heading.
    pub forward: f64,
    /// m/s to the left of the ego heading.
    pub lateral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventSpec {
    pub id: EventId,
    pub trigger_time_s: f64,
    /// Seconds the ego stays halted once the event actor is gone.
    pub post_event_stop_s: f64,
    pub actor_id: ActorId,
    pub kind: ActorKind,
    pub extent: Extent,
    /// Spawn point relative to the ego pose at trigger time.
    pub spawn_ahead_m: f64,
    pub spawn_lateral_m: f64,
    pub phases: Vec<EventPhase>,
}

impl EventSpec {
    pub fn lifetime_s(&self) -> f64 {
        self.phases.iter().map(|p| p.duration_s).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoSpec {
    pub start_s: f64,
    pub start_speed: f64,
    pub vehicle: VehicleParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDef {
    pub name: String,
    pub duration_s: f64,
    pub tick_dt: f64,
    pub network: WaypointNetwork,
    pub route: RoutePath,
    pub ego: EgoSpec,
    pub actors: Vec<ActorState>,
    pub lights: Vec<(ActorId, LightTiming)>,
    pub events: Vec<EventSpec>,
    pub rng_seed: u64,
    pub settings: Settings,
}

impl ScenarioDef {
    pub fn tick_count(&self) -> u64 {
        (self.duration_s / self.tick_dt).round() as u64
    }

    pub fn event(&self, id: EventId) -> Option<&EventSpec> {
        self.events.iter().find(|e| e.id == id)
    }

    /// Fails unless each of the seven test events is scripted exactly once.
    pub fn require_all_events(&self) -> Result<(), ScenarioError> {
        for id in EventId::ALL {
            let n = self.events.iter().filter(|e| e.id == id).count();
            if n != 1 {
                return Err(ScenarioError::validation(
                    "events",
                    format!("event {id} must appear exactly once (found {n})"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiredEvent {
    pub id: EventId,
    pub t: f64,
}

/// Complete simulation state at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    pub t: f64,
    pub ego: EgoState,
    /// Sorted by id.
    pub actors: Vec<ActorState>,
    pub lights: Vec<LightState>,
    pub active_events: BTreeSet<EventId>,
    pub fired_events: Vec<FiredEvent>,
}

impl WorldState {
    pub fn initial(scenario: &ScenarioDef) -> Self {
        let route = &scenario.route;
        let s = scenario.ego.start_s;
        let ego = EgoState::at_rest(
            route.point_at(s),
            route.heading_at(s),
            scenario.ego.start_speed,
            s,
        );
        let mut actors = scenario.actors.clone();
        actors.sort_by_key(|a| a.id);
        let lights = scenario
            .lights
            .iter()
            .map(|(id, timing)| LightState {
                id: *id,
                phase: timing.phase_at(0.0),
            })
            .collect();
        WorldState {
            tick: 0,
            t: 0.0,
            ego,
            actors,
            lights,
            active_events: BTreeSet::new(),
            fired_events: Vec::new(),
        }
    }

    pub fn actor(&self, id: ActorId) -> Option<&ActorState> {
        self.actors
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|i| &self.actors[i])
    }

    pub fn light_phase(&self, id: ActorId) -> Option<LightPhase> {
        self.lights.iter().find(|l| l.id == id).map(|l| l.phase)
    }

    /// True once the simulated time has reached the scenario duration.
    pub fn finished(&self, scenario: &ScenarioDef) -> bool {
        self.tick >= scenario.tick_count()
    }
}

/// Advances the world by one tick. The ego follows the kinematic bicycle
/// plant; every other actor follows its script.
pub fn step_world(
    world: &WorldState,
    scenario: &ScenarioDef,
    control: ControlCommand,
) -> WorldState {
    let dt = scenario.tick_dt;
    let tick = world.tick + 1;
    let t = tick as f64 * dt;
    let route = &scenario.route;

    let ego = avcontrol::advance_ego(&world.ego, control, &scenario.ego.vehicle, route, dt);

    let mut actors: Vec<ActorState> = world
        .actors
        .iter()
        .filter(|a| !expired(a, scenario, t))
        .map(|a| advance_actor(a, route, world.t, t))
        .collect();

    let mut active_events = world.active_events.clone();
    let mut fired_events = world.fired_events.clone();
    for ev in &scenario.events {
        let already = fired_events.iter().any(|f| f.id == ev.id);
        if !already && ev.trigger_time_s <= t + 1e-9 {
            fired_events.push(FiredEvent { id: ev.id, t });
            active_events.insert(ev.id);
            actors.push(spawn_event_actor(ev, &ego, t));
        }
    }
    active_events.retain(|id| {
        scenario
            .event(*id)
            .is_some_and(|ev| actors.iter().any(|a| a.id == ev.actor_id))
    });
    actors.sort_by_key(|a| a.id);

    let lights = scenario
        .lights
        .iter()
        .map(|(id, timing)| LightState {
            id: *id,
            phase: timing.phase_at(t),
        })
        .collect();

    WorldState {
        tick,
        t,
        ego,
        actors,
        lights,
        active_events,
        fired_events,
    }
}

fn expired(actor: &ActorState, scenario: &ScenarioDef, t: f64) -> bool {
    match &actor.motion {
        Motion::Phases { phases } => {
            let end = phases.last().map_or(0.0, |p| p.0);
            scenario.events.iter().any(|e| e.actor_id == actor.id) && t > end + 1e-9
        }
        _ => false,
    }
}

fn advance_actor(actor: &ActorState, route: &RoutePath, t0: f64, t1: f64) -> ActorState {
    let mut next = actor.clone();
    let dt = t1 - t0;
    match &actor.motion {
        Motion::Fixed => {}
        Motion::Linear => {
            next.position = actor.position + actor.velocity * dt;
        }
        Motion::Route {
            speed,
            offset,
            reverse,
            s,
        } => {
            let ds = if *reverse { -speed * dt } else { speed * dt };
            let s1 = route.wrap_s(s + ds);
            let heading = route.heading_at(s1) + if *reverse { std::f64::consts::PI } else { 0.0 };
            next.position = route.offset_point(s1, *offset);
            next.heading = crate::geom::wrap_angle(heading);
            next.velocity = Vec2::from_angle(next.heading) * *speed;
            next.motion = Motion::Route {
                speed: *speed,
                offset: *offset,
                reverse: *reverse,
                s: s1,
            };
        }
        Motion::Phases { phases } => {
            // Integrate through phase boundaries inside (t0, t1].
            let mut pos = actor.position;
            let mut tc = t0;
            let mut vel = actor.velocity;
            for &(end, v) in phases {
                if end <= tc {
                    continue;
                }
                let seg_end = end.min(t1);
                pos = pos + v * (seg_end - tc);
                vel = v;
                tc = seg_end;
                if tc >= t1 {
                    break;
                }
            }
            next.position = pos;
            next.velocity = vel;
            if vel.norm() > 0.0 {
                next.heading = vel.angle();
            }
        }
    }
    next
}

fn spawn_event_actor(ev: &EventSpec, ego: &EgoState, t: f64) -> ActorState {
    let fwd = Vec2::from_angle(ego.heading);
    let left = fwd.perp();
    let position = ego.position + fwd * ev.spawn_ahead_m + left * ev.spawn_lateral_m;
    let mut end = t;
    let phases: Vec<(f64, Vec2)> = ev
        .phases
        .iter()
        .map(|p| {
            end += p.duration_s;
            (end, fwd * p.forward + left * p.lateral)
        })
        .collect();
    let velocity = phases.first().map_or(Vec2::ZERO, |p| p.1);
    let heading = if velocity.norm() > 0.0 {
        velocity.angle()
    } else {
        ego.heading
    };
    ActorState {
        id: ev.actor_id,
        kind: ev.kind,
        position,
        velocity,
        heading,
        extent: ev.extent,
        dynamic: true,
        motion: Motion::Phases { phases },
        section: None,
    }
}

/// Actors whose centre lies within `diameter / 2` of `center`. The ego is
/// never included. A non-positive diameter selects nothing.
pub fn query_objects_within(world: &WorldState, center: Vec2, diameter: f64) -> Vec<&ActorState> {
    if !(diameter > 0.0) {
        return Vec::new();
    }
    let r = diameter / 2.0;
    world
        .actors
        .iter()
        .filter(|a| a.kind != ActorKind::EgoCar && a.position.distance(center) <= r)
        .collect()
}

/// Appends state-log rows (`t,actor_id,kind,x,y,vx,vy,heading`) for one tick.
pub fn write_state_rows(world: &WorldState, out: &mut String) {
    use std::fmt::Write;
    let e = &world.ego;
    let v = Vec2::from_angle(e.heading) * e.speed;
    let _ = writeln!(
        out,
        "{:.4},{},{},{:.4},{:.4},{:.4},{:.4},{:.5}",
        world.t,
        EGO_ID,
        ActorKind::EgoCar,
        e.position.x,
        e.position.y,
        v.x,
        v.y,
        e.heading
    );
    for a in &world.actors {
        let _ = writeln!(
            out,
            "{:.4},{},{},{:.4},{:.4},{:.4},{:.4},{:.5}",
            world.t,
            a.id,
            a.kind,
            a.position.x,
            a.position.y,
            a.velocity.x,
            a.velocity.y,
            a.heading
        );
    }
}

pub const STATE_LOG_HEADER: &str = "t,actor_id,kind,x,y,vx,vy,heading";

#[cfg(test)]
mod tests;
