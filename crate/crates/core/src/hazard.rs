//! Collision prediction, warning distance, hazard index and the warning
//! presentation (color, flashing, audio) derived from it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::avcontrol::{EgoState, VehicleParams};
use crate::geom::{Obb, Vec2};
use crate::scenario::{ActorId, ActorKind, ActorState, LightPhase, Motion, RoutePath, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HazardError {
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HazardConfig {
    pub reaction_time_s: f64,
    /// m/s^2
    pub assumed_decel: f64,
    /// Perceptual exponent of the green-to-red mapping.
    pub color_exponent: f64,
    pub flash_high_hz: f64,
    pub flash_low_hz: f64,
    /// How long a sign or light change keeps flashing.
    pub sign_flash_s: f64,
    pub horizon_s: f64,
    pub sample_dt: f64,
}

impl Default for HazardConfig {
    fn default() -> Self {
        Self {
            reaction_time_s: 1.5,
            assumed_decel: 6.0,
            color_exponent: 3.0,
            flash_high_hz: 4.0,
            flash_low_hz: 1.0,
            sign_flash_s: 3.0,
            horizon_s: 4.0,
            sample_dt: 0.1,
        }
    }
}

impl HazardConfig {
    pub fn reaction_model(&self) -> ReactionModel {
        ReactionModel {
            reaction_time_s: self.reaction_time_s,
            assumed_decel: self.assumed_decel,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.reaction_model().validate()?;
        let positive = [
            self.color_exponent,
            self.flash_high_hz,
            self.flash_low_hz,
            self.horizon_s,
            self.sample_dt,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(
                "hazard exponent, flash rates, horizon and sample step must be positive".into(),
            );
        }
        if self.flash_low_hz >= self.flash_high_hz {
            return Err("flash_low_hz must be below flash_high_hz".into());
        }
        if !(self.sign_flash_s >= 0.0) {
            return Err("sign_flash_s must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionModel {
    pub reaction_time_s: f64,
    pub assumed_decel: f64,
}

impl Default for ReactionModel {
    fn default() -> Self {
        HazardConfig::default().reaction_model()
    }
}

impl ReactionModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.reaction_time_s > 0.0 && self.assumed_decel > 0.0 {
            Ok(())
        } else {
            Err("reaction time and assumed deceleration must be positive".into())
        }
    }
}

/// Distance covered during the reaction time plus the braking distance.
pub fn warning_distance(speed: f64, model: &ReactionModel) -> f64 {
    let v = speed.max(0.0);
    v * model.reaction_time_s + v * v / (2.0 * model.assumed_decel)
}

/// `1 - clamp(distance / d_warn, 0, 1)`; zero when `d_warn` is zero.
pub fn hazard_severity(distance: f64, d_warn: f64) -> Result<f64, HazardError> {
    if distance.is_nan() || distance < 0.0 {
        return Err(HazardError::Domain(format!(
            "distance must be non-negative, got {distance}"
        )));
    }
    if d_warn.is_nan() || d_warn < 0.0 {
        return Err(HazardError::Domain(format!(
            "warning distance must be non-negative, got {d_warn}"
        )));
    }
    Ok(1.0 - hazard_ratio(distance, d_warn))
}

fn hazard_ratio(distance: f64, d_warn: f64) -> f64 {
    if d_warn == 0.0 {
        1.0
    } else {
        (distance / d_warn).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const GREEN: Rgb = Rgb(0, 255, 0);
    pub const RED: Rgb = Rgb(255, 0, 0);
}

/// Interpolation parameter `(e^(k s) - 1) / (e^k - 1)`.
pub fn color_parameter(severity: f64, k: f64) -> f64 {
    (k * severity).exp_m1() / k.exp_m1()
}

pub fn color_code(severity: f64, k: f64) -> Result<Rgb, HazardError> {
    if !(0.0..=1.0).contains(&severity) {
        return Err(HazardError::Domain(format!(
            "severity must lie in [0, 1], got {severity}"
        )));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(HazardError::Domain(format!(
            "color exponent must be positive, got {k}"
        )));
    }
    let u = color_parameter(severity, k);
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * u).round() as u8;
    Ok(Rgb(
        mix(Rgb::GREEN.0, Rgb::RED.0),
        mix(Rgb::GREEN.1, Rgb::RED.1),
        mix(Rgb::GREEN.2, Rgb::RED.2),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

/// Footprint poses sampled every `dt` seconds, starting now.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub poses: Vec<Pose>,
    pub length: f64,
    pub width: f64,
}

impl Trajectory {
    /// Constant-velocity path with a fixed heading.
    pub fn linear(
        start: Vec2,
        velocity: Vec2,
        heading: f64,
        length: f64,
        width: f64,
        horizon_s: f64,
        dt: f64,
    ) -> Self {
        let n = sample_count(horizon_s, dt);
        let poses = (0..n)
            .map(|i| Pose {
                position: start + velocity * (i as f64 * dt),
                heading,
            })
            .collect();
        Self {
            dt,
            poses,
            length,
            width,
        }
    }

    pub fn footprint(&self, i: usize) -> Obb {
        let p = self.poses[i];
        Obb::new(p.position, p.heading, self.length, self.width)
    }

    pub fn polyline(&self) -> Vec<Vec2> {
        self.poses.iter().map(|p| p.position).collect()
    }

    /// Path length travelled from the first sample up to sample `i` plus
    /// the fraction `u` of the following step.
    pub fn distance_to(&self, i: usize, u: f64) -> f64 {
        let mut d: f64 = self
            .poses
            .windows(2)
            .take(i)
            .map(|w| w[0].position.distance(w[1].position))
            .sum();
        if u > 0.0 && i + 1 < self.poses.len() {
            d += u * self.poses[i].position.distance(self.poses[i + 1].position);
        }
        d
    }
}

fn sample_count(horizon_s: f64, dt: f64) -> usize {
    (horizon_s / dt + 1e-9).floor() as usize + 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionPrediction {
    /// Midpoint between both footprint centres at first contact.
    pub point: Vec2,
    pub tti_s: f64,
    /// Sample interval in which contact begins.
    pub sample: usize,
    /// Fraction of that interval elapsed at contact.
    pub fraction: f64,
}

/// Earliest contact of the two swept footprints within `horizon_s`. Between
/// samples both footprints translate linearly with the heading of the
/// interval start.
pub fn predict_collision(
    ego: &Trajectory,
    obstacle: &Trajectory,
    horizon_s: f64,
) -> Option<CollisionPrediction> {
    let n = ego
        .poses
        .len()
        .min(obstacle.poses.len())
        .min(sample_count(horizon_s, ego.dt));
    if n == 0 {
        return None;
    }
    let hit = |i: usize, u: f64| {
        let lerp = |t: &Trajectory| {
            let a = t.poses[i].position;
            t.poses.get(i + 1).map_or(a, |b| a.lerp(b.position, u))
        };
        let (pe, po) = (lerp(ego), lerp(obstacle));
        Some(CollisionPrediction {
            point: pe.lerp(po, 0.5),
            tti_s: (i as f64 + u) * ego.dt,
            sample: i,
            fraction: u,
        })
    };
    if n == 1 {
        return ego
            .footprint(0)
            .intersects(&obstacle.footprint(0))
            .then(|| hit(0, 0.0))
            .flatten();
    }
    for i in 0..n - 1 {
        let a = ego.footprint(i);
        let b = obstacle.footprint(i);
        let shift = (obstacle.poses[i + 1].position - obstacle.poses[i].position)
            - (ego.poses[i + 1].position - ego.poses[i].position);
        if let Some(u) = a.first_contact(&b, shift) {
            return hit(i, u);
        }
    }
    None
}

/// Obstacle with the future path the hazard model expects it to take.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedObstacle {
    pub id: ActorId,
    pub kind: ActorKind,
    pub position: Vec2,
    pub velocity: Vec2,
    pub dynamic: bool,
    pub extent_length: f64,
    pub path: Trajectory,
}

/// Route-following actors are predicted along the route (connected
/// vehicles share their plan); everything else at constant velocity.
pub fn predict_actor(
    actor: &ActorState,
    route: &RoutePath,
    horizon_s: f64,
    dt: f64,
) -> PredictedObstacle {
    let (len, wid) = (actor.extent.length, actor.extent.width);
    let path = match &actor.motion {
        Motion::Route {
            speed,
            offset,
            reverse,
            s,
        } => {
            let n = sample_count(horizon_s, dt);
            let dir = if *reverse { -1.0 } else { 1.0 };
            let flip = if *reverse { std::f64::consts::PI } else { 0.0 };
            let poses = (0..n)
                .map(|i| {
                    let si = s + dir * speed * i as f64 * dt;
                    Pose {
                        position: route.offset_point(si, *offset),
                        heading: route.heading_at(si) + flip,
                    }
                })
                .collect();
            Trajectory {
                dt,
                poses,
                length: len,
                width: wid,
            }
        }
        _ => Trajectory::linear(
            actor.position,
            actor.velocity,
            actor.heading,
            len,
            wid,
            horizon_s,
            dt,
        ),
    };
    PredictedObstacle {
        id: actor.id,
        kind: actor.kind,
        position: actor.position,
        velocity: actor.velocity,
        dynamic: actor.dynamic,
        extent_length: len,
        path,
    }
}

/// Predicted ego path: along the route from the current progress, the
/// lateral offset blended in over `LATERAL_BLEND_S` and the speed moving
/// from `speed0` towards `plan_speed` at the acceleration limit.
#[allow(clippy::too_many_arguments)]
pub fn ego_trajectory(
    route: &RoutePath,
    ego: &EgoState,
    speed0: f64,
    plan_speed: f64,
    lateral_offset: f64,
    horizon_s: f64,
    dt: f64,
    vehicle: &VehicleParams,
) -> Trajectory {
    const LATERAL_BLEND_S: f64 = 1.5;
    let n = sample_count(horizon_s, dt);
    let mut poses = Vec::with_capacity(n);
    let (mut s, mut v) = (ego.progress_s, speed0.max(0.0));
    for i in 0..n {
        let t = i as f64 * dt;
        let w = (t / LATERAL_BLEND_S).min(1.0);
        let lat = ego.lateral_error + (lateral_offset - ego.lateral_error) * w;
        poses.push(Pose {
            position: route.offset_point(s, lat),
            heading: route.heading_at(s),
        });
        let v1 = v + (plan_speed - v).clamp(-vehicle.max_accel * dt, vehicle.max_accel * dt);
        s += 0.5 * (v + v1) * dt;
        v = v1;
    }
    Trajectory {
        dt,
        poses,
        length: vehicle.length,
        width: vehicle.width,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazardAssessment {
    pub object_id: ActorId,
    pub collision_point: Option<Vec2>,
    /// Along-path ego distance to the predicted contact; infinite when none.
    pub distance_to_collision: f64,
    pub tti_s: Option<f64>,
    pub warning_distance: f64,
    pub ratio: f64,
    pub severity: f64,
    pub warning_active: bool,
}

impl HazardAssessment {
    pub fn clear(object_id: ActorId, warning_distance: f64) -> Self {
        Self::from_distance(object_id, None, f64::INFINITY, None, warning_distance)
    }

    fn from_distance(
        object_id: ActorId,
        collision_point: Option<Vec2>,
        distance: f64,
        tti_s: Option<f64>,
        warning_distance: f64,
    ) -> Self {
        let ratio = hazard_ratio(distance, warning_distance);
        HazardAssessment {
            object_id,
            collision_point,
            distance_to_collision: distance,
            tti_s,
            warning_distance,
            ratio,
            severity: 1.0 - ratio,
            warning_active: distance < warning_distance,
        }
    }
}

pub fn assess(
    ego_path: &Trajectory,
    ego_speed: f64,
    obstacle: &PredictedObstacle,
    model: &ReactionModel,
    horizon_s: f64,
) -> HazardAssessment {
    let d_warn = warning_distance(ego_speed, model);
    match predict_collision(ego_path, &obstacle.path, horizon_s) {
        Some(c) => HazardAssessment::from_distance(
            obstacle.id,
            Some(c.point),
            ego_path.distance_to(c.sample, c.fraction),
            Some(c.tti_s),
            d_warn,
        ),
        None => HazardAssessment::clear(obstacle.id, d_warn),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Audio {
    None,
    DangerAlert,
    SignChime,
}

impl Audio {
    pub fn as_str(self) -> &'static str {
        match self {
            Audio::None => "none",
            Audio::DangerAlert => "danger_alert",
            Audio::SignChime => "sign_chime",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarningState {
    pub color: Rgb,
    pub flash_hz: f64,
    pub audio: Audio,
}

/// Presentation of one object. An active warning flashes fast with the
/// danger alert; a fresh sign or light change flashes slowly with the chime.
pub fn warning_state(
    a: &HazardAssessment,
    kind: ActorKind,
    sign_event: bool,
    cfg: &HazardConfig,
) -> WarningState {
    let color = color_code(a.severity.clamp(0.0, 1.0), cfg.color_exponent).unwrap_or(Rgb::GREEN);
    if a.warning_active {
        WarningState {
            color,
            flash_hz: cfg.flash_high_hz,
            audio: Audio::DangerAlert,
        }
    } else if sign_event && kind.is_signal() {
        WarningState {
            color,
            flash_hz: cfg.flash_low_hz,
            audio: Audio::SignChime,
        }
    } else {
        WarningState {
            color,
            flash_hz: 0.0,
            audio: Audio::None,
        }
    }
}

/// Latches owned by the simulation loop: when each sign entered the
/// detection range, when each light last changed, and which objects are
/// currently in the warning state (for rising-edge counting).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarningTracker {
    signal_event_at: BTreeMap<ActorId, f64>,
    seen_signs: BTreeSet<ActorId>,
    light_phase: BTreeMap<ActorId, LightPhase>,
    warning: BTreeSet<ActorId>,
    pub danger_alerts: u64,
    pub sign_chimes: u64,
}

impl WarningTracker {
    /// Records sign detections and light changes for this tick. `detected`
    /// holds every signal within the detection range.
    pub fn observe_signals(&mut self, world: &WorldState, detected: &[&ActorState]) {
        for a in detected {
            match a.kind {
                ActorKind::RoadSign if self.seen_signs.insert(a.id) => {
                    self.signal_event_at.insert(a.id, world.t);
                    self.sign_chimes += 1;
                }
                ActorKind::TrafficLight => {
                    if let Some(phase) = world.light_phase(a.id) {
                        let prev = self.light_phase.insert(a.id, phase);
                        if prev.is_some_and(|p| p != phase) {
                            self.signal_event_at.insert(a.id, world.t);
                            self.sign_chimes += 1;
                        }
                    }
                }
                _ => {}
            }
        }
        // Forget signs that left the range so a later pass announces them again.
        let in_range: BTreeSet<ActorId> = detected.iter().map(|a| a.id).collect();
        self.seen_signs.retain(|id| in_range.contains(id));
        self.light_phase.retain(|id, _| in_range.contains(id));
    }

    /// True while the object's last sign event is within `window_s`.
    pub fn sign_event(&self, id: ActorId, t: f64, window_s: f64) -> bool {
        self.signal_event_at
            .get(&id)
            .is_some_and(|t0| t - t0 < window_s)
    }

    /// Updates the warning latch; returns the ids whose warning just rose.
    pub fn update_warnings(&mut self, assessments: &[HazardAssessment]) -> Vec<ActorId> {
        let now: BTreeSet<ActorId> = assessments
            .iter()
            .filter(|a| a.warning_active)
            .map(|a| a.object_id)
            .collect();
        let rising: Vec<ActorId> = now.difference(&self.warning).copied().collect();
        self.danger_alerts += rising.len() as u64;
        self.warning = now;
        rising
    }
}

pub const HAZARD_LOG_HEADER: &str =
    "t,object_id,distance,d_warn,severity,warning_active,flash_hz,audio";
