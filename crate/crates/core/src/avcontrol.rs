//! Ego vehicle control: path following on the waypoint route, PID speed and
//! heading loops with slew-rate shaping, obstacle-triggered replanning and
//! tilt-coordination motion cues.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, Vec2};
use crate::hazard::{self, HazardAssessment, PredictedObstacle, Trajectory};
use crate::scenario::{ActorId, ActorKind, RoutePath};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("route lost: ego is {offset:.1} m from the route (limit {limit:.1} m)")]
    RouteLost { offset: f64, limit: f64 },
}

/// Kinematic bicycle plant with a first-order longitudinal actuator lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub wheelbase: f64,
    /// m/s^2
    pub max_accel: f64,
    /// m/s^2, positive magnitude
    pub max_decel: f64,
    /// rad
    pub max_steer: f64,
    pub actuator_lag_s: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            length: 4.6,
            width: 1.9,
            height: 1.5,
            wheelbase: 2.8,
            max_accel: 3.0,
            max_decel: 8.0,
            max_steer: 0.55,
            actuator_lag_s: 0.25,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            self.length,
            self.width,
            self.height,
            self.wheelbase,
            self.max_accel,
            self.max_decel,
            self.max_steer,
            self.actuator_lag_s,
        ];
        if positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("vehicle parameters must be finite and positive".into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    /// m/s^2, negative brakes.
    pub accel: f64,
    /// Front-wheel angle, rad.
    pub steer: f64,
}

impl ControlCommand {
    pub const ZERO: ControlCommand = ControlCommand {
        accel: 0.0,
        steer: 0.0,
    };

    pub fn is_finite(&self) -> bool {
        self.accel.is_finite() && self.steer.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoState {
    pub position: Vec2,
    /// m/s, never negative.
    pub speed: f64,
    pub heading: f64,
    /// Measured longitudinal acceleration over the last tick.
    pub accel_long: f64,
    pub accel_lat: f64,
    /// Internal actuator state of the longitudinal lag.
    pub actuator_accel: f64,
    pub steer: f64,
    /// Unwrapped arc length along the route.
    pub progress_s: f64,
    /// Signed distance from the route, positive to the left.
    pub lateral_error: f64,
    /// Route segment the ego currently drives on.
    pub segment: usize,
}

impl EgoState {
    pub fn at_rest(position: Vec2, heading: f64, speed: f64, progress_s: f64) -> Self {
        Self {
            position,
            speed,
            heading,
            accel_long: 0.0,
            accel_lat: 0.0,
            actuator_accel: 0.0,
            steer: 0.0,
            progress_s,
            lateral_error: 0.0,
            segment: 0,
        }
    }
}

/// Exact zero-order-hold update of `v' = a`, `a' = (u - a) / lag`.
/// Returns `(speed, actuator_accel)`.
pub fn advance_longitudinal(
    speed: f64,
    actuator: f64,
    command: f64,
    dt: f64,
    lag: f64,
) -> (f64, f64) {
    let decay = (-dt / lag).exp();
    let v = speed + command * dt + (actuator - command) * lag * (1.0 - decay);
    let a = command + (actuator - command) * decay;
    (v, a)
}

/// Advances the ego one tick on the bicycle plant.
pub fn advance_ego(
    ego: &EgoState,
    cmd: ControlCommand,
    vp: &VehicleParams,
    route: &RoutePath,
    dt: f64,
) -> EgoState {
    let u = cmd.accel.clamp(-vp.max_decel, vp.max_accel);
    let steer = cmd.steer.clamp(-vp.max_steer, vp.max_steer);
    let (mut v1, mut a1) =
        advance_longitudinal(ego.speed, ego.actuator_accel, u, dt, vp.actuator_lag_s);
    if v1 < 0.0 {
        v1 = 0.0;
        a1 = a1.max(0.0);
    }
    let v_avg = 0.5 * (ego.speed + v1);
    let yaw_rate = v_avg * steer.tan() / vp.wheelbase;
    let heading_mid = ego.heading + 0.5 * yaw_rate * dt;
    let position = ego.position + Vec2::from_angle(heading_mid) * (v_avg * dt);
    let heading = wrap_angle(ego.heading + yaw_rate * dt);
    let proj = route.project_near(position, ego.progress_s);
    EgoState {
        position,
        speed: v1,
        heading,
        accel_long: (v1 - ego.speed) / dt,
        accel_lat: v_avg * yaw_rate,
        actuator_accel: a1,
        steer,
        progress_s: proj.s,
        lateral_error: proj.lateral,
        segment: route.segment_at(proj.s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub out_min: f64,
    pub out_max: f64,
    /// Bound on the integral term's contribution.
    pub integral_limit: f64,
    /// Command shaping: maximum output change per second.
    pub slew_rate: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.kp,
            self.ki,
            self.kd,
            self.out_min,
            self.out_max,
            self.integral_limit,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.out_min > self.out_max {
            return Err("PID gains and limits must be finite with out_min <= out_max".into());
        }
        if !(self.slew_rate > 0.0) {
            return Err("slew rate must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Speed loop: output is longitudinal acceleration (m/s^2).
    pub speed: PidGains,
    /// Heading loop: output is the steering angle (rad).
    pub steer: PidGains,
    pub lookahead_min_m: f64,
    pub lookahead_time_s: f64,
    /// Lateral distance from the route beyond which the route is lost.
    pub route_lost_m: f64,
    /// Deceleration used for planned stops (m/s^2).
    pub comfort_decel: f64,
    /// Constant deceleration commanded by an emergency stop (m/s^2).
    pub emergency_decel: f64,
    /// Gap kept from a predicted collision point when stopping.
    pub safety_margin_m: f64,
    pub max_lateral_offset_m: f64,
    /// Speed factor applied while swerving around an obstacle.
    pub swerve_speed_factor: f64,
    pub follow_min_gap_m: f64,
    pub follow_time_gap_s: f64,
    pub platform_max_deg: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            speed: PidGains {
                kp: 1.2,
                ki: 0.1,
                kd: 0.02,
                out_min: -8.0,
                out_max: 3.0,
                integral_limit: 2.0,
                slew_rate: 25.0,
            },
            steer: PidGains {
                kp: 1.6,
                ki: 0.0,
                kd: 0.08,
                out_min: -0.55,
                out_max: 0.55,
                integral_limit: 0.1,
                slew_rate: 0.8,
            },
            lookahead_min_m: 7.0,
            lookahead_time_s: 0.9,
            route_lost_m: 15.0,
            comfort_decel: 3.0,
            emergency_decel: 8.0,
            safety_margin_m: 4.0,
            max_lateral_offset_m: 2.5,
            swerve_speed_factor: 0.6,
            follow_min_gap_m: 8.0,
            follow_time_gap_s: 1.5,
            platform_max_deg: 12.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.speed.validate()?;
        self.steer.validate()?;
        let positive = [
            self.lookahead_min_m,
            self.route_lost_m,
            self.comfort_decel,
            self.emergency_decel,
            self.platform_max_deg,
            self.swerve_speed_factor,
        ];
        if positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("controller distances, decelerations and limits must be positive".into())
        }
    }
}

/// Targets handed to the PID loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoints {
    pub target_speed: f64,
    pub target_heading: f64,
    /// Lateral shift of the followed path (positive = left).
    pub lateral_offset: f64,
    /// Command the constant emergency deceleration instead of the speed loop.
    pub emergency: bool,
}

fn lookahead_distance(cfg: &ControllerConfig, speed: f64) -> f64 {
    cfg.lookahead_min_m.max(cfg.lookahead_time_s * speed)
}

/// Speed and heading targets from the route: the speed limit over the
/// braking distance ahead (capped by `hazard_cap`) and the bearing of a
/// lookahead point on the (optionally offset) route.
pub fn follow_path(
    ego: &EgoState,
    route: &RoutePath,
    cfg: &ControllerConfig,
    hazard_cap: Option<f64>,
    lateral_offset: f64,
) -> Result<Setpoints, ControlError> {
    if ego.lateral_error.abs() > cfg.route_lost_m {
        return Err(ControlError::RouteLost {
            offset: ego.lateral_error,
            limit: cfg.route_lost_m,
        });
    }
    let s = ego.progress_s;
    let mut target_speed =
        braking_envelope(route, s, ego.speed, cfg.comfort_decel, cfg.lookahead_min_m);
    if let Some(cap) = hazard_cap {
        target_speed = target_speed.min(cap.max(0.0));
    }
    let target = route.offset_point(s + lookahead_distance(cfg, ego.speed), lateral_offset);
    let target_heading = (target - ego.position).angle();
    Ok(Setpoints {
        target_speed,
        target_heading,
        lateral_offset,
        emergency: false,
    })
}

/// Highest speed from which every upcoming limit can still be met at
/// `decel`: the minimum over segments ahead of `sqrt(limit^2 + 2 decel d)`,
/// with `d` the distance to the segment start less `margin`.
pub fn braking_envelope(route: &RoutePath, s: f64, speed: f64, decel: f64, margin: f64) -> f64 {
    let mut best = route.speed_limit_at(s);
    let reach = speed * speed / (2.0 * decel) + margin + 1.0;
    let mut seg = route.segment_at(s);
    let mut start = s - (route.wrap_s(s) - route.segment_start(seg));
    for _ in 0..route.segment_count() {
        let len = route.segment_start(seg + 1) - route.segment_start(seg);
        start += len;
        if start - s > reach {
            break;
        }
        seg += 1;
        if seg >= route.segment_count() {
            if !route.is_closed() {
                break;
            }
            seg = 0;
        }
        let d = (start - s - margin).max(0.0);
        best = best.min((route.speed_limit_at(start + 1e-9).powi(2) + 2.0 * decel * d).sqrt());
    }
    best
}

/// Speed cap that stops the car at a line `distance` metres ahead at
/// `decel`; `None` when the line is behind or a stop would need more than
/// `max_decel`.
pub fn stop_line_cap(distance: f64, speed: f64, decel: f64, max_decel: f64) -> Option<f64> {
    if distance < 0.0 {
        return None;
    }
    let needed = if distance > 0.0 {
        speed * speed / (2.0 * distance)
    } else {
        f64::INFINITY
    };
    if needed > max_decel && speed > 0.5 {
        return None;
    }
    Some((2.0 * decel * distance).sqrt())
}

/// Integral and derivative memory of one PID channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub prev_output: f64,
}

/// One PID update with conditional-integration anti-windup, output clamping
/// and slew-rate shaping of the result.
pub fn pid_step(g: &PidGains, st: &mut PidState, error: f64, dt: f64) -> f64 {
    let p = g.kp * error;
    let d = st.prev_error.map_or(0.0, |e0| g.kd * (error - e0) / dt);
    st.prev_error = Some(error);
    let unclamped = p + st.integral + d;
    let clamped = unclamped.clamp(g.out_min, g.out_max);
    let saturating =
        (unclamped > g.out_max && error > 0.0) || (unclamped < g.out_min && error < 0.0);
    if !saturating {
        st.integral = (st.integral + g.ki * error * dt).clamp(-g.integral_limit, g.integral_limit);
    }
    let shaped = slew(st.prev_output, clamped, g.slew_rate * dt);
    st.prev_output = shaped;
    shaped
}

fn slew(prev: f64, target: f64, max_step: f64) -> f64 {
    prev + (target - prev).clamp(-max_step, max_step)
}

/// Single-owner controller: holds the integral terms and the last shaped
/// command of both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub cfg: ControllerConfig,
    speed: PidState,
    steer: PidState,
}

impl Controller {
    pub fn new(cfg: ControllerConfig) -> Self {
        Self {
            cfg,
            speed: PidState::default(),
            steer: PidState::default(),
        }
    }

    pub fn last_command(&self) -> ControlCommand {
        ControlCommand {
            accel: self.speed.prev_output,
            steer: self.steer.prev_output,
        }
    }

    pub fn step(&mut self, ego: &EgoState, sp: &Setpoints, dt: f64) -> ControlCommand {
        let accel = if sp.emergency {
            // Constant maximum braking; the loop memory restarts afterwards.
            self.speed.integral = 0.0;
            self.speed.prev_error = None;
            let shaped = slew(
                self.speed.prev_output,
                -self.cfg.emergency_decel,
                self.cfg.speed.slew_rate * dt,
            );
            self.speed.prev_output = shaped;
            shaped
        } else {
            pid_step(
                &self.cfg.speed,
                &mut self.speed,
                sp.target_speed - ego.speed,
                dt,
            )
        };
        let heading_error = wrap_angle(sp.target_heading - ego.heading);
        let steer = pid_step(&self.cfg.steer, &mut self.steer, heading_error, dt);
        ControlCommand { accel, steer }
    }
}

/// Closed-loop speed step response on the longitudinal plant.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub dt: f64,
    pub target: f64,
    /// Speed after each tick (index k is time (k + 1) * dt).
    pub speed: Vec<f64>,
    pub command: Vec<f64>,
    pub peak: f64,
    /// (peak - target) / target, zero when the response never exceeds the target.
    pub overshoot: f64,
    /// Time after which the speed stays within 2 % of the target.
    pub settling_time_s: Option<f64>,
}

pub fn speed_step_response(
    gains: &PidGains,
    vehicle: &VehicleParams,
    target: f64,
    duration_s: f64,
    dt: f64,
) -> StepResponse {
    let n = (duration_s / dt).round() as usize;
    let mut st = PidState::default();
    let (mut v, mut a) = (0.0_f64, 0.0_f64);
    let mut speed = Vec::with_capacity(n);
    let mut command = Vec::with_capacity(n);
    for _ in 0..n {
        let u =
            pid_step(gains, &mut st, target - v, dt).clamp(-vehicle.max_decel, vehicle.max_accel);
        let (v1, a1) = advance_longitudinal(v, a, u, dt, vehicle.actuator_lag_s);
        v = v1.max(0.0);
        a = a1;
        speed.push(v);
        command.push(u);
    }
    let peak = speed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let overshoot = ((peak - target) / target).max(0.0);
    let band = 0.02 * target.abs();
    let settling_time_s = match speed.iter().rposition(|v| (v - target).abs() > band) {
        None => Some(0.0),
        Some(i) if i + 1 < speed.len() => Some((i + 2) as f64 * dt),
        Some(_) => None,
    };
    StepResponse {
        dt,
        target,
        speed,
        command,
        peak,
        overshoot,
        settling_time_s,
    }
}

/// What the avoidance logic decided for this tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvoidanceAction {
    None,
    /// Speed matched to a vehicle ahead.
    Follow,
    /// Stop short of a predicted collision point.
    SpeedCap,
    /// Swerve onto a laterally offset path while slowing down.
    Offset,
    /// No feasible manoeuvre: constant maximum braking.
    EmergencyStop,
}

impl AvoidanceAction {
    pub fn as_str(self) -> &'static str {
        match self {
            AvoidanceAction::None => "none",
            AvoidanceAction::Follow => "follow",
            AvoidanceAction::SpeedCap => "speed_cap",
            AvoidanceAction::Offset => "offset",
            AvoidanceAction::EmergencyStop => "emergency_stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvoidancePlan {
    pub setpoints: Setpoints,
    pub action: AvoidanceAction,
    /// Object that triggered the action.
    pub cause: Option<ActorId>,
    /// Auxiliary waypoints of the offset path (empty unless swerving).
    pub aux_waypoints: Vec<Vec2>,
    /// Vehicles whose predicted path crosses the ego's lookahead path; the
    /// planner is checking right of way against them.
    pub assessed: BTreeSet<ActorId>,
}

/// Everything `plan_avoidance` needs besides the hazards themselves.
pub struct AvoidanceInput<'a> {
    pub route: &'a RoutePath,
    pub obstacles: &'a [PredictedObstacle],
    /// Predicted ego path used for the hazard assessments.
    pub ego_path: &'a Trajectory,
    pub vehicle: &'a VehicleParams,
    /// Speed the ego plans to drive without hazards.
    pub plan_speed: f64,
    pub horizon_s: f64,
    pub sample_dt: f64,
}

/// Turns the hazard assessments into a setpoint override. The target speed
/// never exceeds `base.target_speed`.
pub fn plan_avoidance(
    ego: &EgoState,
    hazards: &[HazardAssessment],
    input: &AvoidanceInput<'_>,
    cfg: &ControllerConfig,
    base: Setpoints,
) -> AvoidancePlan {
    let ego_line: Vec<Vec2> = input.ego_path.poses.iter().map(|p| p.position).collect();
    let assessed = input
        .obstacles
        .iter()
        .filter(|o| o.kind.is_vehicle() && o.dynamic)
        .filter(|o| {
            let line: Vec<Vec2> = o.path.poses.iter().map(|p| p.position).collect();
            crate::geom::polylines_intersect(&ego_line, &line)
        })
        .map(|o| o.id)
        .collect();
    let mut plan = AvoidancePlan {
        setpoints: base,
        action: AvoidanceAction::None,
        cause: None,
        aux_waypoints: Vec::new(),
        assessed,
    };

    let fwd = Vec2::from_angle(ego.heading);
    let threat = hazards
        .iter()
        .filter(|h| h.collision_point.is_some())
        .min_by(|a, b| a.distance_to_collision.total_cmp(&b.distance_to_collision));

    if let Some(h) = threat {
        let obstacle = input.obstacles.iter().find(|o| o.id == h.object_id);
        let d = h.distance_to_collision;
        let v = ego.speed;
        let same_direction = obstacle.is_some_and(|o| {
            o.kind.is_vehicle()
                && o.velocity.dot(fwd) > 0.7 * o.velocity.norm()
                && o.velocity.norm() > 0.5
        });
        if let (true, Some(o)) = (same_direction, obstacle) {
            let lead_speed = o.velocity.dot(fwd);
            let gap = (o.position - ego.position).dot(fwd)
                - 0.5 * (o.extent_length + input.vehicle.length);
            let required = if gap > 0.5 {
                (v * v - lead_speed * lead_speed).max(0.0) / (2.0 * gap)
            } else {
                f64::INFINITY
            };
            if required > cfg.emergency_decel {
                emergency(&mut plan, h.object_id);
            } else {
                let cap = follow_speed(cfg, lead_speed, gap, v);
                apply_cap(&mut plan, cap, AvoidanceAction::Follow, h.object_id);
            }
            return plan;
        }
        let stop_dist = v * v / (2.0 * cfg.comfort_decel);
        if d - cfg.safety_margin_m >= stop_dist {
            let cap = (2.0 * cfg.comfort_decel * (d - cfg.safety_margin_m).max(0.0)).sqrt();
            apply_cap(&mut plan, cap, AvoidanceAction::SpeedCap, h.object_id);
            return plan;
        }
        if let Some(o) = obstacle {
            if let Some(offset) = find_offset(ego, o, input, cfg) {
                let slow = cfg.swerve_speed_factor * v;
                let s0 = ego.progress_s;
                plan.aux_waypoints = input.route.polyline(s0, s0 + d + 15.0, offset, 5.0);
                let sp = follow_path(
                    ego,
                    input.route,
                    cfg,
                    Some(slow.min(base.target_speed)),
                    offset,
                )
                .unwrap_or(base);
                plan.setpoints = Setpoints {
                    target_speed: sp.target_speed.min(base.target_speed),
                    ..sp
                };
                plan.action = AvoidanceAction::Offset;
                plan.cause = Some(h.object_id);
                return plan;
            }
        }
        emergency(&mut plan, h.object_id);
        return plan;
    }

    // Keep a time gap behind a vehicle driving ahead in the ego lane.
    let lead = input
        .obstacles
        .iter()
        .filter(|o| o.kind.is_vehicle() && o.dynamic)
        .filter_map(|o| {
            let rel = o.position - ego.position;
            let ahead = rel.dot(fwd);
            let side = rel.dot(fwd.perp()).abs();
            let lead_speed = o.velocity.dot(fwd);
            (ahead > 0.0 && ahead < 60.0 && side < 1.5 && lead_speed > 0.0)
                .then_some((o, ahead, lead_speed))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((o, ahead, lead_speed)) = lead {
        let gap = ahead - 0.5 * (o.extent_length + input.vehicle.length);
        let cap = follow_speed(cfg, lead_speed, gap, ego.speed);
        if cap < plan.setpoints.target_speed {
            apply_cap(&mut plan, cap, AvoidanceAction::Follow, o.id);
        }
    }
    plan
}

fn follow_speed(cfg: &ControllerConfig, lead_speed: f64, gap: f64, ego_speed: f64) -> f64 {
    let desired = cfg.follow_min_gap_m + cfg.follow_time_gap_s * ego_speed;
    (lead_speed + 0.5 * (gap - desired)).max(0.0)
}

fn apply_cap(plan: &mut AvoidancePlan, cap: f64, action: AvoidanceAction, cause: ActorId) {
    plan.setpoints.target_speed = plan.setpoints.target_speed.min(cap.max(0.0));
    plan.action = action;
    plan.cause = Some(cause);
}

fn emergency(plan: &mut AvoidancePlan, cause: ActorId) {
    plan.setpoints.target_speed = 0.0;
    plan.setpoints.emergency = true;
    plan.action = AvoidanceAction::EmergencyStop;
    plan.cause = Some(cause);
}

/// Tries lateral offsets on the side opposite to the obstacle's lateral
/// motion and returns the first one whose predicted path is clear of every
/// obstacle.
fn find_offset(
    ego: &EgoState,
    obstacle: &PredictedObstacle,
    input: &AvoidanceInput<'_>,
    cfg: &ControllerConfig,
) -> Option<f64> {
    if obstacle.kind.is_vehicle() {
        return None;
    }
    let left = Vec2::from_angle(ego.heading).perp();
    let lat_v = obstacle.velocity.dot(left);
    let side = if lat_v.abs() > 0.1 {
        -lat_v.signum()
    } else {
        -(obstacle.position - ego.position).dot(left).signum()
    };
    let speed = cfg.swerve_speed_factor * ego.speed;
    [1.0, 0.6]
        .into_iter()
        .map(|f| side * f * cfg.max_lateral_offset_m)
        .find(|&offset| {
            let path = hazard::ego_trajectory(
                input.route,
                ego,
                ego.speed,
                speed,
                offset,
                input.horizon_s,
                input.sample_dt,
                input.vehicle,
            );
            input
                .obstacles
                .iter()
                .all(|o| hazard::predict_collision(&path, &o.path, input.horizon_s).is_none())
        })
}

/// Platform attitude reproducing a sustained acceleration through the
/// gravity component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionCue {
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub clamped: bool,
}

/// Tilt coordination: pitch = asin(a_long / g), roll = asin(a_lat / g),
/// each limited to `max_deg`.
pub fn tilt_coordination(accel_long: f64, accel_lat: f64, max_deg: f64) -> MotionCue {
    let raw = |a: f64| (a / GRAVITY).clamp(-1.0, 1.0).asin().to_degrees();
    let (p, r) = (raw(accel_long), raw(accel_lat));
    let clamped = p.abs() > max_deg || r.abs() > max_deg;
    MotionCue {
        pitch_deg: p.clamp(-max_deg, max_deg),
        roll_deg: r.clamp(-max_deg, max_deg),
        clamped,
    }
}

pub const MOTION_LOG_HEADER: &str = "t,pitch_deg,roll_deg,clamped";

/// Kinds whose extent is small enough to swerve around.
pub fn is_swervable(kind: ActorKind) -> bool {
    !kind.is_vehicle()
}

#[cfg(test)]
mod tests;
