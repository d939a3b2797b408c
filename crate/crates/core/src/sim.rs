//! Closed-loop run of a scenario: hazards, avoidance, control, HUD cues for
//! both policies and the logs written by `simulate`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::avcontrol::{
    self, follow_path, plan_avoidance, tilt_coordination, AvoidanceAction, AvoidanceInput,
    AvoidancePlan, ControlCommand, ControlError, Controller, MotionCue, Setpoints,
    MOTION_LOG_HEADER,
};
use crate::geom::{Obb, Vec2};
use crate::hazard::{self, HazardAssessment, PredictedObstacle, WarningTracker, HAZARD_LOG_HEADER};
use crate::hud::{
    self, build_candidates, select_cues, CandidateContext, CueCount, CueSet, Policy,
    SelectionContext, CUE_COUNT_HEADER, CUE_LOG_HEADER,
};
use crate::scenario::{
    query_objects_within, step_world, ActorId, ActorKind, EventId, FiredEvent, LightPhase,
    ScenarioDef, WorldState, STATE_LOG_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("at t = {t:.2} s: {source}")]
    Control { t: f64, source: ControlError },
}

/// Distance kept between a stop line and the light it belongs to.
const STOP_LINE_SETBACK_M: f64 = 4.0;
/// Lights farther than this from the route do not regulate it.
const LIGHT_LATERAL_RANGE_M: f64 = 8.0;
/// Below this speed the ego counts as stopped.
const STOPPED_SPEED: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct LogOptions {
    /// Every n-th tick is written to the state, cue, hazard and motion logs.
    pub decimation: u64,
    /// Policies whose cue sets go into the cue log.
    pub policies: Vec<Policy>,
}

impl Default for LogOptions {
    fn default() -> Self {
        Self {
            decimation: 9,
            policies: vec![Policy::Omn, Policy::Sel],
        }
    }
}

/// What happened during one tick.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub t: f64,
    pub assessments: Vec<HazardAssessment>,
    pub plan: AvoidancePlan,
    pub setpoints: Setpoints,
    pub command: ControlCommand,
    pub motion: MotionCue,
    pub omn: CueSet,
    pub sel: CueSet,
}

#[derive(Debug, Clone, Copy)]
struct Swerve {
    cause: ActorId,
    offset: f64,
    since: f64,
}

#[derive(Debug, Clone, Copy)]
struct Hold {
    /// Speed cap ramping down at the comfort deceleration.
    cap: f64,
    stopped_since: Option<f64>,
    duration: f64,
}

/// Counters summarising a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub ticks: u64,
    pub collisions: u64,
    pub emergency_ticks: u64,
    pub offset_ticks: u64,
    pub speed_cap_ticks: u64,
    pub follow_ticks: u64,
    pub danger_alerts: u64,
    pub sign_chimes: u64,
    pub clamped_motion_ticks: u64,
    pub max_speed: f64,
    pub distance_m: f64,
}

/// Stepping simulation with its single-owner controller and latches.
pub struct Simulation<'a> {
    pub scenario: &'a ScenarioDef,
    pub world: WorldState,
    controller: Controller,
    tracker: WarningTracker,
    swerve: Option<Swerve>,
    holds_done: BTreeSet<EventId>,
    hold: Option<Hold>,
    colliding: BTreeSet<ActorId>,
    pub summary: RunSummary,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a ScenarioDef) -> Self {
        Self {
            scenario,
            world: WorldState::initial(scenario),
            controller: Controller::new(scenario.settings.controller.clone()),
            tracker: WarningTracker::default(),
            swerve: None,
            holds_done: BTreeSet::new(),
            hold: None,
            colliding: BTreeSet::new(),
            summary: RunSummary::default(),
        }
    }

    pub fn finished(&self) -> bool {
        self.world.finished(self.scenario)
    }

    pub fn fired_events(&self) -> &[FiredEvent] {
        &self.world.fired_events
    }

    /// Senses, plans, selects cues and advances the world by one tick.
    pub fn step(&mut self) -> Result<TickOutput, SimError> {
        let sc = self.scenario;
        let st = &sc.settings;
        let route = &sc.route;
        let dt = sc.tick_dt;
        let snapshot = self.world.clone();
        let world = &snapshot;
        let ego = &world.ego;
        let t = world.t;

        let detected = query_objects_within(world, ego.position, st.hud.detection_diameter_m);
        let signals: Vec<_> = detected
            .iter()
            .copied()
            .filter(|a| a.kind.is_signal())
            .collect();
        self.tracker.observe_signals(world, &signals);
        let obstacles: Vec<PredictedObstacle> = detected
            .iter()
            .filter(|a| !a.kind.is_signal())
            .map(|a| hazard::predict_actor(a, route, st.hazard.horizon_s, st.hazard.sample_dt))
            .collect();

        let cap = self.regulatory_cap(dt);
        let offset = self.swerve.map_or(0.0, |s| s.offset);
        let base = follow_path(ego, route, &st.controller, cap, offset)
            .map_err(|e| SimError::Control { t, source: e })?;
        let ego_path = hazard::ego_trajectory(
            route,
            ego,
            ego.speed,
            base.target_speed,
            offset,
            st.hazard.horizon_s,
            st.hazard.sample_dt,
            &sc.ego.vehicle,
        );
        let model = st.hazard.reaction_model();
        let assessments: Vec<HazardAssessment> = obstacles
            .iter()
            .map(|o| {
                if is_behind(ego.position, ego.heading, o.position, sc.ego.vehicle.length) {
                    HazardAssessment::clear(o.id, hazard::warning_distance(ego.speed, &model))
                } else {
                    hazard::assess(&ego_path, ego.speed, o, &model, st.hazard.horizon_s)
                }
            })
            .collect();
        let input = AvoidanceInput {
            route,
            obstacles: &obstacles,
            ego_path: &ego_path,
            vehicle: &sc.ego.vehicle,
            plan_speed: base.target_speed,
            horizon_s: st.hazard.horizon_s,
            sample_dt: st.hazard.sample_dt,
        };
        let mut plan = plan_avoidance(ego, &assessments, &input, &st.controller, base);
        self.update_swerve(&plan, &obstacles, t);
        if plan.action == AvoidanceAction::None {
            if let Some(s) = self.swerve {
                // Keep the lateral offset until the obstacle is passed.
                plan.setpoints.target_speed = plan
                    .setpoints
                    .target_speed
                    .min(st.controller.swerve_speed_factor * route.speed_limit_at(ego.progress_s));
                plan.setpoints.lateral_offset = s.offset;
                plan.cause = Some(s.cause);
            }
        }
        let setpoints = plan.setpoints;
        let command = self.controller.step(ego, &setpoints, dt);

        self.tracker.update_warnings(&assessments);
        let candidates = build_candidates(
            world,
            &assessments,
            &CandidateContext {
                route,
                obstacles: &obstacles,
                tracker: &self.tracker,
                hazard: &st.hazard,
                hud: &st.hud,
            },
        );
        let selection = self.selection_context(&obstacles, &plan);
        let omn = select_cues(&candidates, Policy::Omn, &selection);
        let sel = select_cues(&candidates, Policy::Sel, &selection);
        let motion = tilt_coordination(
            ego.accel_long,
            ego.accel_lat,
            st.controller.platform_max_deg,
        );

        self.count(&plan, &motion);
        let out = TickOutput {
            t,
            assessments,
            plan,
            setpoints,
            command,
            motion,
            omn,
            sel,
        };
        let next = step_world(&self.world, sc, command);
        self.summary.distance_m += next.ego.position.distance(self.world.ego.position);
        self.world = next;
        self.detect_collisions();
        Ok(out)
    }

    fn count(&mut self, plan: &AvoidancePlan, motion: &MotionCue) {
        let s = &mut self.summary;
        s.ticks += 1;
        match plan.action {
            AvoidanceAction::EmergencyStop => s.emergency_ticks += 1,
            AvoidanceAction::Offset => s.offset_ticks += 1,
            AvoidanceAction::SpeedCap => s.speed_cap_ticks += 1,
            AvoidanceAction::Follow => s.follow_ticks += 1,
            AvoidanceAction::None => {}
        }
        s.clamped_motion_ticks += motion.clamped as u64;
        s.max_speed = s.max_speed.max(self.world.ego.speed);
        s.danger_alerts = self.tracker.danger_alerts;
        s.sign_chimes = self.tracker.sign_chimes;
    }

    fn detect_collisions(&mut self) {
        let e = &self.world.ego;
        let v = &self.scenario.ego.vehicle;
        let fp = Obb::new(e.position, e.heading, v.length, v.width);
        let now: BTreeSet<ActorId> = self
            .world
            .actors
            .iter()
            .filter(|a| !a.kind.is_signal() && a.position.distance(e.position) < 15.0)
            .filter(|a| fp.intersects(&a.footprint()))
            .map(|a| a.id)
            .collect();
        self.summary.collisions += now.difference(&self.colliding).count() as u64;
        self.colliding = now;
    }

    /// Speed cap from red lights and the post-event halt.
    fn regulatory_cap(&mut self, dt: f64) -> Option<f64> {
        let sc = self.scenario;
        let cfg = &sc.settings.controller;
        let ego = &self.world.ego;
        let mut cap: Option<f64> = None;
        let mut lower = |c: f64| cap = Some(cap.map_or(c, |x: f64| x.min(c)));

        for (id, _) in &sc.lights {
            let Some(light) = self.world.actor(*id) else {
                continue;
            };
            if self.world.light_phase(*id) == Some(LightPhase::Green) {
                continue;
            }
            let proj = sc.route.project_near(light.position, ego.progress_s);
            if proj.lateral.abs() > LIGHT_LATERAL_RANGE_M {
                continue;
            }
            let mut d = proj.s - STOP_LINE_SETBACK_M - ego.progress_s;
            if sc.route.is_closed() && d < -sc.route.length() / 2.0 {
                d += sc.route.length();
            }
            if let Some(c) =
                avcontrol::stop_line_cap(d, ego.speed, cfg.comfort_decel, 1.5 * cfg.comfort_decel)
            {
                lower(c);
            }
        }

        // Halt after a risky event once its actor has left the scene.
        for f in &self.world.fired_events {
            if self.holds_done.contains(&f.id) || self.world.active_events.contains(&f.id) {
                continue;
            }
            let stop = sc.event(f.id).map_or(0.0, |e| e.post_event_stop_s);
            self.holds_done.insert(f.id);
            if stop > 0.0 {
                self.hold = Some(Hold {
                    cap: ego.speed,
                    stopped_since: None,
                    duration: stop,
                });
            }
        }
        if let Some(h) = &mut self.hold {
            h.cap = (h.cap - cfg.comfort_decel * dt).max(0.0);
            if ego.speed < STOPPED_SPEED {
                let since = *h.stopped_since.get_or_insert(self.world.t);
                if self.world.t - since >= h.duration {
                    self.hold = None;
                }
            }
        }
        if let Some(h) = self.hold {
            lower(h.cap);
        }
        cap
    }

    fn update_swerve(&mut self, plan: &AvoidancePlan, obstacles: &[PredictedObstacle], t: f64) {
        if plan.action == AvoidanceAction::Offset {
            if let Some(cause) = plan.cause {
                if self.swerve.is_none_or(|s| s.cause != cause) {
                    self.swerve = Some(Swerve {
                        cause,
                        offset: plan.setpoints.lateral_offset,
                        since: t,
                    });
                }
            }
            return;
        }
        if plan.action == AvoidanceAction::EmergencyStop {
            self.swerve = None;
            return;
        }
        if let Some(s) = self.swerve {
            let ego = &self.world.ego;
            let passed = obstacles.iter().find(|o| o.id == s.cause).is_none_or(|o| {
                is_behind(
                    ego.position,
                    ego.heading,
                    o.position,
                    self.scenario.ego.vehicle.length,
                )
            });
            if passed && t - s.since > 1.0 {
                self.swerve = None;
            }
        }
    }

    fn selection_context(
        &self,
        obstacles: &[PredictedObstacle],
        plan: &AvoidancePlan,
    ) -> SelectionContext {
        let route = &self.scenario.route;
        let ego = &self.world.ego;
        let seg = route.segment_at(ego.progress_s);
        let next = (seg + 1) % route.segment_count();
        let seg_len = |i: usize| route.segment_start(i + 1) - route.segment_start(i);
        let into_seg = route.wrap_s(ego.progress_s) - route.segment_start(seg);
        // Current and next route edge ahead of the ego.
        let reach = seg_len(seg) + seg_len(next) - into_seg;
        let fwd = Vec2::from_angle(ego.heading);
        let preceding = obstacles
            .iter()
            .filter(|o| o.dynamic && o.kind.is_vehicle() && o.velocity.dot(fwd) >= 0.0)
            .filter(|o| {
                let p = route.project_near(o.position, ego.progress_s);
                let ahead = p.s - ego.progress_s;
                ahead > 0.0 && ahead <= reach && p.lateral.abs() < 2.0
            })
            .map(|o| o.id)
            .collect();
        SelectionContext {
            current_section: route.section_at(ego.progress_s),
            preceding,
            assessed: plan.assessed.clone(),
        }
    }
}

fn is_behind(ego_pos: Vec2, ego_heading: f64, p: Vec2, ego_length: f64) -> bool {
    (p - ego_pos).dot(Vec2::from_angle(ego_heading)) < -0.5 * ego_length
}

/// Text logs of a complete run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub state: String,
    pub cues: String,
    pub hazard: String,
    pub motion: String,
    pub cue_counts: Vec<CueCount>,
    pub events: Vec<FiredEvent>,
    pub summary: RunSummary,
}

impl RunLog {
    pub fn cue_counts_csv(&self) -> String {
        let mut out = format!("{CUE_COUNT_HEADER}\n");
        for c in &self.cue_counts {
            let _ = writeln!(out, "{:.4},{},{}", c.t, c.omn, c.sel);
        }
        out
    }

    pub fn events_csv(&self) -> String {
        let mut out = String::from("event_id,t_s\n");
        for e in &self.events {
            let _ = writeln!(out, "{},{:.4}", e.id, e.t);
        }
        out
    }
}

/// Runs the scenario to its end. `observe` sees every tick's output.
pub fn run_scenario(
    scenario: &ScenarioDef,
    opts: LogOptions,
    mut observe: impl FnMut(&TickOutput, &WorldState),
) -> Result<RunLog, SimError> {
    let mut sim = Simulation::new(scenario);
    let mut log = RunLog {
        state: format!("{STATE_LOG_HEADER}\n"),
        cues: format!("{CUE_LOG_HEADER}\n"),
        hazard: format!("{HAZARD_LOG_HEADER}\n"),
        motion: format!("{MOTION_LOG_HEADER}\n"),
        ..RunLog::default()
    };
    let every = opts.decimation.max(1);
    while !sim.finished() {
        let tick = sim.world.tick;
        let before = sim.world.clone();
        let out = sim.step()?;
        observe(&out, &before);
        log.cue_counts.push(CueCount {
            t: out.t,
            omn: out.omn.cues.len(),
            sel: out.sel.cues.len(),
        });
        if tick.is_multiple_of(every) {
            crate::scenario::write_state_rows(&before, &mut log.state);
            for set in [&out.omn, &out.sel] {
                if opts.policies.contains(&set.policy) {
                    hud::write_cue_rows(set, &mut log.cues);
                }
            }
            write_hazard_rows(&out, &before, scenario, &mut log.hazard);
            let _ = writeln!(
                log.motion,
                "{:.4},{:.4},{:.4},{}",
                out.t, out.motion.pitch_deg, out.motion.roll_deg, out.motion.clamped
            );
        }
    }
    log.events = sim.world.fired_events.clone();
    log.summary = sim.summary.clone();
    Ok(log)
}

fn write_hazard_rows(
    out: &TickOutput,
    world: &WorldState,
    scenario: &ScenarioDef,
    buf: &mut String,
) {
    for a in &out.assessments {
        let kind = world
            .actor(a.object_id)
            .map_or(ActorKind::StaticObject, |x| x.kind);
        let w = hazard::warning_state(a, kind, false, &scenario.settings.hazard);
        let _ = writeln!(
            buf,
            "{:.4},{},{:.3},{:.3},{:.4},{},{},{}",
            out.t,
            a.object_id,
            a.distance_to_collision,
            a.warning_distance,
            a.severity,
            a.warning_active,
            w.flash_hz,
            w.audio.as_str()
        );
    }
}
