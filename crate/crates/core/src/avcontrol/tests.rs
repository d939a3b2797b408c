use super::*;
use crate::hazard::{assess, ego_trajectory, predict_actor, warning_distance, ReactionModel};
use crate::scenario::{ActorState, Edge, Extent, Motion, Node, WaypointNetwork};
use proptest::prelude::*;

fn route(points: &[(f64, f64)], limit: f64) -> RoutePath {
    let nodes = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Node {
            id: i as u32,
            position: Vec2::new(x, y),
            speed_limit: limit,
        })
        .collect();
    let edges = (0..points.len() - 1)
        .map(|i| Edge {
            from: i as u32,
            to: i as u32 + 1,
            lane: 0,
            section: 0,
        })
        .collect();
    let net = WaypointNetwork {
        nodes,
        edges,
        route: (0..points.len() as u32).collect(),
        closed_route: false,
    };
    RoutePath::from_network(&net).unwrap()
}

fn straight() -> RoutePath {
    route(&[(0.0, 0.0), (500.0, 0.0), (1000.0, 0.0)], 13.9)
}

fn ego_at(x: f64, speed: f64) -> EgoState {
    EgoState::at_rest(Vec2::new(x, 0.0), 0.0, speed, x)
}

/// Closed-loop step response computed independently: the same discrete PID
/// law drives the continuous lag plant, integrated with RK4 on 100 sub-steps
/// per tick.
fn rk4_step_response(
    g: &PidGains,
    vp: &VehicleParams,
    target: f64,
    duration: f64,
    dt: f64,
) -> Vec<f64> {
    let n = (duration / dt).round() as usize;
    let (mut v, mut a) = (0.0_f64, 0.0_f64);
    let (mut integral, mut prev_e, mut prev_u) = (0.0_f64, None::<f64>, 0.0_f64);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let e = target - v;
        let d = prev_e.map_or(0.0, |p| g.kd * (e - p) / dt);
        prev_e = Some(e);
        let raw = g.kp * e + integral + d;
        let sat = raw.clamp(g.out_min, g.out_max);
        if !((raw > g.out_max && e > 0.0) || (raw < g.out_min && e < 0.0)) {
            integral = (integral + g.ki * e * dt).clamp(-g.integral_limit, g.integral_limit);
        }
        let step = g.slew_rate * dt;
        prev_u += (sat - prev_u).clamp(-step, step);
        let u = prev_u.clamp(-vp.max_decel, vp.max_accel);
        let h = dt / 100.0;
        let f = |_v: f64, a: f64| (a, (u - a) / vp.actuator_lag_s);
        for _ in 0..100 {
            let (k1v, k1a) = f(v, a);
            let (k2v, k2a) = f(v + 0.5 * h * k1v, a + 0.5 * h * k1a);
            let (k3v, k3a) = f(v + 0.5 * h * k2v, a + 0.5 * h * k2a);
            let (k4v, k4a) = f(v + h * k3v, a + h * k3a);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        }
        v = v.max(0.0);
        out.push(v);
    }
    out
}

#[test]
fn zero_error_gives_zero_command() {
    let g = ControllerConfig::default().speed;
    let mut st = PidState::default();
    for _ in 0..500 {
        assert_eq!(pid_step(&g, &mut st, 0.0, 1.0 / 90.0), 0.0);
    }
    let mut c = Controller::new(ControllerConfig::default());
    let ego = ego_at(10.0, 5.0);
    let sp = Setpoints {
        target_speed: 5.0,
        target_heading: 0.0,
        lateral_offset: 0.0,
        emergency: false,
    };
    for _ in 0..100 {
        assert_eq!(c.step(&ego, &sp, 1.0 / 90.0), ControlCommand::ZERO);
    }
}

#[test]
fn bundled_gains_overshoot_at_most_five_percent() {
    let cfg = ControllerConfig::default();
    let r = speed_step_response(
        &cfg.speed,
        &VehicleParams::default(),
        10.0,
        30.0,
        1.0 / 90.0,
    );
    assert!(r.peak <= 10.5, "peak {}", r.peak);
    assert!(r.overshoot <= 0.05);
    assert!(r.settling_time_s.is_some_and(|t| t < 10.0));
}

#[test]
fn step_response_matches_dense_integration() {
    let cfg = ControllerConfig::default();
    let vp = VehicleParams::default();
    let dt = 1.0 / 90.0;
    let r = speed_step_response(&cfg.speed, &vp, 10.0, 20.0, dt);
    let oracle = rk4_step_response(&cfg.speed, &vp, 10.0, 20.0, dt);
    let max_dev = r
        .speed
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(max_dev < 1e-6, "max deviation {max_dev}");
    let peak = oracle.iter().copied().fold(f64::MIN, f64::max);
    assert!(((peak - 10.0) / 10.0 - r.overshoot).abs() < 1e-6);
    let last_out = oracle.iter().rposition(|v| (v - 10.0).abs() > 0.2).unwrap();
    assert!(((last_out + 2) as f64 * dt - r.settling_time_s.unwrap()).abs() < 1e-6);
}

#[test]
fn longitudinal_update_is_exact_for_constant_command() {
    // v(t) = u t - u tau (1 - e^{-t/tau}) from rest.
    let (u, tau) = (2.0, 0.25);
    let (mut v, mut a) = (0.0, 0.0);
    for _ in 0..90 {
        (v, a) = advance_longitudinal(v, a, u, 1.0 / 90.0, tau);
    }
    let exact = u * 1.0 - u * tau * (1.0 - (-1.0_f64 / tau).exp());
    assert!((v - exact).abs() < 1e-12);
    assert!((a - u * (1.0 - (-1.0_f64 / tau).exp())).abs() < 1e-12);
}

proptest! {
    #[test]
    fn commands_respect_slew_limit(errors in prop::collection::vec(-20.0..20.0f64, 2..200)) {
        let g = ControllerConfig::default().speed;
        let dt = 1.0 / 90.0;
        let mut st = PidState::default();
        let mut prev = 0.0;
        for e in errors {
            let u = pid_step(&g, &mut st, e, dt);
            prop_assert!((u - prev).abs() <= g.slew_rate * dt + 1e-12);
            prop_assert!(u >= g.out_min && u <= g.out_max);
            prev = u;
        }
    }

    #[test]
    fn tilt_is_odd_before_clamping(al in -9.0..9.0f64, at in -9.0..9.0f64) {
        let p = tilt_coordination(al, at, 90.0);
        let m = tilt_coordination(-al, -at, 90.0);
        prop_assert!((p.pitch_deg + m.pitch_deg).abs() < 1e-12);
        prop_assert!((p.roll_deg + m.roll_deg).abs() < 1e-12);
    }

    #[test]
    fn tilt_stays_within_platform_limit(al in -30.0..30.0f64, at in -30.0..30.0f64) {
        let c = tilt_coordination(al, at, 12.0);
        prop_assert!(c.pitch_deg.abs() <= 12.0 && c.roll_deg.abs() <= 12.0);
    }
}

#[test]
fn tilt_examples() {
    let z = tilt_coordination(0.0, 0.0, 12.0);
    assert_eq!((z.pitch_deg, z.roll_deg, z.clamped), (0.0, 0.0, false));
    let ten = tilt_coordination(GRAVITY * 10f64.to_radians().sin(), 0.0, 12.0);
    assert!((ten.pitch_deg - 10.0).abs() < 1e-9);
    assert!(!ten.clamped);
    let sat = tilt_coordination(GRAVITY, 0.0, 12.0);
    assert_eq!(sat.pitch_deg, 12.0);
    assert!(sat.clamped);
}

#[test]
fn follow_path_on_straight_edge() {
    let r = straight();
    let cfg = ControllerConfig::default();
    let sp = follow_path(&ego_at(100.0, 10.0), &r, &cfg, None, 0.0).unwrap();
    assert_eq!(sp.target_speed, 13.9);
    assert!(sp.target_heading.abs() < 1e-12);
    assert!(!sp.emergency);
}

#[test]
fn follow_path_hazard_cap_zero_stops() {
    let sp = follow_path(
        &ego_at(100.0, 10.0),
        &straight(),
        &ControllerConfig::default(),
        Some(0.0),
        0.0,
    )
    .unwrap();
    assert_eq!(sp.target_speed, 0.0);
}

#[test]
fn follow_path_heads_to_lookahead_point_at_corner() {
    let r = route(&[(0.0, 0.0), (100.0, 0.0), (100.0, 100.0)], 10.0);
    let cfg = ControllerConfig::default();
    let ego = EgoState::at_rest(Vec2::new(100.0, 0.0), 0.0, 5.0, 100.0);
    let sp = follow_path(&ego, &r, &cfg, None, 0.0).unwrap();
    let look = cfg.lookahead_min_m.max(cfg.lookahead_time_s * 5.0);
    let expected = look.atan2(0.0);
    assert!((sp.target_heading - expected).abs() < 1e-9);
}

#[test]
fn follow_path_reports_route_lost() {
    let mut ego = ego_at(100.0, 10.0);
    ego.lateral_error = 20.0;
    let err = follow_path(&ego, &straight(), &ControllerConfig::default(), None, 0.0).unwrap_err();
    assert!(matches!(err, ControlError::RouteLost { .. }));
}

#[test]
fn braking_envelope_slows_before_lower_limit() {
    let r = {
        let nodes = vec![
            Node {
                id: 0,
                position: Vec2::new(0.0, 0.0),
                speed_limit: 14.0,
            },
            Node {
                id: 1,
                position: Vec2::new(100.0, 0.0),
                speed_limit: 14.0,
            },
            Node {
                id: 2,
                position: Vec2::new(150.0, 0.0),
                speed_limit: 5.0,
            },
            Node {
                id: 3,
                position: Vec2::new(300.0, 0.0),
                speed_limit: 5.0,
            },
        ];
        let edges = (0..3)
            .map(|i| Edge {
                from: i,
                to: i + 1,
                lane: 0,
                section: 0,
            })
            .collect();
        RoutePath::from_network(&WaypointNetwork {
            nodes,
            edges,
            route: vec![0, 1, 2, 3],
            closed_route: false,
        })
        .unwrap()
    };
    // 20 m before the slow segment, with a 7 m margin: sqrt(25 + 2*3*13).
    let v = braking_envelope(&r, 80.0, 14.0, 3.0, 7.0);
    assert!((v - (25.0_f64 + 78.0).sqrt()).abs() < 1e-9);
    assert_eq!(braking_envelope(&r, 10.0, 5.0, 3.0, 7.0), 14.0);
}

#[test]
fn stop_line_cap_cases() {
    assert_eq!(stop_line_cap(-1.0, 10.0, 3.0, 4.5), None);
    // Needs 100 / 10 = 10 m/s^2: not stoppable.
    assert_eq!(stop_line_cap(5.0, 10.0, 3.0, 4.5), None);
    let c = stop_line_cap(50.0, 10.0, 3.0, 4.5).unwrap();
    assert!((c - 300f64.sqrt()).abs() < 1e-12);
}

#[test]
fn emergency_setpoint_brakes_through_slew() {
    let mut c = Controller::new(ControllerConfig::default());
    let ego = ego_at(0.0, 10.0);
    let sp = Setpoints {
        target_speed: 0.0,
        target_heading: 0.0,
        lateral_offset: 0.0,
        emergency: true,
    };
    let dt = 1.0 / 90.0;
    let first = c.step(&ego, &sp, dt);
    assert!((first.accel + 25.0 * dt).abs() < 1e-12);
    for _ in 0..100 {
        c.step(&ego, &sp, dt);
    }
    assert_eq!(c.last_command().accel, -8.0);
}

fn actor(id: u32, kind: ActorKind, pos: Vec2, vel: Vec2, ext: (f64, f64)) -> ActorState {
    ActorState {
        id,
        kind,
        position: pos,
        velocity: vel,
        heading: if vel.norm() > 0.0 { vel.angle() } else { 0.0 },
        extent: Extent::new(ext.0, ext.1, 1.5),
        dynamic: vel.norm() > 0.0,
        motion: if vel.norm() > 0.0 {
            Motion::Linear
        } else {
            Motion::Fixed
        },
        section: None,
    }
}

fn plan_for(ego: &EgoState, actors: &[ActorState]) -> (AvoidancePlan, Setpoints) {
    let r = straight();
    let cfg = ControllerConfig::default();
    let vp = VehicleParams::default();
    let base = follow_path(ego, &r, &cfg, None, 0.0).unwrap();
    let obstacles: Vec<_> = actors
        .iter()
        .map(|a| predict_actor(a, &r, 4.0, 0.1))
        .collect();
    let path = ego_trajectory(&r, ego, ego.speed, base.target_speed, 0.0, 4.0, 0.1, &vp);
    let model = ReactionModel::default();
    let hazards: Vec<_> = obstacles
        .iter()
        .map(|o| assess(&path, ego.speed, o, &model, 4.0))
        .collect();
    let input = AvoidanceInput {
        route: &r,
        obstacles: &obstacles,
        ego_path: &path,
        vehicle: &vp,
        plan_speed: base.target_speed,
        horizon_s: 4.0,
        sample_dt: 0.1,
    };
    (plan_avoidance(ego, &hazards, &input, &cfg, base), base)
}

#[test]
fn no_hazards_leaves_setpoints_unchanged() {
    let ego = ego_at(100.0, 13.9);
    let (plan, base) = plan_for(&ego, &[]);
    assert_eq!(plan.setpoints, base);
    assert_eq!(plan.action, AvoidanceAction::None);
}

#[test]
fn distant_obstacle_is_handled_by_slowing_down() {
    let ego = ego_at(100.0, 8.0);
    let rock = actor(
        5,
        ActorKind::StaticObject,
        Vec2::new(130.0, 0.0),
        Vec2::ZERO,
        (1.0, 1.0),
    );
    let (plan, base) = plan_for(&ego, &[rock]);
    assert_eq!(plan.action, AvoidanceAction::SpeedCap);
    assert!(plan.setpoints.target_speed < base.target_speed);
    assert!(!plan.setpoints.emergency);
}

#[test]
fn crossing_dog_triggers_swerve_away_from_its_motion() {
    // Dog entering from the right, moving left across the lane.
    let ego = ego_at(100.0, 13.9);
    let dog = actor(
        7,
        ActorKind::Dog,
        Vec2::new(125.0, -4.0),
        Vec2::new(0.0, 3.0),
        (0.9, 0.4),
    );
    let (plan, _) = plan_for(&ego, &[dog]);
    assert_eq!(plan.action, AvoidanceAction::Offset);
    assert!(plan.setpoints.lateral_offset < 0.0, "swerve to the right");
    assert!(!plan.aux_waypoints.is_empty());
}

#[test]
fn crossing_car_at_speed_forces_emergency_stop() {
    let ego = ego_at(100.0, 13.9);
    let car = actor(
        8,
        ActorKind::TrafficCar,
        Vec2::new(130.0, -20.0),
        Vec2::new(0.0, 10.0),
        (4.5, 1.8),
    );
    let (plan, _) = plan_for(&ego, &[car]);
    assert_eq!(plan.action, AvoidanceAction::EmergencyStop);
    assert!(plan.setpoints.emergency);
    assert_eq!(plan.setpoints.target_speed, 0.0);
}

#[test]
fn slow_lead_vehicle_is_followed() {
    let ego = ego_at(100.0, 13.9);
    let lead = actor(
        9,
        ActorKind::TrafficCar,
        Vec2::new(130.0, 0.0),
        Vec2::new(6.0, 0.0),
        (4.5, 1.8),
    );
    let (plan, base) = plan_for(&ego, &[lead]);
    assert_eq!(plan.action, AvoidanceAction::Follow);
    assert!(plan.setpoints.target_speed < base.target_speed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn avoidance_never_raises_target_speed(
        speed in 0.0..14.0f64,
        objs in prop::collection::vec((10.0..80.0f64, -10.0..10.0f64, -5.0..5.0f64, -5.0..5.0f64, 0..4usize), 0..6),
    ) {
        let ego = ego_at(100.0, speed);
        let kinds = [ActorKind::Dog, ActorKind::Pedestrian, ActorKind::TrafficCar, ActorKind::Ball];
        let actors: Vec<_> = objs
            .iter()
            .enumerate()
            .map(|(i, &(dx, dy, vx, vy, k))| {
                actor(10 + i as u32, kinds[k], Vec2::new(100.0 + dx, dy), Vec2::new(vx, vy), (1.0, 0.8))
            })
            .collect();
        let (plan, base) = plan_for(&ego, &actors);
        prop_assert!(plan.setpoints.target_speed <= base.target_speed);
    }
}

#[test]
fn warning_distance_feeds_stop_decision() {
    // The same 10 m/s reference value the hazard model uses.
    assert!(
        (warning_distance(10.0, &ReactionModel::default()) - (15.0 + 100.0 / 12.0)).abs() < 1e-12
    );
}

#[test]
fn advance_ego_tracks_route_progress() {
    let r = straight();
    let vp = VehicleParams::default();
    let mut ego = ego_at(10.0, 10.0);
    for _ in 0..90 {
        ego = advance_ego(&ego, ControlCommand::ZERO, &vp, &r, 1.0 / 90.0);
    }
    assert!((ego.position.x - 20.0).abs() < 1e-9);
    assert!((ego.progress_s - 20.0).abs() < 1e-9);
    assert!(ego.lateral_error.abs() < 1e-12);
}

#[test]
fn speed_never_negative_under_braking() {
    let r = straight();
    let vp = VehicleParams::default();
    let mut ego = ego_at(10.0, 1.0);
    for _ in 0..300 {
        ego = advance_ego(
            &ego,
            ControlCommand {
                accel: -8.0,
                steer: 0.0,
            },
            &vp,
            &r,
            1.0 / 90.0,
        );
        assert!(ego.speed >= 0.0);
    }
    assert_eq!(ego.speed, 0.0);
}
