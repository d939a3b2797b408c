use super::*;
use proptest::prelude::*;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

const MINIMAL: &str = r#"
duration_s = 10.0

[network]
route = [0, 1]
nodes = [{ id = 0, x = 0.0, y = 0.0, speed_limit = 10.0 }, { id = 1, x = 200.0, y = 0.0, speed_limit = 10.0 }]
edges = [{ from = 0, to = 1 }]
"#;

fn with_actors(extra: &str) -> ScenarioDef {
    load_scenario(&format!("{MINIMAL}\n{extra}")).unwrap()
}

#[test]
fn bundled_scenario_is_twelve_minutes_with_seven_events() {
    let sc = bundled_scenario().unwrap();
    assert_eq!(sc.duration_s, 720.0);
    assert_eq!(sc.events.len(), 7);
    assert!((sc.tick_dt - 1.0 / 90.0).abs() < 1e-15);
    let order: Vec<EventId> = sc.events.iter().map(|e| e.id).collect();
    assert_eq!(
        order,
        [
            EventId::Dog,
            EventId::Ball,
            EventId::Scooter,
            EventId::Car1,
            EventId::Man1,
            EventId::Car2,
            EventId::Man2
        ]
    );
    assert!(sc
        .events
        .windows(2)
        .all(|w| w[0].trigger_time_s < w[1].trigger_time_s));
    assert!(sc.route.is_closed());
}

#[test]
fn minimal_scenario_is_valid() {
    let sc = load_scenario(MINIMAL).unwrap();
    assert_eq!(sc.duration_s, 10.0);
    assert!(sc.actors.is_empty() && sc.events.is_empty());
    assert_eq!(sc.tick_count(), 900);
    assert!(sc.require_all_events().is_err());
}

#[test]
fn trigger_after_end_is_rejected() {
    let text = BUNDLED_SCENARIO_TOML.replacen("trigger_time_s = 100.0", "trigger_time_s = 800.0", 1);
    match load_scenario(&text) {
        Err(ScenarioError::Validation { field, .. }) => {
            assert!(field.contains("trigger_time_s"), "{field}")
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn parse_errors_report_line_and_column() {
    let text = "duration_s = 10.0\n[network]\nroute = [0, 1\n";
    match load_scenario(text) {
        Err(ScenarioError::Parse { line, column, .. }) => {
            assert!(line >= 3 && column >= 1, "{line}:{column}")
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    let unknown = format!("{MINIMAL}\nbogus = 1\n");
    assert!(matches!(
        load_scenario(&unknown),
        Err(ScenarioError::Parse { .. })
    ));
}

#[test]
fn invalid_networks_and_actors_are_rejected() {
    let bad_limit = MINIMAL.replace(
        "speed_limit = 10.0 }, { id = 1",
        "speed_limit = 0.0 }, { id = 1",
    );
    assert!(matches!(
        load_scenario(&bad_limit),
        Err(ScenarioError::Validation { .. })
    ));
    let missing_edge = MINIMAL.replace(
        "edges = [{ from = 0, to = 1 }]",
        "edges = [{ from = 0, to = 7 }]",
    );
    assert!(load_scenario(&missing_edge).is_err());
    let dup =
        "[[actors]]\nid = 5\nkind = \"RoadSign\"\nxy = [1.0, 1.0]\nextent = [1.0, 1.0, 1.0]\n";
    assert!(load_scenario(&format!("{MINIMAL}\n{dup}\n{dup}")).is_err());
    let fast = "[[actors]]\nid = 5\nkind = \"TrafficCar\"\nxy = [1.0, 1.0]\nextent = [4.0, 2.0, 1.5]\nmotion = { type = \"linear\", velocity = [70.0, 0.0] }\n";
    assert!(load_scenario(&format!("{MINIMAL}\n{fast}")).is_err());
}

#[test]
fn stationary_world_is_a_fixed_point() {
    let sc = with_actors(
        "[[actors]]\nid = 3\nkind = \"StaticObject\"\nxy = [50.0, 3.0]\nextent = [1.0, 1.0, 1.0]\n\
         [[actors]]\nid = 4\nkind = \"TrafficCar\"\nat = { s = 80.0, offset = -3.0 }\nextent = [4.5, 1.8, 1.5]\n",
    );
    let w0 = WorldState::initial(&sc);
    let w1 = step_world(&w0, &sc, ControlCommand::ZERO);
    assert_eq!(w1.actors, w0.actors);
    assert_eq!(w1.ego.position, w0.ego.position);
    assert!((w1.t - (w0.t + sc.tick_dt)).abs() < 1e-15);
    assert_eq!(w1.tick, 1);
}

#[test]
fn dog_spawns_on_a_crossing_path() {
    let sc = bundled_scenario().unwrap();
    let dog = sc.event(EventId::Dog).unwrap().clone();
    let mut w = WorldState::initial(&sc);
    w.tick = (dog.trigger_time_s / sc.tick_dt).round() as u64 - 1;
    w.t = w.tick as f64 * sc.tick_dt;
    assert!(w.actor(dog.actor_id).is_none());
    let w1 = step_world(&w, &sc, ControlCommand::ZERO);
    assert!(w1.active_events.contains(&EventId::Dog));
    assert_eq!(w1.fired_events.len(), 1);
    let a = w1.actor(dog.actor_id).expect("dog spawned");
    assert_eq!(a.kind, ActorKind::Dog);
    assert!(a.dynamic);
    let fwd = Vec2::from_angle(w1.ego.heading);
    let rel = a.position - w1.ego.position;
    assert!((rel.dot(fwd) - dog.spawn_ahead_m).abs() < 1e-9);
    // Moving across the ego lane, towards the centre line.
    let lateral = a.velocity.dot(fwd.perp());
    assert!(lateral.abs() > 1.0);
    assert!(lateral * rel.dot(fwd.perp()) < 0.0);
    assert!(a.velocity.dot(fwd).abs() < 1e-9);
}

#[test]
fn event_actor_leaves_after_its_script() {
    let sc = bundled_scenario().unwrap();
    let dog = sc.event(EventId::Dog).unwrap().clone();
    let mut w = WorldState::initial(&sc);
    w.tick = (dog.trigger_time_s / sc.tick_dt).round() as u64 - 1;
    w.t = w.tick as f64 * sc.tick_dt;
    let ticks = ((dog.lifetime_s() + 0.1) / sc.tick_dt).ceil() as usize + 1;
    for _ in 0..ticks {
        w = step_world(&w, &sc, ControlCommand::ZERO);
    }
    assert!(w.actor(dog.actor_id).is_none());
    assert!(!w.active_events.contains(&EventId::Dog));
    assert_eq!(w.fired_events.len(), 1);
}

fn state_hash(sc: &ScenarioDef, ticks: usize) -> (u64, Vec<u64>) {
    let mut w = WorldState::initial(sc);
    let mut ids = Vec::new();
    let mut log = String::new();
    for k in 0..ticks {
        let u = ControlCommand {
            accel: if k < 600 { 1.5 } else { 0.0 },
            steer: 0.0,
        };
        w = step_world(&w, sc, u);
        write_state_rows(&w, &mut log);
        ids.extend(w.actors.iter().map(|a| a.id as u64));
    }
    let mut h = DefaultHasher::new();
    log.hash(&mut h);
    (h.finish(), ids)
}

#[test]
fn replay_is_bit_identical() {
    let sc = bundled_scenario().unwrap();
    let (a, ids) = state_hash(&sc, 2000);
    let (b, _) = state_hash(&sc, 2000);
    assert_eq!(a, b);
    assert!(!ids.is_empty());
}

#[test]
fn actor_ids_are_unique_and_kinds_stable() {
    let sc = bundled_scenario().unwrap();
    let mut w = WorldState::initial(&sc);
    let kinds: std::collections::BTreeMap<ActorId, ActorKind> =
        w.actors.iter().map(|a| (a.id, a.kind)).collect();
    for _ in 0..500 {
        w = step_world(&w, &sc, ControlCommand::ZERO);
        assert!(w.actors.windows(2).all(|p| p[0].id < p[1].id));
        for a in &w.actors {
            if let Some(k) = kinds.get(&a.id) {
                assert_eq!(*k, a.kind);
            }
            assert!(a.velocity.norm() <= MAX_ACTOR_SPEED);
            assert!(a.dynamic || a.velocity == Vec2::ZERO);
        }
    }
}

#[test]
fn query_examples() {
    let sc = with_actors(
        "[[actors]]\nid = 3\nkind = \"Pedestrian\"\nxy = [200.0, 0.0]\nextent = [0.5, 0.5, 1.8]\n\
         [[actors]]\nid = 4\nkind = \"TrafficCar\"\nxy = [50.0, 0.0]\nextent = [4.5, 1.8, 1.5]\n",
    );
    let w = WorldState::initial(&sc);
    let got: Vec<ActorId> = query_objects_within(&w, Vec2::ZERO, 150.0)
        .iter()
        .map(|a| a.id)
        .collect();
    assert_eq!(got, vec![4]);
    assert!(query_objects_within(&w, Vec2::ZERO, 0.0).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn query_matches_brute_force(
        pts in prop::collection::vec((-150.0..150.0f64, -150.0..150.0f64), 0..200),
        cx in -50.0..50.0f64, cy in -50.0..50.0f64, diameter in 1.0..300.0f64,
    ) {
        let sc = load_scenario(MINIMAL).unwrap();
        let mut w = WorldState::initial(&sc);
        w.actors = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ActorState {
                id: i as ActorId + 1,
                kind: ActorKind::Pedestrian,
                position: Vec2::new(x, y),
                velocity: Vec2::ZERO,
                heading: 0.0,
                extent: Extent::new(0.5, 0.5, 1.8),
                dynamic: false,
                motion: Motion::Fixed,
                section: None,
            })
            .collect();
        let center = Vec2::new(cx, cy);
        let got: Vec<ActorId> = query_objects_within(&w, center, diameter).iter().map(|a| a.id).collect();
        let mut want = Vec::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            if ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() <= diameter / 2.0 {
                want.push(i as ActorId + 1);
            }
        }
        prop_assert_eq!(got, want);
    }
}

#[test]
fn light_cycle() {
    let t = LightTiming {
        green_s: 45.0,
        yellow_s: 4.0,
        red_s: 20.0,
        offset_s: 0.0,
    };
    assert_eq!(t.phase_at(0.0), LightPhase::Green);
    assert_eq!(t.phase_at(46.0), LightPhase::Yellow);
    assert_eq!(t.phase_at(50.0), LightPhase::Red);
    assert_eq!(t.phase_at(69.0), LightPhase::Green);
}

#[test]
fn event_names_round_trip() {
    for e in EventId::ALL {
        assert_eq!(e.as_str().parse::<EventId>(), Ok(e));
    }
    assert!("Cat".parse::<EventId>().is_err());
    let risky: Vec<_> = EventId::ALL.into_iter().filter(|e| !e.is_risky()).collect();
    assert_eq!(risky, vec![EventId::Scooter, EventId::Man1]);
}
