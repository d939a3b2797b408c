//! Arc-length parameterised view of the ego route through the waypoint network.

use crate::geom::{project_on_segment, wrap_angle, Vec2};

use super::{NodeId, ScenarioError, WaypointNetwork};

/// Polyline through the route nodes with cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePath {
    points: Vec<Vec2>,
    cum: Vec<f64>,
    speed_limits: Vec<f64>,
    sections: Vec<u32>,
    lanes: Vec<u32>,
    closed: bool,
}

/// Where a point lies relative to the route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteProjection {
    /// Arc length of the foot point (unwrapped if a hint was supplied).
    pub s: f64,
    /// Signed offset, positive to the left of the direction of travel.
    pub lateral: f64,
}

impl RoutePath {
    pub fn from_network(net: &WaypointNetwork) -> Result<Self, ScenarioError> {
        let route = &net.route;
        if route.len() < 2 {
            return Err(ScenarioError::validation(
                "network.route",
                "route needs at least two nodes",
            ));
        }
        let mut ids: Vec<NodeId> = route.clone();
        if net.closed_route {
            ids.push(route[0]);
        }
        let mut points = Vec::with_capacity(ids.len());
        for id in &ids {
            let node = net.node(*id).ok_or_else(|| {
                ScenarioError::validation("network.route", format!("unknown node {id}"))
            })?;
            points.push(node.position);
        }
        let mut cum = vec![0.0];
        let mut speed_limits = Vec::new();
        let mut sections = Vec::new();
        let mut lanes = Vec::new();
        for w in ids.windows(2) {
            let edge = net.edge(w[0], w[1]).ok_or_else(|| {
                ScenarioError::validation("network.route", format!("no edge {} -> {}", w[0], w[1]))
            })?;
            let a = net.node(w[0]).expect("checked above");
            let b = net.node(w[1]).expect("checked above");
            let len = a.position.distance(b.position);
            if len <= 0.0 {
                return Err(ScenarioError::validation(
                    "network.route",
                    format!("zero-length edge {} -> {}", w[0], w[1]),
                ));
            }
            cum.push(cum.last().unwrap() + len);
            speed_limits.push(a.speed_limit.min(b.speed_limit));
            sections.push(edge.section);
            lanes.push(edge.lane);
        }
        Ok(Self {
            points,
            cum,
            speed_limits,
            sections,
            lanes,
            closed: net.closed_route,
        })
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn segment_count(&self) -> usize {
        self.speed_limits.len()
    }

    /// Maps an unwrapped arc length onto `[0, length]`.
    pub fn wrap_s(&self, s: f64) -> f64 {
        if self.closed {
            s.rem_euclid(self.length())
        } else {
            s.clamp(0.0, self.length())
        }
    }

    pub fn segment_at(&self, s: f64) -> usize {
        let s = self.wrap_s(s);
        match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.segment_count() - 1),
            Err(i) => (i - 1).min(self.segment_count() - 1),
        }
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let i = self.segment_at(s);
        let s = self.wrap_s(s);
        let u = (s - self.cum[i]) / (self.cum[i + 1] - self.cum[i]);
        self.points[i].lerp(self.points[i + 1], u)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let i = self.segment_at(s);
        (self.points[i + 1] - self.points[i]).angle()
    }

    /// Route point shifted laterally (positive = left).
    pub fn offset_point(&self, s: f64, lateral: f64) -> Vec2 {
        self.point_at(s) + Vec2::from_angle(self.heading_at(s)).perp() * lateral
    }

    pub fn speed_limit_at(&self, s: f64) -> f64 {
        self.speed_limits[self.segment_at(s)]
    }

    pub fn section_at(&self, s: f64) -> u32 {
        self.sections[self.segment_at(s)]
    }

    pub fn lane_at(&self, s: f64) -> u32 {
        self.lanes[self.segment_at(s)]
    }

    /// Arc length at which segment `i` starts.
    pub fn segment_start(&self, i: usize) -> f64 {
        self.cum[i]
    }

    /// Smallest speed limit over `[s, s + distance]`.
    pub fn min_speed_limit(&self, s: f64, distance: f64) -> f64 {
        let mut best = self.speed_limit_at(s);
        let end = s + distance.max(0.0);
        let mut probe = s;
        loop {
            let i = self.segment_at(probe);
            let next = probe + (self.cum[i + 1] - self.wrap_s(probe));
            if next > end || (!self.closed && i + 1 >= self.segment_count()) {
                break;
            }
            probe = next + 1e-9;
            best = best.min(self.speed_limit_at(probe));
        }
        best
    }

    /// Nearest foot point on the whole route.
    pub fn project(&self, p: Vec2) -> RouteProjection {
        self.project_window(p, 0, self.segment_count())
    }

    /// Nearest foot point, with `s` unwrapped onto the lap closest to `hint`.
    pub fn project_near(&self, p: Vec2, hint: f64) -> RouteProjection {
        let mut proj = self.project(p);
        if self.closed {
            let len = self.length();
            proj.s += ((hint - proj.s) / len).round() * len;
        }
        proj
    }

    fn project_window(&self, p: Vec2, from: usize, to: usize) -> RouteProjection {
        let mut best = (
            f64::INFINITY,
            RouteProjection {
                s: 0.0,
                lateral: 0.0,
            },
        );
        for i in from..to {
            let cand = self.project_segment(p, i);
            let foot = self.point_at_segment(i, cand.s);
            let d = foot.distance(p);
            if d < best.0 - 1e-12 {
                best = (d, cand);
            }
        }
        best.1
    }

    fn point_at_segment(&self, i: usize, s: f64) -> Vec2 {
        let u = ((s - self.cum[i]) / (self.cum[i + 1] - self.cum[i])).clamp(0.0, 1.0);
        self.points[i].lerp(self.points[i + 1], u)
    }

    fn project_segment(&self, p: Vec2, i: usize) -> RouteProjection {
        let (a, b) = (self.points[i], self.points[i + 1]);
        let u = project_on_segment(p, a, b);
        let foot = a.lerp(b, u);
        let dir = (b - a).normalized();
        let lateral = dir.cross(p - foot);
        RouteProjection {
            s: self.cum[i] + u * (self.cum[i + 1] - self.cum[i]),
            lateral,
        }
    }

    /// Samples the route between `s0` and `s1` every `step` metres, shifted by `lateral`.
    pub fn polyline(&self, s0: f64, s1: f64, lateral: f64, step: f64) -> Vec<Vec2> {
        let mut out = Vec::new();
        let mut s = s0;
        while s < s1 {
            out.push(self.offset_point(s, lateral));
            s += step;
        }
        out.push(self.offset_point(s1, lateral));
        out
    }

    /// Heading change (rad) between the route tangent at `s` and at `s + ahead`.
    pub fn heading_change(&self, s: f64, ahead: f64) -> f64 {
        wrap_angle(self.heading_at(s + ahead) - self.heading_at(s))
    }
}
