/*
Copyright 2026 The masr Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! Polygonal obstacles, their inflation by the link half-width, and
//! collision checks for configurations and motions.
//!
//! The arm is treated as a polyline of `n` segments; obstacles are grown by
//! `0.5 * w` so that a zero-width arm check is equivalent to a check of the
//! real links.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kinematics::{arm_points, Configuration, RobotModel};
use crate::motion::{expand_unchecked, Action, MotionStep};

pub type Point = [f64; 2];

/// Default angular step for sweeping a joint rotation, 0.5 deg.
pub const DEFAULT_ROTATION_RESOLUTION: f64 = 0.5 * PI / 180.0;

/// Number of vertices placed on each convex corner arc during inflation.
pub const ARC_VERTICES: usize = 8;

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test, including touching and collinear overlap.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Distance from `p` to the segment `a`-`b`, and the clamped arc-length
/// parameter of the closest point measured from `a`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> (f64, f64) {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        let ap = sub(p, a);
        return (ap[0].hypot(ap[1]), 0.0);
    }
    let len = len2.sqrt();
    let t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len;
    let s = t.clamp(0.0, len);
    let closest = [a[0] + ab[0] * s / len, a[1] + ab[1] * s / len];
    let diff = sub(p, closest);
    (diff[0].hypot(diff[1]), s)
}

/// A simple polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
    min: Point,
    max: Point,
}

impl Polygon {
    /// Validates and stores a polygon, reversing clockwise input.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Validation(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Validation("polygon vertex is not finite".into()));
        }
        let area = signed_area(&vertices);
        if area.abs() < 1e-15 {
            return Err(Error::Validation("degenerate polygon with zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                    return Err(Error::Validation("polygon is not simple".into()));
                }
            }
        }
        Ok(Self::from_ccw_unchecked(vertices))
    }

    fn from_ccw_unchecked(vertices: Vec<Point>) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for v in &vertices {
            for k in 0..2 {
                min[k] = min[k].min(v[k]);
                max[k] = max[k].max(v[k]);
            }
        }
        Self { vertices, min, max }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd point containment; boundary points may go either way.
    pub fn contains(&self, p: Point) -> bool {
        if p[0] < self.min[0] || p[0] > self.max[0] || p[1] < self.min[1] || p[1] > self.max[1] {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Segment meets the polygon: crosses an edge or has an endpoint inside.
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        if a[0].max(b[0]) < self.min[0]
            || a[0].min(b[0]) > self.max[0]
            || a[1].max(b[1]) < self.min[1]
            || a[1].min(b[1]) > self.max[1]
        {
            return false;
        }
        self.edges().any(|(c, d)| segments_intersect(a, b, c, d)) || self.contains(a) || self.contains(b)
    }

    /// Distance from a point outside the polygon to its boundary; zero inside.
    pub fn distance_to(&self, p: Point) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Outward offset by `radius`: edges pushed along their normals, convex
    /// corners rounded with [`ARC_VERTICES`] points, reflex corners mitred.
    pub fn inflate(&self, radius: f64) -> Polygon {
        if radius <= 0.0 {
            return self.clone();
        }
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n * ARC_VERTICES);
        for i in 0..n {
            let prev = self.vertices[(i + n - 1) % n];
            let v = self.vertices[i];
            let next = self.vertices[(i + 1) % n];
            let e1 = sub(v, prev);
            let e2 = sub(next, v);
            let n1 = outward_normal(e1);
            let n2 = outward_normal(e2);
            let turn = cross(e1, e2);
            if turn > 0.0 {
                let a0 = n1[1].atan2(n1[0]);
                let sweep = turn.atan2(e1[0] * e2[0] + e1[1] * e2[1]);
                for k in 0..ARC_VERTICES {
                    let a = a0 + sweep * k as f64 / (ARC_VERTICES - 1) as f64;
                    out.push([v[0] + radius * a.cos(), v[1] + radius * a.sin()]);
                }
            } else if turn < 0.0 {
                let denom = 1.0 + n1[0] * n2[0] + n1[1] * n2[1];
                out.push([
                    v[0] + radius * (n1[0] + n2[0]) / denom,
                    v[1] + radius * (n1[1] + n2[1]) / denom,
                ]);
            } else {
                out.push([v[0] + radius * n1[0], v[1] + radius * n1[1]]);
            }
        }
        Polygon::from_ccw_unchecked(out)
    }
}

fn outward_normal(e: Point) -> Point {
    let len = e[0].hypot(e[1]);
    [e[1] / len, -e[0] / len]
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

/// Obstacles and their inflated copies inside the square `[-l, l]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub obstacles: Vec<Polygon>,
    pub inflated: Vec<Polygon>,
    /// Half side of the workspace square, the arm length `l`.
    pub half_extent: f64,
}

impl Environment {
    /// Builds an environment, inflating obstacles by half the link width.
    pub fn new(model: &RobotModel, obstacles: Vec<Polygon>) -> Self {
        let env = Self {
            inflated: obstacles.clone(),
            obstacles,
            half_extent: model.total_length(),
        };
        inflate_obstacles(&env, model.link_width())
    }

    pub fn empty(model: &RobotModel) -> Self {
        Self::new(model, Vec::new())
    }
}

/// Recomputes the inflated obstacles for link width `w`.
pub fn inflate_obstacles(env: &Environment, w: f64) -> Environment {
    assert!(w >= 0.0, "link width must be nonnegative");
    Environment {
        obstacles: env.obstacles.clone(),
        inflated: env.obstacles.iter().map(|p| p.inflate(0.5 * w)).collect(),
        half_extent: env.half_extent,
    }
}

/// Outcome of a single configuration check.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigStatus {
    Free,
    /// Joint `joint` (1-based) exceeds its bound.
    JointBound { joint: usize },
    MaRange,
    /// Link `link` (1-based) touches inflated obstacle `obstacle` (0-based).
    Collision { link: usize, obstacle: usize },
}

impl ConfigStatus {
    pub fn is_free(&self) -> bool {
        matches!(self, ConfigStatus::Free)
    }
}

/// First collision of the arm links `first_link..n` (0-based) with an obstacle.
fn arm_collision(env: &Environment, model: &RobotModel, theta: &[f64], first_link: usize) -> Option<ConfigStatus> {
    if env.inflated.is_empty() {
        return None;
    }
    let pts = arm_points(model, theta);
    for link in first_link..theta.len() {
        let (a, b) = (pts[link], pts[link + 1]);
        for (k, poly) in env.inflated.iter().enumerate() {
            if poly.intersects_segment(a, b) {
                return Some(ConfigStatus::Collision { link: link + 1, obstacle: k });
            }
        }
    }
    None
}

/// Feasibility and collision status of a configuration.
pub fn check_config(env: &Environment, model: &RobotModel, q: &Configuration) -> ConfigStatus {
    if q.theta.len() != model.n_joints() {
        return ConfigStatus::JointBound { joint: 0 };
    }
    match model.check_feasible(q) {
        Ok(()) => {}
        Err(Error::JointOutOfBounds { joint, .. }) => return ConfigStatus::JointBound { joint },
        Err(_) => return ConfigStatus::MaRange,
    }
    arm_collision(env, model, &q.theta, 0).unwrap_or(ConfigStatus::Free)
}

pub fn config_free(env: &Environment, model: &RobotModel, q: &Configuration) -> bool {
    check_config(env, model, q).is_free()
}

/// Motion check with the default rotation resolution.
pub fn motion_free(env: &Environment, model: &RobotModel, q_from: &Configuration, q_to: &Configuration) -> bool {
    motion_free_with_resolution(env, model, q_from, q_to, DEFAULT_ROTATION_RESOLUTION)
}

/// Replays the motion convention between two configurations, sweeping each
/// rotation in increments of at most `resolution` radians.
pub fn motion_free_with_resolution(
    env: &Environment,
    model: &RobotModel,
    q_from: &Configuration,
    q_to: &Configuration,
    resolution: f64,
) -> bool {
    if !config_free(env, model, q_from) || !config_free(env, model, q_to) {
        return false;
    }
    let action = Action::between(q_from, q_to);
    let steps = expand_unchecked(model, q_from, &action);
    let l = model.total_length();
    let mut theta = q_from.theta.clone();
    for step in steps.steps() {
        match *step {
            MotionStep::Move { to_d, .. } => {
                if !(0.0..=l).contains(&to_d) {
                    return false;
                }
            }
            MotionStep::Rotate { joint, from_angle, to_angle } => {
                let delta = to_angle - from_angle;
                let pieces = (delta.abs() / resolution).ceil().max(1.0) as usize;
                for k in 1..=pieces {
                    theta[joint] = if k == pieces {
                        to_angle
                    } else {
                        from_angle + delta * k as f64 / pieces as f64
                    };
                    if arm_collision(env, model, &theta, joint).is_some() {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Random convex obstacles for benchmarking.
///
/// Between one and `max_obstacles` cyclic polygons with 4 to 8 vertices are
/// placed inside the workspace square, with total area at most
/// `max_coverage` of the square and clear of a disc of radius `0.05 l`
/// around the base.
pub fn random_environment(
    model: &RobotModel,
    seed: u64,
    max_obstacles: usize,
    max_coverage: f64,
) -> Result<Environment> {
    if !(max_coverage > 0.0 && max_coverage < 1.0) {
        return Err(Error::Validation(format!(
            "coverage {max_coverage} must lie in (0, 1)"
        )));
    }
    if max_obstacles == 0 {
        return Err(Error::Validation("at least one obstacle is required".into()));
    }
    const MAX_ATTEMPTS: usize = 1000;
    let l = model.total_length();
    let square = 4.0 * l * l;
    let clearance = 0.05 * l;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=max_obstacles);
    let budget = max_coverage * square * rng.gen_range(0.2..=1.0);
    let share = budget / count as f64;
    let mut polys: Vec<Polygon> = Vec::with_capacity(count);
    let mut attempts = 0;
    while polys.len() < count {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::Domain(format!(
                "could not place {count} obstacles after {MAX_ATTEMPTS} attempts"
            )));
        }
        let target = share * rng.gen_range(0.3..=1.0);
        let sides = rng.gen_range(4..=8);
        let gaps: Vec<f64> = (0..sides).map(|_| rng.gen_range(0.5..1.5)).collect();
        let total: f64 = gaps.iter().sum();
        let unit_area: f64 = 0.5 * gaps.iter().map(|g| (2.0 * PI * g / total).sin()).sum::<f64>();
        let radius = (target / unit_area).sqrt();
        if radius >= l {
            continue;
        }
        let cx = rng.gen_range(-l + radius..=l - radius);
        let cy = rng.gen_range(-l + radius..=l - radius);
        let mut angle = rng.gen_range(0.0..2.0 * PI);
        let mut vertices = Vec::with_capacity(sides);
        for g in &gaps {
            vertices.push([cx + radius * angle.cos(), cy + radius * angle.sin()]);
            angle += 2.0 * PI * g / total;
        }
        let Ok(poly) = Polygon::new(vertices) else { continue };
        if poly.distance_to([0.0, 0.0]) <= clearance {
            continue;
        }
        polys.push(poly);
    }
    debug_assert!(polys.iter().map(Polygon::area).sum::<f64>() <= max_coverage * square);
    Ok(Environment::new(model, polys))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    fn blocker() -> Polygon {
        Polygon::new(vec![[0.3, -0.05], [0.4, -0.05], [0.4, 0.05], [0.3, 0.05]]).unwrap()
    }

    #[test]
    fn polygon_validation() {
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        // bow tie
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        let cw = Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(cw.area() > 0.0);
    }

    #[test]
    fn segment_predicates() {
        assert!(segments_intersect([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]));
        assert!(!segments_intersect([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]));
        // collinear overlap and touching endpoints
        assert!(segments_intersect([0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [3.0, 0.0]));
        assert!(segments_intersect([0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 1.0]));
        assert!(!segments_intersect([0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]));
        let (d, s) = point_segment_distance([0.5, 0.3], [0.0, 0.0], [1.0, 0.0]);
        assert!((d - 0.3).abs() < 1e-15 && (s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn segment_inside_polygon_counts() {
        let sq = unit_square();
        assert!(sq.intersects_segment([0.2, 0.2], [0.4, 0.4]));
        assert!(sq.intersects_segment([-1.0, 0.5], [2.0, 0.5]));
        assert!(!sq.intersects_segment([-1.0, 1.5], [2.0, 1.5]));
    }

    #[test]
    fn inflation_offsets_edges() {
        let sq = unit_square();
        let grown = sq.inflate(0.05);
        assert!(grown.contains([-0.049, 0.5]));
        assert!(!grown.contains([-0.051, 0.5]));
        assert_eq!(grown.vertices().len(), 4 * ARC_VERTICES);
        // corner arc stays within 1e-3 of the true offset distance
        let corner = [-0.05 / 2f64.sqrt(), -0.05 / 2f64.sqrt()];
        let inner = [corner[0] * 0.98, corner[1] * 0.98];
        assert!(grown.contains(inner));
        assert!(!grown.contains([corner[0] - 1e-3, corner[1] - 1e-3]));
        for v in sq.vertices() {
            assert!(grown.contains([v[0] * 0.999 + 0.0005, v[1] * 0.999 + 0.0005]));
        }
        assert_eq!(sq.inflate(0.0), sq);
    }

    #[test]
    fn inflation_is_monotone() {
        let sq = unit_square();
        let small = sq.inflate(0.05);
        let large = sq.inflate(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5000 {
            let p = [rng.gen_range(-0.3..1.3), rng.gen_range(-0.3..1.3)];
            if small.contains(p) {
                assert!(large.contains(p), "{p:?}");
            }
            if sq.contains(p) {
                assert!(small.contains(p));
            }
        }
    }

    #[test]
    fn reflex_corner_is_mitred() {
        let l_shape = Polygon::new(vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [0.0, 2.0],
        ])
        .unwrap();
        let grown = l_shape.inflate(0.1);
        assert!(grown.contains([1.09, 1.09]));
        assert!(!grown.contains([1.11, 1.11]));
    }

    #[test]
    fn configuration_checks() {
        let m = RobotModel::reference_5r();
        let empty = Environment::empty(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert!(config_free(&empty, &m, &m.sample_configuration(&mut rng)));
        }
        let mut q = m.straight(0.0);
        q.theta[0] = m.joint_bounds()[0] + 0.01;
        assert_eq!(check_config(&empty, &m, &q), ConfigStatus::JointBound { joint: 1 });
        assert_eq!(check_config(&empty, &m, &m.straight(1.0)), ConfigStatus::MaRange);

        let env = Environment::new(&m, vec![blocker()]);
        assert_eq!(
            check_config(&env, &m, &m.straight(0.0)),
            ConfigStatus::Collision { link: 2, obstacle: 0 }
        );
    }

    #[test]
    fn sweeping_rotation_collides() {
        let m = RobotModel::reference_5r();
        // obstacle at radius 0.5, 20 deg above the x axis
        let a = 20f64.to_radians();
        let (c, s) = (a.cos(), a.sin());
        let rotate = |p: Point| [0.5 * c + p[0] * c - p[1] * s, 0.5 * s + p[0] * s + p[1] * c];
        let poly = Polygon::new(
            [[-0.05, -0.05], [0.05, -0.05], [0.05, 0.05], [-0.05, 0.05]]
                .into_iter()
                .map(rotate)
                .collect(),
        )
        .unwrap();
        let env = Environment::new(&m, vec![poly]);
        let from = m.straight(0.0);
        let mut to = m.straight(0.0);
        to.theta[0] = 40f64.to_radians();
        assert!(config_free(&env, &m, &from));
        assert!(config_free(&env, &m, &to));
        assert!(!motion_free(&env, &m, &from, &to));
        // dense sweep oracle at 0.1 deg
        let hit = (0..=400).any(|k| {
            let mut q = from.clone();
            q.theta[0] = (k as f64 * 0.1).to_radians();
            !config_free(&env, &m, &q)
        });
        assert!(hit);
    }

    #[test]
    fn motion_identity_and_empty() {
        let m = RobotModel::reference_5r();
        let empty = Environment::empty(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let a = m.sample_configuration(&mut rng);
            let b = m.sample_configuration(&mut rng);
            assert!(motion_free(&empty, &m, &a, &b));
            assert!(motion_free(&empty, &m, &a, &a));
        }
    }

    #[test]
    fn random_environment_contract() {
        let m = RobotModel::reference_5r();
        let l = m.total_length();
        for seed in 0..30 {
            let env = random_environment(&m, seed, 4, 0.3).unwrap();
            let again = random_environment(&m, seed, 4, 0.3).unwrap();
            assert_eq!(env, again);
            assert!((1..=4).contains(&env.obstacles.len()));
            let area: f64 = env.obstacles.iter().map(Polygon::area).sum();
            assert!(area <= 0.3 * 4.0 * l * l);
            for p in &env.obstacles {
                assert!((4..=8).contains(&p.vertices().len()));
                assert!(p.vertices().iter().all(|v| v[0].abs() <= l && v[1].abs() <= l));
                assert!(p.distance_to([0.0, 0.0]) > 0.05 * l);
            }
        }
        match random_environment(&m, 3, 1, 1e-6) {
            Ok(env) => {
                assert_eq!(env.obstacles.len(), 1);
                assert!(env.obstacles[0].area() <= 1e-6 * 4.0 * l * l);
            }
            Err(e) => assert_eq!(e.kind(), "domain"),
        }
        assert!(random_environment(&m, 0, 4, 1.0).is_err());
    }
}
