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
//! Sampling-based planner for the MASR with learned-IK goal biasing.
//!
//! A tree of configurations grows from the start. Each iteration either
//! steers a fraction `delta` toward a random sample or, with probability
//! `p_c`, jumps straight to the IK network's answer for the goal pose. New
//! nodes pick the cheapest collision-free parent among their neighbors and
//! then offer themselves as a cheaper parent to those neighbors. Nodes that
//! reach the goal are snapped onto it and kept as terminal leaves.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{config_free, motion_free, point_segment_distance, Environment};
use crate::ik_learn::{ik_solve, IkNetwork};
use crate::ik_numeric::{ik_numeric, NrParams};
use crate::kinematics::{arm_points, cumulative_angles, fk_unchecked, Configuration, RobotModel};
use crate::motion::{cost_unchecked, Action, Path};
use crate::se2::{normalize_angle, PoseSE2};

/// Tolerance on recomputed cumulative times.
pub const TAU_TOL: f64 = 1e-9;

/// Rejections allowed before [`sample_free`] gives up.
pub const SAMPLE_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub q: Configuration,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Action from the parent; zero for the root.
    pub action: Action,
    /// Cumulative action time from the root, seconds.
    pub tau: f64,
}

/// Search tree with its goal set and the set of nodes already used for IK.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub goal_set: Vec<usize>,
    in_goal: Vec<bool>,
    ik_used: Vec<bool>,
}

impl Tree {
    pub fn new(q_init: Configuration) -> Self {
        let n = q_init.theta.len();
        Self {
            nodes: vec![TreeNode {
                q: q_init,
                parent: None,
                children: Vec::new(),
                action: Action::zero(n),
                tau: 0.0,
            }],
            goal_set: Vec::new(),
            in_goal: vec![false],
            ik_used: vec![false],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_goal(&self, v: usize) -> bool {
        self.in_goal[v]
    }

    pub fn ik_used(&self, v: usize) -> bool {
        self.ik_used[v]
    }

    pub fn mark_ik_used(&mut self, v: usize) {
        self.ik_used[v] = true;
    }

    /// Appends a node under its parent and returns its index.
    pub fn add(&mut self, node: TreeNode) -> usize {
        let idx = self.nodes.len();
        if let Some(p) = node.parent {
            self.nodes[p].children.push(idx);
        }
        self.nodes.push(node);
        self.in_goal.push(false);
        self.ik_used.push(false);
        idx
    }

    pub fn add_goal(&mut self, node: TreeNode) -> usize {
        let idx = self.add(node);
        self.in_goal[idx] = true;
        self.goal_set.push(idx);
        idx
    }

    /// Non-goal node with the cheapest action to `q`; ties go to the lowest index.
    pub fn nearest(&self, model: &RobotModel, q: &Configuration) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, v) in self.nodes.iter().enumerate() {
            if self.in_goal[i] {
                continue;
            }
            let c = cost_unchecked(model, v.q.d, &Action::between(&v.q, q));
            if c < best.0 {
                best = (c, i);
            }
        }
        best.1
    }

    /// Up to `k` non-goal nodes with the cheapest actions to `q`, cheapest first.
    pub fn near(&self, model: &RobotModel, q: &Configuration, k: usize) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.in_goal[*i])
            .map(|(i, v)| (cost_unchecked(model, v.q.d, &Action::between(&v.q, q)), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if scored.len() > k && k > 0 {
            scored.select_nth_unstable_by(k - 1, order);
        }
        scored.truncate(k);
        scored.sort_by(order);
        scored.into_iter().map(|(_, i)| i).collect()
    }

    /// Node reached from `parent` by moving to `q`.
    pub fn child_of(&self, model: &RobotModel, parent: usize, q: Configuration) -> TreeNode {
        let p = &self.nodes[parent];
        let action = Action::between(&p.q, &q);
        let tau = p.tau + cost_unchecked(model, p.q.d, &action);
        TreeNode {
            q,
            parent: Some(parent),
            children: Vec::new(),
            action,
            tau,
        }
    }

    /// Picks the cheapest collision-free parent for `v_new` among `near`,
    /// falling back to its current parent.
    pub fn connect(&self, env: &Environment, model: &RobotModel, near: &[usize], v_new: TreeNode) -> TreeNode {
        let mut best = v_new;
        for &u in near {
            if Some(u) == best.parent || self.in_goal[u] {
                continue;
            }
            let cand = self.child_of(model, u, best.q.clone());
            if cand.tau < best.tau && motion_free(env, model, &self.nodes[u].q, &cand.q) {
                best = cand;
            }
        }
        best
    }

    /// Reparents every neighbor that is reached sooner through `v_new`.
    /// Returns how many were rewired.
    pub fn rewire(&mut self, env: &Environment, model: &RobotModel, near: &[usize], v_new: usize) -> usize {
        let mut count = 0;
        for &u in near {
            if u == v_new || Some(u) == self.nodes[v_new].parent || self.in_goal[u] || u == 0 {
                continue;
            }
            let cand = self.child_of(model, v_new, self.nodes[u].q.clone());
            if cand.tau < self.nodes[u].tau && motion_free(env, model, &self.nodes[v_new].q, &cand.q) {
                let old = self.nodes[u].parent.expect("non-root node has a parent");
                self.nodes[old].children.retain(|&c| c != u);
                self.nodes[v_new].children.push(u);
                let node = &mut self.nodes[u];
                node.parent = Some(v_new);
                node.action = cand.action;
                node.tau = cand.tau;
                self.propagate_tau(model, u);
                count += 1;
            }
        }
        count
    }

    /// Recomputes cumulative times below `root`.
    fn propagate_tau(&mut self, model: &RobotModel, root: usize) {
        let mut queue: VecDeque<usize> = self.nodes[root].children.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            let p = self.nodes[v].parent.expect("child has a parent");
            let tau = self.nodes[p].tau + cost_unchecked(model, self.nodes[p].q.d, &self.nodes[v].action);
            self.nodes[v].tau = tau;
            queue.extend(self.nodes[v].children.iter().copied());
        }
    }

    /// Cheapest goal node, ties to the lowest index.
    pub fn best_goal(&self) -> Option<usize> {
        self.goal_set
            .iter()
            .copied()
            .min_by(|&a, &b| self.nodes[a].tau.total_cmp(&self.nodes[b].tau).then(a.cmp(&b)))
    }

    /// Path from the root to the cheapest goal node.
    pub fn best_path(&self) -> Option<Path> {
        let end = self.best_goal()?;
        let mut chain = vec![end];
        while let Some(p) = self.nodes[*chain.last().unwrap()].parent {
            chain.push(p);
        }
        chain.reverse();
        Some(Path {
            configurations: chain.iter().map(|&v| self.nodes[v].q.clone()).collect(),
            actions: chain[1..].iter().map(|&v| self.nodes[v].action.clone()).collect(),
            cumulative_time: chain.iter().map(|&v| self.nodes[v].tau).collect(),
        })
    }

    /// Largest gap between a stored time and the sum of action costs along its
    /// parent chain.
    pub fn tau_drift(&self, model: &RobotModel) -> f64 {
        let mut recomputed = vec![f64::NAN; self.nodes.len()];
        let mut worst: f64 = 0.0;
        for v in 0..self.nodes.len() {
            let mut chain = Vec::new();
            let mut cur = v;
            while recomputed[cur].is_nan() {
                chain.push(cur);
                match self.nodes[cur].parent {
                    Some(p) => cur = p,
                    None => {
                        recomputed[cur] = 0.0;
                        chain.pop();
                        break;
                    }
                }
            }
            for &c in chain.iter().rev() {
                let p = self.nodes[c].parent.expect("non-root");
                recomputed[c] = recomputed[p] + cost_unchecked(model, self.nodes[p].q.d, &self.nodes[c].action);
            }
            worst = worst.max((recomputed[v] - self.nodes[v].tau).abs());
        }
        worst
    }
}

/// Uniform configuration within the joint box that does not collide.
pub fn sample_free<R: Rng + ?Sized>(env: &Environment, model: &RobotModel, rng: &mut R) -> Result<Configuration> {
    for _ in 0..SAMPLE_REJECTIONS {
        let q = model.sample_configuration(rng);
        if config_free(env, model, &q) {
            return Ok(q);
        }
    }
    Err(Error::Planning(format!(
        "no free configuration in {SAMPLE_REJECTIONS} draws"
    )))
}

/// Configuration a fraction `delta` of the way from `from` to `to`.
pub fn steer(from: &Configuration, to: &Configuration, delta: f64) -> Configuration {
    Action::between(from, to).scaled(delta).apply(from)
}

/// First link whose segment lies within `e_p` of the goal position with a
/// heading within `e_phi`, and the MA position on it closest to the goal.
pub fn on_goal(model: &RobotModel, x_goal: &PoseSE2, q: &Configuration, e_p: f64, e_phi: f64) -> Option<(usize, f64)> {
    let pts = arm_points(model, &q.theta);
    let headings = cumulative_angles(&q.theta);
    let p = [x_goal.x, x_goal.y];
    for i in 0..model.n_joints() {
        let (dist, s) = point_segment_distance(p, pts[i], pts[i + 1]);
        if dist <= e_p && normalize_angle(headings[i] - x_goal.phi).abs() <= e_phi {
            return Some((i + 1, model.anchors()[i] + s));
        }
    }
    None
}

/// Snaps a goal-reaching candidate onto the goal: the MA stops at `d_goal`
/// and joints beyond it keep the parent's angles. Rejects the candidate if
/// the fixed motion collides or misses the goal tolerance.
pub fn goal_fix(
    tree: &Tree,
    env: &Environment,
    model: &RobotModel,
    v_new: &TreeNode,
    x_goal: &PoseSE2,
    e_p: f64,
    e_phi: f64,
) -> Option<TreeNode> {
    let (_, d_goal) = on_goal(model, x_goal, &v_new.q, e_p, e_phi)?;
    let parent = v_new.parent?;
    let p_theta = &tree.nodes[parent].q.theta;
    let theta = v_new
        .q
        .theta
        .iter()
        .zip(model.anchors())
        .enumerate()
        .map(|(j, (&t, &r))| if r > d_goal { p_theta[j] } else { t })
        .collect();
    let q = Configuration {
        theta,
        d: d_goal.clamp(0.0, model.total_length()),
    };
    if !fk_unchecked(model, &q).within(x_goal, e_p, e_phi) {
        return None;
    }
    if !motion_free(env, model, &tree.nodes[parent].q, &q) {
        return None;
    }
    Some(tree.child_of(model, parent, q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerParams {
    /// Iteration budget.
    pub iterations: usize,
    /// Neighbor count for connect and rewire.
    pub neighbors: usize,
    /// Probability of IK propagation.
    pub p_c: f64,
    /// Steer fraction in `(0, 1]`.
    pub delta: f64,
    /// Probability of sampling the goal configuration when `p_c == 0`.
    pub goal_bias: f64,
    pub e_p: f64,
    pub e_phi: f64,
    pub seed: u64,
    /// Full-tree consistency audit period; `None` disables it.
    pub audit_every: Option<usize>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            iterations: 12_000,
            neighbors: 7,
            p_c: 0.6,
            delta: 0.5,
            goal_bias: 0.1,
            e_p: 0.008,
            e_phi: 4f64.to_radians(),
            seed: 0,
            audit_every: cfg!(debug_assertions).then_some(500),
        }
    }
}

impl PlannerParams {
    fn validate(&self) -> Result<()> {
        for (name, p) in [("p_c", self.p_c), ("goal bias", self.goal_bias)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("{name} {p} outside [0, 1]")));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Validation(format!("steer fraction {} outside (0, 1]", self.delta)));
        }
        if self.neighbors == 0 {
            return Err(Error::Validation("neighbor count must be at least 1".into()));
        }
        if !(self.e_p > 0.0 && self.e_phi > 0.0) {
            return Err(Error::Validation("goal tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Goal pose, optionally with a configuration that reaches it.
#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    pub pose: PoseSE2,
    pub q_goal: Option<Configuration>,
}

impl Goal {
    pub fn pose(pose: PoseSE2) -> Self {
        Self { pose, q_goal: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub tree_size: usize,
    pub best_tau: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanStats {
    pub iterations: usize,
    pub tree_size: usize,
    pub ik_calls: usize,
    pub collisions: usize,
    pub rewired: usize,
    pub goal_fix_rejections: usize,
    pub first_solution_iteration: Option<usize>,
    pub goal_nodes: usize,
    /// One entry per iteration, 1-based.
    pub trace: Vec<TracePoint>,
    pub audits: usize,
    /// Largest stored-vs-recomputed time gap seen by the audits.
    pub max_tau_drift: f64,
    /// Nodes whose time grew between audits.
    pub tau_increases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub path: Option<Path>,
    pub stats: PlanStats,
    pub tree: Tree,
}

impl PlanOutcome {
    pub fn succeeded(&self) -> bool {
        self.path.is_some()
    }
}

/// Derives a goal configuration for classic goal biasing.
pub fn derive_goal_configuration(model: &RobotModel, x_goal: &PoseSE2, q_init: &Configuration, seed: u64) -> Option<Configuration> {
    let params = NrParams::default();
    ik_numeric(model, x_goal, q_init, 1000, seed ^ 0x6a09_e667_f3bc_c908, &params)
        .ok()
        .and_then(|r| r.best)
}

/// Runs the planner for `params.iterations` iterations.
///
/// Returns an outcome without a path when no node reached the goal. Errors
/// only on invalid inputs.
pub fn plan(
    env: &Environment,
    model: &RobotModel,
    q_init: &Configuration,
    goal: &Goal,
    net: Option<&IkNetwork>,
    params: &PlannerParams,
) -> Result<PlanOutcome> {
    params.validate()?;
    model.check_feasible(q_init)?;
    if !config_free(env, model, q_init) {
        return Err(Error::Planning("start configuration collides".into()));
    }
    if params.p_c > 0.0 && net.is_none() {
        return Err(Error::Config("IK biasing requested without a network".into()));
    }
    let q_goal = if params.p_c == 0.0 && params.goal_bias > 0.0 {
        goal.q_goal
            .clone()
            .or_else(|| derive_goal_configuration(model, &goal.pose, q_init, params.seed))
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut tree = Tree::new(q_init.clone());
    let mut stats = PlanStats::default();
    let mut snapshot: Vec<f64> = Vec::new();
    let mut best: Option<f64> = None;

    for iteration in 1..=params.iterations {
        let q_rand = match &q_goal {
            Some(qg) if rng.gen::<f64>() < params.goal_bias => qg.clone(),
            _ => sample_free(env, model, &mut rng)?,
        };
        let nearest = tree.nearest(model, &q_rand);
        let roll: f64 = rng.gen();
        let q_new = match net {
            Some(net) if roll < params.p_c && !tree.is_goal(nearest) && !tree.ik_used(nearest) => {
                tree.mark_ik_used(nearest);
                stats.ik_calls += 1;
                ik_solve(net, &goal.pose, &tree.nodes[nearest].q)?
            }
            _ => steer(&tree.nodes[nearest].q, &q_rand, params.delta),
        };
        if motion_free(env, model, &tree.nodes[nearest].q, &q_new) {
            let near = tree.near(model, &q_new, params.neighbors);
            let v_new = tree.connect(env, model, &near, tree.child_of(model, nearest, q_new));
            if on_goal(model, &goal.pose, &v_new.q, params.e_p, params.e_phi).is_some() {
                match goal_fix(&tree, env, model, &v_new, &goal.pose, params.e_p, params.e_phi) {
                    Some(fixed) => {
                        tree.add_goal(fixed);
                    }
                    None => stats.goal_fix_rejections += 1,
                }
            } else {
                let idx = tree.add(v_new);
                let parent = tree.nodes[idx].parent;
                let targets: Vec<usize> = near.into_iter().filter(|&u| Some(u) != parent).collect();
                stats.rewired += tree.rewire(env, model, &targets, idx);
            }
        } else {
            stats.collisions += 1;
        }

        let now = tree.best_goal().map(|g| tree.nodes[g].tau);
        if let (Some(prev), Some(cur)) = (best, now) {
            debug_assert!(cur <= prev, "best time rose from {prev} to {cur}");
        }
        if now.is_some() && stats.first_solution_iteration.is_none() {
            stats.first_solution_iteration = Some(iteration);
        }
        best = now;
        stats.trace.push(TracePoint {
            iteration,
            tree_size: tree.len(),
            best_tau: best,
        });
        if let Some(every) = params.audit_every {
            if every > 0 && iteration % every == 0 {
                audit(&tree, model, &mut snapshot, &mut stats);
            }
        }
    }
    stats.iterations = params.iterations;
    stats.tree_size = tree.len();
    stats.goal_nodes = tree.goal_set.len();
    Ok(PlanOutcome {
        path: tree.best_path(),
        stats,
        tree,
    })
}

fn audit(tree: &Tree, model: &RobotModel, snapshot: &mut Vec<f64>, stats: &mut PlanStats) {
    stats.audits += 1;
    stats.max_tau_drift = stats.max_tau_drift.max(tree.tau_drift(model));
    stats.tau_increases += snapshot
        .iter()
        .zip(&tree.nodes)
        .filter(|(old, node)| node.tau > **old + TAU_TOL)
        .count();
    *snapshot = tree.nodes.iter().map(|v| v.tau).collect();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::kinematics::forward_kinematics;
    use crate::motion::path_cost;

    fn model() -> RobotModel {
        RobotModel::reference_5r()
    }

    fn square(cx: f64, cy: f64, h: f64) -> Polygon {
        Polygon::new(vec![[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]]).unwrap()
    }

    #[test]
    fn steer_is_a_fraction_of_the_difference() {
        let m = model();
        let from = m.straight(0.0);
        let to = Configuration::new(vec![0.4, 0.0, 0.0, 0.0, 0.0], 0.8);
        let q = steer(&from, &to, 0.5);
        assert!((q.theta[0] - 0.2).abs() < 1e-15);
        assert!((q.d - 0.4).abs() < 1e-15);
        assert_eq!(steer(&from, &to, 1.0), to);
        let tree = Tree::new(from.clone());
        let node = tree.child_of(&m, 0, q.clone());
        assert!((node.tau - crate::motion::transition_cost(&m, &from, &q)).abs() < 1e-15);
    }

    #[test]
    fn nearest_prefers_cheap_ma_moves() {
        let m = model();
        let mut tree = Tree::new(m.straight(0.5));
        let far = tree.child_of(&m, 0, Configuration::new(vec![0.0; 5], 0.0));
        tree.add(far);
        let q = Configuration::new(vec![0.0; 5], 0.6);
        // 0.1 m from the root (1 s) against 0.6 m from the other node (6 s)
        assert_eq!(tree.nearest(&m, &q), 0);
        assert_eq!(tree.nearest(&m, &tree.nodes[1].q.clone()), 1);
        let mut rotated = m.straight(0.0);
        rotated.theta[0] = 0.5;
        // joint 1 rotation from d = 0.5 needs a 0.5 m trip plus 0.5 rad
        assert_eq!(tree.nearest(&m, &rotated), 1);
        assert_eq!(tree.near(&m, &rotated, 5), vec![1, 0]);
    }

    #[test]
    fn connect_takes_the_cheaper_free_parent() {
        let m = model();
        let mut tree = Tree::new(m.straight(0.8));
        let mut q_u = m.straight(0.0);
        q_u.d = 0.05;
        let mut shortcut = tree.child_of(&m, 0, q_u);
        shortcut.tau = 1.0;
        let u = tree.add(shortcut);
        let mut q_new = m.straight(0.0);
        q_new.theta[0] = 0.3;
        q_new.d = 0.0;
        let env = Environment::empty(&m);
        let via_root = tree.child_of(&m, 0, q_new.clone());
        let via_u = tree.child_of(&m, u, q_new.clone());
        assert!(via_u.tau < via_root.tau);
        let chosen = tree.connect(&env, &m, &[u], via_root.clone());
        assert_eq!(chosen.parent, Some(u));
        assert!((chosen.tau - via_u.tau).abs() < 1e-15);
        assert_eq!(tree.connect(&env, &m, &[], via_root.clone()).parent, Some(0));

        // u is nominally cheaper but its rotation sweeps through an obstacle
        let mut tree2 = Tree::new(m.straight(0.0));
        let mut far = m.straight(0.0);
        far.theta[0] = 0.6;
        let mut cheap = tree2.child_of(&m, 0, far);
        cheap.tau = 0.0;
        let u2 = tree2.add(cheap);
        let mut target = m.straight(0.0);
        target.theta[0] = 0.4;
        let blocked = Environment::new(&m, vec![square(0.7 * 0.5f64.cos(), 0.7 * 0.5f64.sin(), 0.01)]);
        assert!(config_free(&blocked, &m, &target));
        assert!(config_free(&blocked, &m, &tree2.nodes[u2].q));
        assert!(!motion_free(&blocked, &m, &tree2.nodes[u2].q, &target));
        let base = tree2.child_of(&m, 0, target.clone());
        assert!(tree2.child_of(&m, u2, target).tau < base.tau);
        assert_eq!(tree2.connect(&blocked, &m, &[u2], base.clone()).parent, Some(0));
        assert_eq!(tree2.connect(&env, &m, &[u2], base).parent, Some(u2));
    }

    #[test]
    fn rewire_lowers_times_by_the_saving() {
        let m = model();
        let env = Environment::empty(&m);
        let mut tree = Tree::new(m.straight(0.0));
        let a = tree.add(tree.child_of(&m, 0, Configuration::new(vec![0.0; 5], 0.8)));
        let mut q_u = m.straight(0.0);
        q_u.d = 0.1;
        let u = tree.add(tree.child_of(&m, a, q_u.clone()));
        let mut q_leaf = q_u.clone();
        q_leaf.d = 0.2;
        let leaf = tree.add(tree.child_of(&m, u, q_leaf));
        let before_u = tree.nodes[u].tau;
        let before_leaf = tree.nodes[leaf].tau;
        assert!((before_u - 15.0).abs() < 1e-12);
        let v = tree.add(tree.child_of(&m, 0, Configuration::new(vec![0.0; 5], 0.05)));
        assert_eq!(tree.rewire(&env, &m, &[a], v), 0);
        assert_eq!(tree.rewire(&env, &m, &[u], v), 1);
        let saving = before_u - tree.nodes[u].tau;
        assert!((saving - 14.0).abs() < 1e-12);
        assert!((before_leaf - tree.nodes[leaf].tau - saving).abs() < 1e-12);
        assert_eq!(tree.nodes[u].parent, Some(v));
        assert!(!tree.nodes[a].children.contains(&u));
        assert!(tree.tau_drift(&m) < 1e-12);
    }

    #[test]
    fn on_goal_examples() {
        let m = model();
        let q = Configuration::new(vec![0.1, -0.2, 0.3, 0.0, 0.1], 0.35);
        let x = forward_kinematics(&m, &q).unwrap();
        let (link, d) = on_goal(&m, &x, &q, 0.008, 4f64.to_radians()).unwrap();
        assert_eq!(link, 2);
        assert!((d - 0.35).abs() < 1e-12);

        let straight = m.straight(0.0);
        let off = PoseSE2::new(0.3, 0.005, 0.0);
        // link 1 ends at x = 0.2, so the point is 5 mm off link 2's midpoint
        let (link, d) = on_goal(&m, &off, &straight, 0.008, 4f64.to_radians()).unwrap();
        assert_eq!(link, 2);
        assert!((d - 0.3).abs() < 1e-12);
        let twisted = PoseSE2::new(0.3, 0.005, 10f64.to_radians());
        assert!(on_goal(&m, &twisted, &straight, 0.008, 4f64.to_radians()).is_none());
    }

    #[test]
    fn goal_fix_drops_distal_rotations() {
        let m = model();
        let env = Environment::empty(&m);
        let tree = Tree::new(m.straight(0.8));
        let goal = PoseSE2::new(0.3, 0.0, 0.0);
        let q = Configuration::new(vec![0.0, 0.0, 0.0, 0.4, -0.3], 0.3);
        let v = tree.child_of(&m, 0, q);
        let fixed = goal_fix(&tree, &env, &m, &v, &goal, 0.008, 4f64.to_radians()).unwrap();
        assert_eq!(fixed.q.theta, vec![0.0; 5]);
        assert!((fixed.q.d - 0.3).abs() < 1e-12);
        let removed = (0.4 + 0.3) / m.joint_speed();
        assert!(fixed.tau <= v.tau - removed + 1e-12);
        assert!((fixed.tau - 5.0).abs() < 1e-12);

        let exact = tree.child_of(&m, 0, Configuration::new(vec![0.0; 5], 0.3));
        assert_eq!(goal_fix(&tree, &env, &m, &exact, &goal, 0.008, 4f64.to_radians()).unwrap(), exact);
    }

    #[test]
    fn empty_environment_plan_is_sound_and_repeatable() {
        let m = model();
        let env = Environment::empty(&m);
        let q_init = m.straight(0.0);
        let target = Configuration::new(vec![0.3, -0.2, 0.1, 0.0, 0.0], 0.45);
        let goal = Goal {
            pose: forward_kinematics(&m, &target).unwrap(),
            q_goal: Some(target.clone()),
        };
        let params = PlannerParams {
            iterations: 1500,
            p_c: 0.0,
            seed: 4,
            audit_every: Some(250),
            ..PlannerParams::default()
        };
        let out = plan(&env, &m, &q_init, &goal, None, &params).unwrap();
        assert_eq!(out.stats.ik_calls, 0);
        let path = out.path.clone().expect("goal reached");
        let tau = path_cost(&m, &path).unwrap();
        assert!((tau - path.total_time()).abs() < 1e-9);
        let end = forward_kinematics(&m, path.configurations.last().unwrap()).unwrap();
        assert!(end.within(&goal.pose, params.e_p, params.e_phi));
        for w in path.configurations.windows(2) {
            assert!(motion_free(&env, &m, &w[0], &w[1]));
        }
        let direct = crate::motion::transition_cost(&m, &q_init, &target);
        assert!(tau <= 2.0 * direct, "{tau} vs direct {direct}");
        assert_eq!(out.stats.tau_increases, 0);
        assert!(out.stats.max_tau_drift < TAU_TOL);
        let mut last = f64::INFINITY;
        for t in &out.stats.trace {
            if let Some(b) = t.best_tau {
                assert!(b <= last);
                last = b;
            }
        }
        assert_eq!(plan(&env, &m, &q_init, &goal, None, &params).unwrap(), out);
    }

    #[test]
    fn enclosed_goal_fails() {
        let m = model();
        let ring = vec![
            Polygon::new(vec![[0.45, 0.45], [0.65, 0.45], [0.65, 0.47], [0.45, 0.47]]).unwrap(),
            Polygon::new(vec![[0.45, 0.63], [0.65, 0.63], [0.65, 0.65], [0.45, 0.65]]).unwrap(),
            Polygon::new(vec![[0.45, 0.47], [0.47, 0.47], [0.47, 0.63], [0.45, 0.63]]).unwrap(),
            Polygon::new(vec![[0.63, 0.47], [0.65, 0.47], [0.65, 0.63], [0.63, 0.63]]).unwrap(),
        ];
        let env = Environment::new(&m, ring);
        let goal = Goal::pose(PoseSE2::new(0.55, 0.55, 0.8));
        let params = PlannerParams {
            iterations: 300,
            p_c: 0.0,
            goal_bias: 0.0,
            seed: 1,
            ..PlannerParams::default()
        };
        let out = plan(&env, &m, &m.straight(0.0), &goal, None, &params).unwrap();
        assert!(!out.succeeded());
        assert_eq!(out.stats.trace.len(), 300);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let m = model();
        let env = Environment::empty(&m);
        let goal = Goal::pose(PoseSE2::new(0.5, 0.0, 0.0));
        let bad = PlannerParams {
            p_c: 1.5,
            ..PlannerParams::default()
        };
        assert_eq!(plan(&env, &m, &m.straight(0.0), &goal, None, &bad).unwrap_err().kind(), "validation");
        let needs_net = PlannerParams::default();
        assert_eq!(plan(&env, &m, &m.straight(0.0), &goal, None, &needs_net).unwrap_err().kind(), "config");
    }

    #[test]
    fn ik_propagation_happens_once_per_node() {
        let m = model();
        let env = Environment::empty(&m);
        let net = IkNetwork::new(&m, &[8], 2);
        let goal = Goal::pose(PoseSE2::new(0.4, 0.3, 0.9));
        let params = PlannerParams {
            iterations: 200,
            p_c: 1.0,
            seed: 9,
            ..PlannerParams::default()
        };
        let out = plan(&env, &m, &m.straight(0.0), &goal, Some(&net), &params).unwrap();
        let used = (0..out.tree.len()).filter(|&v| out.tree.ik_used(v)).count();
        assert_eq!(used, out.stats.ik_calls);
        assert!(out.stats.ik_calls < 200);
        assert!(out.tree.len() > out.stats.ik_calls);
    }
}
