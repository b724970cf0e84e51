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
//! Workspace pose dataset with near-uniform coverage.
//!
//! Random configurations are pushed through forward kinematics and a pose is
//! kept only if it lands in an empty cell of an occupancy grid over the upper
//! half workspace. Sampling stops once every enclosed vacancy is at most
//! `rho` cells; the result is then mirrored into the lower half.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kinematics::{fk_unchecked, RobotModel};
use crate::se2::{normalize_angle, PoseSE2};

/// Occupancy over `x in [-l, l]`, `y in [0, l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    cols: usize,
    rows: usize,
    half_extent: f64,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(cols: usize, rows: usize, half_extent: f64) -> Self {
        Self {
            cols,
            rows,
            half_extent,
            occupied: vec![false; cols * rows],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    /// Cell `(a, b)` holding position `(x, y)`, if inside the upper half extent.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let l = self.half_extent;
        if !(x >= -l && x <= l && y >= 0.0 && y <= l) {
            return None;
        }
        let dx = 2.0 * l / self.cols as f64;
        let dy = l / self.rows as f64;
        let a = (((x + l) / dx).floor() as usize).min(self.cols - 1);
        let b = ((y / dy).floor() as usize).min(self.rows - 1);
        Some((a, b))
    }

    pub fn is_occupied(&self, a: usize, b: usize) -> bool {
        self.occupied[b * self.cols + a]
    }

    pub fn set(&mut self, a: usize, b: usize, value: bool) {
        self.occupied[b * self.cols + a] = value;
    }

    /// Marks a cell, returning false if it was already taken.
    pub fn claim(&mut self, a: usize, b: usize) -> bool {
        let cell = &mut self.occupied[b * self.cols + a];
        !std::mem::replace(cell, true)
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|c| **c).count()
    }
}

/// True iff every 4-connected vacancy not touching the grid border has at
/// most `rho` cells.
pub fn density_sufficient(grid: &OccupancyGrid, rho: usize) -> bool {
    let (cols, rows) = grid.dims();
    let mut seen = vec![false; cols * rows];
    let mut queue = VecDeque::new();
    for start in 0..cols * rows {
        if seen[start] || grid.occupied[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut size = 0usize;
        let mut touches_border = false;
        while let Some(idx) = queue.pop_front() {
            size += 1;
            let (a, b) = (idx % cols, idx / cols);
            if a == 0 || b == 0 || a == cols - 1 || b == rows - 1 {
                touches_border = true;
            }
            let mut visit = |n: usize| {
                if !seen[n] && !grid.occupied[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if a > 0 {
                visit(idx - 1);
            }
            if a + 1 < cols {
                visit(idx + 1);
            }
            if b > 0 {
                visit(idx - cols);
            }
            if b + 1 < rows {
                visit(idx + cols);
            }
        }
        if !touches_border && size > rho {
            return false;
        }
    }
    true
}

/// How a dataset was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub rho: usize,
    pub seed: u64,
    pub max_samples: usize,
    pub draws: usize,
    pub upper_count: usize,
    pub density_reached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseDataset {
    pub poses: Vec<PoseSE2>,
    pub meta: DatasetMeta,
}

impl PoseDataset {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// Sampling parameters for [`generate_dataset`].
#[derive(Debug, Clone)]
pub struct DataGenConfig {
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub rho: usize,
    pub seed: u64,
    pub max_samples: usize,
    /// Draws between density checks.
    pub check_every: usize,
    pub workers: usize,
}

impl DataGenConfig {
    pub fn new(grid_cols: usize, grid_rows: usize, rho: usize, seed: u64) -> Self {
        Self {
            grid_cols,
            grid_rows,
            rho,
            seed,
            max_samples: 5_000_000,
            check_every: 50_000,
            workers: 1,
        }
    }
}

fn draw_upper_poses(model: &RobotModel, rng: &mut ChaCha8Rng, count: usize) -> Vec<PoseSE2> {
    (0..count)
        .map(|_| {
            let q = model.sample_configuration(rng);
            fk_unchecked(model, &q)
        })
        .filter(|p| p.y >= 0.0)
        .collect()
}

/// Builds the mirrored pose dataset.
///
/// With several workers each round draws a fixed share per worker from its
/// own RNG stream and merges the candidates in worker order, so the result
/// depends on `(seed, workers)` only.
pub fn generate_dataset(model: &RobotModel, cfg: &DataGenConfig) -> Result<PoseDataset> {
    if cfg.grid_cols < 10 || cfg.grid_rows < 10 {
        return Err(Error::Validation("grid needs at least 10x10 cells".into()));
    }
    if cfg.rho < 1 || cfg.workers < 1 || cfg.check_every < 1 {
        return Err(Error::Validation("rho, workers and check interval must be >= 1".into()));
    }
    let mut grid = OccupancyGrid::new(cfg.grid_cols, cfg.grid_rows, model.total_length());
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.workers)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            rng
        })
        .collect();
    let mut upper = Vec::new();
    let mut draws = 0usize;
    let mut reached = false;
    while draws < cfg.max_samples {
        let round = cfg.check_every.min(cfg.max_samples - draws);
        let per_worker = round.div_ceil(cfg.workers);
        let batches: Vec<Vec<PoseSE2>> = if cfg.workers == 1 {
            vec![draw_upper_poses(model, &mut rngs[0], round)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = rngs
                    .iter_mut()
                    .map(|rng| s.spawn(move || draw_upper_poses(model, rng, per_worker)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sampler panicked")).collect()
            })
        };
        draws += if cfg.workers == 1 { round } else { per_worker * cfg.workers };
        for pose in batches.into_iter().flatten() {
            if let Some((a, b)) = grid.cell_of(pose.x, pose.y) {
                if grid.claim(a, b) {
                    upper.push(pose);
                }
            }
        }
        if density_sufficient(&grid, cfg.rho) {
            reached = true;
            break;
        }
    }
    let meta = DatasetMeta {
        grid_cols: cfg.grid_cols,
        grid_rows: cfg.grid_rows,
        rho: cfg.rho,
        seed: cfg.seed,
        max_samples: cfg.max_samples,
        draws,
        upper_count: upper.len(),
        density_reached: reached,
    };
    mirror_dataset(&PoseDataset { poses: upper, meta })
}

/// Adds the reflection `(x, -y, -phi)` of every upper-half pose.
pub fn mirror_dataset(upper: &PoseDataset) -> Result<PoseDataset> {
    if let Some(p) = upper.poses.iter().find(|p| p.y < 0.0) {
        return Err(Error::Validation(format!(
            "pose ({}, {}) lies below the x axis",
            p.x, p.y
        )));
    }
    let mut poses = upper.poses.clone();
    for p in &upper.poses {
        let mirrored = PoseSE2::new(p.x, -p.y, normalize_angle(-p.phi));
        if mirrored.y == p.y && mirrored.phi == p.phi {
            continue;
        }
        poses.push(mirrored);
    }
    Ok(PoseDataset {
        poses,
        meta: upper.meta.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn meta() -> DatasetMeta {
        DatasetMeta {
            grid_cols: 10,
            grid_rows: 10,
            rho: 1,
            seed: 0,
            max_samples: 0,
            draws: 0,
            upper_count: 0,
            density_reached: false,
        }
    }

    fn full_grid(n: usize) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(n, n, 1.0);
        g.occupied.iter_mut().for_each(|c| *c = true);
        g
    }

    /// Reference flood fill that starts from the border instead of labelling
    /// components, then counts leftover enclosed cells per component.
    fn oracle(grid: &OccupancyGrid, rho: usize) -> bool {
        let (cols, rows) = grid.dims();
        let mut exterior = vec![false; cols * rows];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for a in 0..cols {
            for b in 0..rows {
                if (a == 0 || b == 0 || a == cols - 1 || b == rows - 1) && !grid.is_occupied(a, b) {
                    stack.push((a, b));
                }
            }
        }
        while let Some((a, b)) = stack.pop() {
            let i = b * cols + a;
            if exterior[i] || grid.is_occupied(a, b) {
                continue;
            }
            exterior[i] = true;
            if a > 0 { stack.push((a - 1, b)); }
            if a + 1 < cols { stack.push((a + 1, b)); }
            if b > 0 { stack.push((a, b - 1)); }
            if b + 1 < rows { stack.push((a, b + 1)); }
        }
        let mut label = vec![usize::MAX; cols * rows];
        let mut sizes = Vec::new();
        for start in 0..cols * rows {
            let (a0, b0) = (start % cols, start / cols);
            if exterior[start] || grid.is_occupied(a0, b0) || label[start] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let mut size = 0;
            let mut stack = vec![(a0, b0)];
            while let Some((a, b)) = stack.pop() {
                let i = b * cols + a;
                if label[i] != usize::MAX || grid.is_occupied(a, b) {
                    continue;
                }
                label[i] = id;
                size += 1;
                if a > 0 { stack.push((a - 1, b)); }
                if a + 1 < cols { stack.push((a + 1, b)); }
                if b > 0 { stack.push((a, b - 1)); }
                if b + 1 < rows { stack.push((a, b + 1)); }
            }
            sizes.push(size);
        }
        sizes.iter().all(|s| *s <= rho)
    }

    #[test]
    fn density_thresholds() {
        let g = full_grid(20);
        assert!(density_sufficient(&g, 10));

        let mut one = full_grid(20);
        one.set(5, 5, false);
        assert!(density_sufficient(&one, 10));

        let mut blob = full_grid(20);
        for a in 5..16 {
            blob.set(a, 7, false);
        }
        assert!(!density_sufficient(&blob, 10));
        assert!(density_sufficient(&blob, 11));

        let mut border = full_grid(20);
        for a in 0..12 {
            for b in 0..6 {
                border.set(a, b, false);
            }
        }
        assert!(density_sufficient(&border, 10));
    }

    #[test]
    fn density_matches_border_flood_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..200 {
            let n = 12 + trial % 9;
            let mut g = OccupancyGrid::new(n, n + 3, 1.0);
            let fill = rng.gen_range(0.5..0.95);
            for a in 0..n {
                for b in 0..n + 3 {
                    g.set(a, b, rng.gen_bool(fill));
                }
            }
            for rho in [1, 3, 10] {
                assert_eq!(density_sufficient(&g, rho), oracle(&g, rho));
            }
        }
    }

    #[test]
    fn cell_mapping() {
        let g = OccupancyGrid::new(180, 160, 0.8);
        assert_eq!(g.cell_of(-0.8, 0.0), Some((0, 0)));
        assert_eq!(g.cell_of(0.8, 0.8), Some((179, 159)));
        assert_eq!(g.cell_of(0.0, -1e-9), None);
        let dx = 1.6 / 180.0;
        assert_eq!(g.cell_of(-0.8 + 2.5 * dx, 0.0), Some((2, 0)));
    }

    #[test]
    fn mirror_examples() {
        let upper = PoseDataset {
            poses: vec![PoseSE2::new(0.3, 0.2, 10f64.to_radians())],
            meta: meta(),
        };
        let out = mirror_dataset(&upper).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.poses[1], PoseSE2::new(0.3, -0.2, -10f64.to_radians()));

        let selfie = PoseDataset {
            poses: vec![PoseSE2::new(0.5, 0.0, 0.0)],
            meta: meta(),
        };
        assert_eq!(mirror_dataset(&selfie).unwrap().len(), 1);

        let bad = PoseDataset {
            poses: vec![PoseSE2::new(0.5, -0.1, 0.0)],
            meta: meta(),
        };
        assert!(mirror_dataset(&bad).is_err());
    }

    #[test]
    fn mirror_count_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let poses: Vec<PoseSE2> = (0..rng.gen_range(1..40))
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        PoseSE2::new(rng.gen_range(-1.0..1.0), 0.0, 0.0)
                    } else {
                        PoseSE2::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(-3.0..3.0))
                    }
                })
                .collect();
            let self_mirrored = poses.iter().filter(|p| p.y == 0.0 && p.phi == 0.0).count();
            let n = poses.len();
            let out = mirror_dataset(&PoseDataset { poses, meta: meta() }).unwrap();
            assert_eq!(out.len(), 2 * n - self_mirrored);
        }
    }

    #[test]
    fn small_dataset_invariants() {
        let m = RobotModel::reference_5r();
        let mut cfg = DataGenConfig::new(40, 30, 10, 7);
        cfg.max_samples = 200_000;
        cfg.check_every = 20_000;
        let ds = generate_dataset(&m, &cfg).unwrap();
        assert_eq!(ds.len(), 2 * ds.meta.upper_count);
        let grid_probe = OccupancyGrid::new(40, 30, m.total_length());
        let mut seen = std::collections::HashSet::new();
        for p in &ds.poses[..ds.meta.upper_count] {
            assert!(seen.insert(grid_probe.cell_of(p.x, p.y).unwrap()));
        }
        let again = generate_dataset(&m, &cfg).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn parallel_workers_are_deterministic() {
        let m = RobotModel::reference_5r();
        let mut cfg = DataGenConfig::new(30, 20, 10, 11);
        cfg.max_samples = 60_000;
        cfg.check_every = 10_000;
        cfg.workers = 3;
        let a = generate_dataset(&m, &cfg).unwrap();
        let b = generate_dataset(&m, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_link_reachability() {
        let m = RobotModel::new(vec![0.5], vec![1.2], 0.1, 0.28, 0.0).unwrap();
        let mut cfg = DataGenConfig::new(20, 10, 5, 1);
        cfg.max_samples = 50_000;
        cfg.check_every = 10_000;
        let ds = generate_dataset(&m, &cfg).unwrap();
        assert!(!ds.is_empty());
        assert!(ds.poses.iter().all(|p| p.x * p.x + p.y * p.y <= 0.25 + 1e-9));
    }
}
