use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::task::*;
use crate::error::NtpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Length,
    Topology,
    Semantics,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Axis, NtpError> {
        match s {
            "length" => Ok(Axis::Length),
            "topology" => Ok(Axis::Topology),
            "semantics" => Ok(Axis::Semantics),
            _ => Err(NtpError::Config(format!("unknown axis {s:?}"))),
        }
    }

    pub fn valid_for(self, family: Family) -> bool {
        matches!(
            (family, self),
            (Family::ObjectSorting, Axis::Semantics | Axis::Length)
                | (Family::BlockStacking, Axis::Semantics | Axis::Topology)
                | (Family::TableCleanup, Axis::Length | Axis::Topology)
        )
    }
}

/// Size knobs for sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub num_blocks: usize,
    /// Largest per-category count seen in training for sorting.
    pub sort_train_max: usize,
    /// Largest fork count seen in training for cleanup.
    pub cleanup_train_max_forks: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig { num_blocks: DEFAULT_BLOCKS, sort_train_max: 4, cleanup_train_max_forks: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub family: Family,
    pub axis: Axis,
    pub seen: Vec<TaskInstance>,
    pub unseen: Vec<TaskInstance>,
}

impl DatasetSplit {
    /// Seen and unseen share no task under the equivalence relevant to the
    /// axis: end configuration, or end configuration plus build order for
    /// topology splits.
    pub fn is_disjoint(&self) -> bool {
        let key = |t: &TaskInstance| match self.axis {
            Axis::Topology => t.ordered_key(),
            _ => t.canonical_key(),
        };
        let seen: HashSet<String> = self.seen.iter().map(key).collect();
        self.unseen.iter().all(|t| !seen.contains(&key(t)))
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Number of ways to split `n` labelled blocks into `k` non-empty ordered
/// towers.
pub fn lah(n: usize, k: usize) -> f64 {
    if k == 0 || k > n {
        return if n == 0 && k == 0 { 1.0 } else { 0.0 };
    }
    binomial(n as u64 - 1, k as u64 - 1) * factorial(n as u64) / factorial(k as u64)
}

/// Distinct stacking end configurations with at least one tower.
pub fn stacking_goal_count(n: usize) -> u64 {
    ((1..=n).map(|k| lah(n, k)).sum::<f64>() - 1.0).round() as u64
}

/// Uniform over end configurations; the tower build order is uniform too.
pub fn sample_stacking<R: Rng>(num_blocks: usize, rng: &mut R) -> TaskInstance {
    let weights: Vec<f64> = (1..=num_blocks).map(|k| lah(num_blocks, k)).collect();
    let total: f64 = weights.iter().sum();
    loop {
        let mut u = rng.gen::<f64>() * total;
        let mut k = num_blocks;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                k = i + 1;
                break;
            }
            u -= w;
        }
        let mut perm: Vec<usize> = (0..num_blocks).collect();
        perm.shuffle(rng);
        let mut cuts: Vec<usize> = (1..num_blocks).collect();
        cuts.shuffle(rng);
        cuts.truncate(k - 1);
        cuts.sort_unstable();
        let mut towers = Vec::new();
        let mut start = 0;
        for end in cuts.into_iter().chain(std::iter::once(num_blocks)) {
            if end - start >= 2 {
                towers.push(perm[start..end].to_vec());
            }
            start = end;
        }
        if !towers.is_empty() {
            return TaskInstance { goal: Goal::BlockStacking { num_blocks, towers } };
        }
    }
}

/// All 4^4 category-to-container maps in lexicographic order.
pub fn enumerate_sorting_mappings() -> Vec<[usize; SORT_CATEGORIES]> {
    (0..SORT_CONTAINERS.pow(SORT_CATEGORIES as u32))
        .map(|mut code| {
            let mut m = [0; SORT_CATEGORIES];
            for slot in m.iter_mut().rev() {
                *slot = code % SORT_CONTAINERS;
                code /= SORT_CONTAINERS;
            }
            m
        })
        .collect()
}

/// Four maps that together pair every category with every container once.
pub fn sorting_cover() -> Vec<[usize; SORT_CATEGORIES]> {
    (0..SORT_CONTAINERS).map(|j| std::array::from_fn(|c| (c + j) % SORT_CONTAINERS)).collect()
}

pub fn sample_sorting<R: Rng>(max_per_category: usize, rng: &mut R) -> TaskInstance {
    let mapping = std::array::from_fn(|_| rng.gen_range(0..SORT_CONTAINERS));
    let counts = std::array::from_fn(|_| rng.gen_range(1..=max_per_category));
    TaskInstance { goal: Goal::ObjectSorting { mapping, counts } }
}

pub fn sample_cleanup<R: Rng>(rng: &mut R, forks: std::ops::RangeInclusive<usize>) -> TaskInstance {
    let num_bowls = rng.gen_range(1..=CLEANUP_MAX_BOWLS);
    let num_forks = rng.gen_range(forks);
    let mut bowl_order: Vec<usize> = (0..num_bowls).collect();
    bowl_order.shuffle(rng);
    TaskInstance { goal: Goal::TableCleanup { num_bowls, num_forks, bowl_order } }
}

pub fn sample_task<R: Rng>(family: Family, cfg: &TaskConfig, rng: &mut R) -> TaskInstance {
    match family {
        Family::BlockStacking => sample_stacking(cfg.num_blocks, rng),
        Family::ObjectSorting => sample_sorting(SORT_MAX_PER_CATEGORY, rng),
        Family::TableCleanup => sample_cleanup(rng, 0..=CLEANUP_MAX_FORKS),
    }
}

/// Draws tasks until `n` distinct ones (by `key`) are collected, skipping
/// anything already in `taken`.
fn draw_distinct<R: Rng>(
    n: usize,
    taken: &mut HashSet<String>,
    key: impl Fn(&TaskInstance) -> String,
    mut draw: impl FnMut(&mut R) -> TaskInstance,
    rng: &mut R,
) -> Result<Vec<TaskInstance>, NtpError> {
    let mut out = Vec::with_capacity(n);
    let mut misses = 0;
    while out.len() < n {
        let t = draw(rng);
        if taken.insert(key(&t)) {
            out.push(t);
            misses = 0;
        } else {
            misses += 1;
            if misses > 100_000 {
                return Err(NtpError::Config(format!("only {} distinct tasks available, {n} requested", out.len())));
            }
        }
    }
    Ok(out)
}

/// Split with `n_train` seen tasks and as many unseen ones.
pub fn make_splits<R: Rng>(family: Family, axis: Axis, rng: &mut R, n_train: usize) -> Result<DatasetSplit, NtpError> {
    make_splits_with(family, axis, rng, n_train, n_train, &TaskConfig::default())
}

/// Unseen tasks are drawn before seen ones, so for a fixed rng seed the
/// unseen set does not depend on `n_train`.
pub fn make_splits_with<R: Rng>(
    family: Family,
    axis: Axis,
    rng: &mut R,
    n_train: usize,
    n_unseen: usize,
    cfg: &TaskConfig,
) -> Result<DatasetSplit, NtpError> {
    if !axis.valid_for(family) {
        return Err(NtpError::Config(format!("axis {axis:?} is not defined for {}", family.name())));
    }
    let (seen, unseen) = match (family, axis) {
        (Family::ObjectSorting, Axis::Semantics) => {
            let cover = sorting_cover();
            let counts = [1; SORT_CATEGORIES];
            let mk = |m: [usize; SORT_CATEGORIES]| TaskInstance { goal: Goal::ObjectSorting { mapping: m, counts } };
            let unseen = enumerate_sorting_mappings().into_iter().filter(|m| !cover.contains(m)).map(mk).collect();
            (cover.into_iter().map(mk).collect(), unseen)
        }
        (Family::ObjectSorting, Axis::Length) => {
            let cover = sorting_cover();
            let mk = |range: std::ops::RangeInclusive<usize>| -> Vec<TaskInstance> {
                range
                    .flat_map(|n| cover.iter().map(move |m| TaskInstance { goal: Goal::ObjectSorting { mapping: *m, counts: [n; SORT_CATEGORIES] } }))
                    .collect()
            };
            (mk(1..=cfg.sort_train_max), mk(cfg.sort_train_max + 1..=SORT_MAX_PER_CATEGORY))
        }
        (Family::BlockStacking, Axis::Semantics) => {
            let mut taken = HashSet::new();
            let n = cfg.num_blocks;
            let unseen = draw_distinct(n_unseen, &mut taken, TaskInstance::canonical_key, |r| sample_stacking(n, r), rng)?;
            let seen = draw_distinct(n_train, &mut taken, TaskInstance::canonical_key, |r| sample_stacking(n, r), rng)?;
            (seen, unseen)
        }
        (Family::BlockStacking, Axis::Topology) => {
            let n = cfg.num_blocks;
            let multi_tower = |r: &mut R| loop {
                let t = sample_stacking(n, r);
                if let Goal::BlockStacking { towers, .. } = &t.goal {
                    if towers.len() >= 2 {
                        return t;
                    }
                }
            };
            let mut taken = HashSet::new();
            let seen = draw_distinct(n_train, &mut taken, TaskInstance::canonical_key, multi_tower, rng)?;
            let unseen = seen.iter().take(n_unseen).map(|t| reorder_towers(t, rng)).collect();
            (seen, unseen)
        }
        (Family::TableCleanup, Axis::Length) => {
            let mut taken = HashSet::new();
            let hi = cfg.cleanup_train_max_forks;
            let unseen = draw_distinct(n_unseen, &mut taken, TaskInstance::ordered_key, |r| sample_cleanup(r, hi + 1..=CLEANUP_MAX_FORKS), rng)?;
            let seen = draw_distinct(n_train, &mut taken, TaskInstance::ordered_key, |r| sample_cleanup(r, 0..=hi), rng)?;
            (seen, unseen)
        }
        (Family::TableCleanup, Axis::Topology) => {
            let (seen_orders, unseen_orders) = split_bowl_orders(rng);
            let draw_from = |orders: Vec<Vec<usize>>| {
                move |r: &mut R| {
                    let order = orders.choose(r).expect("orders non-empty").clone();
                    TaskInstance {
                        goal: Goal::TableCleanup { num_bowls: order.len(), num_forks: r.gen_range(0..=CLEANUP_MAX_FORKS), bowl_order: order },
                    }
                }
            };
            let mut taken = HashSet::new();
            let unseen = draw_distinct(n_unseen, &mut taken, TaskInstance::ordered_key, draw_from(unseen_orders), rng)?;
            let seen = draw_distinct(n_train, &mut taken, TaskInstance::ordered_key, draw_from(seen_orders), rng)?;
            (seen, unseen)
        }
        _ => unreachable!("axis validity checked above"),
    };
    Ok(DatasetSplit { family, axis, seen, unseen })
}

/// Same towers, different build order.
fn reorder_towers<R: Rng>(t: &TaskInstance, rng: &mut R) -> TaskInstance {
    let Goal::BlockStacking { num_blocks, towers } = &t.goal else { unreachable!("stacking goal") };
    let mut order = towers.clone();
    while order == *towers {
        order.shuffle(rng);
    }
    TaskInstance { goal: Goal::BlockStacking { num_blocks: *num_blocks, towers: order } }
}

/// Partitions bowl nesting orders for two to four bowls into disjoint seen
/// and held-out halves.
fn split_bowl_orders<R: Rng>(rng: &mut R) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let (mut seen, mut unseen) = (Vec::new(), Vec::new());
    for nb in 2..=CLEANUP_MAX_BOWLS {
        let mut perms = permutations(nb);
        perms.shuffle(rng);
        let half = perms.len() / 2;
        unseen.extend(perms.drain(..half));
        seen.extend(perms);
    }
    (seen, unseen)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}
