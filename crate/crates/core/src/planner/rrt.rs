//! The multi-tree RRT loop and the tree-linking routine.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::forest::Forest;
use super::{Path, PlanReport, PlanStatus, PlannerParams};
use crate::cspace::{Configuration, Space};

/// Source of transition roots: demonstrated events, or sampled placements
/// for the unguided baseline.
pub trait TransitionSampler {
    /// A pair of coincident configurations on some transition, or `None`
    /// when projection failed.
    fn sample(&mut self, space: &mut Space, rng: &mut ChaCha8Rng) -> Option<(Configuration, Configuration)>;
}

/// Walks from each other tree's nearest node toward `node` in steps of at
/// most δ, adding the free prefix to that tree and joining the trees when
/// the walk reaches `node`. Returns the number of merges.
pub fn attempt_link(forest: &mut Forest, space: &Space, node: usize, delta: f64) -> usize {
    let state = forest.nodes[node].config.state;
    let q = forest.nodes[node].config.q.clone();
    let resolution = delta / 4.0;
    let candidates = forest.nearest_per_tree(&q, state, forest.tree_of(node));
    let mut merges = 0;
    for (tree, nn) in candidates {
        if forest.tree_of(node) == forest.trees.find(tree) {
            continue;
        }
        let q_nn = forest.nodes[nn].config.q.clone();
        let n = ((&q - &q_nn).norm() / delta).ceil().max(1.0) as usize;
        let mut parent = nn;
        for i in 1..=n {
            let q_step = if i == n {
                q.clone()
            } else {
                Space::interpolate_q(&q_nn, &q, i as f64 / n as f64)
            };
            if !space.segment_is_free(&forest.nodes[parent].config.q, &q_step, state, resolution) {
                break;
            }
            if i == n {
                if forest.merge(parent, node) {
                    merges += 1;
                }
            } else {
                parent = forest.add_edge(parent, space.configuration(q_step, state));
            }
        }
    }
    merges
}

pub fn grow(
    space: &mut Space,
    sampler: &mut dyn TransitionSampler,
    start: Configuration,
    goal: Configuration,
    params: &PlannerParams,
) -> (Option<Path>, PlanReport, Forest) {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut forest = Forest::default();
    let mut report = PlanReport::new(params);

    if start == goal {
        forest.init_tree(start.clone());
        report.status = PlanStatus::Success;
        report.finish(&forest, clock);
        return (Some(Path { waypoints: vec![start] }), report, forest);
    }
    let s = forest.init_tree(start);
    let g = forest.init_tree(goal);

    loop {
        if forest.tree_of(s) == forest.tree_of(g) {
            report.status = PlanStatus::Success;
            break;
        }
        if report.iterations >= params.max_iterations {
            report.status = PlanStatus::IterationLimit;
            break;
        }
        if clock.elapsed().as_secs_f64() >= params.max_time {
            report.status = PlanStatus::Timeout;
            break;
        }
        report.iterations += 1;
        let p: f64 = rng.random();
        if p < params.eta {
            report.transition_samples += 1;
            let Some((q_from, q_to)) = sampler.sample(space, &mut rng) else {
                report.transition_failures += 1;
                continue;
            };
            if !space.is_free(&q_from) || !space.is_free(&q_to) {
                report.transition_failures += 1;
                continue;
            }
            let a = forest.init_tree(q_from);
            let b = forest.add_edge(a, q_to);
            attempt_link(&mut forest, space, a, params.delta);
            attempt_link(&mut forest, space, b, params.delta);
        } else {
            let state = forest.states[rng.random_range(0..forest.states.len())];
            let q_rand = space.uniform_q(&mut rng);
            let nn = forest
                .nearest(&q_rand, state, None)
                .expect("sampled state has nodes");
            let q_nn = &forest.nodes[nn].config.q;
            let dist = (&q_rand - q_nn).norm();
            if dist == 0.0 {
                continue;
            }
            let q_step = Space::interpolate_q(q_nn, &q_rand, (params.delta / dist).min(1.0));
            if !space.segment_is_free(q_nn, &q_step, state, params.delta / 4.0) {
                continue;
            }
            let node = forest.add_edge(nn, space.configuration(q_step, state));
            attempt_link(&mut forest, space, node, params.delta);
        }
    }
    report.finish(&forest, clock);
    let path = (report.status == PlanStatus::Success).then(|| {
        let ids = forest.path_between(s, g).expect("joined trees are connected");
        Path {
            waypoints: ids.into_iter().map(|i| forest.nodes[i].config.clone()).collect(),
        }
    });
    (path, report, forest)
}
