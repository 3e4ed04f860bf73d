mod common;

use common::*;
use demotamp::cspace::{Body, ObjectPlacement, Space, StateId};
use demotamp::planner::{
    attempt_link, metrics, nearest_neighbor, plan, plan_with_forest, shortcut, Forest, Path, PlanError, PlanStatus,
    PlannerParams,
};
use demotamp::robot::{JointVector, RobotModel};
use demotamp::{Pose, Shape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Arm alone with one cube parked out of reach; nothing else to hit.
fn empty_space() -> Space {
    let d = demo(&[("a", upright(3.0, 0.0, 0.0))], &[]);
    Space::new(RobotModel::builtin("panda7").unwrap(), vec![], &d, &handles(&["a"], 1)).unwrap()
}

fn q(v: &[f64]) -> JointVector {
    JointVector::from_column_slice(v)
}

#[test]
fn nearest_neighbor_small_cases() {
    let a = q(&[0.5, 0.0]);
    let b = q(&[0.0, 0.7]);
    let origin = q(&[0.0, 0.0]);
    assert_eq!(nearest_neighbor(&origin, [(0, 0, &a)]), Some(0));
    assert_eq!(nearest_neighbor(&origin, [(0, 0, &b), (1, 1, &a)]), Some(1));
    assert_eq!(nearest_neighbor(&origin, [(1, 3, &a), (0, 4, &a)]), Some(4));
    assert_eq!(nearest_neighbor(&origin, [(0, 5, &a), (0, 2, &a)]), Some(2));
    assert_eq!(nearest_neighbor(&origin, std::iter::empty()), None);
}

#[test]
fn nearest_matches_exhaustive_scan_on_a_thousand_nodes() {
    let space = empty_space();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut forest = Forest::default();
    let state = space.graph.start_state();
    let mut roots = Vec::new();
    for _ in 0..5 {
        roots.push(forest.init_tree(space.sample_configuration(state, &mut rng)));
    }
    for i in 0..1000 {
        let parent = if i % 3 == 0 { roots[i % 5] } else { rng.random_range(0..forest.nodes.len()) };
        // Coarse values so exact ties happen.
        let v: Vec<f64> = (0..7).map(|_| rng.random_range(-2..=2) as f64 * 0.5).collect();
        forest.add_edge(parent, space.configuration(q(&v), state));
    }
    for _ in 0..200 {
        let target: Vec<f64> = (0..7).map(|_| rng.random_range(-2..=2) as f64 * 0.5).collect();
        let target = q(&target);
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, n) in forest.nodes.iter().enumerate() {
            let key = ((&n.config.q - &target).norm_squared(), n.tree, i);
            if best.is_none_or(|b| key.0 < b.0 || (key.0 == b.0 && (key.1, key.2) < (b.1, b.2))) {
                best = Some(key);
            }
        }
        assert_eq!(forest.nearest(&target, state, None), best.map(|b| b.2));
    }
    assert_eq!(forest.nearest(&q(&[0.0; 7]), StateId(99), None), None);
}

#[test]
fn link_with_a_single_tree_does_nothing() {
    let space = empty_space();
    let state = space.graph.start_state();
    let mut forest = Forest::default();
    let root = forest.init_tree(space.configuration(ready(), state));
    let mut other = ready();
    other[0] += 0.5;
    let child = forest.add_edge(root, space.configuration(other, state));
    assert_eq!(attempt_link(&mut forest, &space, child, 0.2), 0);
    assert_eq!(forest.nodes.len(), 2);
    assert_eq!(forest.tree_count(), 1);
}

#[test]
fn link_through_free_space_merges() {
    let space = empty_space();
    let state = space.graph.start_state();
    let mut forest = Forest::default();
    let a = forest.init_tree(space.configuration(ready(), state));
    let mut far = ready();
    far[0] += 1.0;
    far[2] -= 0.5;
    let b = forest.init_tree(space.configuration(far, state));
    assert_eq!(forest.tree_count(), 2);
    assert_eq!(attempt_link(&mut forest, &space, b, 0.2), 1);
    assert_eq!(forest.tree_count(), 1);
    assert_eq!(forest.tree_of(a), forest.tree_of(b));
    let ids = forest.path_between(a, b).unwrap();
    let path = Path { waypoints: ids.iter().map(|&i| forest.nodes[i].config.clone()).collect() };
    path.check(&space, 0.2).unwrap();
    assert!(path.len() >= 7);
}

#[test]
fn link_stops_at_a_wall() {
    let mut space = empty_space();
    let state = space.graph.start_state();
    let tcp = space.robot.gripper_pose(&ready()).unwrap().translation;
    space.furniture.push(Body {
        name: "pole".into(),
        shape: Shape::box_from_size([0.06, 0.06, 2.0]).unwrap(),
        placement: ObjectPlacement::world(Pose::from_translation(tcp.x, tcp.y, 0.0)),
    });
    let mut left = ready();
    left[0] = -1.2;
    let mut right = ready();
    right[0] = 1.2;
    assert!(space.is_free_q(&left, state) && space.is_free_q(&right, state));
    assert!(!space.is_free_q(&ready(), state));

    let mut forest = Forest::default();
    let a = forest.init_tree(space.configuration(left, state));
    let b = forest.init_tree(space.configuration(right, state));
    assert_eq!(attempt_link(&mut forest, &space, b, 0.2), 0);
    assert_eq!(forest.tree_count(), 2);
    // The walk from `a`'s tree kept its free prefix.
    assert!(forest.nodes.len() > 2);
    for n in &forest.nodes[2..] {
        assert_eq!(forest.tree_of(a), n.tree);
        assert!(space.clearance(&n.config.q, state) >= 0.0);
    }
}

fn zig_zag(space: &Space) -> Path {
    let state = space.graph.start_state();
    let mut waypoints = Vec::new();
    for i in 0..=20 {
        let mut v = ready();
        v[0] = -1.0 + 0.1 * i as f64;
        v[2] = if i % 2 == 0 { 0.0 } else { 0.15 };
        waypoints.push(space.configuration(v, state));
    }
    Path { waypoints }
}

#[test]
fn shortcut_straightens_a_zig_zag() {
    let space = empty_space();
    let path = zig_zag(&space);
    path.check(&space, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let short = shortcut(&path, 100, &mut rng, &space, 0.2);
    assert!(short.length() < path.length() - 0.5, "{} vs {}", short.length(), path.length());
    short.check(&space, 0.2).unwrap();
    assert_eq!(short.waypoints.first(), path.waypoints.first());
    assert_eq!(short.waypoints.last(), path.waypoints.last());
}

#[test]
fn shortcut_leaves_straight_lines_alone() {
    let space = empty_space();
    let state = space.graph.start_state();
    let waypoints = (0..=10)
        .map(|i| {
            let mut v = ready();
            v[0] = 0.1 * i as f64;
            space.configuration(v, state)
        })
        .collect();
    let path = Path { waypoints };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    assert_eq!(shortcut(&path, 200, &mut rng, &space, 0.2), path);
}

#[test]
fn trivial_query_is_a_single_waypoint() {
    let space = empty_space();
    let start = space.configuration(ready(), space.graph.start_state());
    let (path, report) = plan(&space, &start, &start, &PlannerParams::default()).unwrap();
    let path = path.unwrap();
    assert_eq!(report.status, PlanStatus::Success);
    assert_eq!(path.len(), 1);
    assert_eq!(metrics(&path, &report, &space.graph).grasps, 0);
}

#[test]
fn query_and_parameter_errors() {
    let space = two_cube_space();
    let good = space.configuration(ready(), space.graph.start_state());
    let goal = space.configuration(ready(), space.graph.goal_state());
    let mut bad = ready();
    bad[3] = 0.5;
    let bad = space.configuration(bad, space.graph.start_state());
    let e = plan(&space, &bad, &goal, &PlannerParams::default()).unwrap_err();
    assert!(matches!(e, PlanError::InvalidQuery { which: "start", .. }), "{e}");
    let wrong_state = space.configuration(ready(), space.graph.start_state());
    let e = plan(&space, &good, &wrong_state, &PlannerParams::default()).unwrap_err();
    assert!(matches!(e, PlanError::InvalidQuery { which: "goal", .. }), "{e}");
    for params in [
        PlannerParams { eta: 1.0, ..Default::default() },
        PlannerParams { delta: 0.0, ..Default::default() },
        PlannerParams { max_time: -1.0, ..Default::default() },
    ] {
        assert!(matches!(plan(&space, &good, &goal, &params), Err(PlanError::InvalidParams(_))));
    }
}

#[test]
fn two_cube_rearrangement_is_solved_and_reproducible() {
    let space = two_cube_space();
    let start = space.configuration(ready(), space.graph.start_state());
    let goal = space.configuration(ready(), space.graph.goal_state());
    let params = PlannerParams { seed: 3, max_time: 120.0, ..Default::default() };
    let (path, report, forest) = plan_with_forest(&space, &start, &goal, &params).unwrap();
    assert_eq!(report.status, PlanStatus::Success);
    assert_eq!(report.nodes, forest.nodes.len());
    let path = path.unwrap();
    path.check(&space, params.delta).unwrap();
    assert_eq!(path.waypoints[0], start);
    assert_eq!(path.waypoints.last().unwrap(), &goal);
    assert_eq!(path.grasp_count(&space.graph), 2);
    // Placement, grasp, placement, grasp, placement.
    let seq = path.state_sequence();
    assert_eq!(seq.len(), 5);
    assert_eq!(seq[0], space.graph.placements[0]);
    assert_eq!(seq[2], space.graph.placements[1]);
    let (again, _) = plan(&space, &start, &goal, &params).unwrap();
    assert_eq!(again.unwrap(), path);
}

#[test]
fn without_transition_trees_the_states_never_connect() {
    let space = two_cube_space();
    let start = space.configuration(ready(), space.graph.start_state());
    let goal = space.configuration(ready(), space.graph.goal_state());
    let params = PlannerParams { eta: 0.0, max_iterations: 2000, ..Default::default() };
    let (path, report) = plan(&space, &start, &goal, &params).unwrap();
    assert!(path.is_none());
    assert_eq!(report.status, PlanStatus::IterationLimit);
    assert_eq!(report.transition_samples, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shortcut_never_lengthens_and_keeps_state_changes(seed in any::<u64>(), attempts in 0usize..300) {
        let space = empty_space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = space.graph.start_state();
        let mut waypoints = vec![space.configuration(ready(), state)];
        for _ in 0..25 {
            let last = waypoints.last().unwrap().q.clone();
            let step = JointVector::from_iterator(7, (0..7).map(|_| rng.random_range(-0.07..0.07)));
            let mut next = last + step;
            space.robot.clamp_to_limits(&mut next);
            waypoints.push(space.configuration(next, state));
        }
        let path = Path { waypoints };
        prop_assume!(path.check(&space, 0.2).is_ok());
        let short = shortcut(&path, attempts, &mut rng, &space, 0.2);
        prop_assert!(short.length() <= path.length() + 1e-12);
        prop_assert!(short.check(&space, 0.2).is_ok());
        prop_assert_eq!(short.transition_indices().len(), path.transition_indices().len());
    }
}
