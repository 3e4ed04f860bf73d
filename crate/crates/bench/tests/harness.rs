use demotamp_bench::generalize::{draw, is_graspable, sample_variation, Bounds};
use demotamp_bench::harness::{run_bench, to_csv, CSV_HEADER};
use demotamp_bench::tasks::default_robot;
use demotamp_bench::{build_scene, BenchSpec, ExperimentSpec, Method, Scenario, Scene, Task};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn every_task_starts_and_ends_free() {
    for task in Task::ALL {
        let (scene, demo) = build_scene(task, default_robot(task));
        scene.validate(&demo).unwrap();
        let space = scene.space(&demo).unwrap();
        let (start, goal) = scene.query(&space);
        assert!(space.is_free(&start) && space.is_free(&goal), "{task}");
        assert_eq!(Scene::from_json(scene.to_json().as_bytes()).unwrap(), scene);
    }
}

#[test]
fn spec_parsing() {
    let one = br#"{"task": "shelf-1", "robot": "panda7", "method": "guided", "seeds": [0], "time_limit": 5}"#;
    let spec = BenchSpec::from_json(one).unwrap();
    assert_eq!(spec.experiments.len(), 1);
    assert!(spec.record_time);
    let unknown = br#"{"task": "shelf-1", "robot": "panda7", "method": "guided", "seeds": [0], "time_limit": 5, "x": 1}"#;
    assert!(BenchSpec::from_json(unknown).is_err());
    let waiter = br#"{"task": "waiter", "robot": "panda7", "method": "guided", "seeds": [0], "time_limit": 5}"#;
    assert!(BenchSpec::from_json(waiter).is_err());
    let shipped = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/specs/smoke.json")).unwrap();
    assert!(!BenchSpec::from_json(&shipped).unwrap().record_time);
}

#[test]
fn csv_rows_use_na_for_missing_values() {
    let mut spec = ExperimentSpec::new(Task::Tunnel, "panda7", Method::Unguided, vec![3], 600.0);
    spec.max_iterations = Some(50);
    let bench = BenchSpec { experiments: vec![spec], record_time: false };
    let result = run_bench(&bench);
    let csv = to_csv(&result.rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines[1], "tunnel,panda7,unguided,none,3,iteration-limit,NA,NA,NA");
    assert_eq!(result.aggregates[0].successes, 0);
}

#[test]
fn variations_stay_within_bounds_and_are_graspable() {
    let bounds = Bounds::for_task(Task::Shelf1);
    let (base_scene, base_demo) = build_scene(Task::Shelf1, "panda7");
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = sample_variation(Task::Shelf1, "panda7", Scenario::StartPose, &bounds, &mut rng).unwrap();
        assert!(v.graspable && v.draws >= 1);
        // Only the start poses move, by at most the bounds.
        let first = &v.demo.events[0];
        for (id, p) in &first.poses {
            let base = &base_demo.events[0].poses[id];
            let d = p.pose.translation - base.pose.translation;
            assert!(d.x.abs() <= bounds.start.dx[1] + 1e-12 && d.y.abs() <= bounds.start.dy[1] + 1e-12);
            assert_eq!(d.z, 0.0);
        }
        assert_eq!(v.demo.events.last(), base_demo.events.last());
        assert_eq!(v.scene.furniture, base_scene.furniture);
        let mut again = ChaCha8Rng::seed_from_u64(seed);
        assert_eq!(sample_variation(Task::Shelf1, "panda7", Scenario::StartPose, &bounds, &mut again).unwrap().demo, v.demo);
    }
}

#[test]
fn unreachable_variation_is_not_graspable() {
    let mut bounds = Bounds::for_task(Task::Shelf1);
    // Push the shelf far out of reach.
    bounds.environment = [[3.0, 3.0], [0.0, 0.0], [0.0, 0.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (scene, demo) = draw(Task::Shelf1, "panda7", Scenario::Environment, &bounds, &mut rng).unwrap();
    let space = scene.space(&demo).unwrap();
    assert!(!is_graspable(&space, &scene, &demo, &mut rng));
}
