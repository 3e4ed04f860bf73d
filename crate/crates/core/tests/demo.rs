use std::collections::BTreeMap;

use demotamp::demo::{
    load_demonstration, save_demonstration, Contact, DemoError, ObjectId, PlanarDelta, PoseVariation, ShapeRef,
    VariationTarget,
};
use demotamp::geom::Pose;
use proptest::prelude::*;

const TWO_MOVES: &str = r#"{
  "format": "demotamp-demo/1",
  "objects": [
    {"id": "a", "shape": {"name": "cuboid", "kind": "box", "size_m": [0.05, 0.05, 0.12]}},
    {"id": "b", "shape": {"name": "ball", "kind": "sphere", "radius_m": 0.03}}
  ],
  "frames": [{"id": "table", "pose": {"translation_m": [0.5, 0, 0], "rotation_wxyz": [1, 0, 0, 0]}}],
  "events": [
    {"k": 1, "contacts": {"a": "grasp"}, "poses": {
      "a": {"frame": "table", "translation_m": [0, -0.2, 0.06], "rotation_wxyz": [1, 0, 0, 0]},
      "b": {"frame": "table", "translation_m": [0, 0.2, 0.03], "rotation_wxyz": [1, 0, 0, 0]}}},
    {"k": 2, "contacts": {"a": "release"}, "poses": {
      "a": {"frame": "table", "translation_m": [0.1, 0, 0.06], "rotation_wxyz": [0.7071067811865476, 0, 0, 0.7071067811865476]},
      "b": {"frame": "table", "translation_m": [0, 0.2, 0.03], "rotation_wxyz": [1, 0, 0, 0]}}},
    {"k": 3, "contacts": {"b": "grasp"}, "poses": {
      "a": {"frame": "table", "translation_m": [0.1, 0, 0.06], "rotation_wxyz": [0.7071067811865476, 0, 0, 0.7071067811865476]},
      "b": {"frame": "table", "translation_m": [0, 0.2, 0.03], "rotation_wxyz": [1, 0, 0, 0]}}},
    {"k": 4, "contacts": {"b": "release"}, "poses": {
      "a": {"frame": "table", "translation_m": [0.1, 0, 0.06], "rotation_wxyz": [0.7071067811865476, 0, 0, 0.7071067811865476]},
      "b": {"frame": "world", "translation_m": [0.3, 0.3, 0.03], "rotation_wxyz": [1, 0, 0, 0]}}}
  ]
}"#;

fn fixture() -> demotamp::demo::Demonstration {
    load_demonstration(TWO_MOVES.as_bytes()).unwrap()
}

fn edit(f: impl FnOnce(&mut serde_json::Value)) -> Result<demotamp::demo::Demonstration, DemoError> {
    let mut v: serde_json::Value = serde_json::from_str(TWO_MOVES).unwrap();
    f(&mut v);
    load_demonstration(v.to_string().as_bytes())
}

#[test]
fn fixture_loads_with_two_moves() {
    let d = fixture();
    assert_eq!(d.event_count(), 4);
    assert_eq!(d.release_count(), 2);
    let m = d.moves();
    assert_eq!((m[0].object.as_str(), m[0].grasp, m[0].release), ("a", 0, 1));
    assert_eq!((m[1].object.as_str(), m[1].grasp, m[1].release), ("b", 2, 3));
    // Unlisted contacts default to none.
    assert_eq!(d.events[0].contacts[&ObjectId::new("b")], Contact::None);
}

#[test]
fn save_then_load_is_identity() {
    let d = fixture();
    let text = save_demonstration(&d);
    assert_eq!(load_demonstration(text.as_bytes()).unwrap(), d);
    assert_eq!(save_demonstration(&load_demonstration(text.as_bytes()).unwrap()), text);
}

#[test]
fn empty_event_list() {
    let e = edit(|v| v["events"] = serde_json::json!([])).unwrap_err();
    assert_eq!(e, DemoError::Empty);
}

#[test]
fn malformed_json() {
    assert!(matches!(load_demonstration(b"{ not json"), Err(DemoError::Json(_))));
    let e = edit(|v| v["extra"] = serde_json::json!(1)).unwrap_err();
    assert!(matches!(e, DemoError::Json(_)));
}

#[test]
fn two_contact_changes_in_one_event() {
    let e = edit(|v| v["events"][0]["contacts"]["b"] = "grasp".into()).unwrap_err();
    assert!(matches!(e, DemoError::Simultaneous { k: 1, .. }), "{e}");
}

#[test]
fn grasp_while_holding_another_object() {
    let e = edit(|v| v["events"][1]["contacts"] = serde_json::json!({"b": "grasp"})).unwrap_err();
    assert!(matches!(e, DemoError::Simultaneous { k: 2, .. }), "{e}");
}

#[test]
fn release_without_grasp() {
    let e = edit(|v| v["events"][0]["contacts"] = serde_json::json!({"a": "release"})).unwrap_err();
    assert!(matches!(e, DemoError::Alternation { k: 1, .. }), "{e}");
}

#[test]
fn grasp_never_released() {
    let e = edit(|v| v["events"][3]["contacts"] = serde_json::json!({})).unwrap_err();
    assert!(matches!(e, DemoError::Alternation { .. }), "{e}");
}

#[test]
fn schema_violations() {
    let unknown_frame = edit(|v| v["events"][0]["poses"]["a"]["frame"] = "shelf".into()).unwrap_err();
    assert!(matches!(unknown_frame, DemoError::Schema { k: Some(1), .. }), "{unknown_frame}");
    let bad_index = edit(|v| v["events"][2]["k"] = 7.into()).unwrap_err();
    assert!(matches!(bad_index, DemoError::Schema { k: Some(7), .. }), "{bad_index}");
    let missing_pose = edit(|v| {
        v["events"][1]["poses"].as_object_mut().unwrap().remove("b");
    })
    .unwrap_err();
    assert!(matches!(missing_pose, DemoError::Schema { k: Some(2), .. }), "{missing_pose}");
    let bad_quat = edit(|v| v["events"][0]["poses"]["a"]["rotation_wxyz"] = serde_json::json!([2, 0, 0, 0])).unwrap_err();
    assert!(matches!(bad_quat, DemoError::Schema { .. }), "{bad_quat}");
    let bad_units = edit(|v| v["units"] = serde_json::json!({"length": "mm", "angle": "rad", "quaternion": "wxyz"}));
    assert!(bad_units.is_err());
    let sphere_without_radius =
        edit(|v| v["objects"][1]["shape"] = serde_json::json!({"name": "x", "kind": "sphere", "size_m": [1, 1, 1]}));
    assert!(sphere_without_radius.is_err());
}

#[test]
fn start_variation_moves_only_start_span() {
    let d = fixture();
    let a = ObjectId::new("a");
    let mut deltas = BTreeMap::new();
    deltas.insert(a.clone(), PlanarDelta { dx: 0.05, dy: -0.02, dtheta: 0.3 });
    let v = d.vary_poses(&PoseVariation { target: VariationTarget::Start, deltas }).unwrap();
    let before = d.events[0].poses[&a].pose;
    let after = v.events[0].poses[&a].pose;
    assert!((after.translation.x - before.translation.x - 0.05).abs() < 1e-15);
    assert!((after.translation.y - before.translation.y + 0.02).abs() < 1e-15);
    assert_eq!(after.translation.z, before.translation.z);
    assert!((after.rotation.angle_to(&before.rotation) - 0.3).abs() < 1e-12);
    for pos in 1..4 {
        assert_eq!(v.events[pos].poses[&a], d.events[pos].poses[&a]);
    }
}

#[test]
fn goal_variation_moves_last_release_onwards() {
    let d = fixture();
    let b = ObjectId::new("b");
    let mut deltas = BTreeMap::new();
    deltas.insert(b.clone(), PlanarDelta { dx: 0.0, dy: 0.1, dtheta: 0.0 });
    let v = d.vary_poses(&PoseVariation { target: VariationTarget::Goal, deltas }).unwrap();
    for pos in 0..3 {
        assert_eq!(v.events[pos].poses[&b], d.events[pos].poses[&b]);
    }
    assert!((v.events[3].poses[&b].pose.translation.y - 0.4).abs() < 1e-15);
}

#[test]
fn variation_errors() {
    let d = fixture();
    let mut deltas = BTreeMap::new();
    deltas.insert(ObjectId::new("zz"), PlanarDelta::default());
    let e = d.vary_poses(&PoseVariation { target: VariationTarget::Start, deltas }).unwrap_err();
    assert_eq!(e, DemoError::UnknownObject(ObjectId::new("zz")));
    let mut deltas = BTreeMap::new();
    deltas.insert(ObjectId::new("a"), PlanarDelta { dx: 0.0, dy: 0.0, dtheta: 4.0 });
    let e = d.vary_poses(&PoseVariation { target: VariationTarget::Start, deltas }).unwrap_err();
    assert_eq!(e, DemoError::AngleOutOfRange(4.0));
    assert!(d.reanchor("nowhere", Pose::identity()).is_err());
    assert!(d.swap_object(&ObjectId::new("zz"), ShapeRef::new_box("x", [0.1; 3])).is_err());
}

#[test]
fn swap_keeps_poses() {
    let d = fixture();
    let s = d.swap_object(&ObjectId::new("a"), ShapeRef::new_box("stick", [0.04, 0.04, 0.16])).unwrap();
    assert_eq!(s.events, d.events);
    assert_eq!(s.objects[&ObjectId::new("a")].name, "stick");
}

fn arb_pose() -> impl Strategy<Value = Pose> {
    (prop::array::uniform3(-2.0f64..2.0), prop::array::uniform3(-1.0f64..1.0), 0.0f64..3.1)
        .prop_map(|(t, axis, angle)| {
            let mut p = Pose::from_axis_angle(nalgebra::Vector3::new(axis[0] + 1e-3, axis[1], axis[2]), angle);
            p.translation = nalgebra::Vector3::new(t[0], t[1], t[2]);
            p
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_is_bit_exact(frame in arb_pose(), a in arb_pose(), b in arb_pose()) {
        let mut d = fixture();
        d.frames.get_mut("table").unwrap().pose = frame;
        d.events[0].poses.get_mut(&ObjectId::new("a")).unwrap().pose = a;
        d.events[3].poses.get_mut(&ObjectId::new("b")).unwrap().pose = b;
        let back = load_demonstration(save_demonstration(&d).as_bytes()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn reanchor_keeps_relative_poses(frame in arb_pose()) {
        let d = fixture();
        let r = d.reanchor("table", frame).unwrap();
        for (e0, e1) in d.events.iter().zip(&r.events) {
            for (id, p) in &e0.poses {
                // The stored relative pose is untouched, bit for bit.
                prop_assert_eq!(&e1.poses[id], p);
                if p.frame == "table" {
                    let w = r.resolve(&e1.poses[id]).unwrap().pose;
                    let rel = frame.inverse() * w;
                    prop_assert!((rel.translation - p.pose.translation).norm() < 1e-12);
                    prop_assert!(rel.rotation.angle_to(&p.pose.rotation) < 1e-9);
                }
            }
        }
    }
}
