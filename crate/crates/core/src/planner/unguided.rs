//! Baseline without demonstration poses: transition roots come from object
//! placements drawn uniformly on declared support surfaces.

use nalgebra::{UnitQuaternion, Vector3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_query, rrt, Path, PlanError, PlanReport, PlannerParams, TransitionSampler};
use crate::cspace::{
    Configuration, Direction, Mount, ObjectId, ObjectPlacement, Space, StateId, StateManifold, Transition,
};
use crate::geom::{Geometry, Pose};

/// Rectangle `x × y` at height `height` in the frame `frame` (world pose, or
/// pose relative to `mount` when the surface rides on the robot).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRegion {
    pub name: String,
    pub mount: Mount,
    pub frame: Pose,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub height: f64,
}

impl SurfaceRegion {
    pub fn area(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])
    }

    /// A resting pose for an object with orientation `upright` (relative to
    /// the region frame), uniform in (x, y) and yaw, 1 mm above the surface.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        geometry: &Geometry,
        upright: &UnitQuaternion<f64>,
        rng: &mut R,
    ) -> ObjectPlacement {
        let yaw = rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI);
        let rotation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw) * upright;
        let lift = match geometry {
            Geometry::Sphere { radius } => *radius,
            Geometry::Box { half_extents } => {
                let r = rotation.to_rotation_matrix();
                (0..3).map(|i| r[(2, i)].abs() * half_extents[i]).sum()
            }
        };
        let x = rng.random_range(self.x[0]..=self.x[1]);
        let y = rng.random_range(self.y[0]..=self.y[1]);
        let local = Pose::new(Vector3::new(x, y, self.height + lift + 1e-3), rotation);
        ObjectPlacement {
            pose: self.frame * local,
            mount: self.mount,
        }
    }
}

/// Picks a known placement state, an object and a handle; then either grasps
/// the object where it lies or releases it. A release goes to a fresh surface
/// pose, uniform over the total surface area, or (half of the time) to the
/// pose the object has in another known placement state, which is how goal
/// poses of several objects can be met at once. Newly reached placement
/// states join the registry.
pub struct UnguidedSampler {
    regions: Vec<SurfaceRegion>,
    by_area: Option<WeightedIndex<f64>>,
    placements: Vec<StateId>,
    objects: Vec<ObjectId>,
    upright: Vec<UnitQuaternion<f64>>,
}

impl UnguidedSampler {
    pub fn new(space: &Space, regions: Vec<SurfaceRegion>) -> Self {
        let start = space.state(space.graph.start_state());
        let objects: Vec<ObjectId> = space
            .graph
            .handles
            .iter()
            .filter(|(_, hs)| !hs.is_empty())
            .map(|(id, _)| id.clone())
            .collect();
        let upright = objects
            .iter()
            .map(|id| {
                let p = start.fixed[id];
                let region_rot = regions
                    .iter()
                    .find(|r| r.mount == p.mount)
                    .map(|r| r.frame.rotation)
                    .unwrap_or_else(UnitQuaternion::identity);
                // Drop the yaw of the start orientation; keep its tilt.
                let rel = region_rot.inverse() * p.pose.rotation;
                let (_, _, yaw) = rel.euler_angles();
                UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -yaw) * rel
            })
            .collect();
        let mut placements = vec![space.graph.start_state()];
        if space.graph.goal_state() != space.graph.start_state() {
            placements.push(space.graph.goal_state());
        }
        let by_area = WeightedIndex::new(regions.iter().map(|r| r.area().max(0.0))).ok();
        Self {
            regions,
            by_area,
            placements,
            objects,
            upright,
        }
    }

    pub fn known_placements(&self) -> &[StateId] {
        &self.placements
    }
}

impl TransitionSampler for UnguidedSampler {
    fn sample(&mut self, space: &mut Space, rng: &mut ChaCha8Rng) -> Option<(Configuration, Configuration)> {
        if self.objects.is_empty() {
            return None;
        }
        let s = self.placements[rng.random_range(0..self.placements.len())];
        let oi = rng.random_range(0..self.objects.len());
        let object = self.objects[oi].clone();
        let handle = rng.random_range(0..space.graph.handles[&object].len());
        let h = space.graph.handles[&object][handle].clone();
        let grasp = space.graph.intern(StateManifold::grasp_from(space.state(s), h));
        let release = self.by_area.is_some() && rng.random_bool(0.5);
        let t = if let Some(by_area) = self.by_area.as_ref().filter(|_| release) {
            let placed = if rng.random_bool(0.5) {
                let other = self.placements[rng.random_range(0..self.placements.len())];
                space.state(other).fixed[&object]
            } else {
                let region = &self.regions[by_area.sample(rng)];
                let geometry = space.shapes[&object].geometry;
                region.sample(&geometry, &self.upright[oi], rng)
            };
            let mut fixed = space.state(s).fixed.clone();
            fixed.insert(object.clone(), placed);
            let placement = space.graph.intern(StateManifold::placement(fixed));
            Transition {
                placement,
                grasp,
                direction: Direction::Release,
                object,
                handle,
            }
        } else {
            Transition {
                placement: s,
                grasp,
                direction: Direction::Grasp,
                object,
                handle,
            }
        };
        let pair = space.sample_transition(&t, rng).ok()?;
        if release
            && !self.placements.contains(&t.placement)
            && space.is_free(&pair.0)
            && space.is_free(&pair.1)
        {
            self.placements.push(t.placement);
        }
        Some(pair)
    }
}

/// Plans with surface-sampled transitions instead of demonstrated ones. New
/// states are added to `space.graph`, so the returned path's state ids stay
/// resolvable through `space`.
pub fn plan_unguided(
    space: &mut Space,
    regions: &[SurfaceRegion],
    start: &Configuration,
    goal: &Configuration,
    params: &PlannerParams,
) -> Result<(Option<Path>, PlanReport), PlanError> {
    params.validate()?;
    check_query(space, start, goal)?;
    let mut sampler = UnguidedSampler::new(space, regions.to_vec());
    let (path, report, _) = rrt::grow(space, &mut sampler, start.clone(), goal.clone(), params);
    Ok((path, report))
}
