//! Analytic signed distances between spheres and boxes.
//!
//! Sphere–sphere and sphere–box are exact. Box–box uses the separating-axis
//! test over the 15 candidate axes: penetration depth is exact, and when the
//! boxes are apart the value is the largest axis gap, which equals the true
//! distance whenever the closest features are separated along a face normal
//! and is a lower bound otherwise.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{GeomError, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Sphere { radius: f64 },
    Box { half_extents: Vector3<f64> },
}

/// Collision primitive placed relative to its owning body frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub geometry: Geometry,
    #[serde(default)]
    pub local: Pose,
}

impl Shape {
    pub fn sphere(radius: f64) -> Result<Self, GeomError> {
        let s = Self {
            geometry: Geometry::Sphere { radius },
            local: Pose::identity(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn cuboid(half_extents: Vector3<f64>) -> Result<Self, GeomError> {
        let s = Self {
            geometry: Geometry::Box { half_extents },
            local: Pose::identity(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Box from full side lengths.
    pub fn box_from_size(size: [f64; 3]) -> Result<Self, GeomError> {
        Self::cuboid(Vector3::new(size[0], size[1], size[2]) * 0.5)
    }

    pub fn with_local(mut self, local: Pose) -> Self {
        self.local = local;
        self
    }

    /// Parses a textual kind tag; only `sphere` and `box` exist.
    pub fn kind_from_tag(tag: &str) -> Result<&'static str, GeomError> {
        match tag {
            "sphere" => Ok("sphere"),
            "box" => Ok("box"),
            other => Err(GeomError::UnsupportedShape(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        match self.geometry {
            Geometry::Sphere { radius } if !(radius > 0.0 && radius.is_finite()) => {
                Err(GeomError::InvalidShape(format!("sphere radius {radius} must be > 0")))
            }
            Geometry::Box { half_extents }
                if !half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) =>
            {
                Err(GeomError::InvalidShape(format!(
                    "box half-extents {:?} must all be > 0",
                    half_extents.as_slice()
                )))
            }
            _ => Ok(()),
        }
    }

    /// Radius of a sphere centered on the local origin enclosing the shape.
    pub fn bounding_radius(&self) -> f64 {
        let r = match self.geometry {
            Geometry::Sphere { radius } => radius,
            Geometry::Box { half_extents } => half_extents.norm(),
        };
        r + self.local.translation.norm()
    }

    /// Lowest extent along world z for a shape resting upright (local z up).
    pub fn half_height(&self) -> f64 {
        match self.geometry {
            Geometry::Sphere { radius } => radius,
            Geometry::Box { half_extents } => half_extents.z,
        }
    }
}

/// Signed distance between two shapes whose owning bodies sit at `pose1` and
/// `pose2`; negative values are penetration depths.
pub fn signed_distance(s1: &Shape, pose1: &Pose, s2: &Shape, pose2: &Pose) -> f64 {
    let w1 = *pose1 * s1.local;
    let w2 = *pose2 * s2.local;
    match (&s1.geometry, &s2.geometry) {
        (Geometry::Sphere { radius: r1 }, Geometry::Sphere { radius: r2 }) => {
            sphere_sphere(&w1.translation, *r1, &w2.translation, *r2)
        }
        (Geometry::Sphere { radius }, Geometry::Box { half_extents }) => {
            sphere_box(&w1.translation, *radius, &w2, half_extents)
        }
        (Geometry::Box { half_extents }, Geometry::Sphere { radius }) => {
            sphere_box(&w2.translation, *radius, &w1, half_extents)
        }
        (Geometry::Box { half_extents: h1 }, Geometry::Box { half_extents: h2 }) => {
            box_box(&w1, h1, &w2, h2)
        }
    }
}

pub fn sphere_sphere(c1: &Vector3<f64>, r1: f64, c2: &Vector3<f64>, r2: f64) -> f64 {
    (c1 - c2).norm() - r1 - r2
}

/// Signed distance from a point to a box surface (negative inside).
pub fn point_box(point: &Vector3<f64>, box_pose: &Pose, half_extents: &Vector3<f64>) -> f64 {
    let local = box_pose.rotation.inverse_transform_vector(&(point - box_pose.translation));
    let q = local.abs() - half_extents;
    let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

pub fn sphere_box(
    center: &Vector3<f64>,
    radius: f64,
    box_pose: &Pose,
    half_extents: &Vector3<f64>,
) -> f64 {
    point_box(center, box_pose, half_extents) - radius
}

pub fn box_box(p1: &Pose, h1: &Vector3<f64>, p2: &Pose, h2: &Vector3<f64>) -> f64 {
    let r1 = p1.rotation_matrix();
    let r2 = p2.rotation_matrix();
    let a = [r1.column(0).into_owned(), r1.column(1).into_owned(), r1.column(2).into_owned()];
    let b = [r2.column(0).into_owned(), r2.column(1).into_owned(), r2.column(2).into_owned()];
    let d = p2.translation - p1.translation;

    let gap = |axis: &Vector3<f64>| -> f64 {
        let ra = h1.x * a[0].dot(axis).abs() + h1.y * a[1].dot(axis).abs() + h1.z * a[2].dot(axis).abs();
        let rb = h2.x * b[0].dot(axis).abs() + h2.y * b[1].dot(axis).abs() + h2.z * b[2].dot(axis).abs();
        d.dot(axis).abs() - ra - rb
    };

    let mut best = f64::NEG_INFINITY;
    for axis in a.iter().chain(b.iter()) {
        best = best.max(gap(axis));
    }
    for ai in &a {
        for bj in &b {
            let c = ai.cross(bj);
            let n = c.norm();
            // Parallel edges give no new axis.
            if n > 1e-9 {
                best = best.max(gap(&(c / n)));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn unit_box() -> Shape {
        Shape::cuboid(Vector3::new(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn spheres_three_meters_apart() {
        let s = Shape::sphere(1.0).unwrap();
        let d = signed_distance(&s, &Pose::identity(), &s, &Pose::from_translation(3.0, 0.0, 0.0));
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_at_box_center_is_deep() {
        let d = signed_distance(
            &Shape::sphere(1.0).unwrap(),
            &Pose::identity(),
            &unit_box(),
            &Pose::identity(),
        );
        assert!((d + 2.0).abs() < 1e-15);
    }

    #[test]
    fn small_sphere_beside_box() {
        let d = signed_distance(
            &Shape::sphere(0.5).unwrap(),
            &Pose::from_translation(2.0, 0.0, 0.0),
            &unit_box(),
            &Pose::identity(),
        );
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn box_box_face_separation_is_exact() {
        let d = signed_distance(
            &unit_box(),
            &Pose::identity(),
            &unit_box(),
            &Pose::from_translation(2.5, 0.3, -0.2),
        );
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn box_box_overlap_depth() {
        let d = signed_distance(
            &unit_box(),
            &Pose::identity(),
            &unit_box(),
            &Pose::from_translation(1.75, 0.0, 0.0),
        );
        assert!((d + 0.25).abs() < 1e-12);
    }

    #[test]
    fn box_box_rotated_edge_case_is_lower_bound() {
        // Corner-to-corner separation along the diagonal: true distance is
        // larger than any single-axis gap.
        let p2 = Pose::from_translation(3.0, 3.0, 0.0);
        let d = signed_distance(&unit_box(), &Pose::identity(), &unit_box(), &p2);
        let true_distance = (2.0f64 * 1.0f64).sqrt();
        assert!(d <= true_distance + 1e-12);
        assert!(d > 0.0);
        let rotated = Pose::from_translation(0.0, 0.0, 2.5) * Pose::from_axis_angle(Vector3::z(), FRAC_PI_4);
        let d2 = signed_distance(&unit_box(), &Pose::identity(), &unit_box(), &rotated);
        assert!((d2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn local_offset_is_applied() {
        let s = Shape::sphere(0.1).unwrap().with_local(Pose::from_translation(0.0, 0.0, 1.0));
        let d = signed_distance(&s, &Pose::identity(), &unit_box(), &Pose::identity());
        assert!((d - (-0.1)).abs() < 1e-15);
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(Shape::sphere(0.0).is_err());
        assert!(Shape::cuboid(Vector3::new(1.0, -1.0, 1.0)).is_err());
        assert!(matches!(
            Shape::kind_from_tag("capsule"),
            Err(GeomError::UnsupportedShape(_))
        ));
    }
}
