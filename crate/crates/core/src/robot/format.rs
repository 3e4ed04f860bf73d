//! Plain-text robot model format.
//!
//! ```text
//! # comment
//! name panda7
//! base fixed                     # or: planar
//! base_limits -3 3 -3 3 -3.1416 3.1416   # planar only: x, y, yaw
//! link base                      # spheres on the base link
//!   sphere 0 0 0.1 0.08          # x y z radius, in the link frame
//! joint j1 revolute              # or: prismatic; starts a joint block
//!   origin 0 0 0.333 0 0 0       # x y z roll pitch yaw w.r.t. parent link
//!   axis 0 0 1
//!   limits -2.8973 2.8973
//!   sphere 0 0 -0.1 0.075
//! gripper
//!   origin 0 0 0.21 0 0 0        # tool frame w.r.t. the last link
//!   sphere 0 0 -0.07 0.04
//! grasp_exclude gripper j7       # frames ignored against a grasped object
//! inertia 1 1 1 1 1 1 1          # optional, one entry per coordinate
//! ```
//!
//! Blocks end where the next `link`, `joint` or `gripper` line begins;
//! indentation is cosmetic.

use nalgebra::{Unit, Vector3};

use super::{Frame, Joint, JointKind, LinkSphere, RobotError, RobotModel};
use crate::geom::Pose;

enum Block {
    None,
    Base,
    Joint(usize),
    Gripper,
}

fn err(line: usize, message: impl Into<String>) -> RobotError {
    RobotError::Parse {
        line,
        message: message.into(),
    }
}

fn numbers<const N: usize>(line: usize, args: &[&str]) -> Result<[f64; N], RobotError> {
    if args.len() != N {
        return Err(err(line, format!("expected {N} numbers, found {}", args.len())));
    }
    let mut out = [0.0; N];
    for (slot, a) in out.iter_mut().zip(args) {
        *slot = a
            .parse::<f64>()
            .map_err(|_| err(line, format!("`{a}` is not a number")))?;
        if !slot.is_finite() {
            return Err(err(line, format!("`{a}` is not finite")));
        }
    }
    Ok(out)
}

pub fn parse_model(text: &str) -> Result<RobotModel, RobotError> {
    let mut name = None;
    let mut mobile = false;
    let mut base_limits = None;
    let mut joints: Vec<Joint> = Vec::new();
    let mut gripper_offset = Pose::identity();
    let mut spheres = Vec::new();
    let mut exclude_names: Vec<(usize, String)> = Vec::new();
    let mut inertia = None;
    let mut block = Block::None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let (key, args) = (tokens[0], &tokens[1..]);
        match key {
            "name" => {
                let [n] = args else {
                    return Err(err(line, "`name` takes one argument"));
                };
                name = Some(n.to_string());
            }
            "base" => match args {
                ["fixed"] => mobile = false,
                ["planar"] => mobile = true,
                _ => return Err(err(line, "`base` must be `fixed` or `planar`")),
            },
            "base_limits" => {
                let v = numbers::<6>(line, args)?;
                base_limits = Some([[v[0], v[1]], [v[2], v[3]], [v[4], v[5]]]);
            }
            "link" => match args {
                ["base"] => block = Block::Base,
                _ => return Err(err(line, "only `link base` is a standalone link block")),
            },
            "joint" => {
                let [jname, kind] = args else {
                    return Err(err(line, "`joint` takes a name and a kind"));
                };
                let kind = match *kind {
                    "revolute" => JointKind::Revolute,
                    "prismatic" => JointKind::Prismatic,
                    other => return Err(err(line, format!("unknown joint kind `{other}`"))),
                };
                if joints.iter().any(|j| j.name == *jname) || *jname == "base" || *jname == "gripper" {
                    return Err(err(line, format!("duplicate frame name `{jname}`")));
                }
                joints.push(Joint {
                    name: jname.to_string(),
                    kind,
                    axis: Vector3::z_axis(),
                    origin: Pose::identity(),
                    limits: [f64::NAN, f64::NAN],
                });
                block = Block::Joint(joints.len() - 1);
            }
            "gripper" => {
                if !args.is_empty() {
                    return Err(err(line, "`gripper` takes no arguments"));
                }
                block = Block::Gripper;
            }
            "origin" => {
                let v = numbers::<6>(line, args)?;
                let pose = Pose::from_xyz_rpy([v[0], v[1], v[2]], [v[3], v[4], v[5]]);
                match block {
                    Block::Joint(i) => joints[i].origin = pose,
                    Block::Gripper => gripper_offset = pose,
                    _ => return Err(err(line, "`origin` outside a joint or gripper block")),
                }
            }
            "axis" => {
                let v = numbers::<3>(line, args)?;
                let axis = Vector3::new(v[0], v[1], v[2]);
                if axis.norm() < 1e-9 {
                    return Err(err(line, "axis must be non-zero"));
                }
                match block {
                    Block::Joint(i) => joints[i].axis = Unit::new_normalize(axis),
                    _ => return Err(err(line, "`axis` outside a joint block")),
                }
            }
            "limits" => {
                let v = numbers::<2>(line, args)?;
                if !(v[0] < v[1]) {
                    return Err(err(line, format!("limits [{}, {}] must satisfy lo < hi", v[0], v[1])));
                }
                match block {
                    Block::Joint(i) => joints[i].limits = v,
                    _ => return Err(err(line, "`limits` outside a joint block")),
                }
            }
            "sphere" => {
                let v = numbers::<4>(line, args)?;
                if !(v[3] > 0.0) {
                    return Err(err(line, "sphere radius must be > 0"));
                }
                let frame = match block {
                    Block::Base => Frame::Base,
                    Block::Joint(i) => Frame::Link(i),
                    Block::Gripper => Frame::Gripper,
                    Block::None => return Err(err(line, "`sphere` outside a link block")),
                };
                spheres.push(LinkSphere {
                    frame,
                    center: Vector3::new(v[0], v[1], v[2]),
                    radius: v[3],
                });
            }
            "grasp_exclude" => {
                exclude_names.extend(args.iter().map(|a| (line, a.to_string())));
            }
            "inertia" => {
                let values = args
                    .iter()
                    .map(|a| a.parse::<f64>().map_err(|_| err(line, format!("`{a}` is not a number"))))
                    .collect::<Result<Vec<_>, _>>()?;
                inertia = Some(values);
            }
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
    }

    let name = name.ok_or_else(|| err(0, "missing `name`"))?;
    if joints.is_empty() {
        return Err(err(0, "model has no joints"));
    }
    for j in &joints {
        if j.limits.iter().any(|v| v.is_nan()) {
            return Err(err(0, format!("joint `{}` has no limits", j.name)));
        }
    }
    let planar_base = if mobile {
        Some(base_limits.ok_or_else(|| err(0, "planar base needs `base_limits`"))?)
    } else {
        if base_limits.is_some() {
            return Err(err(0, "`base_limits` given for a fixed base"));
        }
        None
    };
    let mut grasp_exclude = Vec::new();
    for (line, n) in exclude_names {
        let frame = match n.as_str() {
            "base" => Frame::Base,
            "gripper" => Frame::Gripper,
            _ => Frame::Link(
                joints
                    .iter()
                    .position(|j| j.name == n)
                    .ok_or_else(|| err(line, format!("unknown frame `{n}`")))?,
            ),
        };
        grasp_exclude.push(frame);
    }
    if grasp_exclude.is_empty() {
        grasp_exclude.push(Frame::Gripper);
    }
    let dof = joints.len() + if mobile { 3 } else { 0 };
    let inertia = inertia.unwrap_or_else(|| vec![1.0; dof]);

    let model = RobotModel {
        name,
        mount: Pose::identity(),
        planar_base,
        joints,
        gripper_offset,
        spheres,
        grasp_exclude,
        inertia,
    };
    model.validate()?;
    Ok(model)
}
