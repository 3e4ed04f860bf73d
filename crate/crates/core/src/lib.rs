//! Demonstration-guided task and motion planning.
//!
//! A demonstration (contact events plus object poses) is turned into a graph
//! of placement and grasp manifolds ([`cspace`]), a multi-tree RRT searches
//! that graph ([`planner`]), and an iLQR pass turns the resulting path into a
//! smooth torque trajectory ([`ocp`]).

pub mod cspace;
pub mod demo;
pub mod geom;
pub mod ocp;
pub mod planner;
pub mod robot;

pub use geom::{Pose, Shape, Twist};
