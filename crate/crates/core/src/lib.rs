//! Grasp planning toolkit for cluttered bin picking.
//!
//! The crate is organized around a single pipeline: multi-channel grasp
//! affordance maps are reduced to a grasp selection, the selection is
//! refined against the bin geometry so the gripper does not hit walls or
//! corners, and the result is emitted as an executable primitive sequence
//! for a suction/finger gripper with a reciprocating cup and reconfigurable
//! fingers. A deterministic headless simulator closes the loop for
//! verification, and a label-transfer module self-annotates multi-view
//! RGB-D captures by reprojection.
//!
//! Conventions used throughout (also documented in `docs/formats.md`):
//!
//! * Camera frame: x right, y down, z forward; pixel (0, 0) is the top-left
//!   corner of the image.
//! * A pose written "world-to-camera" maps world points into the camera
//!   frame. Bin poses map bin-frame points into the camera frame.
//! * Bin frame: origin at a marker corner of the bin, x along the inner
//!   length, y along the inner width, z up from the floor.

pub mod affordance;
pub mod binplanner;
pub mod collision;
pub mod container;
pub mod geometry;
pub mod gripper;
pub mod imageio;
pub mod labelxfer;
pub mod material;
pub mod sim;
