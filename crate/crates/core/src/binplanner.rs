//! Bin localization, collision-region classification and grasp refinement.
//!
//! Grasp points are classified against the bin walls: within a margin of
//! one wall is an edge region, within the margin of two adjacent walls a
//! corner region, anything else interior. Suction grasps in a risky region
//! whose surface normal leans toward the near wall are refined to a
//! vertical approach with the fingers rotated clear and the gripper's flat
//! side turned toward the wall. Finger grasps that would collide are
//! converted into a push toward the bin center followed by a regrasp.
//!
//! Angle convention: the end-effector rotation angle phi is measured about
//! the vertical so that the flat-side outward normal in the bin frame is
//! `(-sin phi, cos phi, 0)`; at phi = 0 the flat side faces +y. Grasp
//! angles are pi-periodic and folded into [-90, 90) degrees, so flat-side
//! alignment is meaningful up to a 180-degree flip.

use nalgebra::{Matrix3, Unit, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{any_solid_hits_slabs, wall_slabs};
use crate::geometry::Pose;
use crate::gripper::{gripper_solids, GripperConfig, GripperDims, PlanMode};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("grasp point ({x:.4}, {y:.4}) lies outside the bin footprint")]
    OutOfBin { x: f64, y: f64 },
    #[error("no safe angle for the interior region")]
    InteriorRegion,
    #[error("invalid bin model: {0}")]
    InvalidBin(String),
}

/// Bin geometry and its pose in the camera frame. `pose_cam_from_bin`
/// maps bin-frame points into the camera frame; the bin interior spans
/// `[0, inner_length] x [0, inner_width]` with z up from the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinModel {
    pub pose_cam_from_bin: Pose,
    pub inner_length: f64,
    pub inner_width: f64,
    pub wall_height: f64,
    pub margin: f64,
}

/// Default collision-region margin, meters.
pub const DEFAULT_MARGIN_M: f64 = 0.06;

impl BinModel {
    pub fn new(
        pose_cam_from_bin: Pose,
        inner_length: f64,
        inner_width: f64,
        wall_height: f64,
        margin: f64,
    ) -> Result<Self, PlanError> {
        if !(inner_length > 0.0 && inner_width > 0.0 && wall_height > 0.0 && margin > 0.0) {
            return Err(PlanError::InvalidBin(
                "extents, wall height and margin must be positive".into(),
            ));
        }
        if margin >= inner_length.min(inner_width) / 2.0 {
            return Err(PlanError::InvalidBin(format!(
                "margin {margin} must be below half the smaller extent"
            )));
        }
        Ok(Self {
            pose_cam_from_bin,
            inner_length,
            inner_width,
            wall_height,
            margin,
        })
    }

    /// Camera-frame point expressed in the bin frame.
    pub fn to_bin_frame(&self, p_cam: &Vector3<f64>) -> Vector3<f64> {
        self.pose_cam_from_bin.inverse().transform_point(p_cam)
    }

    pub fn center_xy(&self) -> Vector2<f64> {
        Vector2::new(self.inner_length / 2.0, self.inner_width / 2.0)
    }

    /// Distance from a bin-frame point to the given wall's inner face.
    pub fn wall_distance(&self, p_bin: &Vector3<f64>, side: WallSide) -> f64 {
        match side {
            WallSide::NegX => p_bin.x,
            WallSide::PosX => self.inner_length - p_bin.x,
            WallSide::NegY => p_bin.y,
            WallSide::PosY => self.inner_width - p_bin.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WallSide {
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-y")]
    NegY,
    #[serde(rename = "+y")]
    PosY,
}

impl WallSide {
    pub const ALL: [WallSide; 4] = [Self::NegX, Self::PosX, Self::NegY, Self::PosY];

    /// Horizontal direction from the bin interior toward this wall.
    pub fn outward_xy(&self) -> Vector2<f64> {
        match self {
            Self::NegX => Vector2::new(-1.0, 0.0),
            Self::PosX => Vector2::new(1.0, 0.0),
            Self::NegY => Vector2::new(0.0, -1.0),
            Self::PosY => Vector2::new(0.0, 1.0),
        }
    }

    pub fn is_x_axis(&self) -> bool {
        matches!(self, Self::NegX | Self::PosX)
    }
}

/// Collision-related region of a grasp point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionTag {
    Interior,
    Edge { side: WallSide },
    Corner { x_wall: WallSide, y_wall: WallSide },
}

impl RegionTag {
    /// Direction from the interior toward the near wall (edge) or the
    /// corner bisector; `None` for the interior.
    pub fn outward_dir_xy(&self) -> Option<Vector2<f64>> {
        match self {
            Self::Interior => None,
            Self::Edge { side } => Some(side.outward_xy()),
            Self::Corner { x_wall, y_wall } => {
                Some((x_wall.outward_xy() + y_wall.outward_xy()).normalize())
            }
        }
    }

    pub fn is_interior(&self) -> bool {
        matches!(self, Self::Interior)
    }

    /// The walls this region is flagged against.
    pub fn sides(&self) -> Vec<WallSide> {
        match self {
            Self::Interior => vec![],
            Self::Edge { side } => vec![*side],
            Self::Corner { x_wall, y_wall } => vec![*x_wall, *y_wall],
        }
    }
}

/// Classifies a camera-frame point against the bin's collision regions.
/// Distances exactly equal to the margin count as interior.
pub fn classify_region(p_cam: &Vector3<f64>, bin: &BinModel) -> Result<RegionTag, PlanError> {
    classify_region_bin_frame(&bin.to_bin_frame(p_cam), bin)
}

/// Same as [`classify_region`] for a point already in the bin frame.
pub fn classify_region_bin_frame(
    p_bin: &Vector3<f64>,
    bin: &BinModel,
) -> Result<RegionTag, PlanError> {
    if p_bin.x < 0.0 || p_bin.x > bin.inner_length || p_bin.y < 0.0 || p_bin.y > bin.inner_width {
        return Err(PlanError::OutOfBin {
            x: p_bin.x,
            y: p_bin.y,
        });
    }
    let near_x = if p_bin.x < bin.margin {
        Some(WallSide::NegX)
    } else if bin.inner_length - p_bin.x < bin.margin {
        Some(WallSide::PosX)
    } else {
        None
    };
    let near_y = if p_bin.y < bin.margin {
        Some(WallSide::NegY)
    } else if bin.inner_width - p_bin.y < bin.margin {
        Some(WallSide::PosY)
    } else {
        None
    };
    Ok(match (near_x, near_y) {
        (None, None) => RegionTag::Interior,
        (Some(side), None) | (None, Some(side)) => RegionTag::Edge { side },
        (Some(x_wall), Some(y_wall)) => RegionTag::Corner { x_wall, y_wall },
    })
}

/// Flat-side outward normal in the bin frame for an end-effector angle.
pub fn flat_side_normal_xy(angle_deg: f64) -> Vector2<f64> {
    let a = angle_deg.to_radians();
    Vector2::new(-a.sin(), a.cos())
}

/// Folds an angle into [-90, 90) degrees (grasp angles are pi-periodic).
pub fn fold_angle_deg(angle_deg: f64) -> f64 {
    (angle_deg + 90.0).rem_euclid(180.0) - 90.0
}

/// End-effector rotation that turns the gripper's flat side toward the
/// near wall (edge regions) or the corner bisector, folded into [-90, 90).
pub fn safe_angle(region: &RegionTag) -> Result<f64, PlanError> {
    let d = region.outward_dir_xy().ok_or(PlanError::InteriorRegion)?;
    // Solve (-sin phi, cos phi) = d.
    let phi = (-d.x).atan2(d.y).to_degrees();
    Ok(fold_angle_deg(phi))
}

/// True when the surface normal leans toward the region's wall: its
/// horizontal component in the bin frame exceeds `sin(cone_deg)` and
/// points within 90 degrees of the outward wall direction (or corner
/// bisector).
pub fn normal_faces_wall(
    n_cam: &Unit<Vector3<f64>>,
    region: &RegionTag,
    bin: &BinModel,
    cone_deg: f64,
) -> bool {
    let Some(outward) = region.outward_dir_xy() else {
        return false;
    };
    let n_bin = bin
        .pose_cam_from_bin
        .rotation()
        .inverse_transform_vector(n_cam);
    let horizontal = Vector2::new(n_bin.x, n_bin.y);
    let norm = horizontal.norm();
    if norm <= cone_deg.to_radians().sin() {
        return false;
    }
    horizontal.dot(&outward) / norm > 0.0
}

/// Tuning knobs of the refinement logic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// Half-angle of the "normal is vertical enough" cone, degrees.
    pub cone_deg: f64,
    /// Extra clearance past the collision region a push must achieve,
    /// measured perpendicular to the wall, meters.
    pub push_clearance: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            cone_deg: 30.0,
            push_clearance: 0.03,
        }
    }
}

/// A refined grasp: pose in the camera frame, end-effector angle, terminal
/// gripper configuration, plan mode and the region that drove refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedGrasp {
    pub pose: Pose,
    pub angle_deg: f64,
    pub config: GripperConfig,
    pub mode: PlanMode,
    pub region: RegionTag,
}

/// Builds the end-effector frame in the bin frame from a grasp point, an
/// approach direction (pointing into the scene) and the rotation angle.
/// The frame's y axis is the flat-side target `(-sin phi, cos phi, 0)`
/// projected perpendicular to the approach axis.
pub fn ee_frame_in_bin(
    p_bin: &Vector3<f64>,
    approach_bin: &Unit<Vector3<f64>>,
    angle_deg: f64,
) -> Pose {
    let z = approach_bin.into_inner();
    let flat = flat_side_normal_xy(angle_deg);
    let mut reference = Vector3::new(flat.x, flat.y, 0.0);
    let mut projected = reference - z * reference.dot(&z);
    if projected.norm() < 1e-9 {
        // Approach parallel to the flat target: fall back to the closing
        // axis direction as the reference.
        let a = angle_deg.to_radians();
        reference = Vector3::new(a.cos(), a.sin(), 0.0);
        projected = reference - z * reference.dot(&z);
    }
    let y = projected.normalize();
    let x = y.cross(&z);
    let rotation = Matrix3::from_columns(&[x, y, z]);
    Pose::from_rotation_matrix(&rotation, *p_bin).expect("constructed frame is orthonormal")
}

/// Grasp pose in the camera frame whose approach axis opposes the surface
/// normal, with the in-plane rotation set by `angle_deg`.
pub fn grasp_pose_from_normal(
    p_cam: &Vector3<f64>,
    n_cam: &Unit<Vector3<f64>>,
    angle_deg: f64,
    bin: &BinModel,
) -> Pose {
    let inv = bin.pose_cam_from_bin.inverse();
    let p_bin = inv.transform_point(p_cam);
    let approach_bin = Unit::new_normalize(inv.transform_vector(&-n_cam.into_inner()));
    let ee_bin = ee_frame_in_bin(&p_bin, &approach_bin, angle_deg);
    bin.pose_cam_from_bin.compose(&ee_bin)
}

/// Table-perpendicular (vertical) grasp pose in the camera frame.
pub fn vertical_grasp_pose(p_cam: &Vector3<f64>, angle_deg: f64, bin: &BinModel) -> Pose {
    let p_bin = bin.to_bin_frame(p_cam);
    let ee_bin = ee_frame_in_bin(&p_bin, &Unit::new_unchecked(-Vector3::z()), angle_deg);
    bin.pose_cam_from_bin.compose(&ee_bin)
}

/// True when the gripper volume at an end-effector pose (bin frame)
/// intersects any bin wall slab.
pub fn gripper_hits_bin_walls(
    ee_in_bin: &Pose,
    config: &GripperConfig,
    dims: &GripperDims,
    bin: &BinModel,
) -> bool {
    let solids = gripper_solids(ee_in_bin, config, dims);
    let slabs = wall_slabs(bin.inner_length, bin.inner_width, bin.wall_height);
    any_solid_hits_slabs(&solids, &slabs)
}

/// Camera-frame flavor of [`gripper_hits_bin_walls`].
pub fn gripper_hits_bin_walls_cam(
    ee_in_cam: &Pose,
    config: &GripperConfig,
    dims: &GripperDims,
    bin: &BinModel,
) -> bool {
    let ee_in_bin = bin.pose_cam_from_bin.inverse().compose(ee_in_cam);
    gripper_hits_bin_walls(&ee_in_bin, config, dims, bin)
}

/// Refines a suction grasp. Interior points, or points whose normal does
/// not lean toward the near wall, keep the normal-aligned approach and the
/// plain suction configuration. Otherwise the approach is made vertical at
/// the safe angle with the fingers rotated clear.
pub fn refine_suction(
    p_cam: &Vector3<f64>,
    n_cam: &Unit<Vector3<f64>>,
    phi_deg: f64,
    bin: &BinModel,
    params: &PlannerParams,
) -> Result<RefinedGrasp, PlanError> {
    let region = classify_region(p_cam, bin)?;
    if region.is_interior() || !normal_faces_wall(n_cam, &region, bin, params.cone_deg) {
        return Ok(RefinedGrasp {
            pose: grasp_pose_from_normal(p_cam, n_cam, phi_deg, bin),
            angle_deg: phi_deg,
            config: GripperConfig::SUCTION,
            mode: PlanMode::Suction,
            region,
        });
    }
    let phi_safe = safe_angle(&region)?;
    Ok(RefinedGrasp {
        pose: vertical_grasp_pose(p_cam, phi_safe, bin),
        angle_deg: phi_safe,
        config: GripperConfig::SUCTION_SAFE,
        mode: PlanMode::SuctionCa,
        region,
    })
}

/// Push toward the bin center computed for a grasp point that cannot be
/// finger-grasped in place.
#[derive(Debug, Clone, PartialEq)]
pub struct PushRequest {
    /// Pushing contact pose (camera frame): vertical at the original
    /// point, rotated to the safe angle.
    pub contact_pose: Pose,
    pub safe_angle_deg: f64,
    /// Push direction in the camera frame (horizontal in the bin frame).
    pub direction: Unit<Vector3<f64>>,
    pub distance: f64,
    /// Regrasp after the push: a top-down finger grasp at the pushed
    /// location with the original grasp angle.
    pub regrasp: RefinedGrasp,
}

/// Outcome of finger refinement.
#[derive(Debug, Clone, PartialEq)]
pub enum FingerRefinement {
    Direct(RefinedGrasp),
    Push(PushRequest),
}

/// Push vector for a bin-frame point: direction toward the bin center and
/// the travel needed so every flagged wall ends `margin + clearance` away,
/// capped at the distance to the center.
pub fn plan_push(
    p_bin: &Vector3<f64>,
    bin: &BinModel,
    clearance: f64,
) -> (Vector2<f64>, f64, Vector3<f64>) {
    let p_xy = Vector2::new(p_bin.x, p_bin.y);
    let to_center = bin.center_xy() - p_xy;
    let center_dist = to_center.norm();
    if center_dist < 1e-12 {
        return (Vector2::new(1.0, 0.0), 0.0, *p_bin);
    }
    let dir = to_center / center_dist;
    let mut needed: f64 = clearance.min(center_dist);
    for side in WallSide::ALL {
        let dist = bin.wall_distance(p_bin, side);
        if dist < bin.margin {
            // Inward motion per unit of travel along the push direction.
            let inward = -dir.dot(&side.outward_xy());
            if inward > 1e-9 {
                needed = needed.max((bin.margin + clearance - dist) / inward);
            }
        }
    }
    let distance = needed.min(center_dist);
    let end = Vector3::new(
        p_bin.x + dir.x * distance,
        p_bin.y + dir.y * distance,
        p_bin.z,
    );
    (dir, distance, end)
}

/// Refines a finger grasp. When the gripper in the open finger-approach
/// configuration clears the walls, the top-down grasp stands; otherwise a
/// push request toward the bin center is produced, with the regrasp at the
/// pushed location.
pub fn refine_finger(
    p_cam: &Vector3<f64>,
    phi_deg: f64,
    bin: &BinModel,
    params: &PlannerParams,
    dims: &GripperDims,
) -> Result<FingerRefinement, PlanError> {
    let region = classify_region(p_cam, bin)?;
    let direct_pose = vertical_grasp_pose(p_cam, phi_deg, bin);
    let collides =
        gripper_hits_bin_walls_cam(&direct_pose, &GripperConfig::FINGER_APPROACH, dims, bin);
    let direct = RefinedGrasp {
        pose: direct_pose,
        angle_deg: phi_deg,
        config: GripperConfig::FINGER_GRASP,
        mode: PlanMode::Finger,
        region,
    };
    if !collides {
        return Ok(FingerRefinement::Direct(direct));
    }
    let p_bin = bin.to_bin_frame(p_cam);
    let (dir_xy, distance, end_bin) = plan_push(&p_bin, bin, params.push_clearance);
    if distance <= 1e-9 {
        // Degenerate: pushing cannot help from here.
        return Ok(FingerRefinement::Direct(direct));
    }
    let phi_safe = if region.is_interior() {
        // Collision without a region flag: keep the original angle.
        phi_deg
    } else {
        safe_angle(&region)?
    };
    let end_cam = bin.pose_cam_from_bin.transform_point(&end_bin);
    let direction_cam = Unit::new_normalize(
        bin.pose_cam_from_bin
            .transform_vector(&Vector3::new(dir_xy.x, dir_xy.y, 0.0)),
    );
    let end_region = classify_region_bin_frame(&end_bin, bin)?;
    Ok(FingerRefinement::Push(PushRequest {
        contact_pose: vertical_grasp_pose(p_cam, phi_safe, bin),
        safe_angle_deg: phi_safe,
        direction: direction_cam,
        distance,
        regrasp: RefinedGrasp {
            pose: vertical_grasp_pose(&end_cam, phi_deg, bin),
            angle_deg: phi_deg,
            config: GripperConfig::FINGER_GRASP,
            mode: PlanMode::PushThenFinger,
            region: end_region,
        },
    }))
}
