//! Gripper configuration state machine, grasp-mode primitive sequences and
//! hold-force checks for a multi-functional gripper with a reciprocating
//! suction cup and reconfigurable fingers.
//!
//! A configuration is a triple of independent axes: suction joint
//! (extended `s_out` / retracted `s_in`), finger aperture (`f_open` /
//! `f_close`) and finger rotation (`f_dft` default / `f_rot` rotated 90
//! degrees). Legal transitions change at most one axis at a time, with one
//! exception: retracting the suction cup while closing the fingers is the
//! compound fusion move that hands an object held by the cup over to the
//! fingers.

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::Obb;
use crate::geometry::Pose;

pub const GRAVITY_M_S2: f64 = 9.81;

/// Default lift height appended to grasp sequences, meters.
pub const DEFAULT_LIFT_M: f64 = 0.20;

#[derive(Debug, Error)]
pub enum GripperError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SuctionState {
    #[serde(rename = "s_out")]
    Extended,
    #[serde(rename = "s_in")]
    Retracted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aperture {
    #[serde(rename = "f_open")]
    Open,
    #[serde(rename = "f_close")]
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FingerRotation {
    #[serde(rename = "f_dft")]
    Standard,
    #[serde(rename = "f_rot")]
    Rotated,
}

/// One gripper configuration: exactly one value per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GripperConfig {
    pub suction: SuctionState,
    pub aperture: Aperture,
    pub rotation: FingerRotation,
}

impl GripperConfig {
    pub const fn new(suction: SuctionState, aperture: Aperture, rotation: FingerRotation) -> Self {
        Self {
            suction,
            aperture,
            rotation,
        }
    }

    /// Cup extended, fingers open in the default mount: plain suction.
    pub const SUCTION: Self = Self::new(SuctionState::Extended, Aperture::Open, FingerRotation::Standard);
    /// Cup extended, fingers open and rotated clear: wall-safe suction.
    pub const SUCTION_SAFE: Self = Self::new(SuctionState::Extended, Aperture::Open, FingerRotation::Rotated);
    /// Cup retracted, fingers open: finger-grasp approach.
    pub const FINGER_APPROACH: Self = Self::new(SuctionState::Retracted, Aperture::Open, FingerRotation::Standard);
    /// Cup retracted, fingers closed: terminal finger grasp.
    pub const FINGER_GRASP: Self = Self::new(SuctionState::Retracted, Aperture::Closed, FingerRotation::Standard);
    /// Cup extended, fingers open and rotated: pushing contact.
    pub const PUSH: Self = Self::new(SuctionState::Extended, Aperture::Open, FingerRotation::Rotated);
}

/// Checks whether a single configuration step is mechanically legal:
/// at most one axis changes, except that the suction joint and the
/// aperture may change together (the fusion handover), and any rotation
/// change requires open fingers.
pub fn validate_transition(from: &GripperConfig, to: &GripperConfig) -> bool {
    let suction_changed = from.suction != to.suction;
    let aperture_changed = from.aperture != to.aperture;
    let rotation_changed = from.rotation != to.rotation;
    if rotation_changed && (from.aperture != Aperture::Open || to.aperture != Aperture::Open) {
        return false;
    }
    let changed = suction_changed as u8 + aperture_changed as u8 + rotation_changed as u8;
    changed <= 1 || (changed == 2 && suction_changed && aperture_changed)
}

/// Atomic motion or gripper action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimitiveStep {
    MoveTo { pose: Pose },
    SetConfig { config: GripperConfig },
    SuctionOn,
    SuctionOff,
    CloseFingers,
    OpenFingers,
    Push { direction: [f64; 3], distance: f64 },
    MagnetOn,
    MagnetOff,
    Lift { height: f64 },
}

impl PrimitiveStep {
    pub fn push(direction: Unit<Vector3<f64>>, distance: f64) -> Result<Self, GripperError> {
        if !(distance > 0.0) {
            return Err(GripperError::Domain(format!(
                "push distance must be positive, got {distance}"
            )));
        }
        Ok(Self::Push {
            direction: direction.into_inner().into(),
            distance,
        })
    }

    fn validate(&self) -> Result<(), GripperError> {
        match self {
            Self::MoveTo { pose } if !pose.is_finite() => {
                Err(GripperError::InvalidPlan("move_to pose is not finite".into()))
            }
            Self::Push { direction, distance } => {
                let norm = Vector3::from(*direction).norm();
                if (norm - 1.0).abs() > 1e-6 {
                    return Err(GripperError::InvalidPlan(format!(
                        "push direction norm {norm} deviates from 1"
                    )));
                }
                if !(*distance > 0.0 && distance.is_finite()) {
                    return Err(GripperError::InvalidPlan(format!(
                        "push distance {distance} must be positive"
                    )));
                }
                Ok(())
            }
            Self::Lift { height } if !(*height > 0.0 && height.is_finite()) => Err(
                GripperError::InvalidPlan(format!("lift height {height} must be positive")),
            ),
            _ => Ok(()),
        }
    }
}

/// Grasp-plan mode tags; `suction_ca` marks collision-avoidance suction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    Suction,
    SuctionCa,
    Finger,
    PushThenFinger,
    Fusion,
    Magnetic,
}

/// Ordered primitive sequence for one grasp attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPlan {
    pub mode: PlanMode,
    pub steps: Vec<PrimitiveStep>,
    pub expected_collision_free: bool,
}

impl GraspPlan {
    /// Validates step invariants, that the first step establishes a
    /// configuration, and that every configuration transition is legal.
    pub fn new(mode: PlanMode, steps: Vec<PrimitiveStep>) -> Result<Self, GripperError> {
        if !matches!(steps.first(), Some(PrimitiveStep::SetConfig { .. })) {
            return Err(GripperError::InvalidPlan(
                "first step must establish a gripper configuration".into(),
            ));
        }
        for step in &steps {
            step.validate()?;
        }
        let plan = Self {
            mode,
            steps,
            expected_collision_free: true,
        };
        plan.check_transitions()?;
        Ok(plan)
    }

    fn check_transitions(&self) -> Result<(), GripperError> {
        let configs = self.config_trace();
        for pair in configs.windows(2) {
            if !validate_transition(&pair[0], &pair[1]) {
                return Err(GripperError::InvalidPlan(format!(
                    "illegal configuration transition {:?} -> {:?}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(())
    }

    /// The sequence of configurations the plan passes through.
    pub fn config_trace(&self) -> Vec<GripperConfig> {
        let mut configs = Vec::new();
        let mut current: Option<GripperConfig> = None;
        for step in &self.steps {
            let next = match step {
                PrimitiveStep::SetConfig { config } => Some(*config),
                PrimitiveStep::CloseFingers => current.map(|c| GripperConfig {
                    aperture: Aperture::Closed,
                    ..c
                }),
                PrimitiveStep::OpenFingers => current.map(|c| GripperConfig {
                    aperture: Aperture::Open,
                    ..c
                }),
                _ => None,
            };
            if let Some(next) = next {
                configs.push(next);
                current = Some(next);
            }
        }
        configs
    }

    pub fn contains_step(&self, pred: impl Fn(&PrimitiveStep) -> bool) -> bool {
        self.steps.iter().any(pred)
    }
}

/// Plain suction pick: establish the suction configuration, reach the
/// grasp pose, seal, lift. `rotated_fingers` selects the wall-safe variant.
pub fn suction_sequence(grasp: &Pose, rotated_fingers: bool, lift_height: f64) -> GraspPlan {
    let (config, mode) = if rotated_fingers {
        (GripperConfig::SUCTION_SAFE, PlanMode::SuctionCa)
    } else {
        (GripperConfig::SUCTION, PlanMode::Suction)
    };
    GraspPlan::new(
        mode,
        vec![
            PrimitiveStep::SetConfig { config },
            PrimitiveStep::MoveTo { pose: *grasp },
            PrimitiveStep::SuctionOn,
            PrimitiveStep::Lift {
                height: lift_height,
            },
        ],
    )
    .expect("suction sequence is statically valid")
}

/// Top-down finger pick: approach with open fingers, close, lift.
pub fn finger_sequence(grasp: &Pose, lift_height: f64) -> GraspPlan {
    GraspPlan::new(
        PlanMode::Finger,
        vec![
            PrimitiveStep::SetConfig {
                config: GripperConfig::FINGER_APPROACH,
            },
            PrimitiveStep::MoveTo { pose: *grasp },
            PrimitiveStep::CloseFingers,
            PrimitiveStep::Lift {
                height: lift_height,
            },
        ],
    )
    .expect("finger sequence is statically valid")
}

/// Push the object toward open space with the rotated-finger pushing
/// configuration, then regrasp top-down with the fingers.
pub fn push_then_finger_sequence(
    contact: &Pose,
    direction: Unit<Vector3<f64>>,
    distance: f64,
    regrasp: &Pose,
    lift_height: f64,
) -> Result<GraspPlan, GripperError> {
    GraspPlan::new(
        PlanMode::PushThenFinger,
        vec![
            PrimitiveStep::SetConfig {
                config: GripperConfig::PUSH,
            },
            PrimitiveStep::MoveTo { pose: *contact },
            PrimitiveStep::push(direction, distance)?,
            PrimitiveStep::SetConfig {
                config: GripperConfig::SUCTION,
            },
            PrimitiveStep::SetConfig {
                config: GripperConfig::FINGER_APPROACH,
            },
            PrimitiveStep::MoveTo { pose: *regrasp },
            PrimitiveStep::CloseFingers,
            PrimitiveStep::Lift {
                height: lift_height,
            },
        ],
    )
}

/// Fusion pick: seal the object with the extended cup, then retract the
/// cup while closing the fingers so the object ends held by both.
pub fn fusion_sequence(grasp: &Pose) -> GraspPlan {
    GraspPlan::new(
        PlanMode::Fusion,
        vec![
            PrimitiveStep::SetConfig {
                config: GripperConfig::SUCTION,
            },
            PrimitiveStep::MoveTo { pose: *grasp },
            PrimitiveStep::SuctionOn,
            PrimitiveStep::SetConfig {
                config: GripperConfig::new(
                    SuctionState::Retracted,
                    Aperture::Closed,
                    FingerRotation::Standard,
                ),
            },
            PrimitiveStep::Lift {
                height: DEFAULT_LIFT_M,
            },
        ],
    )
    .expect("fusion sequence is statically valid")
}

/// Electromagnetic pick: fetch the magnet holder with the suction cup,
/// energize it over the target, release at the dropoff, return the holder.
/// The holder is carried by suction, so fingers never close.
pub fn magnetic_sequence(holder: &Pose, target: &Pose, dropoff: &Pose) -> GraspPlan {
    GraspPlan::new(
        PlanMode::Magnetic,
        vec![
            PrimitiveStep::SetConfig {
                config: GripperConfig::SUCTION,
            },
            PrimitiveStep::MoveTo { pose: *holder },
            PrimitiveStep::SuctionOn,
            PrimitiveStep::MoveTo { pose: *target },
            PrimitiveStep::MagnetOn,
            PrimitiveStep::Lift {
                height: DEFAULT_LIFT_M,
            },
            PrimitiveStep::MoveTo { pose: *dropoff },
            PrimitiveStep::MagnetOff,
            PrimitiveStep::MoveTo { pose: *holder },
            PrimitiveStep::SuctionOff,
            PrimitiveStep::Lift {
                height: DEFAULT_LIFT_M,
            },
        ],
    )
    .expect("magnetic sequence is statically valid")
}

/// True when a suction seal of `hold_force` newtons can carry `mass` kg
/// through a lift at `accel` m/s^2: `m (a + g) <= F`.
pub fn suction_hold_check(mass: f64, accel: f64, hold_force: f64) -> Result<bool, GripperError> {
    if !(mass > 0.0) || !(hold_force > 0.0) {
        return Err(GripperError::Domain(format!(
            "mass ({mass}) and hold force ({hold_force}) must be positive"
        )));
    }
    if accel < 0.0 || !accel.is_finite() {
        return Err(GripperError::Domain(format!(
            "acceleration {accel} must be non-negative"
        )));
    }
    Ok(mass * (accel + GRAVITY_M_S2) <= hold_force)
}

/// True when closed fingers form-close the object: the object width lies
/// within the closed/open finger span (inclusive at both ends).
pub fn fusion_hold_check(
    object_width: f64,
    finger_span_closed: f64,
    finger_span_open: f64,
) -> Result<bool, GripperError> {
    if !(finger_span_closed > 0.0 && finger_span_closed < finger_span_open) {
        return Err(GripperError::Domain(format!(
            "finger spans must satisfy 0 < closed < open, got ({finger_span_closed}, {finger_span_open})"
        )));
    }
    Ok(object_width >= finger_span_closed && object_width <= finger_span_open)
}

/// Gripper collision-model dimensions. None of these are sensed; they come
/// from the gripper configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperDims {
    /// Suction cup radius, meters.
    pub cup_radius: f64,
    /// Reciprocation stroke of the suction joint, meters.
    pub stroke: f64,
    /// Finger opening span (inner faces), meters.
    pub finger_span_open: f64,
    /// Finger closed span, meters.
    pub finger_span_closed: f64,
    /// Finger length below the body, meters.
    pub finger_reach: f64,
    /// Finger thickness along the closing axis, meters.
    pub finger_thickness: f64,
    /// Finger width across the closing axis, meters.
    pub finger_width: f64,
    /// Body half extent along the finger closing axis, meters.
    pub body_half_x: f64,
    /// Body reach from the tool axis on the flat (+y) side, meters.
    pub body_flat_reach: f64,
    /// Body reach from the tool axis on the protruding (-y) side, meters.
    pub body_back_reach: f64,
    /// Body height, meters.
    pub body_height: f64,
    /// Suction cup holding force, newtons.
    pub hold_force: f64,
}

impl Default for GripperDims {
    fn default() -> Self {
        Self {
            cup_radius: 0.015,
            stroke: 0.10,
            finger_span_open: 0.10,
            finger_span_closed: 0.01,
            finger_reach: 0.08,
            finger_thickness: 0.01,
            finger_width: 0.02,
            body_half_x: 0.05,
            body_flat_reach: 0.02,
            body_back_reach: 0.06,
            body_height: 0.08,
            hold_force: 15.0,
        }
    }
}

/// Collision solids of the gripper at an end-effector pose, expressed in
/// the pose's parent frame.
///
/// End-effector frame: origin at the tool center point, z into the scene,
/// +y the flat-side outward normal. The body sits above the tool point:
/// raised by the full stroke when the cup is extended, by the finger reach
/// otherwise. Finger boxes exist only with open fingers in the standard
/// mount; the rotated mount folds them clear of the workspace. The cup is
/// modeled conservatively as a square prism and is present only when
/// extended.
pub fn gripper_solids(ee: &Pose, config: &GripperConfig, dims: &GripperDims) -> Vec<Obb> {
    let mut solids = Vec::with_capacity(4);
    let body_bottom = match config.suction {
        SuctionState::Extended => dims.stroke,
        SuctionState::Retracted => dims.finger_reach,
    };
    let body_center_y = (dims.body_flat_reach - dims.body_back_reach) / 2.0;
    let body_half_y = (dims.body_flat_reach + dims.body_back_reach) / 2.0;
    solids.push(Obb::from_pose(
        ee,
        Vector3::new(0.0, body_center_y, -(body_bottom + dims.body_height / 2.0)),
        Vector3::new(dims.body_half_x, body_half_y, dims.body_height / 2.0),
    ));
    if config.aperture == Aperture::Open && config.rotation == FingerRotation::Standard {
        let offset = dims.finger_span_open / 2.0 + dims.finger_thickness / 2.0;
        for sign in [-1.0, 1.0] {
            solids.push(Obb::from_pose(
                ee,
                Vector3::new(sign * offset, 0.0, -dims.finger_reach / 2.0),
                Vector3::new(
                    dims.finger_thickness / 2.0,
                    dims.finger_width / 2.0,
                    dims.finger_reach / 2.0,
                ),
            ));
        }
    }
    if config.suction == SuctionState::Extended {
        solids.push(Obb::from_pose(
            ee,
            Vector3::new(0.0, 0.0, -dims.stroke / 2.0),
            Vector3::new(dims.cup_radius, dims.cup_radius, dims.stroke / 2.0),
        ));
    }
    solids
}
