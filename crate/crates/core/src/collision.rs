//! Oriented-box collision primitives shared by the bin planner and the
//! simulator: OBB vs axis-aligned slab tests via the separating axis
//! theorem, and the wall-slab model of a bin.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::Pose;

/// Overlap smaller than this counts as touching, not colliding.
const CONTACT_EPS: f64 = 1e-12;

/// Wall slab thickness used when modeling bin walls as boxes.
pub const WALL_THICKNESS_M: f64 = 0.02;

/// Oriented box: center, rotation columns as axes, half extents.
#[derive(Debug, Clone, PartialEq)]
pub struct Obb {
    pub center: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub half_extents: Vector3<f64>,
}

impl Obb {
    pub fn new(center: Vector3<f64>, rotation: Matrix3<f64>, half_extents: Vector3<f64>) -> Self {
        Self {
            center,
            rotation,
            half_extents,
        }
    }

    pub fn axis_aligned(center: Vector3<f64>, half_extents: Vector3<f64>) -> Self {
        Self::new(center, Matrix3::identity(), half_extents)
    }

    /// Box attached to a pose frame: `local_center` is expressed in that
    /// frame and the box axes follow the frame's rotation.
    pub fn from_pose(frame: &Pose, local_center: Vector3<f64>, half_extents: Vector3<f64>) -> Self {
        Self::new(
            frame.transform_point(&local_center),
            frame.rotation_matrix(),
            half_extents,
        )
    }

    pub fn axis(&self, i: usize) -> Vector3<f64> {
        self.rotation.column(i).into()
    }

    /// Corner positions, used for mesh export.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let mut out = [Vector3::zeros(); 8];
        let mut idx = 0;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let local = Vector3::new(
                        sx * self.half_extents.x,
                        sy * self.half_extents.y,
                        sz * self.half_extents.z,
                    );
                    out[idx] = self.center + self.rotation * local;
                    idx += 1;
                }
            }
        }
        out
    }
}

/// Axis-aligned box given by min/max corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) / 2.0
    }

    pub fn half_extents(&self) -> Vector3<f64> {
        (self.max - self.min) / 2.0
    }

    pub fn as_obb(&self) -> Obb {
        Obb::axis_aligned(self.center(), self.half_extents())
    }
}

/// Separating axis test between two oriented boxes. Face axes of both
/// boxes and their edge cross products are tried; surfaces that merely
/// touch are not reported as intersecting.
pub fn obb_intersects_obb(a: &Obb, b: &Obb) -> bool {
    let t = b.center - a.center;
    let mut axes: Vec<Vector3<f64>> = Vec::with_capacity(15);
    for i in 0..3 {
        axes.push(a.axis(i));
        axes.push(b.axis(i));
    }
    for i in 0..3 {
        for j in 0..3 {
            let cross = a.axis(i).cross(&b.axis(j));
            if cross.norm() > 1e-9 {
                axes.push(cross.normalize());
            }
        }
    }
    for axis in axes {
        let ra: f64 = (0..3)
            .map(|i| (a.axis(i).dot(&axis)).abs() * a.half_extents[i])
            .sum();
        let rb: f64 = (0..3)
            .map(|i| (b.axis(i).dot(&axis)).abs() * b.half_extents[i])
            .sum();
        if t.dot(&axis).abs() >= ra + rb - CONTACT_EPS {
            return false;
        }
    }
    true
}

pub fn obb_intersects_aabb(obb: &Obb, aabb: &Aabb) -> bool {
    obb_intersects_obb(obb, &aabb.as_obb())
}

/// The four wall slabs of a bin in its own frame: the interior spans
/// `[0, length] x [0, width]` with walls rising from the floor to
/// `wall_height`.
pub fn wall_slabs(length: f64, width: f64, wall_height: f64) -> [Aabb; 4] {
    let t = WALL_THICKNESS_M;
    [
        // -x wall
        Aabb::new(
            Vector3::new(-t, -t, 0.0),
            Vector3::new(0.0, width + t, wall_height),
        ),
        // +x wall
        Aabb::new(
            Vector3::new(length, -t, 0.0),
            Vector3::new(length + t, width + t, wall_height),
        ),
        // -y wall
        Aabb::new(
            Vector3::new(-t, -t, 0.0),
            Vector3::new(length + t, 0.0, wall_height),
        ),
        // +y wall
        Aabb::new(
            Vector3::new(-t, width, 0.0),
            Vector3::new(length + t, width + t, wall_height),
        ),
    ]
}

/// True when any solid intersects any of the slabs.
pub fn any_solid_hits_slabs(solids: &[Obb], slabs: &[Aabb]) -> bool {
    solids
        .iter()
        .any(|s| slabs.iter().any(|w| obb_intersects_aabb(s, w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    #[test]
    fn disjoint_and_overlapping_aabbs() {
        let a = Obb::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0));
        let far = Aabb::new(Vector3::new(3.0, 0.0, 0.0), Vector3::new(4.0, 1.0, 1.0));
        assert!(!obb_intersects_aabb(&a, &far));
        let near = Aabb::new(Vector3::new(0.5, 0.5, 0.5), Vector3::new(2.0, 2.0, 2.0));
        assert!(obb_intersects_aabb(&a, &near));
    }

    #[test]
    fn touching_faces_do_not_collide() {
        let a = Obb::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0));
        let touching = Aabb::new(Vector3::new(1.0, -1.0, -1.0), Vector3::new(2.0, 1.0, 1.0));
        assert!(!obb_intersects_aabb(&a, &touching));
    }

    #[test]
    fn rotated_box_needs_cross_axes() {
        // A thin diagonal box whose AABB overlaps but whose volume does not.
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_4)
            .to_rotation_matrix()
            .into_inner();
        let diag = Obb::new(
            Vector3::new(2.05, 2.05, 0.0),
            rot,
            Vector3::new(2.0, 0.01, 0.5),
        );
        let unit = Aabb::new(Vector3::new(-1.0, -1.0, -1.0), Vector3::new(1.0, 1.0, 1.0));
        assert!(!obb_intersects_aabb(&diag, &unit));
        // Slide it toward the corner until the slim box clips it.
        let diag_hit = Obb::new(
            Vector3::new(1.0, 1.0, 0.0),
            rot,
            Vector3::new(2.0, 0.01, 0.5),
        );
        assert!(obb_intersects_aabb(&diag_hit, &unit));
    }

    #[test]
    fn wall_slabs_bound_the_interior() {
        let slabs = wall_slabs(0.4, 0.3, 0.15);
        let interior = Obb::axis_aligned(
            Vector3::new(0.2, 0.15, 0.05),
            Vector3::new(0.05, 0.05, 0.05),
        );
        assert!(!any_solid_hits_slabs(&[interior], &slabs));
        let poking = Obb::axis_aligned(
            Vector3::new(0.01, 0.15, 0.05),
            Vector3::new(0.05, 0.05, 0.05),
        );
        assert!(any_solid_hits_slabs(&[poking], &slabs));
        // Above the wall height nothing collides.
        let above = Obb::axis_aligned(
            Vector3::new(0.01, 0.15, 0.30),
            Vector3::new(0.05, 0.05, 0.05),
        );
        assert!(!any_solid_hits_slabs(&[above], &slabs));
    }
}
