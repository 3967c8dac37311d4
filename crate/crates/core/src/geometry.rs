//! Pinhole camera model, rigid transforms, depth images and surface-normal
//! estimation shared by every other module.
//!
//! Camera convention: x right, y down, z forward, pixel (0,0) top-left.
//! Poses are rigid SE(3) transforms; a "world-to-camera" pose maps world
//! points into the camera frame.

use nalgebra::{Matrix3, Point2, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::{ContainerError, TensorContainer};

/// Maximum representable range of a depth sensor sample, in meters.
pub const DEPTH_MAX_RANGE_M: f32 = 20.0;

/// Sentinel stored for invalid depth in binary files.
pub const DEPTH_INVALID: f32 = 0.0;

/// Tensor name under which a depth map is stored in a tensor container.
pub const DEPTH_TENSOR_NAME: &str = "depth";

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("depth value {0} is not a finite positive number")]
    InvalidDepth(f64),
    #[error("point has non-positive z = {0}, behind the camera")]
    BehindCamera(f64),
    #[error("pixel ({x}, {y}) outside image bounds {width}x{height}")]
    PixelOutOfBounds {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("plane fit needs at least {needed} valid depth samples, found {found}")]
    InsufficientSupport { found: usize, needed: usize },
    #[error("rotation matrix is not orthonormal with determinant +1")]
    InvalidRotation,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid depth image: {0}")]
    InvalidImage(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
}

/// Integer pixel location, (x, y) = (column, row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
}

impl Pixel {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    /// Real-valued image coordinate of this pixel.
    pub fn as_point(&self) -> Point2<f64> {
        Point2::new(self.x as f64, self.y as f64)
    }
}

/// Rigid SE(3) transform: `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// Builds a pose from a 3x3 rotation matrix, rejecting matrices that are
    /// not orthonormal with determinant +1 (tolerance 1e-6).
    pub fn from_rotation_matrix(
        m: &Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let should_be_identity = m * m.transpose();
        if (should_be_identity - Matrix3::identity()).abs().max() > 1e-6
            || (m.determinant() - 1.0).abs() > 1e-6
        {
            return Err(GeometryError::InvalidRotation);
        }
        let rotation = UnitQuaternion::from_matrix(m);
        Ok(Self::new(rotation, translation))
    }

    /// Builds a pose from a quaternion given as `[w, x, y, z]`.
    pub fn from_quaternion_wxyz(
        wxyz: [f64; 4],
        translation: [f64; 3],
    ) -> Result<Self, GeometryError> {
        let q = nalgebra::Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        if !q.coords.iter().all(|c| c.is_finite()) || q.norm() < 1e-9 {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self::new(
            UnitQuaternion::from_quaternion(q),
            Vector3::from(translation),
        ))
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Quaternion components as `[w, x, y, z]`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    /// `self ∘ other`: the transform that applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.rotation.inverse();
        Pose {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotates a direction without translating it.
    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Column `i` of the rotation matrix: the pose frame's axis `i`
    /// expressed in the parent frame.
    pub fn axis(&self, i: usize) -> Vector3<f64> {
        self.rotation_matrix().column(i).into()
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|c| c.is_finite())
            && self.rotation.quaternion().coords.iter().all(|c| c.is_finite())
    }
}

/// JSON shape for poses: quaternion `[w,x,y,z]` plus translation.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation_wxyz: [f64; 4],
    translation: [f64; 3],
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            rotation_wxyz: self.quaternion_wxyz(),
            translation: self.translation.into(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        Pose::from_quaternion_wxyz(repr.rotation_wxyz, repr.translation)
            .map_err(serde::de::Error::custom)
    }
}

/// Pinhole intrinsics with the image size they apply to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !(0.0..(width as f64)).contains(&cx) || !(0.0..(height as f64)).contains(&cy) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside image {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn contains(&self, u: &Point2<f64>) -> bool {
        u.x >= 0.0 && u.x < self.width as f64 && u.y >= 0.0 && u.y < self.height as f64
    }
}

/// Dense depth map in meters; invalid samples are non-finite or 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthImage {
    /// Validates that every finite sample lies in (0, 20) m. Zero and
    /// non-finite samples are kept as the invalid sentinel.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(GeometryError::InvalidImage(format!(
                "expected {width}x{height} = {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        for &d in &data {
            if d.is_finite() && d != 0.0 && !(d > 0.0 && d < DEPTH_MAX_RANGE_M) {
                return Err(GeometryError::InvalidImage(format!(
                    "finite depth sample {d} outside (0, {DEPTH_MAX_RANGE_M})"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self, GeometryError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Raw sample including the invalid sentinel; `None` out of bounds.
    pub fn sample(&self, x: usize, y: usize) -> Option<f32> {
        if x < self.width && y < self.height {
            Some(self.data[y * self.width + x])
        } else {
            None
        }
    }

    /// Valid depth at a pixel, or `None` when out of bounds or invalid.
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        self.sample(x, y).filter(|d| is_valid_depth(*d))
    }

    pub fn write_to(&self, path: &std::path::Path) -> Result<(), ContainerError> {
        let mut c = TensorContainer::new();
        c.insert(
            DEPTH_TENSOR_NAME,
            vec![self.height, self.width],
            self.data.clone(),
        )?;
        c.write_path(path)
    }

    pub fn read_from(path: &std::path::Path) -> Result<Self, GeometryError> {
        let c = TensorContainer::read_path(path)?;
        let (shape, data) = c
            .get(DEPTH_TENSOR_NAME)
            .ok_or_else(|| ContainerError::MissingTensor(DEPTH_TENSOR_NAME.into()))?;
        if shape.len() != 2 {
            return Err(GeometryError::InvalidImage(format!(
                "depth tensor must be rank 2, got shape {shape:?}"
            )));
        }
        Self::new(shape[1], shape[0], data.to_vec())
    }
}

pub fn is_valid_depth(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

/// Point label carried by self-annotated point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspLabel {
    Background,
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position: Vector3<f64>,
    pub label: GraspLabel,
}

/// Point cloud where every point carries a grasp label.
#[derive(Debug, Clone, Default)]
pub struct LabeledPointCloud {
    pub points: Vec<LabeledPoint>,
}

impl LabeledPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Lifts a pixel with known depth into the camera frame:
/// `((x - cx) d / fx, (y - cy) d / fy, d)`.
pub fn back_project(
    u: &Point2<f64>,
    depth: f64,
    k: &CameraIntrinsics,
) -> Result<Vector3<f64>, GeometryError> {
    if !depth.is_finite() || depth <= 0.0 {
        return Err(GeometryError::InvalidDepth(depth));
    }
    if !k.contains(u) {
        return Err(GeometryError::PixelOutOfBounds {
            x: u.x,
            y: u.y,
            width: k.width,
            height: k.height,
        });
    }
    Ok(Vector3::new(
        (u.x - k.cx) * depth / k.fx,
        (u.y - k.cy) * depth / k.fy,
        depth,
    ))
}

/// Projects a camera-frame point onto the image plane (real-valued pixel).
pub fn project(p: &Vector3<f64>, k: &CameraIntrinsics) -> Result<Point2<f64>, GeometryError> {
    if p.z <= 0.0 {
        return Err(GeometryError::BehindCamera(p.z));
    }
    Ok(Point2::new(
        k.fx * p.x / p.z + k.cx,
        k.fy * p.y / p.z + k.cy,
    ))
}

/// Default side length of the square window used for normal estimation.
pub const NORMAL_WINDOW_PX: usize = 11;

const PLANE_FIT_MIN_POINTS: usize = 6;

/// Least-squares plane normal over the back-projected depth window around
/// `u`, sign-flipped to point toward the camera (n.z < 0 for a camera
/// looking along +z). `window` is the full side length in pixels.
pub fn estimate_normal(
    depth: &DepthImage,
    u: Pixel,
    k: &CameraIntrinsics,
    window: usize,
) -> Result<Unit<Vector3<f64>>, GeometryError> {
    let pts = window_points(depth, u, k, window)?;
    if pts.len() < PLANE_FIT_MIN_POINTS {
        return Err(GeometryError::InsufficientSupport {
            found: pts.len(),
            needed: PLANE_FIT_MIN_POINTS,
        });
    }
    let (normal, _residual_rms) = fit_plane(&pts);
    let mut n = normal;
    if n.z > 0.0 {
        n = -n;
    } else if n.z == 0.0 {
        n = canonical_sign(n);
    }
    Ok(Unit::new_normalize(n))
}

/// RMS point-to-plane distance of the best-fit plane over the window, used
/// as a surface flatness measure. Errors when support is insufficient.
pub fn plane_fit_residual(
    depth: &DepthImage,
    u: Pixel,
    k: &CameraIntrinsics,
    window: usize,
) -> Result<f64, GeometryError> {
    let pts = window_points(depth, u, k, window)?;
    if pts.len() < PLANE_FIT_MIN_POINTS {
        return Err(GeometryError::InsufficientSupport {
            found: pts.len(),
            needed: PLANE_FIT_MIN_POINTS,
        });
    }
    let (_normal, residual_rms) = fit_plane(&pts);
    Ok(residual_rms)
}

fn window_points(
    depth: &DepthImage,
    u: Pixel,
    k: &CameraIntrinsics,
    window: usize,
) -> Result<Vec<Vector3<f64>>, GeometryError> {
    if (u.x as usize) >= depth.width() || (u.y as usize) >= depth.height() {
        return Err(GeometryError::PixelOutOfBounds {
            x: u.x as f64,
            y: u.y as f64,
            width: depth.width() as u32,
            height: depth.height() as u32,
        });
    }
    let half = (window.max(1) as isize - 1) / 2;
    let x0 = u.x as isize - half;
    let y0 = u.y as isize - half;
    let mut pts = Vec::with_capacity(window * window);
    for dy in 0..window as isize {
        let y = y0 + dy;
        if y < 0 || y >= depth.height() as isize {
            continue;
        }
        for dx in 0..window as isize {
            let x = x0 + dx;
            if x < 0 || x >= depth.width() as isize {
                continue;
            }
            if let Some(d) = depth.get(x as usize, y as usize) {
                let p = back_project(&Point2::new(x as f64, y as f64), d as f64, k)?;
                pts.push(p);
            }
        }
    }
    Ok(pts)
}

/// Covariance eigen-decomposition plane fit. Returns the unit normal (the
/// eigenvector of the smallest eigenvalue, ties broken by lexicographic
/// order after sign canonicalization) and the RMS residual.
fn fit_plane(pts: &[Vector3<f64>]) -> (Vector3<f64>, f64) {
    let n = pts.len() as f64;
    let centroid: Vector3<f64> = pts.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let min_val = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + min_val.abs());
    let mut best: Option<Vector3<f64>> = None;
    for i in 0..3 {
        if eig.eigenvalues[i] <= min_val + tol {
            let v = canonical_sign(eig.eigenvectors.column(i).into());
            best = Some(match best {
                None => v,
                Some(b) => {
                    if lex_less(&v, &b) {
                        v
                    } else {
                        b
                    }
                }
            });
        }
    }
    let normal = best.unwrap_or_else(|| Vector3::z()).normalize();
    let residual_rms = (min_val.max(0.0) / n).sqrt();
    (normal, residual_rms)
}

fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    for c in v.iter() {
        if c.abs() > 1e-12 {
            return if *c < 0.0 { -v } else { v };
        }
    }
    v
}

fn lex_less(a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
    for i in 0..3 {
        if a[i] < b[i] {
            return true;
        }
        if a[i] > b[i] {
            return false;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn test_k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn back_project_principal_point() {
        let p = back_project(&Point2::new(320.0, 240.0), 1.0, &test_k()).unwrap();
        assert_relative_eq!(p, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn back_project_one_focal_length_off() {
        // (820 - 320) / 500 = 1 focal length to the right.
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 1024, 480).unwrap();
        let p = back_project(&Point2::new(820.0, 240.0), 1.0, &k).unwrap();
        assert_relative_eq!(p, Vector3::new(1.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn back_project_matches_pinhole_formula() {
        // Hand evaluation: ((400-320)*0.8/500, (300-240)*0.8/500, 0.8).
        let p = back_project(&Point2::new(400.0, 300.0), 0.8, &test_k()).unwrap();
        assert_relative_eq!(p, Vector3::new(0.128, 0.096, 0.8), epsilon = 1e-12);
    }

    #[test]
    fn back_project_rejects_invalid_depth() {
        for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                back_project(&Point2::new(320.0, 240.0), d, &test_k()),
                Err(GeometryError::InvalidDepth(_))
            ));
        }
    }

    #[test]
    fn project_principal_axis() {
        let u = project(&Vector3::new(0.0, 0.0, 1.0), &test_k()).unwrap();
        assert_relative_eq!(u, Point2::new(320.0, 240.0), epsilon = 1e-12);
    }

    #[test]
    fn project_hand_evaluated() {
        // u = 500*0.25/0.5 + 320 = 570, v = 500*(-0.1)/0.5 + 240 = 140.
        let u = project(&Vector3::new(0.25, -0.1, 0.5), &test_k()).unwrap();
        assert_relative_eq!(u, Point2::new(570.0, 140.0), epsilon = 1e-12);
    }

    #[test]
    fn project_rejects_behind_camera() {
        assert!(matches!(
            project(&Vector3::new(0.0, 0.0, -1.0), &test_k()),
            Err(GeometryError::BehindCamera(_))
        ));
        assert!(matches!(
            project(&Vector3::new(0.1, 0.1, 0.0), &test_k()),
            Err(GeometryError::BehindCamera(_))
        ));
    }

    #[test]
    fn project_back_project_round_trip() {
        let k = test_k();
        for (x, y, d) in [(12.0, 7.0, 0.31), (631.5, 400.25, 2.7), (320.0, 0.0, 5.0)] {
            let u = Point2::new(x, y);
            let p = back_project(&u, d, &k).unwrap();
            let u2 = project(&p, &k).unwrap();
            assert_relative_eq!(u, u2, epsilon = 1e-9);
        }
    }

    #[test]
    fn transform_identity_and_translation() {
        let p = Vector3::new(1.0, 1.0, 1.0);
        assert_relative_eq!(Pose::identity().transform_point(&p), p);
        let t = Pose::from_translation(Vector3::new(0.0, 0.0, 0.5));
        assert_relative_eq!(t.transform_point(&p), Vector3::new(1.0, 1.0, 1.5));
    }

    #[test]
    fn transform_quarter_turn_about_z() {
        let pose = Pose::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2),
            Vector3::zeros(),
        );
        let p = pose.transform_point(&Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(p, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let pose = Pose::new(
            UnitQuaternion::from_euler_angles(0.3, -0.8, 1.7),
            Vector3::new(0.2, -0.4, 1.1),
        );
        let round = pose.compose(&pose.inverse());
        assert_relative_eq!(round.translation(), Vector3::zeros(), epsilon = 1e-9);
        assert_relative_eq!(
            round.rotation_matrix(),
            Matrix3::identity(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn rotation_matrix_is_orthonormal() {
        let pose = Pose::new(
            UnitQuaternion::from_euler_angles(0.9, 0.2, -0.5),
            Vector3::zeros(),
        );
        let r = pose.rotation_matrix();
        assert_relative_eq!(r * r.transpose(), Matrix3::identity(), epsilon = 1e-9);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn from_rotation_matrix_rejects_non_orthonormal() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = 2.0;
        assert!(Pose::from_rotation_matrix(&m, Vector3::zeros()).is_err());
        // Determinant -1 (reflection).
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::from_rotation_matrix(&m, Vector3::zeros()).is_err());
    }

    fn constant_depth(width: usize, height: usize, d: f32) -> DepthImage {
        DepthImage::filled(width, height, d).unwrap()
    }

    #[test]
    fn normal_of_flat_plane_is_minus_z() {
        let depth = constant_depth(64, 64, 1.0);
        let k = CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap();
        let n = estimate_normal(&depth, Pixel::new(32, 32), &k, NORMAL_WINDOW_PX).unwrap();
        assert_relative_eq!(n.into_inner(), Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-6);
    }

    #[test]
    fn normal_of_ramp_matches_analytic_plane() {
        // Plane with normal (0, -sin30, -cos30): depth d(v) solving
        // z = a + b*y with b = -tan(30 deg), y = (v - cy) z / fy.
        let k = CameraIntrinsics::new(200.0, 200.0, 32.0, 32.0, 64, 64).unwrap();
        let a = 1.0f64;
        let b = -(30f64.to_radians().tan());
        let mut data = vec![0.0f32; 64 * 64];
        for v in 0..64 {
            for u in 0..64 {
                let denom = 1.0 - b * ((v as f64) - k.cy) / k.fy;
                data[v * 64 + u] = (a / denom) as f32;
            }
        }
        let depth = DepthImage::new(64, 64, data).unwrap();
        let expected = Vector3::new(0.0, -(30f64.to_radians().sin()), -(30f64.to_radians().cos()));
        for pix in [Pixel::new(32, 32), Pixel::new(10, 50), Pixel::new(55, 8)] {
            let n = estimate_normal(&depth, pix, &k, NORMAL_WINDOW_PX).unwrap();
            assert!(
                (n.into_inner() - expected).norm() < 1e-3,
                "normal {n:?} at {pix:?} deviates from {expected:?}"
            );
        }
    }

    #[test]
    fn normal_fails_without_support() {
        let mut data = vec![0.0f32; 64 * 64];
        // Five valid pixels only: one short of the minimum.
        for i in 0..5 {
            data[32 * 64 + 28 + i] = 1.0;
        }
        let depth = DepthImage::new(64, 64, data).unwrap();
        let k = CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap();
        match estimate_normal(&depth, Pixel::new(32, 32), &k, NORMAL_WINDOW_PX) {
            Err(GeometryError::InsufficientSupport { found, needed }) => {
                assert_eq!(found, 5);
                assert_eq!(needed, 6);
            }
            other => panic!("expected insufficient support, got {other:?}"),
        }
    }

    #[test]
    fn depth_image_rejects_out_of_range() {
        assert!(DepthImage::new(2, 1, vec![1.0, 25.0]).is_err());
        assert!(DepthImage::new(2, 1, vec![1.0, -0.5]).is_err());
        assert!(DepthImage::new(2, 1, vec![1.0, 0.0]).is_ok());
        assert!(DepthImage::new(2, 1, vec![f32::NAN, 1.0]).is_ok());
    }

    #[test]
    fn pose_serde_round_trip() {
        let pose = Pose::new(
            UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let json = serde_json::to_string(&pose).unwrap();
        let back: Pose = serde_json::from_str(&json).unwrap();
        assert_relative_eq!(pose.translation(), back.translation(), epsilon = 1e-12);
        assert_relative_eq!(
            pose.rotation_matrix(),
            back.rotation_matrix(),
            epsilon = 1e-12
        );
    }
}
