//! Affordance tensors and the grasp-type / grasp-point / grasp-angle
//! selection rules.
//!
//! A bundle holds three per-pixel probability maps: suction and finger maps
//! with channels (success, failure, background), and a 12-channel angle map
//! covering [-90, 90) degrees in 15-degree bins. Selection prefers suction
//! when its best success probability clears a threshold, and otherwise
//! takes the best success probability across both modes.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::{ContainerError, TensorContainer};
use crate::geometry::{DepthImage, Pixel};

pub const CH_SUCCESS: usize = 0;
pub const CH_FAILURE: usize = 1;
pub const CH_BACKGROUND: usize = 2;

pub const ANGLE_BIN_COUNT: usize = 12;
pub const ANGLE_BIN_STEP_DEG: f64 = 15.0;
pub const ANGLE_MIN_DEG: f64 = -90.0;

/// Default suction-priority threshold; configurable on the command line.
pub const DEFAULT_EPS_S: f32 = 0.4;

/// Default minimum success probability for candidate-mask construction.
pub const DEFAULT_MIN_CANDIDATE_PROB: f32 = 0.1;

/// Tolerance on per-pixel channel sums when loading a bundle.
pub const CHANNEL_SUM_TOL: f32 = 1e-3;

pub const SUCTION_TENSOR_NAME: &str = "suction";
pub const FINGER_TENSOR_NAME: &str = "finger";
pub const ANGLE_TENSOR_NAME: &str = "angle";

#[derive(Debug, Error)]
pub enum AffordanceError {
    #[error("tensor shapes disagree: {0}")]
    ShapeMismatch(String),
    #[error("probability {value} at channel {channel}, pixel ({x}, {y}) outside [0, 1]")]
    ValueOutOfRange {
        value: f32,
        channel: usize,
        x: usize,
        y: usize,
    },
    #[error("channel sum {sum} at pixel ({x}, {y}) deviates from 1 by more than {tol}")]
    NotNormalized { sum: f32, x: usize, y: usize, tol: f32 },
    #[error("no grasp candidates: both mode masks are empty")]
    EmptyCandidates,
    #[error("pixel ({x}, {y}) outside {width}x{height} map")]
    PixelOutOfBounds {
        x: u32,
        y: u32,
        width: usize,
        height: usize,
    },
    #[error(transparent)]
    Container(#[from] ContainerError),
}

/// Grasp angle of channel `i`: -90 + 15 i degrees, i in 0..12.
///
/// Grasp angles are pi-periodic, so -90 and +90 coincide and the covered
/// interval is half-open: +90 is never produced.
pub fn angle_for_bin(i: usize) -> f64 {
    ANGLE_MIN_DEG + ANGLE_BIN_STEP_DEG * i as f64
}

/// Nearest angle bin for a grasp angle in degrees (pi-periodic).
pub fn bin_for_angle(angle_deg: f64) -> usize {
    let folded = (angle_deg - ANGLE_MIN_DEG).rem_euclid(180.0);
    ((folded / ANGLE_BIN_STEP_DEG).round() as usize) % ANGLE_BIN_COUNT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspMode {
    Suction,
    Finger,
}

/// Suction (3,H,W), finger (3,H,W) and angle (12,H,W) probability maps.
#[derive(Debug, Clone)]
pub struct AffordanceBundle {
    suction: Array3<f32>,
    finger: Array3<f32>,
    angle: Array3<f32>,
}

impl AffordanceBundle {
    pub fn new(
        suction: Array3<f32>,
        finger: Array3<f32>,
        angle: Array3<f32>,
    ) -> Result<Self, AffordanceError> {
        Self::build(suction, finger, angle, false)
    }

    /// Like [`AffordanceBundle::new`] but divides each pixel's channels by
    /// their sum instead of rejecting sums outside the tolerance.
    pub fn new_renormalized(
        suction: Array3<f32>,
        finger: Array3<f32>,
        angle: Array3<f32>,
    ) -> Result<Self, AffordanceError> {
        Self::build(suction, finger, angle, true)
    }

    fn build(
        mut suction: Array3<f32>,
        mut finger: Array3<f32>,
        mut angle: Array3<f32>,
        renormalize: bool,
    ) -> Result<Self, AffordanceError> {
        let (cs, h, w) = suction.dim();
        let (cf, hf, wf) = finger.dim();
        let (ca, ha, wa) = angle.dim();
        if cs != 3 || cf != 3 || ca != ANGLE_BIN_COUNT {
            return Err(AffordanceError::ShapeMismatch(format!(
                "expected channel counts (3, 3, {ANGLE_BIN_COUNT}), got ({cs}, {cf}, {ca})"
            )));
        }
        if (h, w) != (hf, wf) || (h, w) != (ha, wa) {
            return Err(AffordanceError::ShapeMismatch(format!(
                "suction {h}x{w}, finger {hf}x{wf}, angle {ha}x{wa}"
            )));
        }
        for map in [&mut suction, &mut finger, &mut angle] {
            validate_map(map, renormalize)?;
        }
        Ok(Self {
            suction,
            finger,
            angle,
        })
    }

    pub fn width(&self) -> usize {
        self.suction.dim().2
    }

    pub fn height(&self) -> usize {
        self.suction.dim().1
    }

    pub fn suction(&self) -> &Array3<f32> {
        &self.suction
    }

    pub fn finger(&self) -> &Array3<f32> {
        &self.finger
    }

    pub fn angle(&self) -> &Array3<f32> {
        &self.angle
    }

    pub fn mode_map(&self, mode: GraspMode) -> &Array3<f32> {
        match mode {
            GraspMode::Suction => &self.suction,
            GraspMode::Finger => &self.finger,
        }
    }

    /// Success probability of `mode` at a pixel.
    pub fn success(&self, mode: GraspMode, x: usize, y: usize) -> f32 {
        self.mode_map(mode)[(CH_SUCCESS, y, x)]
    }

    /// True when the success channel is the per-pixel argmax for `mode`.
    pub fn is_success_argmax(&self, mode: GraspMode, x: usize, y: usize) -> bool {
        let m = self.mode_map(mode);
        let s = m[(CH_SUCCESS, y, x)];
        s >= m[(CH_FAILURE, y, x)] && s >= m[(CH_BACKGROUND, y, x)]
    }

    pub fn contains(&self, u: Pixel) -> bool {
        (u.x as usize) < self.width() && (u.y as usize) < self.height()
    }

    pub fn write_to(&self, path: &std::path::Path) -> Result<(), ContainerError> {
        let mut c = TensorContainer::new();
        let (_, h, w) = self.suction.dim();
        for (name, map) in [
            (SUCTION_TENSOR_NAME, &self.suction),
            (FINGER_TENSOR_NAME, &self.finger),
            (ANGLE_TENSOR_NAME, &self.angle),
        ] {
            let ch = map.dim().0;
            c.insert(
                name,
                vec![ch, h, w],
                map.as_standard_layout().iter().cloned().collect(),
            )?;
        }
        c.write_path(path)
    }

    pub fn read_from(path: &std::path::Path, renormalize: bool) -> Result<Self, AffordanceError> {
        let c = TensorContainer::read_path(path)?;
        let load = |name: &str, channels: usize| -> Result<Array3<f32>, AffordanceError> {
            let (shape, data) = c
                .get(name)
                .ok_or_else(|| ContainerError::MissingTensor(name.into()))?;
            if shape.len() != 3 || shape[0] != channels {
                return Err(AffordanceError::ShapeMismatch(format!(
                    "tensor {name:?} has shape {shape:?}, expected ({channels}, H, W)"
                )));
            }
            Array3::from_shape_vec((shape[0], shape[1], shape[2]), data.to_vec())
                .map_err(|e| AffordanceError::ShapeMismatch(e.to_string()))
        };
        let suction = load(SUCTION_TENSOR_NAME, 3)?;
        let finger = load(FINGER_TENSOR_NAME, 3)?;
        let angle = load(ANGLE_TENSOR_NAME, ANGLE_BIN_COUNT)?;
        Self::build(suction, finger, angle, renormalize)
    }
}

fn validate_map(map: &mut Array3<f32>, renormalize: bool) -> Result<(), AffordanceError> {
    let (channels, height, width) = map.dim();
    for y in 0..height {
        for x in 0..width {
            let mut sum = 0.0f32;
            for c in 0..channels {
                let v = map[(c, y, x)];
                if !(-1e-6..=1.0 + 1e-6).contains(&v) || !v.is_finite() {
                    return Err(AffordanceError::ValueOutOfRange {
                        value: v,
                        channel: c,
                        x,
                        y,
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > CHANNEL_SUM_TOL {
                if renormalize && sum > 1e-6 {
                    for c in 0..channels {
                        map[(c, y, x)] /= sum;
                    }
                } else {
                    return Err(AffordanceError::NotNormalized {
                        sum,
                        x,
                        y,
                        tol: CHANNEL_SUM_TOL,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Per-pixel candidate validity for each grasp mode.
#[derive(Debug, Clone)]
pub struct CandidateMask {
    pub suction: Array2<bool>,
    pub finger: Array2<bool>,
}

impl CandidateMask {
    pub fn all_valid(height: usize, width: usize) -> Self {
        Self {
            suction: Array2::from_elem((height, width), true),
            finger: Array2::from_elem((height, width), true),
        }
    }

    pub fn mode(&self, mode: GraspMode) -> &Array2<bool> {
        match mode {
            GraspMode::Suction => &self.suction,
            GraspMode::Finger => &self.finger,
        }
    }

    pub fn mode_mut(&mut self, mode: GraspMode) -> &mut Array2<bool> {
        match mode {
            GraspMode::Suction => &mut self.suction,
            GraspMode::Finger => &mut self.finger,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.suction.iter().any(|v| *v) && !self.finger.iter().any(|v| *v)
    }

    /// Invalidates a pixel in both modes.
    pub fn exclude(&mut self, u: Pixel) {
        let (h, w) = self.suction.dim();
        if (u.x as usize) < w && (u.y as usize) < h {
            self.suction[(u.y as usize, u.x as usize)] = false;
            self.finger[(u.y as usize, u.x as usize)] = false;
        }
    }
}

/// Selected grasp: mode, pixel, its success probability and the decoded
/// grasp angle at that pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspSelection {
    pub mode: GraspMode,
    pub pixel: Pixel,
    pub score: f32,
    pub angle_deg: f64,
}

/// Row-major argmax of the success channel restricted to a mask. Strictly
/// greater values win, so the first occurrence of the maximum is kept.
fn masked_argmax(
    bundle: &AffordanceBundle,
    mask: &Array2<bool>,
    mode: GraspMode,
) -> Option<(Pixel, f32)> {
    let map = bundle.mode_map(mode);
    let mut best: Option<(Pixel, f32)> = None;
    for y in 0..bundle.height() {
        for x in 0..bundle.width() {
            if !mask[(y, x)] {
                continue;
            }
            let v = map[(CH_SUCCESS, y, x)];
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((Pixel::new(x as u32, y as u32), v));
            }
        }
    }
    best
}

/// Selects the grasp type and point. Suction has priority: when the best
/// masked suction success probability exceeds `eps_s` it wins outright;
/// otherwise the best success probability over both modes is taken. Ties
/// break suction-first, then row-major pixel order.
pub fn select_grasp(
    bundle: &AffordanceBundle,
    mask: &CandidateMask,
    eps_s: f32,
) -> Result<GraspSelection, AffordanceError> {
    let best_s = masked_argmax(bundle, &mask.suction, GraspMode::Suction);
    if let Some((pixel, score)) = best_s {
        if score > eps_s {
            return Ok(GraspSelection {
                mode: GraspMode::Suction,
                pixel,
                score,
                angle_deg: decode_angle(bundle, pixel)?,
            });
        }
    }
    best_of_both(bundle, mask, best_s)
}

/// Best success probability over both modes with no suction priority.
pub fn select_grasp_greedy(
    bundle: &AffordanceBundle,
    mask: &CandidateMask,
) -> Result<GraspSelection, AffordanceError> {
    let best_s = masked_argmax(bundle, &mask.suction, GraspMode::Suction);
    best_of_both(bundle, mask, best_s)
}

fn best_of_both(
    bundle: &AffordanceBundle,
    mask: &CandidateMask,
    best_s: Option<(Pixel, f32)>,
) -> Result<GraspSelection, AffordanceError> {
    let best_f = masked_argmax(bundle, &mask.finger, GraspMode::Finger);
    let (mode, pixel, score) = match (best_s, best_f) {
        (None, None) => return Err(AffordanceError::EmptyCandidates),
        (Some((p, s)), None) => (GraspMode::Suction, p, s),
        (None, Some((p, s))) => (GraspMode::Finger, p, s),
        (Some((ps, ss)), Some((pf, sf))) => {
            if sf > ss {
                (GraspMode::Finger, pf, sf)
            } else {
                (GraspMode::Suction, ps, ss)
            }
        }
    };
    Ok(GraspSelection {
        mode,
        pixel,
        score,
        angle_deg: decode_angle(bundle, pixel)?,
    })
}

/// Grasp angle at a pixel: -90 + 15 * argmax over the 12 angle channels,
/// ties broken by the lowest channel index.
pub fn decode_angle(bundle: &AffordanceBundle, u: Pixel) -> Result<f64, AffordanceError> {
    if !bundle.contains(u) {
        return Err(AffordanceError::PixelOutOfBounds {
            x: u.x,
            y: u.y,
            width: bundle.width(),
            height: bundle.height(),
        });
    }
    let (x, y) = (u.x as usize, u.y as usize);
    let mut best_i = 0;
    let mut best_v = bundle.angle[(0, y, x)];
    for c in 1..ANGLE_BIN_COUNT {
        let v = bundle.angle[(c, y, x)];
        if v > best_v {
            best_v = v;
            best_i = c;
        }
    }
    Ok(angle_for_bin(best_i))
}

/// A pixel is a candidate for a mode iff its depth is valid and the mode's
/// success probability is at least `min_prob`.
pub fn build_candidate_mask(
    bundle: &AffordanceBundle,
    depth: &DepthImage,
    min_prob: f32,
) -> Result<CandidateMask, AffordanceError> {
    if depth.width() != bundle.width() || depth.height() != bundle.height() {
        return Err(AffordanceError::ShapeMismatch(format!(
            "depth {}x{} vs bundle {}x{}",
            depth.width(),
            depth.height(),
            bundle.width(),
            bundle.height()
        )));
    }
    let (h, w) = (bundle.height(), bundle.width());
    let mut mask = CandidateMask {
        suction: Array2::from_elem((h, w), false),
        finger: Array2::from_elem((h, w), false),
    };
    for y in 0..h {
        for x in 0..w {
            if depth.get(x, y).is_none() {
                continue;
            }
            mask.suction[(y, x)] = bundle.success(GraspMode::Suction, x, y) >= min_prob;
            mask.finger[(y, x)] = bundle.success(GraspMode::Finger, x, y) >= min_prob;
        }
    }
    Ok(mask)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Bundle with uniform channels everywhere, then explicit overrides.
    pub fn bundle_with(
        width: usize,
        height: usize,
        overrides: &[(GraspMode, Pixel, [f32; 3])],
        angle_one_hot: &[(Pixel, usize)],
    ) -> AffordanceBundle {
        let mut suction = Array3::from_elem((3, height, width), 1.0 / 3.0);
        let mut finger = Array3::from_elem((3, height, width), 1.0 / 3.0);
        let mut angle = Array3::from_elem((12, height, width), 1.0 / 12.0);
        for (mode, pix, probs) in overrides {
            let map = match mode {
                GraspMode::Suction => &mut suction,
                GraspMode::Finger => &mut finger,
            };
            for (c, v) in probs.iter().enumerate() {
                map[(c, pix.y as usize, pix.x as usize)] = *v;
            }
        }
        for (pix, bin) in angle_one_hot {
            for c in 0..12 {
                angle[(c, pix.y as usize, pix.x as usize)] = if c == *bin { 1.0 } else { 0.0 };
            }
        }
        AffordanceBundle::new(suction, finger, angle).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::bundle_with;
    use super::*;

    #[test]
    fn suction_priority_wins_above_threshold() {
        let bundle = bundle_with(
            32,
            32,
            &[
                (GraspMode::Suction, Pixel::new(10, 10), [0.9, 0.05, 0.05]),
                (GraspMode::Finger, Pixel::new(5, 5), [0.95, 0.03, 0.02]),
            ],
            &[],
        );
        let mask = CandidateMask::all_valid(32, 32);
        let sel = select_grasp(&bundle, &mask, 0.4).unwrap();
        assert_eq!(sel.mode, GraspMode::Suction);
        assert_eq!(sel.pixel, Pixel::new(10, 10));
        assert!((sel.score - 0.9).abs() < 1e-6);
    }

    #[test]
    fn falls_back_to_best_of_both_below_threshold() {
        let bundle = bundle_with(
            32,
            32,
            &[
                (GraspMode::Suction, Pixel::new(2, 2), [0.3, 0.35, 0.35]),
                (GraspMode::Finger, Pixel::new(5, 5), [0.7, 0.15, 0.15]),
            ],
            &[],
        );
        let mask = CandidateMask::all_valid(32, 32);
        let sel = select_grasp(&bundle, &mask, 0.4).unwrap();
        assert_eq!(sel.mode, GraspMode::Finger);
        assert_eq!(sel.pixel, Pixel::new(5, 5));
        assert!((sel.score - 0.7).abs() < 1e-6);
    }

    #[test]
    fn empty_masks_are_an_error() {
        let bundle = bundle_with(4, 4, &[], &[]);
        let mut mask = CandidateMask::all_valid(4, 4);
        mask.suction.fill(false);
        mask.finger.fill(false);
        assert!(matches!(
            select_grasp(&bundle, &mask, 0.4),
            Err(AffordanceError::EmptyCandidates)
        ));
    }

    #[test]
    fn ties_prefer_suction_then_row_major() {
        let bundle = bundle_with(
            8,
            8,
            &[
                (GraspMode::Suction, Pixel::new(6, 3), [0.35, 0.35, 0.3]),
                (GraspMode::Suction, Pixel::new(1, 5), [0.35, 0.35, 0.3]),
                (GraspMode::Finger, Pixel::new(0, 0), [0.35, 0.35, 0.3]),
            ],
            &[],
        );
        let mask = CandidateMask::all_valid(8, 8);
        // All maxima equal 0.35 and are below eps_s: suction wins the tie,
        // and within suction the row-major first pixel (6,3) wins.
        let sel = select_grasp(&bundle, &mask, 0.4).unwrap();
        assert_eq!(sel.mode, GraspMode::Suction);
        assert_eq!(sel.pixel, Pixel::new(6, 3));
    }

    #[test]
    fn decode_angle_one_hot_bins() {
        let bundle = bundle_with(
            8,
            8,
            &[],
            &[(Pixel::new(1, 1), 0), (Pixel::new(2, 2), 6)],
        );
        assert_eq!(decode_angle(&bundle, Pixel::new(1, 1)).unwrap(), -90.0);
        assert_eq!(decode_angle(&bundle, Pixel::new(2, 2)).unwrap(), 0.0);
        // Uniform pixel: tie resolved to the lowest channel.
        assert_eq!(decode_angle(&bundle, Pixel::new(3, 3)).unwrap(), -90.0);
    }

    #[test]
    fn candidate_mask_follows_depth_and_probability() {
        let bundle = bundle_with(
            4,
            4,
            &[(GraspMode::Suction, Pixel::new(1, 1), [0.8, 0.1, 0.1])],
            &[],
        );
        let mut data = vec![1.0f32; 16];
        data[0] = 0.0; // invalid pixel (0,0)
        let depth = DepthImage::new(4, 4, data).unwrap();

        let all = build_candidate_mask(&bundle, &depth, 0.0).unwrap();
        assert!(!all.suction[(0, 0)]);
        assert_eq!(all.suction.iter().filter(|v| **v).count(), 15);

        let none_depth = DepthImage::new(4, 4, vec![0.0; 16]).unwrap();
        let empty = build_candidate_mask(&bundle, &none_depth, 0.0).unwrap();
        assert!(empty.is_empty());

        let strict = build_candidate_mask(&bundle, &depth, 0.5).unwrap();
        assert!(strict.suction[(1, 1)]);
        assert_eq!(strict.suction.iter().filter(|v| **v).count(), 1);
        assert_eq!(strict.finger.iter().filter(|v| **v).count(), 0);
    }

    #[test]
    fn mask_shape_mismatch_is_an_error() {
        let bundle = bundle_with(4, 4, &[], &[]);
        let depth = DepthImage::filled(5, 4, 1.0).unwrap();
        assert!(matches!(
            build_candidate_mask(&bundle, &depth, 0.0),
            Err(AffordanceError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn bundle_validation_rejects_bad_sums_and_values() {
        let ok = Array3::from_elem((3, 2, 2), 1.0 / 3.0);
        let angle = Array3::from_elem((12, 2, 2), 1.0 / 12.0);
        let mut bad_sum = ok.clone();
        bad_sum[(0, 0, 0)] = 0.9;
        assert!(matches!(
            AffordanceBundle::new(bad_sum.clone(), ok.clone(), angle.clone()),
            Err(AffordanceError::NotNormalized { .. })
        ));
        // Renormalization accepts the same data.
        assert!(AffordanceBundle::new_renormalized(bad_sum, ok.clone(), angle.clone()).is_ok());

        let mut bad_value = ok.clone();
        bad_value[(0, 0, 0)] = 1.5;
        assert!(matches!(
            AffordanceBundle::new(bad_value, ok.clone(), angle),
            Err(AffordanceError::ValueOutOfRange { .. })
        ));
    }

    #[test]
    fn bundle_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("affordance.tnsr");
        let bundle = bundle_with(
            6,
            5,
            &[(GraspMode::Finger, Pixel::new(3, 2), [0.6, 0.2, 0.2])],
            &[(Pixel::new(3, 2), 7)],
        );
        bundle.write_to(&path).unwrap();
        let back = AffordanceBundle::read_from(&path, false).unwrap();
        assert_eq!(back.width(), 6);
        assert_eq!(back.height(), 5);
        assert_eq!(back.success(GraspMode::Finger, 3, 2), 0.6);
        assert_eq!(decode_angle(&back, Pixel::new(3, 2)).unwrap(), 15.0);
    }

    #[test]
    fn angle_bins_cover_half_open_interval() {
        for i in 0..ANGLE_BIN_COUNT {
            let a = angle_for_bin(i);
            assert!((-90.0..90.0).contains(&a));
            assert_eq!(bin_for_angle(a), i);
        }
        // pi-periodic wrap: +90 maps to the -90 bin.
        assert_eq!(bin_for_angle(90.0), 0);
        assert_eq!(bin_for_angle(89.9), 0);
        assert_eq!(bin_for_angle(-97.4), 0);
    }
}
