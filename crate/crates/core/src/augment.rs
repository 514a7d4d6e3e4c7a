//! SE(2) augmentation of the BEV frame.
//!
//! The augmentation moves the *frame*, never the world: cameras and objects
//! stay where they are, the BEV frame is translated by `delta_xy` and rotated
//! by `delta_psi`, and every label expressed in the BEV frame is rewritten
//! accordingly. Pixels therefore never move.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{rot_z, sin_cos_snapped, wrap, wrap_angle, RigidTransform};
use crate::grid::BevGridSpec;
use crate::scene::{ObjectLabel, SceneConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BevAugmentation {
    /// New frame origin, in old-frame coordinates (meters).
    pub delta_xy: [f64; 2],
    /// Rotation of the new frame's axes relative to the old ones, wrapped to `(−π, π]`.
    pub delta_psi: f64,
}

impl BevAugmentation {
    pub const IDENTITY: BevAugmentation = BevAugmentation { delta_xy: [0.0, 0.0], delta_psi: 0.0 };

    pub fn new(delta_xy: [f64; 2], delta_psi: f64) -> Result<Self> {
        if !delta_xy.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { delta_xy, delta_psi: wrap_angle(delta_psi)? })
    }

    /// Old-frame → new-frame transform: `p ↦ R(−Δψ)(p − Δ)`.
    pub fn frame_transform(&self) -> RigidTransform {
        let r = rot_z(-self.delta_psi);
        let t = r.mul_vec([self.delta_xy[0], self.delta_xy[1], 0.0]);
        RigidTransform::from_yaw_translation(-self.delta_psi, [-t[0], -t[1], -t[2]])
    }

    /// The single augmentation equivalent to `self` followed by `next`.
    pub fn then(&self, next: &BevAugmentation) -> BevAugmentation {
        let (s, c) = sin_cos_snapped(self.delta_psi);
        let [dx, dy] = next.delta_xy;
        BevAugmentation {
            delta_xy: [self.delta_xy[0] + c * dx - s * dy, self.delta_xy[1] + s * dx + c * dy],
            delta_psi: wrap(self.delta_psi + next.delta_psi),
        }
    }
}

/// How the rotation part of an augmentation is drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiMode {
    /// Uniform over `(−π, π]`.
    Uniform,
    /// Uniform over the listed quarter turns (`0..=3`, counter-clockwise).
    RightAngles(Vec<u8>),
}

impl PsiMode {
    pub fn all_right_angles() -> Self {
        PsiMode::RightAngles(alloc::vec![0, 1, 2, 3])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationRanges {
    pub max_translation: f64,
    pub psi_mode: PsiMode,
}

impl AugmentationRanges {
    /// Translation up to a quarter of the grid's smaller extent, uniform rotation.
    pub fn for_grid(grid: &BevGridSpec) -> Self {
        let extent = (grid.x_range.1 - grid.x_range.0).min(grid.y_range.1 - grid.y_range.0);
        Self { max_translation: 0.25 * extent, psi_mode: PsiMode::Uniform }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_translation >= 0.0 && self.max_translation.is_finite()) {
            return Err(Error::Validation("max_translation must be finite and non-negative".into()));
        }
        if let PsiMode::RightAngles(q) = &self.psi_mode {
            if q.is_empty() || q.iter().any(|&k| k > 3) {
                return Err(Error::Validation("right-angle set must be a non-empty subset of 0..=3".into()));
            }
        }
        Ok(())
    }
}

/// Quarter turn `k` as an exactly wrapped angle.
pub fn quarter_turn(k: u8) -> f64 {
    match k % 4 {
        0 => 0.0,
        1 => FRAC_PI_2,
        2 => PI,
        _ => -FRAC_PI_2,
    }
}

/// Draws an augmentation: translation uniform over the disk of radius
/// `max_translation`, rotation per `psi_mode`.
pub fn sample_augmentation<R: Rng + ?Sized>(rng: &mut R, ranges: &AugmentationRanges) -> Result<BevAugmentation> {
    ranges.validate()?;
    let radius = ranges.max_translation * libm::sqrt(rng.random::<f64>());
    let phi = TAU * rng.random::<f64>();
    let delta_xy = [radius * libm::cos(phi), radius * libm::sin(phi)];
    let delta_psi = match &ranges.psi_mode {
        PsiMode::Uniform => wrap(PI - TAU * rng.random::<f64>()),
        PsiMode::RightAngles(q) => quarter_turn(q[rng.random_range(0..q.len())]),
    };
    Ok(BevAugmentation { delta_xy, delta_psi })
}

/// [`sample_augmentation`] driven by a ChaCha8 stream seeded with `seed`.
pub fn sample_augmentation_seeded(seed: u64, ranges: &AugmentationRanges) -> Result<BevAugmentation> {
    use rand::SeedableRng;
    sample_augmentation(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed), ranges)
}

/// Re-expresses `scene` in the augmented BEV frame. Cameras are untouched.
pub fn apply_augmentation(scene: &SceneConfig, aug: &BevAugmentation) -> SceneConfig {
    let g = aug.frame_transform();
    let objects = scene
        .objects
        .iter()
        .map(|o| ObjectLabel {
            id: o.id,
            bbox: o.bbox.with_pose(g.apply(o.bbox.center()), o.bbox.yaw() - aug.delta_psi),
        })
        .collect();
    SceneConfig {
        scene_id: scene.scene_id.clone(),
        cameras: scene.cameras.clone(),
        bev_frame: g.compose(&scene.bev_frame),
        objects,
        roi_refs: scene.roi_refs.clone(),
    }
}
