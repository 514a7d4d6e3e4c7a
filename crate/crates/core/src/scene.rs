//! Scene configuration and deterministic synthetic scene generation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Box3D, CameraModel, Category, ObjectClass, PinholeIntrinsics, RigidTransform, Vec3};

/// Default maximum number of cameras per scene.
pub const DEFAULT_MAX_CAMERAS: usize = 12;

/// Roadside pole heights, meters.
pub const DEFAULT_POLE_HEIGHTS: (f64, f64) = (6.0, 15.0);

const PITCH_RANGE_DEG: (f64, f64) = (15.0, 60.0);
const PLACEMENT_ATTEMPTS: usize = 20_000;

/// A labelled object. The box lives in the scene's BEV frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectLabel {
    pub id: u64,
    pub bbox: Box3D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub scene_id: String,
    pub cameras: Vec<CameraModel>,
    /// World → BEV.
    pub bev_frame: RigidTransform,
    pub objects: Vec<ObjectLabel>,
    /// Optional ROI mask reference per camera, aligned with `cameras`.
    pub roi_refs: Vec<Option<String>>,
}

impl SceneConfig {
    pub fn validate(&self, max_cameras: usize) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::Validation("scene must contain at least one camera".into()));
        }
        if self.cameras.len() > max_cameras {
            return Err(Error::Validation(format!(
                "scene has {} cameras, more than the maximum of {max_cameras}",
                self.cameras.len()
            )));
        }
        if self.roi_refs.len() != self.cameras.len() {
            return Err(Error::Validation("roi_refs must be aligned with cameras".into()));
        }
        let mut ids = BTreeSet::new();
        for cam in &self.cameras {
            cam.intrinsics.validate()?;
            if !ids.insert(cam.camera_id.as_str()) {
                return Err(Error::Validation(format!("duplicate camera id {:?}", cam.camera_id)));
            }
        }
        let mut ids = BTreeSet::new();
        for obj in &self.objects {
            if !ids.insert(obj.id) {
                return Err(Error::Validation(format!("duplicate object id {}", obj.id)));
            }
        }
        Ok(())
    }

    /// The same scene with camera `k` physically removed.
    pub fn without_camera(&self, k: usize) -> SceneConfig {
        let mut s = self.clone();
        s.cameras.remove(k);
        s.roi_refs.remove(k);
        s
    }

    /// Converts a BEV-frame point to world coordinates.
    pub fn bev_to_world(&self, p: Vec3) -> Vec3 {
        self.bev_frame.apply_inverse(p)
    }

    /// World-frame corners of an object's box.
    pub fn object_world_corners(&self, obj: &ObjectLabel) -> [Vec3; 8] {
        obj.bbox.corners().map(|c| self.bev_to_world(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Intersection,
    Corridor,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::Intersection => "intersection",
            Layout::Corridor => "corridor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    pub seed: u64,
    pub num_cameras: usize,
    pub pole_height_range: (f64, f64),
    pub layout: Layout,
    pub num_objects: usize,
    /// Relative proportions of vehicles, cyclists and pedestrians.
    pub object_mix: [f64; 3],
    pub intrinsics: PinholeIntrinsics,
    pub max_cameras: usize,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            num_cameras: 4,
            pole_height_range: DEFAULT_POLE_HEIGHTS,
            layout: Layout::Corridor,
            num_objects: 10,
            object_mix: [0.6, 0.2, 0.2],
            intrinsics: PinholeIntrinsics {
                fx: 1000.0,
                fy: 1000.0,
                cx: 480.0,
                cy: 272.0,
                width: 960,
                height: 544,
            },
            max_cameras: DEFAULT_MAX_CAMERAS,
        }
    }
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_cameras == 0 || self.num_cameras > self.max_cameras {
            return Err(Error::Validation(format!(
                "camera count must be in 1..={} (got {})",
                self.max_cameras, self.num_cameras
            )));
        }
        let (lo, hi) = self.pole_height_range;
        if !(lo > 0.0 && hi < 100.0 && lo <= hi) {
            return Err(Error::Validation("pole_height_range must satisfy 0 < lo <= hi < 100".into()));
        }
        if !self.object_mix.iter().all(|p| p.is_finite() && *p >= 0.0)
            || self.object_mix.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Validation("object_mix must be non-negative with a positive sum".into()));
        }
        self.intrinsics.validate()
    }
}

/// Builds a scene from `spec`. The result is a pure function of `spec`.
///
/// Corridor cameras stand on alternating sides of a road running along world `+y`,
/// 60 m apart; intersection cameras ring the origin at ~35 m and face inwards.
/// The BEV frame coincides with the world frame. Objects are rejection-sampled on
/// the road area until their footprint centre projects into at least one image.
pub fn generate_synthetic_scene(spec: &SyntheticSceneSpec) -> Result<SceneConfig> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.num_cameras;
    let (h_lo, h_hi) = spec.pole_height_range;
    let mut cameras = Vec::with_capacity(n);
    for i in 0..n {
        let height = uniform(&mut rng, h_lo, h_hi);
        let pitch = uniform(&mut rng, PITCH_RANGE_DEG.0, PITCH_RANGE_DEG.1).to_radians();
        let (position, yaw) = match spec.layout {
            Layout::Corridor => {
                let side = if i % 2 == 0 { -1.0 } else { 1.0 };
                let y = i as f64 * 60.0 + uniform(&mut rng, -5.0, 5.0);
                let inward = uniform(&mut rng, 0.15, 0.45);
                ([side * 13.0, y, height], FRAC_PI_2 + side * inward)
            }
            Layout::Intersection => {
                let bearing = TAU * i as f64 / n as f64 + uniform(&mut rng, -0.2, 0.2);
                let radius = uniform(&mut rng, 32.0, 38.0);
                let pos = [radius * libm::cos(bearing), radius * libm::sin(bearing), height];
                (pos, bearing + PI + uniform(&mut rng, -0.25, 0.25))
            }
        };
        cameras.push(CameraModel::looking(format!("cam{i:02}"), spec.intrinsics, position, yaw, pitch)?);
    }

    let (x_range, y_range) = match spec.layout {
        Layout::Corridor => ((-10.0, 10.0), (-10.0, (n - 1) as f64 * 60.0 + 60.0)),
        Layout::Intersection => ((-25.0, 25.0), (-25.0, 25.0)),
    };
    let mix_total: f64 = spec.object_mix.iter().sum();
    let mut objects = Vec::with_capacity(spec.num_objects);
    for id in 0..spec.num_objects {
        let category = sample_category(&mut rng, &spec.object_mix, mix_total);
        let nominal = category.nominal_dims();
        let dims = nominal.map(|d| d * uniform(&mut rng, 0.9, 1.1));
        let yaw = PI - TAU * rng.random::<f64>();
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let x = uniform(&mut rng, x_range.0, x_range.1);
            let y = uniform(&mut rng, y_range.0, y_range.1);
            if visible_in_any(&cameras, [x, y, 0.0]) {
                placed = Some([x, y, dims[2] / 2.0]);
                break;
            }
        }
        let center = placed.ok_or_else(|| {
            Error::InfeasibleLayout(format!("object {id} could not be placed inside any camera view"))
        })?;
        objects.push(ObjectLabel { id: id as u64, bbox: Box3D::new(center, dims, yaw, category)? });
    }

    Ok(SceneConfig {
        scene_id: format!("synthetic-{}-{}", spec.layout.name(), spec.seed),
        roi_refs: alloc::vec![None; n],
        cameras,
        bev_frame: RigidTransform::IDENTITY,
        objects,
    })
}

fn visible_in_any(cameras: &[CameraModel], p: Vec3) -> bool {
    cameras
        .iter()
        .any(|c| c.project(p).map(|q| c.intrinsics.contains(q.u, q.v)).unwrap_or(false))
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn sample_category(rng: &mut ChaCha8Rng, mix: &[f64; 3], total: f64) -> Category {
    let r = rng.random::<f64>() * total;
    let class = if r < mix[0] {
        ObjectClass::Vehicle
    } else if r < mix[0] + mix[1] {
        ObjectClass::Cyclist
    } else {
        ObjectClass::Pedestrian
    };
    let members: Vec<Category> = Category::ALL.into_iter().filter(|c| c.class() == class).collect();
    members[rng.random_range(0..members.len())]
}
