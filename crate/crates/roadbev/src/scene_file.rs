//! TOML scene and detection files.
//!
//! ```toml
//! scene_id = "synthetic-corridor-1"
//!
//! [bev_frame]
//! rotation = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]   # row-major, world -> BEV
//! translation = [0.0, 0.0, 0.0]                               # meters
//!
//! [[cameras]]
//! camera_id = "cam00"
//! roi_mask = "rois/cam00.pgm"     # optional, relative to the scene file
//! intrinsics = { fx = 1000.0, fy = 1000.0, cx = 480.0, cy = 272.0, width = 960, height = 544 }
//! world_to_camera = { rotation = [...], translation = [...] }
//!
//! [[objects]]
//! id = 0
//! category = "car"
//! center = [1.0, 2.0, 0.75]       # meters, BEV frame
//! dims = [4.5, 1.8, 1.5]          # length, width, height
//! yaw = 0.5                       # radians
//! ```
//!
//! Detection and ground-truth files hold `[[frames]]`, each with an `objects`
//! array using the object schema above plus a `score` in `[0, 1]` (1 when
//! omitted).

use std::fs;
use std::path::{Path, PathBuf};

use roadbev_core::{
    BevAugmentation, Box3D, CameraModel, Category, Detection, DetectionSet, Mat3, ObjectLabel,
    PinholeIntrinsics, RigidTransform, RoiMask, SceneConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pgm;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformDto {
    rotation: [f64; 9],
    translation: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsDto {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDto {
    camera_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roi_mask: Option<String>,
    intrinsics: IntrinsicsDto,
    world_to_camera: TransformDto,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDto {
    id: u64,
    category: String,
    center: [f64; 3],
    dims: [f64; 3],
    yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDto {
    scene_id: String,
    bev_frame: TransformDto,
    #[serde(default)]
    cameras: Vec<CameraDto>,
    #[serde(default)]
    objects: Vec<ObjectDto>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDto {
    #[serde(default)]
    objects: Vec<ObjectDto>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionsDto {
    #[serde(default)]
    frames: Vec<FrameDto>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AugmentationDto {
    seed: u64,
    delta_x: f64,
    delta_y: f64,
    delta_psi: f64,
}

fn transform_dto(t: &RigidTransform) -> TransformDto {
    TransformDto { rotation: t.rotation().to_row_major(), translation: t.translation() }
}

fn transform(path: &Path, field: &str, t: &TransformDto) -> Result<RigidTransform> {
    RigidTransform::new(Mat3::from_row_major(t.rotation), t.translation)
        .map_err(|e| Error::validation(path, field, e))
}

fn object_dto(id: u64, b: &Box3D, score: Option<f64>) -> ObjectDto {
    ObjectDto { id, category: b.category().name().into(), center: b.center(), dims: b.dims(), yaw: b.yaw(), score }
}

fn object(path: &Path, field: &str, o: &ObjectDto) -> Result<Box3D> {
    let category = Category::from_name(&o.category).ok_or_else(|| {
        Error::validation(path, format!("{field}.category"), format!("unknown category {:?}", o.category))
    })?;
    Box3D::new(o.center, o.dims, o.yaw, category).map_err(|e| Error::validation(path, field, e))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse { path: path.to_owned(), line, message: e.message().trim().replace('\n', " ") }
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn serialize<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::format(path, e.to_string()))
}

pub fn scene_from_str(text: &str, path: &Path, max_cameras: usize) -> Result<SceneConfig> {
    let dto: SceneDto = parse(path, text)?;
    let bev_frame = transform(path, "bev_frame", &dto.bev_frame)?;
    let mut cameras = Vec::with_capacity(dto.cameras.len());
    let mut roi_refs = Vec::with_capacity(dto.cameras.len());
    for (k, c) in dto.cameras.iter().enumerate() {
        let field = format!("cameras[{k}]");
        let i = &c.intrinsics;
        let intrinsics = PinholeIntrinsics::new(i.fx, i.fy, i.cx, i.cy, i.width, i.height)
            .map_err(|e| Error::validation(path, format!("{field}.intrinsics"), e))?;
        let pose = transform(path, &format!("{field}.world_to_camera"), &c.world_to_camera)?;
        let cam = CameraModel::new(c.camera_id.clone(), intrinsics, pose).map_err(|e| Error::validation(path, &field, e))?;
        cameras.push(cam);
        roi_refs.push(c.roi_mask.clone());
    }
    let objects = dto
        .objects
        .iter()
        .enumerate()
        .map(|(k, o)| Ok(ObjectLabel { id: o.id, bbox: object(path, &format!("objects[{k}]"), o)? }))
        .collect::<Result<Vec<_>>>()?;
    let scene = SceneConfig { scene_id: dto.scene_id, cameras, bev_frame, objects, roi_refs };
    scene.validate(max_cameras).map_err(|e| Error::validation(path, "scene", e))?;
    Ok(scene)
}

pub fn scene_to_string(scene: &SceneConfig) -> Result<String> {
    let dto = SceneDto {
        scene_id: scene.scene_id.clone(),
        bev_frame: transform_dto(&scene.bev_frame),
        cameras: scene
            .cameras
            .iter()
            .zip(scene.roi_refs.iter().chain(std::iter::repeat(&None)))
            .map(|(c, roi)| {
                let k = &c.intrinsics;
                CameraDto {
                    camera_id: c.camera_id.clone(),
                    roi_mask: roi.clone(),
                    intrinsics: IntrinsicsDto { fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy, width: k.width, height: k.height },
                    world_to_camera: transform_dto(&c.world_to_camera),
                }
            })
            .collect(),
        objects: scene.objects.iter().map(|o| object_dto(o.id, &o.bbox, None)).collect(),
    };
    serialize(Path::new("<scene>"), &dto)
}

pub fn load_scene(path: impl AsRef<Path>, max_cameras: usize) -> Result<SceneConfig> {
    let path = path.as_ref();
    scene_from_str(&read(path)?, path, max_cameras)
}

pub fn save_scene(scene: &SceneConfig, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &scene_to_string(scene)?)
}

/// Loads the ROI bitmaps a scene references, resolving paths against the
/// scene file's directory. `None` when no camera references a mask.
pub fn load_scene_rois(scene: &SceneConfig, scene_path: &Path) -> Result<Option<RoiMask>> {
    if scene.roi_refs.iter().all(Option::is_none) {
        return Ok(None);
    }
    let base = scene_path.parent().unwrap_or(Path::new(""));
    let per_camera = scene
        .roi_refs
        .iter()
        .map(|r| r.as_ref().map(|r| pgm::read_roi(&base.join(r))).transpose())
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(RoiMask { per_camera }))
}

/// Loads `<dir>/<camera_id>.pgm` for every camera that has one.
pub fn load_roi_dir(scene: &SceneConfig, dir: &Path) -> Result<RoiMask> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let per_camera = scene
        .cameras
        .iter()
        .map(|c| {
            let p: PathBuf = dir.join(format!("{}.pgm", c.camera_id));
            p.exists().then(|| pgm::read_roi(&p)).transpose()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RoiMask { per_camera })
}

pub fn detections_from_str(text: &str, path: &Path) -> Result<DetectionSet> {
    let dto: DetectionsDto = parse(path, text)?;
    let mut frames = Vec::with_capacity(dto.frames.len());
    for (f, frame) in dto.frames.iter().enumerate() {
        let mut dets = Vec::with_capacity(frame.objects.len());
        for (k, o) in frame.objects.iter().enumerate() {
            let field = format!("frames[{f}].objects[{k}]");
            let bbox = object(path, &field, o)?;
            let det = Detection::new(bbox, o.score.unwrap_or(1.0))
                .map_err(|e| Error::validation(path, format!("{field}.score"), e))?;
            dets.push(det);
        }
        frames.push(dets);
    }
    Ok(DetectionSet { frames })
}

pub fn detections_to_string(set: &DetectionSet) -> Result<String> {
    let dto = DetectionsDto {
        frames: set
            .frames
            .iter()
            .map(|f| FrameDto {
                objects: f.iter().enumerate().map(|(k, d)| object_dto(k as u64, &d.bbox, Some(d.score))).collect(),
            })
            .collect(),
    };
    serialize(Path::new("<detections>"), &dto)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<DetectionSet> {
    let path = path.as_ref();
    detections_from_str(&read(path)?, path)
}

pub fn save_detections(set: &DetectionSet, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &detections_to_string(set)?)
}

/// A scene's objects as a single-frame ground-truth set with score 1.
pub fn scene_ground_truth(scene: &SceneConfig) -> DetectionSet {
    DetectionSet { frames: vec![scene.objects.iter().map(|o| Detection { bbox: o.bbox, score: 1.0 }).collect()] }
}

/// Record of an applied augmentation.
pub fn save_augmentation(aug: &BevAugmentation, seed: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dto = AugmentationDto { seed, delta_x: aug.delta_xy[0], delta_y: aug.delta_xy[1], delta_psi: aug.delta_psi };
    write(path, &serialize(path, &dto)?)
}

pub fn load_augmentation(path: impl AsRef<Path>) -> Result<(BevAugmentation, u64)> {
    let path = path.as_ref();
    let dto: AugmentationDto = parse(path, &read(path)?)?;
    let aug = BevAugmentation::new([dto.delta_x, dto.delta_y], dto.delta_psi)
        .map_err(|e| Error::validation(path, "augmentation", e))?;
    Ok((aug, dto.seed))
}
