//! Two-frame orientation-ambiguity construction.
//!
//! Two cameras and one obstacle stay fixed in the world while the BEV frame
//! moves from camera A to camera B and turns by a quarter. Frame A is the world
//! frame itself (origin under camera A). Frame B has its origin under camera B
//! and its axes rotated by −π/2, so an obstacle heading `π` in frame A heads
//! `3π/2` in frame B.
//!
//! The obstacle is placed at the fixed point of that frame change: its BEV
//! coordinates, and hence its cell index and position encoding, are identical
//! in both frames. Camera A sits at world `(0, 0, 10)` looking along `+x`,
//! camera B at `(20, 20, 10)` looking along `−y`, the obstacle at `(20, 0)`.
//! All coordinates are small integers so both frames produce bit-identical
//! reference points for the obstacle's cell.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::augment::{apply_augmentation, BevAugmentation};
use crate::error::Result;
use crate::features::{aggregate, synthesize_feature_map, AggregateOptions, BevFeature, RotationEmbeddingTable};
use crate::geometry::{angle_distance, Box3D, CameraModel, Category, PinholeIntrinsics, RigidTransform};
use crate::grid::{build_mapping, BevGridSpec, CamMask, DEFAULT_Z_SAMPLES};
use crate::scene::{ObjectLabel, SceneConfig};

/// Separation threshold above which the two frames count as distinguishable.
pub const RESOLUTION_THRESHOLD: f64 = 1e-3;

pub const CHANNELS: usize = 16;
pub const FEATURE_SEED: u64 = 0x5eed_f00d;
const FEATURE_STRIDE: f64 = 16.0;
const CAMERA_HEIGHT: f64 = 10.0;
const OFFSET: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioVariant {
    /// A car spanning three cells.
    Vehicle,
    /// A pedestrian inside a single cell.
    Pedestrian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameChoice {
    A,
    B,
}

/// 41 × 41 cells of 2 m over [−41, 41] m, so cell centres are even integers.
pub fn scenario_grid() -> BevGridSpec {
    BevGridSpec::new(41, 41, (-41.0, 41.0), (-41.0, 41.0), DEFAULT_Z_SAMPLES.to_vec())
        .expect("static grid is valid")
}

/// Frame change from A to B.
pub fn frame_change() -> BevAugmentation {
    BevAugmentation { delta_xy: [OFFSET, OFFSET], delta_psi: -FRAC_PI_2 }
}

fn intrinsics() -> PinholeIntrinsics {
    PinholeIntrinsics { fx: 1000.0, fy: 1000.0, cx: 480.0, cy: 272.0, width: 960, height: 544 }
}

fn frame_a_scene(variant: ScenarioVariant) -> SceneConfig {
    let pitch = libm::atan2(CAMERA_HEIGHT, OFFSET);
    let cameras = vec![
        CameraModel::looking("A", intrinsics(), [0.0, 0.0, CAMERA_HEIGHT], 0.0, pitch).expect("valid camera"),
        CameraModel::looking("B", intrinsics(), [OFFSET, OFFSET, CAMERA_HEIGHT], -FRAC_PI_2, pitch)
            .expect("valid camera"),
    ];
    let category = match variant {
        ScenarioVariant::Vehicle => Category::Car,
        ScenarioVariant::Pedestrian => Category::Pedestrian,
    };
    let dims = category.nominal_dims();
    let bbox = Box3D::new([OFFSET, 0.0, dims[2] / 2.0], dims, PI, category).expect("valid box");
    let name = match variant {
        ScenarioVariant::Vehicle => "frame-ambiguity-vehicle",
        ScenarioVariant::Pedestrian => "frame-ambiguity-pedestrian",
    };
    SceneConfig {
        scene_id: name.into(),
        cameras,
        bev_frame: RigidTransform::IDENTITY,
        objects: vec![ObjectLabel { id: 0, bbox }],
        roi_refs: vec![None, None],
    }
}

/// The scenario seen from frame A or frame B. World geometry is identical.
pub fn build_scenario(variant: ScenarioVariant, frame: FrameChoice) -> SceneConfig {
    let a = frame_a_scene(variant);
    match frame {
        FrameChoice::A => a,
        FrameChoice::B => apply_augmentation(&a, &frame_change()),
    }
}

/// Cells whose centre lies inside the object's footprint, ascending index.
pub fn object_cells(grid: &BevGridSpec, bbox: &Box3D) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = crate::grid::cell_center(grid, ix, iy).expect("in range");
            if bbox.footprint_contains(x, y) {
                cells.push((ix, iy));
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityReport {
    pub variant: ScenarioVariant,
    pub embedding_enabled: bool,
    pub embedding_seed: u64,
    /// Infinity-norm distance between the object's feature block in both frames.
    pub feature_distance: f64,
    /// Object heading in frame A and frame B, internal `(−π, π]` convention.
    pub yaw_pair: (f64, f64),
    pub resolved: bool,
    pub cells_a: Vec<(usize, usize)>,
    pub cells_b: Vec<(usize, usize)>,
    pub camera_yaws_a: Vec<f64>,
    pub camera_yaws_b: Vec<f64>,
    pub construction: String,
}

/// Feature vectors of `cells`, concatenated.
fn block(feature: &BevFeature, cells: &[(usize, usize)]) -> Vec<f64> {
    cells.iter().flat_map(|&(ix, iy)| feature.cell_vector(ix, iy)).collect()
}

fn inf_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).fold(0.0, f64::max)
}

/// Aggregated BEV feature of the scenario in one frame.
pub fn scenario_feature(
    scene: &SceneConfig,
    embedding_enabled: bool,
    embedding_seed: u64,
) -> Result<BevFeature> {
    let grid = scenario_grid();
    let table = build_mapping(scene, &grid, &CamMask::all_active(scene.cameras.len()), None)?;
    let (w, h) = (
        (intrinsics().width as f64 / FEATURE_STRIDE) as usize,
        (intrinsics().height as f64 / FEATURE_STRIDE) as usize,
    );
    let maps = (0..scene.cameras.len())
        .map(|k| synthesize_feature_map(FEATURE_SEED, k, CHANNELS, h, w, FEATURE_STRIDE))
        .collect::<Result<Vec<_>>>()?;
    let options = AggregateOptions {
        use_rotation_embedding: embedding_enabled,
        use_position_encoding: true,
        embedding_table: Some(RotationEmbeddingTable::from_seed(embedding_seed, CHANNELS)),
    };
    aggregate(&maps, &table, scene, &options)
}

/// Builds both frames, aggregates identical feature maps and compares the
/// obstacle's cells.
pub fn run_ambiguity_experiment(
    variant: ScenarioVariant,
    embedding_enabled: bool,
    embedding_seed: u64,
) -> Result<AmbiguityReport> {
    let grid = scenario_grid();
    let a = build_scenario(variant, FrameChoice::A);
    let b = build_scenario(variant, FrameChoice::B);
    let fa = scenario_feature(&a, embedding_enabled, embedding_seed)?;
    let fb = scenario_feature(&b, embedding_enabled, embedding_seed)?;
    let (box_a, box_b) = (a.objects[0].bbox, b.objects[0].bbox);
    let (cells_a, cells_b) = match variant {
        // the cell holding the obstacle centre
        ScenarioVariant::Pedestrian => {
            let ca = box_a.center();
            let cb = box_b.center();
            (
                grid.locate(ca[0], ca[1]).into_iter().collect::<Vec<_>>(),
                grid.locate(cb[0], cb[1]).into_iter().collect::<Vec<_>>(),
            )
        }
        ScenarioVariant::Vehicle => (object_cells(&grid, &box_a), object_cells(&grid, &box_b)),
    };
    let feature_distance = inf_distance(&block(&fa, &cells_a), &block(&fb, &cells_b));
    let yaw_pair = (box_a.yaw(), box_b.yaw());
    let yaws_differ = angle_distance(yaw_pair.0, yaw_pair.1) > 1e-12;
    let resolved = if yaws_differ { feature_distance > RESOLUTION_THRESHOLD } else { true };
    let yaws = |s: &SceneConfig| -> Result<Vec<f64>> {
        s.cameras.iter().map(|c| crate::geometry::camera_yaw_in_frame(c, &s.bev_frame)).collect()
    };
    Ok(AmbiguityReport {
        variant,
        embedding_enabled,
        embedding_seed,
        feature_distance,
        yaw_pair,
        resolved,
        camera_yaws_a: yaws(&a)?,
        camera_yaws_b: yaws(&b)?,
        cells_a,
        cells_b,
        construction: String::from(
            "camera A at world (0,0,10) facing +x; camera B at world (20,20,10) facing -y; \
             frame A = world frame; frame B origin under camera B, axes rotated by -pi/2; \
             obstacle at world (20,0), the fixed point of the frame change, so its BEV \
             coordinates are (20,0) in both frames; grid 41x41 cells of 2 m over [-41,41]^2",
        ),
    })
}
