//! Geometry and pipeline engine for dense multi-camera roadside BEV perception.
//!
//! The crate is `no_std` (with `alloc`) and contains only pure computation:
//!
//! 1. **geometry** – rigid transforms, pinhole cameras, projection, angle wrapping.
//! 2. **scene** – scene configuration and deterministic synthetic scene generation.
//! 3. **grid** – BEV grid, reference points, CamMask / ROIMask and the 2D–3D mapping table.
//! 4. **augment** – SE(2) BEV-frame augmentation with label co-transformation.
//! 5. **features** – camera rotation embedding, position encoding and mean-pool aggregation.
//! 6. **ambiguity** – the two-frame orientation-ambiguity construction.
//! 7. **metrics** – center-distance matching, AP and TP errors, NDS.
//!
//! File formats, rendering, parallel drivers and the command line live in the
//! `roadbev` companion crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ambiguity;
pub mod augment;
mod digest;
mod error;
pub mod features;
pub mod geometry;
pub mod grid;
pub mod metrics;
pub mod scene;

pub use ambiguity::{
    build_scenario, run_ambiguity_experiment, AmbiguityReport, FrameChoice, ScenarioVariant,
};
pub use augment::{
    apply_augmentation, sample_augmentation, sample_augmentation_seeded, AugmentationRanges, BevAugmentation,
    PsiMode,
};
pub use error::{Error, Result};
pub use features::{
    aggregate, apply_rotation_embedding, bilinear_sample, position_encoding, rotation_embedding,
    synthesize_feature_map, AggregateOptions, BevFeature, FeatureMap, RotationEmbeddingTable,
};
pub use geometry::{
    angle_distance, camera_yaw_in_frame, rot_z, to_display_angle, wrap_angle, Box3D, CameraModel, Category,
    Mat3, ObjectClass, PinholeIntrinsics, Projection, RigidTransform, Vec3,
};
pub use grid::{
    build_mapping, cell_center, coverage_stats, reference_points, scene_digest, BevGridSpec, CamMask,
    CoverageStats, Hit, MappingBuilder, MappingTable, Provenance, RoiBitmap, RoiMask,
};
pub use metrics::{
    compute_metrics, match_detections, CategoryMetrics, Detection, DetectionSet, MatchResult,
    MetricsConfig, MetricsReport,
};
pub use scene::{generate_synthetic_scene, Layout, ObjectLabel, SceneConfig, SyntheticSceneSpec};
