//! Seeded inputs shared by the integration tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadbev_core::{
    generate_synthetic_scene, Box3D, CameraModel, Category, Detection, Layout, Mat3, PinholeIntrinsics,
    RigidTransform, SceneConfig, SyntheticSceneSpec,
};

use super::oracle::RefBox;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random rotation (Shoemake's unit-quaternion draw).
pub fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) =
        (a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    Mat3([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

pub fn random_camera(rng: &mut impl Rng) -> CameraModel {
    let width = rng.random_range(320..2000u32);
    let height = rng.random_range(240..1200u32);
    let k = PinholeIntrinsics::new(
        rng.random_range(300.0..2500.0),
        rng.random_range(300.0..2500.0),
        rng.random_range(0.3..0.7) * width as f64,
        rng.random_range(0.3..0.7) * height as f64,
        width,
        height,
    )
    .unwrap();
    let t = [rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-20.0..20.0)];
    CameraModel::new("rand", k, RigidTransform::new(random_rotation(rng), t).unwrap()).unwrap()
}

/// A world point in front of `cam`, built by back-projecting a random pixel.
pub fn point_in_front(rng: &mut impl Rng, cam: &CameraModel) -> [f64; 3] {
    let k = &cam.intrinsics;
    let u = rng.random_range(-0.2..1.2) * k.width as f64;
    let v = rng.random_range(-0.2..1.2) * k.height as f64;
    let d = rng.random_range(0.5..300.0);
    let pc = [(u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d];
    let r = cam.world_to_camera.rotation().0;
    let t = cam.world_to_camera.translation();
    let q = [pc[0] - t[0], pc[1] - t[1], pc[2] - t[2]];
    [
        r[0][0] * q[0] + r[1][0] * q[1] + r[2][0] * q[2],
        r[0][1] * q[0] + r[1][1] * q[1] + r[2][1] * q[2],
        r[0][2] * q[0] + r[1][2] * q[1] + r[2][2] * q[2],
    ]
}

pub fn scene(seed: u64, num_cameras: usize, layout: Layout) -> SceneConfig {
    generate_synthetic_scene(&SyntheticSceneSpec { seed, num_cameras, layout, ..Default::default() }).unwrap()
}

pub fn category_index(c: Category) -> usize {
    Category::ALL.iter().position(|&x| x == c).unwrap()
}

pub fn to_ref(d: &Detection) -> RefBox {
    let c = d.bbox.center();
    let s = d.bbox.dims();
    RefBox { x: c[0], y: c[1], l: s[0], w: s[1], h: s[2], yaw: d.bbox.yaw(), class: category_index(d.bbox.category()), score: d.score }
}

/// A frame of `n` ground-truth objects and a noisy detector's output: most
/// objects detected with jittered pose and size, some missed, some false
/// positives.
pub fn noisy_frame(rng: &mut impl Rng, n: usize) -> (Vec<Detection>, Vec<Detection>) {
    let mut gts = Vec::with_capacity(n);
    let mut dets = Vec::new();
    for _ in 0..n {
        let cat = Category::ALL[rng.random_range(0..Category::ALL.len())];
        let dims = cat.nominal_dims().map(|d| d * rng.random_range(0.85..1.15));
        let center = [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), dims[2] / 2.0];
        let yaw = rng.random_range(-PI..PI);
        let gt = Box3D::new(center, dims, yaw, cat).unwrap();
        gts.push(Detection { bbox: gt, score: 1.0 });
        if rng.random::<f64>() < 0.15 {
            continue;
        }
        let sigma = rng.random_range(0.05..1.5);
        let c = [center[0] + sigma * rng.random_range(-1.0..1.0), center[1] + sigma * rng.random_range(-1.0..1.0), center[2]];
        let d = dims.map(|x| x * rng.random_range(0.8..1.2));
        let y = if rng.random::<f64>() < 0.1 { yaw + PI } else { yaw + rng.random_range(-0.4..0.4) };
        // a detector occasionally confuses fine categories within a class
        let cat = if rng.random::<f64>() < 0.05 { Category::ALL[rng.random_range(0..Category::ALL.len())] } else { cat };
        dets.push(Detection { bbox: Box3D::new(c, d, y, cat).unwrap(), score: rng.random_range(0.05..1.0) });
    }
    for _ in 0..rng.random_range(0..n / 3 + 1) {
        let cat = Category::ALL[rng.random_range(0..Category::ALL.len())];
        let c = [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), 0.8];
        dets.push(Detection {
            bbox: Box3D::new(c, cat.nominal_dims(), rng.random_range(-PI..PI), cat).unwrap(),
            score: rng.random_range(0.0..0.8),
        });
    }
    (dets, gts)
}

/// Default intrinsics of generated scenes.
pub fn default_intrinsics() -> PinholeIntrinsics {
    SyntheticSceneSpec::default().intrinsics
}

pub fn corridor(seed: u64, n: usize) -> SceneConfig {
    scene(seed, n, Layout::Corridor)
}
