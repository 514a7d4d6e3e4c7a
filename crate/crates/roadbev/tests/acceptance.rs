//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always show.
#![allow(clippy::needless_range_loop)]

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use roadbev::core::augment::quarter_turn;
use roadbev::core::{
    angle_distance, apply_augmentation, apply_rotation_embedding, build_mapping, camera_yaw_in_frame, compute_metrics,
    coverage_stats, generate_synthetic_scene, rotation_embedding, run_ambiguity_experiment, sample_augmentation,
    synthesize_feature_map, to_display_angle, aggregate, AggregateOptions, AugmentationRanges, BevAugmentation,
    BevGridSpec, Box3D, CamMask, Category, Detection, DetectionSet, FeatureMap, Layout, MappingTable, MetricsConfig,
    PsiMode, RoiBitmap, RoiMask, RotationEmbeddingTable, ScenarioVariant, SceneConfig, SyntheticSceneSpec,
};
use roadbev::parallel;
use support::{fixtures, oracle};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn small_grid() -> BevGridSpec {
    BevGridSpec::new(48, 64, (-40.0, 40.0), (-30.0, 200.0), vec![0.0, 1.5, 3.0]).unwrap()
}

fn projection_oracle() -> Outcome {
    let mut rng = fixtures::rng(1001);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let cam = fixtures::random_camera(&mut rng);
        let x = fixtures::point_in_front(&mut rng, &cam);
        let (u, v) = oracle::project_homogeneous(&cam, x).ok_or_else(|| format!("pair {i}: oracle says behind"))?;
        let p = cam.project(x).map_err(|e| format!("pair {i}: {e}"))?;
        worst = worst.max((p.u - u).abs()).max((p.v - v).abs());
    }
    check(worst <= 1e-9, || format!("max pixel error {worst:e}"))?;
    Ok(format!("1000 pairs, max error {worst:.1e} px"))
}

fn augmentation_consistency() -> Outcome {
    let mut rng = fixtures::rng(1002);
    let ranges = AugmentationRanges { max_translation: 80.0, psi_mode: PsiMode::Uniform };
    let (mut px, mut yaw, mut n) = (0.0f64, 0.0f64, 0usize);
    for seed in 0..100 {
        let layout = if seed % 2 == 0 { Layout::Corridor } else { Layout::Intersection };
        let scene = fixtures::scene(seed, 4, layout);
        for _ in 0..10 {
            let aug = sample_augmentation(&mut rng, &ranges).map_err(|e| e.to_string())?;
            let out = apply_augmentation(&scene, &aug);
            for (o, a) in scene.objects.iter().zip(&out.objects) {
                yaw = yaw.max(angle_distance(a.bbox.yaw(), o.bbox.yaw() - aug.delta_psi));
                for (p, q) in scene.object_world_corners(o).iter().zip(out.object_world_corners(a)) {
                    for cam in &scene.cameras {
                        match (cam.project(*p), cam.project(q)) {
                            (Ok(x), Ok(y)) => {
                                px = px.max((x.u - y.u).abs()).max((x.v - y.v).abs());
                                n += 1;
                            }
                            (Err(_), Err(_)) => {}
                            _ => return Err(format!("scene {seed}: corner changed sides of camera {}", cam.camera_id)),
                        }
                    }
                }
            }
        }
    }
    check(px <= 1e-6, || format!("corner moved {px:e} px"))?;
    check(yaw <= 1e-12, || format!("yaw off by {yaw:e}"))?;
    Ok(format!("{n} corner projections, max {px:.1e} px, yaw {yaw:.1e} rad"))
}

fn cam_mask_equivalence() -> Outcome {
    let grid = small_grid();
    let mut cases = 0;
    for seed in 0..20 {
        let n = 2 + seed as usize % 4;
        let layout = if seed % 2 == 0 { Layout::Corridor } else { Layout::Intersection };
        let scene = fixtures::scene(2000 + seed, n, layout);
        for k in 0..n {
            let mut active = vec![true; n];
            active[k] = false;
            let masked = build_mapping(&scene, &grid, &CamMask::new(active).unwrap(), None).map_err(|e| e.to_string())?;
            let deleted = scene.without_camera(k);
            let reference =
                build_mapping(&deleted, &grid, &CamMask::all_active(n - 1), None).map_err(|e| e.to_string())?;
            let k16 = k as u16;
            let reindexed = masked.map_camera_indices(n - 1, |c| if c > k16 { c - 1 } else { c });
            check(reindexed.same_hits(&reference), || format!("scene {seed}, camera {k}"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} (scene, camera) cases bit-identical"))
}

fn blocky_roi(rng: &mut impl Rng, scene: &SceneConfig, p_inside: f64) -> RoiMask {
    RoiMask {
        per_camera: scene
            .cameras
            .iter()
            .map(|c| {
                let (w, h) = (c.intrinsics.width, c.intrinsics.height);
                let bw = w / 32 + 1;
                let blocks: Vec<bool> = (0..bw * (h / 32 + 1)).map(|_| rng.random::<f64>() < p_inside).collect();
                let data = (0..h)
                    .flat_map(|y| (0..w).map(move |x| (x, y)))
                    .map(|(x, y)| if blocks[(y / 32 * bw + x / 32) as usize] { 255 } else { 0 })
                    .collect();
                Some(RoiBitmap::new(w, h, data).unwrap())
            })
            .collect(),
    }
}

fn subset(small: &MappingTable, big: &MappingTable) -> bool {
    (0..small.grid().num_cells()).all(|c| {
        let b = big.hits_at(c);
        small.hits_at(c).iter().all(|h| b.iter().any(|x| x.bit_eq(h)))
    })
}

fn roi_monotonicity() -> Outcome {
    let mut rng = fixtures::rng(1004);
    let grid = small_grid();
    for seed in 0..6 {
        let scene = fixtures::corridor(3000 + seed, 3);
        let mask = CamMask::all_active(3);
        let build = |roi: Option<&RoiMask>| build_mapping(&scene, &grid, &mask, roi).map_err(|e| e.to_string());
        let none = build(None)?;
        check(none.same_hits(&build(Some(&RoiMask::filled_for(&scene, 255)))?), || format!("scene {seed}: all-255 differs"))?;
        let empty = coverage_stats(&build(Some(&RoiMask::filled_for(&scene, 0)))?).empty_cell_fraction;
        check(empty == 1.0, || format!("scene {seed}: all-0 empty fraction {empty}"))?;
        let r1 = blocky_roi(&mut rng, &scene, 0.7);
        let r2 = blocky_roi(&mut rng, &scene, 0.7);
        let both = RoiMask {
            per_camera: r1
                .per_camera
                .iter()
                .zip(&r2.per_camera)
                .map(|(a, b)| Some(a.as_ref().unwrap().and(b.as_ref().unwrap()).unwrap()))
                .collect(),
        };
        let t1 = build(Some(&r1))?;
        let t12 = build(Some(&both))?;
        check(subset(&t1, &none) && subset(&t12, &t1), || format!("scene {seed}: intersection added hits"))?;
    }
    Ok("6 scenes: full ≡ none, empty → 1.0, intersections only remove".into())
}

fn turned(q: u8, n: usize, ix: usize, iy: usize) -> (usize, usize) {
    match q % 4 {
        0 => (ix, iy),
        1 => (iy, n - 1 - ix),
        2 => (n - 1 - ix, n - 1 - iy),
        _ => (n - 1 - iy, ix),
    }
}

fn right_angle_equivariance() -> Outcome {
    let n = 200;
    let grid = BevGridSpec::new(n, n, (-100.0, 100.0), (-100.0, 100.0), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    check(grid.is_square_symmetric(), || "grid not square symmetric".into())?;
    let mut hits = 0;
    for seed in 0..3 {
        let scene = fixtures::scene(4000 + seed, 4, Layout::Intersection);
        let mask = CamMask::all_active(4);
        let base = build_mapping(&scene, &grid, &mask, None).map_err(|e| e.to_string())?;
        hits += base.total_hits();
        for q in 1..4u8 {
            let aug = BevAugmentation::new([0.0, 0.0], quarter_turn(q)).unwrap();
            let t = build_mapping(&apply_augmentation(&scene, &aug), &grid, &mask, None).map_err(|e| e.to_string())?;
            for iy in 0..n {
                for ix in 0..n {
                    let (jx, jy) = turned(q, n, ix, iy);
                    let (a, b) = (base.cell_hits(ix, iy), t.cell_hits(jx, jy));
                    check(a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.bit_eq(y)), || {
                        format!("scene {seed}, {q} quarter turns, cell ({ix},{iy})")
                    })?;
                }
            }
        }
    }
    Ok(format!("3 scenes × 3 turns, {hits} base hits bit-exact"))
}

fn frame_ambiguity() -> Outcome {
    let off = run_ambiguity_experiment(ScenarioVariant::Pedestrian, false, 0).map_err(|e| e.to_string())?;
    let yaws = (to_display_angle(off.yaw_pair.0), to_display_angle(off.yaw_pair.1));
    check(off.feature_distance <= 1e-9, || format!("pedestrian distance {:e} with embedding off", off.feature_distance))?;
    check((yaws.0 - PI).abs() <= 1e-12 && (yaws.1 - 3.0 * FRAC_PI_2).abs() <= 1e-12, || format!("yaw pair {yaws:?}"))?;
    let separated = (0..100u64)
        .filter(|&s| run_ambiguity_experiment(ScenarioVariant::Pedestrian, true, s).is_ok_and(|r| r.feature_distance >= 1e-3))
        .count();
    check(separated >= 99, || format!("embedding separates only {separated}/100 seeds"))?;
    let vehicle = run_ambiguity_experiment(ScenarioVariant::Vehicle, false, 0).map_err(|e| e.to_string())?;
    check(vehicle.feature_distance > 1e-3, || format!("vehicle distance {:e}", vehicle.feature_distance))?;
    Ok(format!(
        "pedestrian off {:.1e} yaws ({:.4}, {:.4}); on separates {separated}/100; vehicle off {:.3}",
        off.feature_distance, yaws.0, yaws.1, vehicle.feature_distance
    ))
}

fn embedding_algebra() -> Outcome {
    const C: usize = 16;
    let mut rng = fixtures::rng(1007);
    let (mut sub, mut per) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let table = RotationEmbeddingTable::from_seed(rng.random(), C);
        let theta = rng.random_range(-20.0..20.0);
        let e = rotation_embedding(theta, &table).map_err(|e| e.to_string())?;
        let e2 = rotation_embedding(theta + 2.0 * PI, &table).map_err(|e| e.to_string())?;
        per = e.iter().zip(&e2).map(|(a, b)| (a - b).abs()).fold(per, f64::max);
        let f = synthesize_feature_map(rng.random(), 0, C, 6, 10, 16.0).map_err(|e| e.to_string())?;
        let g = apply_rotation_embedding(&f, theta, &table).map_err(|e| e.to_string())?;
        sub = g.data().iter().zip(f.data()).enumerate().map(|(i, (x, y))| (x - e[i / 60] - y).abs()).fold(sub, f64::max);
    }
    check(sub <= 1e-12, || format!("apply-then-subtract residual {sub:e}"))?;
    check(per <= 1e-12, || format!("2π periodicity residual {per:e}"))?;

    let grid = small_grid();
    let mut lin = 0.0f64;
    for seed in 0..10 {
        let scene = fixtures::corridor(5000 + seed, 3);
        let table = build_mapping(&scene, &grid, &CamMask::all_active(3), None).map_err(|e| e.to_string())?;
        let maps: Vec<FeatureMap> =
            (0..3).map(|k| synthesize_feature_map(seed, k, C, 34, 60, 16.0).unwrap()).collect();
        let emb = RotationEmbeddingTable::from_seed(seed + 77, C);
        let with = aggregate(&maps, &table, &scene, &AggregateOptions { use_rotation_embedding: true, use_position_encoding: true, embedding_table: Some(emb.clone()) })
            .map_err(|e| e.to_string())?;
        let without = aggregate(&maps, &table, &scene, &AggregateOptions { use_rotation_embedding: false, use_position_encoding: true, embedding_table: None })
            .map_err(|e| e.to_string())?;
        let e: Vec<Vec<f64>> = scene
            .cameras
            .iter()
            .map(|c| rotation_embedding(camera_yaw_in_frame(c, &scene.bev_frame).unwrap(), &emb).unwrap())
            .collect();
        let n = grid.num_cells();
        for cell in 0..n {
            let hits = table.hits_at(cell);
            for ch in 0..C {
                let mean_e = if hits.is_empty() {
                    0.0
                } else {
                    hits.iter().map(|h| e[h.camera_index as usize][ch]).sum::<f64>() / hits.len() as f64
                };
                lin = lin.max((with.data()[ch * n + cell] - without.data()[ch * n + cell] - mean_e).abs());
            }
        }
    }
    check(lin <= 1e-9, || format!("linearity residual {lin:e}"))?;
    Ok(format!("subtract {sub:.1e}, period {per:.1e}, linearity {lin:.1e} over 10 scenes"))
}

fn ref_sets(d: &DetectionSet) -> Vec<Vec<oracle::RefBox>> {
    d.frames.iter().map(|f| f.iter().map(fixtures::to_ref).collect()).collect()
}

fn moved(s: &DetectionSet, t: [f64; 2], a: f64) -> DetectionSet {
    let (sn, cs) = a.sin_cos();
    let frames = s
        .frames
        .iter()
        .map(|f| {
            f.iter()
                .map(|d| {
                    let c = d.bbox.center();
                    let p = [cs * c[0] - sn * c[1] + t[0], sn * c[0] + cs * c[1] + t[1], c[2]];
                    Detection { bbox: Box3D::new(p, d.bbox.dims(), d.bbox.yaw() + a, d.bbox.category()).unwrap(), score: d.score }
                })
                .collect()
        })
        .collect();
    DetectionSet { frames }
}

fn metrics_oracle() -> Outcome {
    let config = MetricsConfig::default();
    let mut rng = fixtures::rng(1008);
    let (mut dets, mut gts) = (Vec::new(), Vec::new());
    for _ in 0..50 {
        let n = rng.random_range(5..30);
        let (d, g) = fixtures::noisy_frame(&mut rng, n);
        dets.push(d);
        gts.push(g);
    }
    let (dets, gts) = (DetectionSet { frames: dets }, DetectionSet { frames: gts });

    let perfect = compute_metrics(&gts, &gts, &config).map_err(|e| e.to_string())?;
    let p = (perfect.map, perfect.mate, perfect.mase, perfect.maoe, perfect.nds);
    check(p == (1.0, 0.0, 0.0, 0.0, 1.0), || format!("perfect detector gave {p:?}"))?;

    let classes = Category::ALL.len();
    let mut worst = 0.0f64;
    let mut compare = |d: &DetectionSet, g: &DetectionSet| -> Result<(), String> {
        let got = compute_metrics(d, g, &config).map_err(|e| e.to_string())?;
        let want = oracle::metrics(&ref_sets(d), &ref_sets(g), &config.thresholds, config.tp_threshold, classes)
            .ok_or("reference found no ground truth")?;
        for (a, b) in [(got.map, want.map), (got.mate, want.mate), (got.mase, want.mase), (got.maoe, want.maoe), (got.nds, want.nds)] {
            worst = worst.max((a - b).abs());
        }
        for ((_, aps), c) in want.per_class_ap.iter().zip(&got.per_category) {
            for (a, (_, b)) in aps.iter().zip(&c.ap) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(())
    };
    compare(&dets, &gts)?;
    for f in 0..50 {
        compare(&DetectionSet { frames: vec![dets.frames[f].clone()] }, &DetectionSet { frames: vec![gts.frames[f].clone()] })?;
    }
    check(worst <= 1e-9, || format!("reference mismatch {worst:e}"))?;

    let base = compute_metrics(&dets, &gts, &config).map_err(|e| e.to_string())?;
    let mut drift = 0.0f64;
    for _ in 0..20 {
        let t = [rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0)];
        let a = rng.random_range(-PI..PI);
        let r = compute_metrics(&moved(&dets, t, a), &moved(&gts, t, a), &config).map_err(|e| e.to_string())?;
        for (x, y) in [(base.map, r.map), (base.mate, r.mate), (base.mase, r.mase), (base.maoe, r.maoe), (base.nds, r.nds)] {
            drift = drift.max((x - y).abs());
        }
    }
    check(drift <= 1e-9, || format!("rigid transform drift {drift:e}"))?;
    Ok(format!("perfect exact; 50 frames max diff {worst:.1e}; 20 transforms drift {drift:.1e}; NDS {:.4}", base.nds))
}

/// Runs every command in `dir` with `--threads t`; returns the stdout log.
fn cli_run(dir: &Path, t: &str) -> Result<Vec<u8>, String> {
    let commands: &[&[&str]] = &[
        &["gen-scene", "--seed", "42", "--cameras", "4", "--out", "scene.toml"],
        &["build-mapping", "--scene", "scene.toml", "--out", "mapping.bmap"],
        &["augment", "--scene", "scene.toml", "--seed", "7", "--out", "aug.toml"],
        &["aggregate", "--scene", "scene.toml", "--mapping", "mapping.bmap", "--seed", "3", "--out", "bev.bevf"],
        &["ambiguity-demo", "--embedding", "on", "--seed", "5", "--out", "amb.txt"],
        &["evaluate", "--dets", "dets.toml", "--gt-scene", "scene.toml", "--out", "metrics.txt"],
        &["render", "--style", "hits", "--mapping", "mapping.bmap", "--out", "hits.ppm"],
        &["render", "--style", "feature-norm", "--bev", "bev.bevf", "--out", "norm.ppm"],
        &["render", "--style", "detections", "--scene", "scene.toml", "--dets", "dets.toml", "--out", "dets.svg"],
    ];
    std::fs::write(
        dir.join("dets.toml"),
        "[[frames]]\nobjects = [\n  { id = 0, category = \"car\", center = [0.0, 40.0, 0.8], dims = [4.5, 1.8, 1.5], yaw = 0.1, score = 0.9 },\n  { id = 1, category = \"pedestrian\", center = [3.0, 80.0, 0.9], dims = [0.7, 0.7, 1.8], yaw = 1.0, score = 0.4 },\n]\n",
    )
    .map_err(|e| e.to_string())?;
    let mut log = Vec::new();
    for args in commands {
        let o = Command::new(env!("CARGO_BIN_EXE_roadbev"))
            .current_dir(dir)
            .args(*args)
            .args(["--threads", t])
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr).trim()));
        }
        log.extend_from_slice(&o.stdout);
    }
    Ok(log)
}

fn dir_contents(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn cli_determinism() -> Outcome {
    let runs = ["1", "4", "4"]
        .iter()
        .map(|t| {
            let d = tempfile::tempdir().map_err(|e| e.to_string())?;
            let log = cli_run(d.path(), t)?;
            Ok((log, dir_contents(d.path())?))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let (log0, files0) = &runs[0];
    for (i, (log, files)) in runs.iter().enumerate().skip(1) {
        check(log == log0, || format!("run {i}: stdout differs"))?;
        check(files.len() == files0.len(), || format!("run {i}: different file set"))?;
        for ((n0, b0), (n, b)) in files0.iter().zip(files) {
            check(n0 == n && b0 == b, || format!("run {i}: {n} differs"))?;
        }
    }
    Ok(format!("9 invocations × threads {{1, 4, 4}}, {} files byte-identical", files0.len()))
}

fn full_size_grid_smoke() -> Outcome {
    let scene = generate_synthetic_scene(&SyntheticSceneSpec { seed: 10, num_cameras: 12, layout: Layout::Corridor, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let grid = BevGridSpec::roscenes();
    let mask = CamMask::all_active(12);
    let start = Instant::now();
    let table = parallel::build_mapping(&scene, &grid, &mask, None, 0).map_err(|e| e.to_string())?;
    let maps: Vec<FeatureMap> = scene
        .cameras
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (w, h) = ((c.intrinsics.width as usize).div_ceil(16), (c.intrinsics.height as usize).div_ceil(16));
            synthesize_feature_map(1, k, 16, h, w, 16.0).unwrap()
        })
        .collect();
    let options = AggregateOptions { use_rotation_embedding: true, use_position_encoding: true, embedding_table: Some(RotationEmbeddingTable::from_seed(2, 16)) };
    let bev = parallel::aggregate(&maps, &table, &scene, &options, 0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(bev.hit_counts().iter().any(|&h| h > 0), || "no populated cells".into())?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;

    // left half of every image only
    let half = RoiMask {
        per_camera: scene
            .cameras
            .iter()
            .map(|c| {
                let (w, h) = (c.intrinsics.width, c.intrinsics.height);
                let data = (0..h).flat_map(|_| (0..w).map(move |x| if x < w / 2 { 255 } else { 0 })).collect();
                Some(RoiBitmap::new(w, h, data).unwrap())
            })
            .collect(),
    };
    let halved = parallel::build_mapping(&scene, &grid, &mask, Some(&half), 0).map_err(|e| e.to_string())?;
    let (full, part) = (coverage_stats(&table).empty_cell_fraction, coverage_stats(&halved).empty_cell_fraction);
    check(full < part, || format!("empty fraction {full} not below half-ROI {part}"))?;
    Ok(format!(
        "500×500 grid, 12 cameras, {} hits in {:.2} s; empty fraction {full:.4} < {part:.4} (half ROI)",
        table.total_hits(),
        elapsed.as_secs_f64()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("projection oracle", projection_oracle, 1),
        ("augmentation consistency", augmentation_consistency, 10),
        ("camera mask equivalence", cam_mask_equivalence, 30),
        ("ROI monotonicity and extremes", roi_monotonicity, 30),
        ("right-angle equivariance", right_angle_equivariance, 30),
        ("frame-choice orientation ambiguity", frame_ambiguity, 10),
        ("rotation embedding algebra", embedding_algebra, 10),
        ("metrics oracle", metrics_oracle, 60),
        ("CLI determinism", cli_determinism, 120),
        ("full-size grid smoke test", full_size_grid_smoke, 60),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = f();
        let secs = start.elapsed().as_secs_f64();
        if outcome.is_ok() && secs >= *budget as f64 {
            outcome = Err(format!("took {secs:.2} s, budget {budget} s"));
        }
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.2} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.2} s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
