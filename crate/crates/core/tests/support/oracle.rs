//! Reference implementations used as test oracles. Deliberately naive and
//! written against the definitions, sharing no code with the library beyond
//! reading its plain data.
#![allow(dead_code)]

use std::f64::consts::PI;

use roadbev_core::{BevGridSpec, CameraModel, FeatureMap, MappingTable, RotationEmbeddingTable, SceneConfig};

/// `P = K [R | t]` as an explicit 3×4 matrix.
pub fn projection_matrix(cam: &CameraModel) -> [[f64; 4]; 3] {
    let k = &cam.intrinsics;
    let kmat = [[k.fx, 0.0, k.cx], [0.0, k.fy, k.cy], [0.0, 0.0, 1.0]];
    let r = cam.world_to_camera.rotation().0;
    let t = cam.world_to_camera.translation();
    let rt = [
        [r[0][0], r[0][1], r[0][2], t[0]],
        [r[1][0], r[1][1], r[1][2], t[1]],
        [r[2][0], r[2][1], r[2][2], t[2]],
    ];
    let mut p = [[0.0; 4]; 3];
    for i in 0..3 {
        for j in 0..4 {
            for m in 0..3 {
                p[i][j] += kmat[i][m] * rt[m][j];
            }
        }
    }
    p
}

/// Homogeneous projection of a world point; `None` behind the camera.
pub fn project_homogeneous(cam: &CameraModel, x: [f64; 3]) -> Option<(f64, f64)> {
    let p = projection_matrix(cam);
    let xh = [x[0], x[1], x[2], 1.0];
    let mut q = [0.0; 3];
    for i in 0..3 {
        for j in 0..4 {
            q[i] += p[i][j] * xh[j];
        }
    }
    (q[2] > 1e-6).then(|| (q[0] / q[2], q[1] / q[2]))
}

/// Ground-plane heading of the optical axis in the scene's BEV frame.
pub fn camera_yaw(scene: &SceneConfig, k: usize) -> f64 {
    let r = scene.cameras[k].world_to_camera.rotation().0;
    let axis = r[2];
    let b = scene.bev_frame.rotation().0;
    let ax = b[0][0] * axis[0] + b[0][1] * axis[1] + b[0][2] * axis[2];
    let ay = b[1][0] * axis[0] + b[1][1] * axis[1] + b[1][2] * axis[2];
    ay.atan2(ax)
}

pub fn embedding(table: &RotationEmbeddingTable, theta: f64) -> Vec<f64> {
    table.matrix().iter().map(|row| row[0] * theta.sin() + row[1] * theta.cos()).collect()
}

/// Bilinear sample with the coordinate clamped to the texel-centre lattice.
pub fn bilinear(f: &FeatureMap, u: f64, v: f64) -> Vec<f64> {
    let x = (u / f.stride - 0.5).clamp(0.0, (f.width() - 1) as f64);
    let y = (v / f.stride - 0.5).clamp(0.0, (f.height() - 1) as f64);
    let j0 = x.floor() as usize;
    let i0 = y.floor() as usize;
    let j1 = (j0 + 1).min(f.width() - 1);
    let i1 = (i0 + 1).min(f.height() - 1);
    let (ax, ay) = (x - j0 as f64, y - i0 as f64);
    (0..f.channels())
        .map(|ch| {
            let top = f.get(ch, i0, j0) * (1.0 - ax) + f.get(ch, i0, j1) * ax;
            let bottom = f.get(ch, i1, j0) * (1.0 - ax) + f.get(ch, i1, j1) * ax;
            top * (1.0 - ay) + bottom * ay
        })
        .collect()
}

pub fn position_encoding(grid: &BevGridSpec, ix: usize, iy: usize, c: usize) -> Vec<f64> {
    let nx = (ix as f64 + 0.5) / grid.nx as f64;
    let ny = (iy as f64 + 0.5) / grid.ny as f64;
    let f = c / 2;
    let mut out = vec![0.0; c];
    for k in 0..f {
        let a = if k % 2 == 0 { nx } else { ny };
        let w = 1.0 / 10000f64.powf(k as f64 / f as f64);
        out[2 * k] = (2.0 * PI * w * a).sin();
        out[2 * k + 1] = (2.0 * PI * w * a).cos();
    }
    out
}

pub struct AggregateRef<'a> {
    pub maps: &'a [FeatureMap],
    pub embedding: Option<&'a RotationEmbeddingTable>,
    pub position_encoding: bool,
    /// Visit each cell's hits in this order (indices into the cell's hit list).
    pub order: Option<&'a dyn Fn(usize, usize) -> Vec<usize>>,
}

/// Cell-by-cell, hit-by-hit mean of bilinear samples; returns `c × ny × nx`
/// channel-major data.
pub fn aggregate(r: &AggregateRef, table: &MappingTable, scene: &SceneConfig) -> Vec<f64> {
    let grid = table.grid();
    let c = r.maps[0].channels();
    let cells = grid.nx * grid.ny;
    let mut out = vec![0.0; c * cells];
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let cell = iy * grid.nx + ix;
            let hits = table.cell_hits(ix, iy);
            if hits.is_empty() {
                continue;
            }
            let order = match r.order {
                Some(f) => f(cell, hits.len()),
                None => (0..hits.len()).collect(),
            };
            let mut acc = vec![0.0; c];
            for &h in &order {
                let hit = &hits[h];
                let k = hit.camera_index as usize;
                let map = r.maps.iter().find(|m| m.camera_index == k).expect("map for camera");
                let s = bilinear(map, hit.u, hit.v);
                let e = r.embedding.map(|t| embedding(t, camera_yaw(scene, k)));
                for ch in 0..c {
                    acc[ch] += s[ch] + e.as_ref().map_or(0.0, |e| e[ch]);
                }
            }
            let pe = if r.position_encoding { position_encoding(grid, ix, iy, c) } else { vec![0.0; c] };
            for ch in 0..c {
                out[ch * cells + cell] = acc[ch] / hits.len() as f64 + pe[ch];
            }
        }
    }
    out
}

/// Plain box record for the metrics oracle.
#[derive(Debug, Clone, Copy)]
pub struct RefBox {
    pub x: f64,
    pub y: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
    pub class: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefMetrics {
    pub map: f64,
    pub mate: f64,
    pub mase: f64,
    pub maoe: f64,
    pub nds: f64,
    pub per_class_ap: Vec<(usize, Vec<f64>)>,
}

fn dist(a: &RefBox, b: &RefBox) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Greedy matching: detections (frame, index) by descending score, each to the
/// nearest free gt of its frame within `th`. Returns the matched gt per detection.
fn greedy(dets: &[Vec<RefBox>], gts: &[Vec<RefBox>], class: usize, th: f64) -> Vec<(usize, usize, Option<usize>)> {
    let mut order: Vec<(usize, usize)> = Vec::new();
    for (f, ds) in dets.iter().enumerate() {
        for (i, d) in ds.iter().enumerate() {
            if d.class == class {
                order.push((f, i));
            }
        }
    }
    // stable: ties keep (frame, index) order
    order.sort_by(|a, b| dets[b.0][b.1].score.partial_cmp(&dets[a.0][a.1].score).unwrap());
    let mut used: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let mut out = Vec::new();
    for (f, i) in order {
        let d = &dets[f][i];
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gts[f].iter().enumerate() {
            if g.class != class || used[f][j] {
                continue;
            }
            let dd = dist(d, g);
            if dd <= th && best.is_none_or(|(_, b)| dd < b) {
                best = Some((j, dd));
            }
        }
        if let Some((j, _)) = best {
            used[f][j] = true;
        }
        out.push((f, i, best.map(|b| b.0)));
    }
    out
}

/// numpy.interp(x, xp, fp, right=0).
fn interp(x: f64, xp: &[f64], fp: &[f64]) -> f64 {
    if xp.is_empty() || x > xp[xp.len() - 1] {
        return 0.0;
    }
    if x < xp[0] {
        return fp[0];
    }
    let mut j = 0;
    for (i, &v) in xp.iter().enumerate() {
        if v <= x {
            j = i;
        }
    }
    if j == xp.len() - 1 || xp[j] == x {
        return fp[j];
    }
    fp[j] + (x - xp[j]) * (fp[j + 1] - fp[j]) / (xp[j + 1] - xp[j])
}

fn ap(tp: &[bool], npos: usize) -> f64 {
    let mut rec = Vec::new();
    let mut prec = Vec::new();
    let (mut ctp, mut cfp) = (0.0, 0.0);
    for &t in tp {
        if t {
            ctp += 1.0
        } else {
            cfp += 1.0
        }
        rec.push(ctp / npos as f64);
        prec.push(ctp / (ctp + cfp));
    }
    let grid: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
    let p: Vec<f64> = grid.iter().map(|&r| interp(r, &rec, &prec)).collect();
    let tail: Vec<f64> = p[11..].iter().map(|&x| (x - 0.1).max(0.0)).collect();
    tail.iter().sum::<f64>() / tail.len() as f64 / 0.9
}

fn yaw_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn scale_err(a: &RefBox, b: &RefBox) -> f64 {
    let i = a.l.min(b.l) * a.w.min(b.w) * a.h.min(b.h);
    1.0 - i / (a.l * a.w * a.h + b.l * b.w * b.h - i)
}

pub fn metrics(dets: &[Vec<RefBox>], gts: &[Vec<RefBox>], thresholds: &[f64], tp_th: f64, classes: usize) -> Option<RefMetrics> {
    let mut aps = Vec::new();
    let (mut ates, mut ases, mut aoes) = (Vec::new(), Vec::new(), Vec::new());
    let mut per_class_ap = Vec::new();
    for class in 0..classes {
        let npos = gts.iter().flatten().filter(|g| g.class == class).count();
        if npos == 0 {
            continue;
        }
        let mut class_aps = Vec::new();
        for &th in thresholds {
            let m = greedy(dets, gts, class, th);
            let tps: Vec<bool> = m.iter().map(|x| x.2.is_some()).collect();
            class_aps.push(ap(&tps, npos));
        }
        aps.push(class_aps.iter().sum::<f64>() / class_aps.len() as f64);
        per_class_ap.push((class, class_aps));
        let m = greedy(dets, gts, class, tp_th);
        let pairs: Vec<(&RefBox, &RefBox)> =
            m.iter().filter_map(|&(f, i, g)| g.map(|g| (&dets[f][i], &gts[f][g]))).collect();
        if pairs.is_empty() {
            ates.push(1.0);
            ases.push(1.0);
            aoes.push(1.0);
        } else {
            let n = pairs.len() as f64;
            ates.push(pairs.iter().map(|(d, g)| dist(d, g)).sum::<f64>() / n);
            ases.push(pairs.iter().map(|(d, g)| scale_err(d, g)).sum::<f64>() / n);
            aoes.push(pairs.iter().map(|(d, g)| yaw_diff(d.yaw, g.yaw)).sum::<f64>() / n);
        }
    }
    if aps.is_empty() {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (map, mate, mase, maoe) = (mean(&aps), mean(&ates), mean(&ases), mean(&aoes));
    let nds = (5.0 * map + (1.0 - mate.min(1.0)) + (1.0 - mase.min(1.0)) + (1.0 - maoe.min(1.0))) / 8.0;
    Some(RefMetrics { map, mate, mase, maoe, nds, per_class_ap })
}
