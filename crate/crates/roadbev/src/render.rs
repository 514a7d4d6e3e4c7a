//! Static renders: PPM rasters of per-cell quantities and SVG diagrams of the
//! BEV frame, both with equidistant range circles around the frame origin.

use std::fmt::Write as _;

use roadbev_core::ambiguity::{scenario_grid, AmbiguityReport};
use roadbev_core::{
    camera_yaw_in_frame, cell_center, to_display_angle, BevFeature, BevGridSpec, Box3D, Category, DetectionSet,
    MappingTable, ObjectClass, SceneConfig,
};

const CIRCLE_RGB: [u8; 3] = [220, 40, 40];

/// A raster with row 0 at the top (largest `y`).
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Image {
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.rgb[i..i + 3].copy_from_slice(&c);
    }
}

/// Piecewise-linear dark-blue → teal → yellow ramp over `t ∈ [0, 1]`.
fn ramp(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 3] = [[20.0, 20.0, 60.0], [30.0, 150.0, 140.0], [250.0, 230.0, 60.0]];
    let t = t.clamp(0.0, 1.0) * 2.0;
    let i = (t as usize).min(1);
    let f = t - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        c[k] = (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8;
    }
    c
}

/// Colors a per-cell scalar field (row-major, `ix` fastest); zero cells are black.
fn field_image(nx: usize, ny: usize, values: &[f64]) -> Image {
    let max = values.iter().copied().fold(0.0, f64::max);
    let mut img = Image { width: nx, height: ny, rgb: vec![0; 3 * nx * ny] };
    for iy in 0..ny {
        for ix in 0..nx {
            let v = values[iy * nx + ix];
            if v > 0.0 {
                img.put(ix, ny - 1 - iy, ramp(v / max));
            }
        }
    }
    img
}

/// Marks cells whose centre lies within half a cell of a multiple of `spacing`.
fn draw_range_circles(img: &mut Image, grid: &BevGridSpec, spacing: f64) {
    if !(spacing > 0.0) {
        return;
    }
    let (dx, dy) = grid.cell_size();
    let tol = 0.5 * dx.max(dy);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = cell_center(grid, ix, iy).expect("in range");
            let r = x.hypot(y);
            let k = (r / spacing).round();
            if k >= 1.0 && (r - k * spacing).abs() < tol {
                img.put(ix, grid.ny - 1 - iy, CIRCLE_RGB);
            }
        }
    }
}

pub fn render_hits(table: &MappingTable, circle_spacing: f64) -> Image {
    let grid = table.grid();
    let counts: Vec<f64> = table.hit_counts().iter().map(|&c| c as f64).collect();
    let mut img = field_image(grid.nx, grid.ny, &counts);
    draw_range_circles(&mut img, grid, circle_spacing);
    img
}

/// L2 norm per cell; range circles need the grid geometry and are skipped without it.
pub fn render_feature_norm(feature: &BevFeature, grid: Option<&BevGridSpec>, circle_spacing: f64) -> Image {
    let mut img = field_image(feature.nx(), feature.ny(), &feature.cell_norms());
    if let Some(g) = grid.filter(|g| (g.nx, g.ny) == (feature.nx(), feature.ny())) {
        draw_range_circles(&mut img, g, circle_spacing);
    }
    img
}

fn class_color(c: Category) -> &'static str {
    match c.class() {
        ObjectClass::Vehicle => "#1f77b4",
        ObjectClass::Cyclist => "#2ca02c",
        ObjectClass::Pedestrian => "#ff7f0e",
    }
}

/// Maps BEV meters to SVG user units (y flipped).
struct View {
    x0: f64,
    y1: f64,
    scale: f64,
}

impl View {
    fn fit(points: &[(f64, f64)], margin: f64, size: f64) -> (Self, f64, f64) {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let (x0, x1, y0, y1) = (x0 - margin, x1 + margin, y0 - margin, y1 + margin);
        let scale = size / (x1 - x0).max(y1 - y0);
        (Self { x0, y1, scale }, (x1 - x0) * scale, (y1 - y0) * scale)
    }

    fn p(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.x0) * self.scale, (self.y1 - y) * self.scale)
    }
}

fn polygon(out: &mut String, view: &View, pts: &[[f64; 3]], style: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|c| {
            let (x, y) = view.p(c[0], c[1]);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polygon points="{}" {style}/>"#, coords.join(" "));
}

fn heading(out: &mut String, view: &View, b: &Box3D, color: &str) {
    let c = b.center();
    let len = 0.75 * b.dims()[0];
    let (x0, y0) = view.p(c[0], c[1]);
    let (x1, y1) = view.p(c[0] + len * b.yaw().cos(), c[1] + len * b.yaw().sin());
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="{color}" stroke-width="1.5"/>"#);
}

fn circles(out: &mut String, view: &View, reach: f64, spacing: f64) {
    if !(spacing > 0.0) {
        return;
    }
    let (cx, cy) = view.p(0.0, 0.0);
    let mut k = 1.0;
    while k * spacing <= reach {
        let _ = writeln!(
            out,
            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="#d62728" stroke-dasharray="4 4" stroke-width="0.8"/>"##,
            k * spacing * view.scale
        );
        k += 1.0;
    }
}

/// BEV-frame diagram of cameras, ground-truth boxes and optional detections.
pub fn render_scene_svg(scene: &SceneConfig, dets: Option<&DetectionSet>, circle_spacing: f64) -> String {
    let cams: Vec<(f64, f64)> = scene
        .cameras
        .iter()
        .map(|c| {
            let p = scene.bev_frame.apply(c.center());
            (p[0], p[1])
        })
        .collect();
    let mut pts = cams.clone();
    pts.extend(scene.objects.iter().map(|o| (o.bbox.center()[0], o.bbox.center()[1])));
    let (view, w, h) = View::fit(&pts, 10.0, 800.0);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let reach = pts.iter().map(|&(x, y)| x.hypot(y)).fold(0.0, f64::max) + 10.0;
    circles(&mut out, &view, reach, circle_spacing);
    for o in &scene.objects {
        let color = class_color(o.bbox.category());
        polygon(&mut out, &view, &o.bbox.corners()[..4], &format!(r#"fill="{color}" fill-opacity="0.35" stroke="{color}""#));
        heading(&mut out, &view, &o.bbox, color);
    }
    if let Some(dets) = dets {
        for d in dets.frames.iter().flatten() {
            polygon(&mut out, &view, &d.bbox.corners()[..4], r#"fill="none" stroke="black" stroke-dasharray="3 2""#);
        }
    }
    for (cam, &(x, y)) in scene.cameras.iter().zip(&cams) {
        let (px, py) = view.p(x, y);
        let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="black"/>"#);
        if let Ok(yaw) = camera_yaw_in_frame(cam, &scene.bev_frame) {
            let (qx, qy) = view.p(x + 8.0 * yaw.cos(), y + 8.0 * yaw.sin());
            let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{py:.2}" x2="{qx:.2}" y2="{qy:.2}" stroke="black"/>"#);
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#, px + 6.0, py - 6.0, cam.camera_id);
    }
    out.push_str("</svg>\n");
    out
}

/// Two panels, frame A and frame B, each drawn in its own BEV frame.
pub fn render_ambiguity_svg(report: &AmbiguityReport, a: &SceneConfig, b: &SceneConfig) -> String {
    let grid = scenario_grid();
    let panel = 380.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#, 2.0 * panel + 20.0, panel + 60.0, 2.0 * panel + 20.0, panel + 60.0);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, (scene, cells, label)) in [(a, &report.cells_a, "frame A"), (b, &report.cells_b, "frame B")].into_iter().enumerate() {
        let pts: Vec<(f64, f64)> = scene
            .cameras
            .iter()
            .map(|c| {
                let p = scene.bev_frame.apply(c.center());
                (p[0], p[1])
            })
            .chain(scene.objects.iter().map(|o| (o.bbox.center()[0], o.bbox.center()[1])))
            .chain([(0.0, 0.0)])
            .collect();
        let (view, _, _) = View::fit(&pts, 6.0, panel);
        let _ = writeln!(out, r#"<g transform="translate({:.0},40)">"#, i as f64 * (panel + 20.0));
        let _ = writeln!(out, r#"<rect width="{panel}" height="{panel}" fill="none" stroke="gray"/>"#);
        let (dx, dy) = grid.cell_size();
        for &(ix, iy) in cells.iter() {
            let (cx, cy) = cell_center(&grid, ix, iy).expect("in range");
            let (px, py) = view.p(cx - dx / 2.0, cy + dy / 2.0);
            let _ = writeln!(out, r##"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="#ffd54f" stroke="#b08800"/>"##, dx * view.scale, dy * view.scale);
        }
        // frame axes
        let (ox, oy) = view.p(0.0, 0.0);
        let (ax, ay) = view.p(8.0, 0.0);
        let (bx, by) = view.p(0.0, 8.0);
        let _ = writeln!(out, r##"<line x1="{ox:.2}" y1="{oy:.2}" x2="{ax:.2}" y2="{ay:.2}" stroke="#d62728" stroke-width="2"/><text x="{ax:.2}" y="{ay:.2}" font-size="11">x</text>"##);
        let _ = writeln!(out, r##"<line x1="{ox:.2}" y1="{oy:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="#2ca02c" stroke-width="2"/><text x="{bx:.2}" y="{by:.2}" font-size="11">y</text>"##);
        for o in &scene.objects {
            let color = class_color(o.bbox.category());
            polygon(&mut out, &view, &o.bbox.corners()[..4], &format!(r#"fill="{color}" fill-opacity="0.5" stroke="{color}""#));
            heading(&mut out, &view, &o.bbox, "black");
        }
        for cam in &scene.cameras {
            let p = scene.bev_frame.apply(cam.center());
            let (px, py) = view.p(p[0], p[1]);
            let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="5" fill="black"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#, px + 7.0, py - 7.0, cam.camera_id);
        }
        let yaw = if i == 0 { report.yaw_pair.0 } else { report.yaw_pair.1 };
        let _ = writeln!(out, r#"<text x="4" y="-8" font-size="13">{label}: yaw {:.4} rad ({:.1} deg)</text>"#, to_display_angle(yaw), to_display_angle(yaw).to_degrees());
        out.push_str("</g>\n");
    }
    let _ = writeln!(
        out,
        r#"<text x="6" y="16" font-size="13">{:?}, embedding {}: feature distance {:.3e}, resolved {}</text>"#,
        report.variant,
        if report.embedding_enabled { "on" } else { "off" },
        report.feature_distance,
        report.resolved
    );
    out.push_str("</svg>\n");
    out
}
