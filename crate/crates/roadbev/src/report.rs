//! Text reports: aligned tables for people, `key = value` lines for scripts.

use std::fmt::Write as _;

use roadbev_core::{to_display_angle, AmbiguityReport, CoverageStats, MetricsReport};

pub fn metrics_table(r: &MetricsReport) -> String {
    let thresholds: Vec<f64> = r.per_category.first().map(|c| c.ap.iter().map(|a| a.0).collect()).unwrap_or_default();
    let mut out = String::new();
    let _ = write!(out, "{:<13}{:>6}{:>6}", "category", "gts", "tps");
    for t in &thresholds {
        let _ = write!(out, "{:>9}", format!("AP@{t}"));
    }
    let _ = writeln!(out, "{:>9}{:>9}{:>9}{:>9}", "AP", "ATE[m]", "ASE", "AOE[rad]");
    for c in &r.per_category {
        let _ = write!(out, "{:<13}{:>6}{:>6}", c.category.name(), c.num_gt, c.num_tp);
        for (_, ap) in &c.ap {
            let _ = write!(out, "{ap:>9.4}");
        }
        let _ = writeln!(out, "{:>9.4}{:>9.4}{:>9.4}{:>9.4}", c.mean_ap, c.ate, c.ase, c.aoe);
    }
    let _ = writeln!(
        out,
        "\nmAP {:.4}  mATE {:.4} m  mASE {:.4}  mAOE {:.4} rad  NDS {:.4}",
        r.map, r.mate, r.mase, r.maoe, r.nds
    );
    out
}

/// Full-precision `key = value` lines.
pub fn metrics_kv(r: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "map = {:?}\nmate = {:?}\nmase = {:?}\nmaoe = {:?}\nnds = {:?}", r.map, r.mate, r.mase, r.maoe, r.nds);
    for c in &r.per_category {
        let n = c.category.name();
        let _ = writeln!(out, "{n}.num_gt = {}\n{n}.num_tp = {}", c.num_gt, c.num_tp);
        for (t, ap) in &c.ap {
            let _ = writeln!(out, "{n}.ap@{t} = {ap:?}");
        }
        let _ = writeln!(out, "{n}.ap = {:?}\n{n}.ate = {:?}\n{n}.ase = {:?}\n{n}.aoe = {:?}", c.mean_ap, c.ate, c.ase, c.aoe);
    }
    out
}

pub fn coverage_kv(s: &CoverageStats, total_hits: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "cells_with_hits = {}", s.cells_with_hits);
    let _ = writeln!(out, "empty_cell_fraction = {:?}", s.empty_cell_fraction);
    let _ = writeln!(out, "total_hits = {total_hits}");
    for (k, h) in s.hits_per_camera.iter().enumerate() {
        let _ = writeln!(out, "hits_per_camera.{k} = {h}");
    }
    out
}

fn cells(c: &[(usize, usize)]) -> String {
    c.iter().map(|(x, y)| format!("({x},{y})")).collect::<Vec<_>>().join(" ")
}

fn angles(a: &[f64]) -> String {
    a.iter().map(|x| format!("{:?}", to_display_angle(*x))).collect::<Vec<_>>().join(" ")
}

/// Angles in `[0, 2π)`.
pub fn ambiguity_kv(r: &AmbiguityReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "variant = {:?}", r.variant);
    let _ = writeln!(out, "embedding_enabled = {}", r.embedding_enabled);
    let _ = writeln!(out, "embedding_seed = {}", r.embedding_seed);
    let _ = writeln!(out, "feature_distance = {:?}", r.feature_distance);
    let _ = writeln!(out, "yaw_a_rad = {:?}", to_display_angle(r.yaw_pair.0));
    let _ = writeln!(out, "yaw_b_rad = {:?}", to_display_angle(r.yaw_pair.1));
    let _ = writeln!(out, "resolved = {}", r.resolved);
    let _ = writeln!(out, "cells_a = {}", cells(&r.cells_a));
    let _ = writeln!(out, "cells_b = {}", cells(&r.cells_b));
    let _ = writeln!(out, "camera_yaws_a_rad = {}", angles(&r.camera_yaws_a));
    let _ = writeln!(out, "camera_yaws_b_rad = {}", angles(&r.camera_yaws_b));
    let _ = writeln!(out, "construction = {}", r.construction);
    out
}
