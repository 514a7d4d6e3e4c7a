//! BEV grid, reference points and the masked 2D–3D mapping table.
//!
//! Every grid cell carries a pillar of reference points (one per height in
//! `z_samples`). A pillar point is a *hit* for a camera when it lands in front
//! of the camera, inside the image, and inside the camera's ROI. CamMask drops
//! whole cameras before projection; ROIMask drops individual hits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::digest::Hasher;
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Vec3};
use crate::scene::SceneConfig;

/// Default pillar heights, meters.
pub const DEFAULT_Z_SAMPLES: [f64; 4] = [0.0, 1.0, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct BevGridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub z_samples: Vec<f64>,
}

impl BevGridSpec {
    pub fn new(
        nx: usize,
        ny: usize,
        x_range: (f64, f64),
        y_range: (f64, f64),
        z_samples: Vec<f64>,
    ) -> Result<Self> {
        let spec = Self { nx, ny, x_range, y_range, z_samples };
        spec.validate()?;
        Ok(spec)
    }

    /// 500 × 500 cells over X [−160, 160] m, Y [−20, 800] m.
    pub fn roscenes() -> Self {
        Self::new(500, 500, (-160.0, 160.0), (-20.0, 800.0), DEFAULT_Z_SAMPLES.to_vec())
            .expect("static grid is valid")
    }

    /// 300 × 300 cells over X [−170, 130] m, Y [−80, 220] m.
    pub fn urban_intersection() -> Self {
        Self::new(300, 300, (-170.0, 130.0), (-80.0, 220.0), DEFAULT_Z_SAMPLES.to_vec())
            .expect("static grid is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidGrid("nx and ny must be at least 1"));
        }
        if self.nx > u32::MAX as usize || self.ny > u32::MAX as usize {
            return Err(Error::InvalidGrid("grid too large"));
        }
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::InvalidGrid("ranges must be finite with min < max"));
        }
        if self.z_samples.is_empty() || self.z_samples.len() > u16::MAX as usize {
            return Err(Error::InvalidGrid("z_samples must be non-empty"));
        }
        if !self.z_samples.iter().all(|z| z.is_finite())
            || self.z_samples.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidGrid("z_samples must be strictly increasing"));
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Cell extent along x and y, meters.
    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.x_range.1 - self.x_range.0) / self.nx as f64,
            (self.y_range.1 - self.y_range.0) / self.ny as f64,
        )
    }

    /// Row-major cell index, `iy * nx + ix`.
    #[inline]
    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Cell containing the planar point, if any.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (dx, dy) = self.cell_size();
        let fx = libm::floor((x - self.x_range.0) / dx);
        let fy = libm::floor((y - self.y_range.0) / dy);
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    #[inline]
    fn center_unchecked(&self, ix: usize, iy: usize) -> (f64, f64) {
        (axis_center(self.x_range, self.nx, ix), axis_center(self.y_range, self.ny, iy))
    }

    /// Whether the grid is square and centred on the BEV origin, so that quarter
    /// turns of the frame permute its cells.
    pub fn is_square_symmetric(&self) -> bool {
        self.nx == self.ny && self.x_range == self.y_range && self.x_range.0 == -self.x_range.1
    }
}

// Written as mid + (2i + 1 − n)·extent / 2n, which equals min + (i + ½)·extent / n
// but is exactly sign-symmetric about the mid point.
#[inline]
fn axis_center((lo, hi): (f64, f64), n: usize, i: usize) -> f64 {
    let mid = (lo + hi) * 0.5;
    let k = (2 * i as i64 + 1 - n as i64) as f64;
    mid + k * (hi - lo) / (2 * n) as f64
}

pub fn cell_center(spec: &BevGridSpec, ix: usize, iy: usize) -> Result<(f64, f64)> {
    if ix >= spec.nx || iy >= spec.ny {
        return Err(Error::IndexOutOfRange { ix, iy, nx: spec.nx, ny: spec.ny });
    }
    Ok(spec.center_unchecked(ix, iy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub ix: usize,
    pub iy: usize,
    pub z_level: usize,
    pub point: Vec3,
}

/// All pillar points, ordered by cell index then height.
pub fn reference_points(spec: &BevGridSpec) -> Vec<ReferencePoint> {
    let mut out = Vec::with_capacity(spec.num_cells() * spec.z_samples.len());
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            let (x, y) = spec.center_unchecked(ix, iy);
            for (z_level, &z) in spec.z_samples.iter().enumerate() {
                out.push(ReferencePoint { ix, iy, z_level, point: [x, y, z] });
            }
        }
    }
    out
}

/// Per-camera activity flags aligned with the scene's camera order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CamMask {
    active: Vec<bool>,
}

impl CamMask {
    pub fn new(active: Vec<bool>) -> Result<Self> {
        if !active.iter().any(|&a| a) {
            return Err(Error::AllCamerasMasked);
        }
        Ok(Self { active })
    }

    pub fn all_active(n: usize) -> Self {
        Self { active: vec![true; n] }
    }

    /// Parses a string like `"1101"`, one character per camera.
    pub fn from_bitstring(bits: &str) -> Result<Self> {
        let active = bits
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::Validation(format!("invalid CamMask character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(active)
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.active[k]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }
}

/// Binary image-resolution ROI. `255` marks pixels inside the region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiBitmap {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RoiBitmap {
    pub const INSIDE: u8 = 255;

    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::MaskShapeMismatch(format!(
                "bitmap has {} bytes, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn is_inside(&self, px: u32, py: u32) -> bool {
        self.data[py as usize * self.width as usize + px as usize] == Self::INSIDE
    }

    /// Pixelwise intersection.
    pub fn and(&self, other: &RoiBitmap) -> Result<RoiBitmap> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::MaskShapeMismatch("ROI bitmaps differ in size".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| if a == Self::INSIDE && b == Self::INSIDE { Self::INSIDE } else { 0 })
            .collect();
        Ok(RoiBitmap { width: self.width, height: self.height, data })
    }
}

/// Per-camera ROI bitmaps; `None` means the whole image is inside the ROI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    pub per_camera: Vec<Option<RoiBitmap>>,
}

impl RoiMask {
    pub fn filled_for(scene: &SceneConfig, value: u8) -> Self {
        let per_camera = scene
            .cameras
            .iter()
            .map(|c| Some(RoiBitmap::filled(c.intrinsics.width, c.intrinsics.height, value)))
            .collect();
        Self { per_camera }
    }

    pub fn without_camera(&self, k: usize) -> Self {
        let mut m = self.clone();
        m.per_camera.remove(k);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub camera_index: u16,
    pub z_level: u16,
    pub u: f64,
    pub v: f64,
}

impl Hit {
    /// Bitwise equality of all fields.
    pub fn bit_eq(&self, other: &Hit) -> bool {
        self.camera_index == other.camera_index
            && self.z_level == other.z_level
            && self.u.to_bits() == other.u.to_bits()
            && self.v.to_bits() == other.v.to_bits()
    }
}

/// SHA-256 digests identifying the inputs a table was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Provenance {
    pub scene: [u8; 32],
    pub cam_mask: [u8; 32],
    pub roi: [u8; 32],
}

/// Per-cell hit lists in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingTable {
    grid: BevGridSpec,
    n_cameras: usize,
    offsets: Vec<usize>,
    hits: Vec<Hit>,
    provenance: Provenance,
}

impl MappingTable {
    /// Assembles a table from per-cell hit counts and the concatenated hits,
    /// checking the canonical ordering.
    pub fn from_parts(
        grid: BevGridSpec,
        n_cameras: usize,
        counts: &[u32],
        hits: Vec<Hit>,
        provenance: Provenance,
    ) -> Result<Self> {
        grid.validate()?;
        if counts.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch { expected: grid.num_cells(), actual: counts.len() });
        }
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        offsets.push(0usize);
        let mut acc = 0usize;
        for &c in counts {
            acc += c as usize;
            offsets.push(acc);
        }
        if acc != hits.len() {
            return Err(Error::DimensionMismatch { expected: acc, actual: hits.len() });
        }
        let table = Self { grid, n_cameras, offsets, hits, provenance };
        for cell in 0..table.grid.num_cells() {
            let hs = table.hits_at(cell);
            if hs.iter().any(|h| h.camera_index as usize >= n_cameras
                || h.z_level as usize >= table.grid.z_samples.len())
            {
                return Err(Error::Validation(format!("cell {cell} references an unknown camera or level")));
            }
            if hs.windows(2).any(|w| (w[0].camera_index, w[0].z_level) >= (w[1].camera_index, w[1].z_level)) {
                return Err(Error::Validation(format!("cell {cell} hits are not canonically ordered")));
            }
        }
        Ok(table)
    }

    pub fn grid(&self) -> &BevGridSpec {
        &self.grid
    }

    pub fn n_cameras(&self) -> usize {
        self.n_cameras
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Hits of the cell with row-major index `cell`.
    #[inline]
    pub fn hits_at(&self, cell: usize) -> &[Hit] {
        &self.hits[self.offsets[cell]..self.offsets[cell + 1]]
    }

    pub fn cell_hits(&self, ix: usize, iy: usize) -> &[Hit] {
        self.hits_at(self.grid.cell_index(ix, iy))
    }

    pub fn all_hits(&self) -> &[Hit] {
        &self.hits
    }

    pub fn total_hits(&self) -> usize {
        self.hits.len()
    }

    pub fn hit_counts(&self) -> Vec<u32> {
        self.offsets.windows(2).map(|w| (w[1] - w[0]) as u32).collect()
    }

    /// Same grid and bitwise-identical hit lists (provenance ignored).
    pub fn same_hits(&self, other: &MappingTable) -> bool {
        self.grid == other.grid
            && self.offsets == other.offsets
            && self.hits.iter().zip(&other.hits).all(|(a, b)| a.bit_eq(b))
    }

    /// Returns the table with `f` applied to every camera index.
    pub fn map_camera_indices(&self, n_cameras: usize, f: impl Fn(u16) -> u16) -> MappingTable {
        let mut t = self.clone();
        t.n_cameras = n_cameras;
        for h in &mut t.hits {
            h.camera_index = f(h.camera_index);
        }
        t
    }
}

/// A contiguous block of cells built by [`MappingBuilder::build_cells`].
#[derive(Debug, Clone, Default)]
pub struct CellChunk {
    pub counts: Vec<u32>,
    pub hits: Vec<Hit>,
}

/// Validated inputs for building a mapping table. Cells are independent, so
/// callers may build disjoint ranges concurrently and [`assemble`](Self::assemble)
/// them in order.
pub struct MappingBuilder<'a> {
    scene: &'a SceneConfig,
    grid: &'a BevGridSpec,
    cameras: Vec<(usize, &'a CameraModel, Option<&'a RoiBitmap>)>,
    provenance: Provenance,
}

impl<'a> MappingBuilder<'a> {
    pub fn new(
        scene: &'a SceneConfig,
        grid: &'a BevGridSpec,
        cam_mask: &CamMask,
        roi: Option<&'a RoiMask>,
    ) -> Result<Self> {
        grid.validate()?;
        let n = scene.cameras.len();
        if n == 0 {
            return Err(Error::Validation("scene has no cameras".into()));
        }
        if n > u16::MAX as usize {
            return Err(Error::Validation("too many cameras".into()));
        }
        if cam_mask.len() != n {
            return Err(Error::MaskShapeMismatch(format!(
                "CamMask has {} entries for {n} cameras",
                cam_mask.len()
            )));
        }
        if !cam_mask.active().iter().any(|&a| a) {
            return Err(Error::AllCamerasMasked);
        }
        if let Some(roi) = roi {
            if roi.per_camera.len() != n {
                return Err(Error::MaskShapeMismatch(format!(
                    "ROI mask has {} entries for {n} cameras",
                    roi.per_camera.len()
                )));
            }
            for (k, (bm, cam)) in roi.per_camera.iter().zip(&scene.cameras).enumerate() {
                if let Some(bm) = bm {
                    if (bm.width, bm.height) != (cam.intrinsics.width, cam.intrinsics.height) {
                        return Err(Error::MaskShapeMismatch(format!(
                            "ROI for camera {k} is {}x{}, image is {}x{}",
                            bm.width, bm.height, cam.intrinsics.width, cam.intrinsics.height
                        )));
                    }
                }
            }
        }
        let cameras = scene
            .cameras
            .iter()
            .enumerate()
            .filter(|(k, _)| cam_mask.is_active(*k))
            .map(|(k, cam)| (k, cam, roi.and_then(|r| r.per_camera[k].as_ref())))
            .collect();
        let provenance = Provenance {
            scene: scene_digest(scene),
            cam_mask: {
                let mut h = Hasher::new(b"cammask");
                let bits: Vec<u8> = cam_mask.active().iter().map(|&a| a as u8).collect();
                h.bytes(&bits);
                h.finish()
            },
            roi: {
                let mut h = Hasher::new(b"roi");
                match roi {
                    None => {
                        h.u64(0);
                    }
                    Some(r) => {
                        h.u64(r.per_camera.len() as u64 + 1);
                        for bm in &r.per_camera {
                            match bm {
                                None => h.u64(0),
                                Some(b) => h.u64(1).u64(b.width as u64).u64(b.height as u64).bytes(&b.data),
                            };
                        }
                    }
                }
                h.finish()
            },
        };
        Ok(Self { scene, grid, cameras, provenance })
    }

    pub fn grid(&self) -> &BevGridSpec {
        self.grid
    }

    /// Hits of one cell, appended to `out` in canonical order.
    pub fn cell_hits(&self, cell: usize, out: &mut Vec<Hit>) {
        let grid = self.grid;
        let (x, y) = grid.center_unchecked(cell % grid.nx, cell / grid.nx);
        let world: Vec<Vec3> =
            grid.z_samples.iter().map(|&z| self.scene.bev_to_world([x, y, z])).collect();
        for &(k, cam, roi) in &self.cameras {
            for (level, &p) in world.iter().enumerate() {
                let Ok(q) = cam.project(p) else { continue };
                if !cam.intrinsics.contains(q.u, q.v) {
                    continue;
                }
                if let Some(bm) = roi {
                    if !bm.is_inside(q.u as u32, q.v as u32) {
                        continue;
                    }
                }
                out.push(Hit { camera_index: k as u16, z_level: level as u16, u: q.u, v: q.v });
            }
        }
    }

    pub fn build_cells(&self, cells: Range<usize>) -> CellChunk {
        let mut chunk = CellChunk { counts: Vec::with_capacity(cells.len()), hits: Vec::new() };
        for cell in cells {
            let before = chunk.hits.len();
            self.cell_hits(cell, &mut chunk.hits);
            chunk.counts.push((chunk.hits.len() - before) as u32);
        }
        chunk
    }

    /// Concatenates chunks covering all cells in order.
    pub fn assemble(self, chunks: Vec<CellChunk>) -> Result<MappingTable> {
        let mut counts = Vec::with_capacity(self.grid.num_cells());
        let mut hits = Vec::with_capacity(chunks.iter().map(|c| c.hits.len()).sum());
        for c in chunks {
            counts.extend_from_slice(&c.counts);
            hits.extend(c.hits);
        }
        MappingTable::from_parts(self.grid.clone(), self.scene.cameras.len(), &counts, hits, self.provenance)
    }
}

/// Digest of everything in a scene that affects the mapping: id, BEV frame and
/// cameras (objects excluded).
pub fn scene_digest(scene: &SceneConfig) -> [u8; 32] {
    let mut h = Hasher::new(b"scene");
    h.bytes(scene.scene_id.as_bytes());
    let transform = |h: &mut Hasher, t: &crate::geometry::RigidTransform| {
        for x in t.rotation().to_row_major() {
            h.f64(x);
        }
        for x in t.translation() {
            h.f64(x);
        }
    };
    transform(&mut h, &scene.bev_frame);
    for cam in &scene.cameras {
        h.bytes(cam.camera_id.as_bytes());
        let k = &cam.intrinsics;
        h.f64(k.fx).f64(k.fy).f64(k.cx).f64(k.cy).u64(k.width as u64).u64(k.height as u64);
        transform(&mut h, &cam.world_to_camera);
    }
    h.finish()
}

/// Projects every reference point through every active camera and keeps the
/// hits that pass the image-bounds and ROI tests.
pub fn build_mapping(
    scene: &SceneConfig,
    spec: &BevGridSpec,
    cam_mask: &CamMask,
    roi_mask: Option<&RoiMask>,
) -> Result<MappingTable> {
    let builder = MappingBuilder::new(scene, spec, cam_mask, roi_mask)?;
    let chunk = builder.build_cells(0..spec.num_cells());
    builder.assemble(vec![chunk])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageStats {
    pub cells_with_hits: usize,
    pub hits_per_camera: Vec<usize>,
    pub empty_cell_fraction: f64,
}

pub fn coverage_stats(table: &MappingTable) -> CoverageStats {
    let mut hits_per_camera = vec![0usize; table.n_cameras];
    for h in &table.hits {
        hits_per_camera[h.camera_index as usize] += 1;
    }
    let n = table.grid.num_cells();
    let cells_with_hits = table.offsets.windows(2).filter(|w| w[1] > w[0]).count();
    CoverageStats {
        cells_with_hits,
        hits_per_camera,
        empty_cell_fraction: (n - cells_with_hits) as f64 / n as f64,
    }
}
