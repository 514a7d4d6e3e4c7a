//! Per-camera feature maps, camera-rotation embedding, BEV position encoding
//! and mean-pool aggregation of mapped samples into a dense BEV feature.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::camera_yaw_in_frame;
use crate::grid::{BevGridSpec, MappingTable};
use crate::scene::SceneConfig;

/// Frequency base of the sinusoidal position encoding.
pub const POSITION_ENCODING_BASE: f64 = 10_000.0;

/// A `(c, h, w)` tensor stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    pub camera_index: usize,
    /// Image pixels per feature pixel.
    pub stride: f64,
}

impl FeatureMap {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
        camera_index: usize,
        stride: f64,
    ) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Validation("feature map dimensions must be at least 1".into()));
        }
        let n = channels * height * width;
        if data.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: data.len() });
        }
        if !(stride > 0.0 && stride.is_finite()) {
            return Err(Error::Validation("stride must be positive".into()));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { channels, height, width, data, camera_index, stride })
    }

    pub fn zeros(channels: usize, height: usize, width: usize, camera_index: usize, stride: f64) -> Result<Self> {
        Self::new(channels, height, width, vec![0.0; channels * height * width], camera_index, stride)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, ch: usize, i: usize, j: usize) -> f64 {
        self.data[(ch * self.height + i) * self.width + j]
    }

    pub fn texel(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.channels).map(|ch| self.get(ch, i, j)).collect()
    }

    /// Image extent covered by the map, `(w·stride, h·stride)`.
    pub fn image_size(&self) -> (f64, f64) {
        (self.width as f64 * self.stride, self.height as f64 * self.stride)
    }

    /// Adds `v[ch]` to every location of channel `ch`.
    fn add_per_channel(&mut self, v: &[f64]) {
        let plane = self.height * self.width;
        for (ch, &x) in v.iter().enumerate() {
            for value in &mut self.data[ch * plane..(ch + 1) * plane] {
                *value += x;
            }
        }
    }
}

/// Deterministic pseudo-random feature map with values in `[−1, 1)`.
pub fn synthesize_feature_map(
    seed: u64,
    camera_index: usize,
    channels: usize,
    height: usize,
    width: usize,
    stride: f64,
) -> Result<FeatureMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(camera_index as u64);
    let data = (0..channels * height * width).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    FeatureMap::new(channels, height, width, data, camera_index, stride)
}

/// Linear map from `[sin θ, cos θ]` into feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationEmbeddingTable {
    matrix: Vec<[f64; 2]>,
    pub seed: u64,
}

impl RotationEmbeddingTable {
    /// Entries uniform in `[−1, 1)`, a pure function of `(seed, channels)`.
    pub fn from_seed(seed: u64, channels: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix = (0..channels)
            .map(|_| [2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0])
            .collect();
        Self { matrix, seed }
    }

    pub fn zeros(channels: usize) -> Self {
        Self { matrix: vec![[0.0; 2]; channels], seed: 0 }
    }

    pub fn from_matrix(matrix: Vec<[f64; 2]>) -> Result<Self> {
        if !matrix.iter().flatten().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { matrix, seed: 0 })
    }

    pub fn channels(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[[f64; 2]] {
        &self.matrix
    }
}

/// `matrix · [sin θ, cos θ]ᵀ`.
pub fn rotation_embedding(theta: f64, table: &RotationEmbeddingTable) -> Result<Vec<f64>> {
    if !theta.is_finite() {
        return Err(Error::NonFinite);
    }
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    Ok(table.matrix.iter().map(|m| m[0] * s + m[1] * c).collect())
}

/// Adds the rotation embedding of `theta` at every spatial location.
pub fn apply_rotation_embedding(f: &FeatureMap, theta: f64, table: &RotationEmbeddingTable) -> Result<FeatureMap> {
    if table.channels() != f.channels {
        return Err(Error::DimensionMismatch { expected: f.channels, actual: table.channels() });
    }
    let e = rotation_embedding(theta, table)?;
    let mut out = f.clone();
    out.add_per_channel(&e);
    Ok(out)
}

/// Bilinear weights for image pixel `(u, v)`, edge-clamped:
/// `[(i0, j0, w00), (i0, j1, w01), (i1, j0, w10), (i1, j1, w11)]`.
#[inline]
fn bilinear_taps(f: &FeatureMap, u: f64, v: f64) -> [(usize, usize, f64); 4] {
    let fx = u / f.stride - 0.5;
    let fy = v / f.stride - 0.5;
    let x0 = libm::floor(fx);
    let y0 = libm::floor(fy);
    let wx = fx - x0;
    let wy = fy - y0;
    let clamp = |k: f64, n: usize| -> usize {
        if k < 0.0 {
            0
        } else if k >= (n - 1) as f64 {
            n - 1
        } else {
            k as usize
        }
    };
    let (j0, j1) = (clamp(x0, f.width), clamp(x0 + 1.0, f.width));
    let (i0, i1) = (clamp(y0, f.height), clamp(y0 + 1.0, f.height));
    [
        (i0, j0, (1.0 - wy) * (1.0 - wx)),
        (i0, j1, (1.0 - wy) * wx),
        (i1, j0, wy * (1.0 - wx)),
        (i1, j1, wy * wx),
    ]
}

#[inline]
fn check_bounds(f: &FeatureMap, u: f64, v: f64) -> Result<()> {
    let (w, h) = f.image_size();
    if !(u >= 0.0 && u < w && v >= 0.0 && v < h) {
        return Err(Error::OutOfBounds { u, v });
    }
    Ok(())
}

/// Samples the feature vector at image pixel `(u, v)`; the feature texel
/// `(i, j)` sits at image coordinates `((j + ½)·stride, (i + ½)·stride)`.
pub fn bilinear_sample(f: &FeatureMap, u: f64, v: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; f.channels];
    bilinear_accumulate(f, u, v, &mut out)?;
    Ok(out)
}

/// Adds the bilinear sample at `(u, v)` into `acc`.
pub fn bilinear_accumulate(f: &FeatureMap, u: f64, v: f64, acc: &mut [f64]) -> Result<()> {
    check_bounds(f, u, v)?;
    let taps = bilinear_taps(f, u, v);
    let plane = f.height * f.width;
    for (ch, a) in acc.iter_mut().enumerate().take(f.channels) {
        let base = &f.data[ch * plane..(ch + 1) * plane];
        let mut s = 0.0;
        for &(i, j, w) in &taps {
            s += w * base[i * f.width + j];
        }
        *a += s;
    }
    Ok(())
}

/// Sinusoidal encoding of the normalised cell centre.
///
/// With `F = c/2` frequencies `ω_k = 10000^(−k/F)`, channels `2k` and `2k+1`
/// hold `sin(2π ω_k a_k)` and `cos(2π ω_k a_k)`, where `a_k` is the normalised
/// x coordinate for even `k` and the normalised y coordinate for odd `k`.
pub fn position_encoding(spec: &BevGridSpec, ix: usize, iy: usize, channels: usize) -> Result<Vec<f64>> {
    if !channels.is_multiple_of(2) {
        return Err(Error::OddChannels(channels));
    }
    if ix >= spec.nx || iy >= spec.ny {
        return Err(Error::IndexOutOfRange { ix, iy, nx: spec.nx, ny: spec.ny });
    }
    let xn = (ix as f64 + 0.5) / spec.nx as f64;
    let yn = (iy as f64 + 0.5) / spec.ny as f64;
    let freqs = channels / 2;
    let mut out = Vec::with_capacity(channels);
    for k in 0..freqs {
        let omega = libm::pow(POSITION_ENCODING_BASE, -(k as f64) / freqs as f64);
        let a = if k % 2 == 0 { xn } else { yn };
        let phase = TAU * omega * a;
        out.push(libm::sin(phase));
        out.push(libm::cos(phase));
    }
    Ok(out)
}

/// Dense BEV feature, `(c, ny, nx)` channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BevFeature {
    channels: usize,
    ny: usize,
    nx: usize,
    data: Vec<f64>,
    hit_count: Vec<u32>,
}

impl BevFeature {
    pub fn new(channels: usize, ny: usize, nx: usize, data: Vec<f64>, hit_count: Vec<u32>) -> Result<Self> {
        let cells = ny * nx;
        if data.len() != channels * cells {
            return Err(Error::DimensionMismatch { expected: channels * cells, actual: data.len() });
        }
        if hit_count.len() != cells {
            return Err(Error::DimensionMismatch { expected: cells, actual: hit_count.len() });
        }
        for (cell, &n) in hit_count.iter().enumerate() {
            if n == 0 && (0..channels).any(|ch| data[ch * cells + cell] != 0.0) {
                return Err(Error::Validation("cells without hits must hold zero features".into()));
            }
        }
        Ok(Self { channels, ny, nx, data, hit_count })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn hit_counts(&self) -> &[u32] {
        &self.hit_count
    }

    pub fn hit_count(&self, ix: usize, iy: usize) -> u32 {
        self.hit_count[iy * self.nx + ix]
    }

    pub fn cell_vector(&self, ix: usize, iy: usize) -> Vec<f64> {
        let cells = self.ny * self.nx;
        let cell = iy * self.nx + ix;
        (0..self.channels).map(|ch| self.data[ch * cells + cell]).collect()
    }

    /// Euclidean norm of each cell's feature vector, row-major.
    pub fn cell_norms(&self) -> Vec<f64> {
        let cells = self.ny * self.nx;
        (0..cells)
            .map(|cell| {
                let s: f64 = (0..self.channels).map(|ch| { let v = self.data[ch * cells + cell]; v * v }).sum();
                libm::sqrt(s)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateOptions {
    pub use_rotation_embedding: bool,
    pub use_position_encoding: bool,
    pub embedding_table: Option<RotationEmbeddingTable>,
}

/// Prepared inputs for aggregation; cells are independent so disjoint ranges
/// may be computed concurrently and concatenated in order.
pub struct Aggregator<'a> {
    table: &'a MappingTable,
    maps: Vec<Option<FeatureMap>>,
    channels: usize,
    use_position_encoding: bool,
}

impl<'a> Aggregator<'a> {
    pub fn new(
        features: &[FeatureMap],
        table: &'a MappingTable,
        scene: &SceneConfig,
        options: &AggregateOptions,
    ) -> Result<Self> {
        let n = table.n_cameras();
        if scene.cameras.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: scene.cameras.len() });
        }
        let channels = match features.first() {
            Some(f) => f.channels,
            None => options.embedding_table.as_ref().map_or(1, |t| t.channels()),
        };
        let mut maps: Vec<Option<FeatureMap>> = vec![None; n];
        for f in features {
            if f.channels != channels {
                return Err(Error::ChannelMismatch { expected: channels, actual: f.channels });
            }
            let slot = maps.get_mut(f.camera_index).ok_or_else(|| {
                Error::Validation(alloc::format!("feature map for unknown camera {}", f.camera_index))
            })?;
            if slot.is_some() {
                return Err(Error::Validation(alloc::format!(
                    "duplicate feature map for camera {}",
                    f.camera_index
                )));
            }
            *slot = Some(f.clone());
        }
        let mut used = vec![false; n];
        for h in table.all_hits() {
            used[h.camera_index as usize] = true;
        }
        if let Some(k) = (0..n).find(|&k| used[k] && maps[k].is_none()) {
            return Err(Error::MissingFeatureMap(k));
        }
        if options.use_rotation_embedding {
            let t = options.embedding_table.as_ref().ok_or_else(|| {
                Error::Validation("rotation embedding enabled without an embedding table".into())
            })?;
            if t.channels() != channels {
                return Err(Error::DimensionMismatch { expected: channels, actual: t.channels() });
            }
            for (k, slot) in maps.iter_mut().enumerate() {
                if let Some(f) = slot {
                    let theta = camera_yaw_in_frame(&scene.cameras[k], &scene.bev_frame)?;
                    *f = apply_rotation_embedding(f, theta, t)?;
                }
            }
        }
        if options.use_position_encoding && channels % 2 != 0 {
            return Err(Error::OddChannels(channels));
        }
        Ok(Self { table, maps, channels, use_position_encoding: options.use_position_encoding })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Cell-major feature vectors (`cells.len() × c`) for a range of cells.
    pub fn compute_cells(&self, cells: Range<usize>) -> Result<Vec<f64>> {
        let grid = self.table.grid();
        let c = self.channels;
        let mut out = vec![0.0; cells.len() * c];
        for (slot, cell) in out.chunks_exact_mut(c).zip(cells) {
            let hits = self.table.hits_at(cell);
            if hits.is_empty() {
                continue;
            }
            for h in hits {
                let f = self.maps[h.camera_index as usize]
                    .as_ref()
                    .ok_or(Error::MissingFeatureMap(h.camera_index as usize))?;
                bilinear_accumulate(f, h.u, h.v, slot)?;
            }
            let n = hits.len() as f64;
            for x in slot.iter_mut() {
                *x /= n;
            }
            if self.use_position_encoding {
                let pe = position_encoding(grid, cell % grid.nx, cell / grid.nx, c)?;
                for (x, p) in slot.iter_mut().zip(pe) {
                    *x += p;
                }
            }
        }
        Ok(out)
    }

    /// Transposes concatenated cell-major blocks into a [`BevFeature`].
    pub fn assemble(&self, cell_major: Vec<f64>) -> Result<BevFeature> {
        let grid = self.table.grid();
        let cells = grid.num_cells();
        let c = self.channels;
        if cell_major.len() != cells * c {
            return Err(Error::DimensionMismatch { expected: cells * c, actual: cell_major.len() });
        }
        let mut data = vec![0.0; cells * c];
        for (cell, v) in cell_major.chunks_exact(c).enumerate() {
            for (ch, &x) in v.iter().enumerate() {
                data[ch * cells + cell] = x;
            }
        }
        BevFeature::new(c, grid.ny, grid.nx, data, self.table.hit_counts())
    }
}

/// Mean of the bilinear samples over each cell's hits, optionally with the
/// camera rotation embedding added to each camera's map and the position
/// encoding added to each non-empty cell.
pub fn aggregate(
    features: &[FeatureMap],
    table: &MappingTable,
    scene: &SceneConfig,
    options: &AggregateOptions,
) -> Result<BevFeature> {
    let agg = Aggregator::new(features, table, scene, options)?;
    let cells = agg.compute_cells(0..table.grid().num_cells())?;
    agg.assemble(cells)
}
