//! Thread-pool drivers for the per-cell stages.
//!
//! Work is split into fixed-size cell chunks that do not depend on the thread
//! count, and chunks are concatenated in index order, so results are
//! bit-identical for any `threads`.

use rayon::prelude::*;
use roadbev_core::features::Aggregator;
use roadbev_core::{
    AggregateOptions, BevFeature, BevGridSpec, CamMask, FeatureMap, MappingBuilder, MappingTable, RoiMask,
    SceneConfig,
};

use crate::error::{Error, Result};

pub const CHUNK_CELLS: usize = 4096;

/// A pool of `threads` workers; 0 means one per available core.
pub fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| {
        Error::io("<thread pool>", std::io::Error::other(e.to_string()))
    })
}

fn chunks(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(CHUNK_CELLS)).map(|i| i * CHUNK_CELLS..((i + 1) * CHUNK_CELLS).min(n)).collect()
}

pub fn build_mapping(
    scene: &SceneConfig,
    grid: &BevGridSpec,
    cam_mask: &CamMask,
    roi: Option<&RoiMask>,
    threads: usize,
) -> Result<MappingTable> {
    let builder = MappingBuilder::new(scene, grid, cam_mask, roi)?;
    let parts = pool(threads)?
        .install(|| chunks(grid.num_cells()).into_par_iter().map(|r| builder.build_cells(r)).collect::<Vec<_>>());
    Ok(builder.assemble(parts)?)
}

pub fn aggregate(
    features: &[FeatureMap],
    table: &MappingTable,
    scene: &SceneConfig,
    options: &AggregateOptions,
    threads: usize,
) -> Result<BevFeature> {
    let agg = Aggregator::new(features, table, scene, options)?;
    let parts = pool(threads)?.install(|| {
        chunks(table.grid().num_cells())
            .into_par_iter()
            .map(|r| agg.compute_cells(r))
            .collect::<roadbev_core::Result<Vec<_>>>()
    })?;
    Ok(agg.assemble(parts.concat())?)
}
