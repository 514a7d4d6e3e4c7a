//! Little-endian binary formats.
//!
//! * `BMAP` — mapping table: header (magic, version, nx, ny, n_z, n_cameras,
//!   scene / cam-mask / ROI digests, grid ranges, z samples), `nx·ny` u32 hit
//!   counts, then `{camera u16, z_level u16, u f64, v f64}` records.
//! * `FMAP` — camera feature map: magic, version, c, h, w, camera index,
//!   stride (f64), then `c·h·w` f32 values channel-major.
//! * `BEVF` — BEV feature: magic, version, c, ny, nx, then `c·ny·nx` f32
//!   values channel-major and `ny·nx` u32 hit counts.

use std::fs;
use std::path::Path;

use roadbev_core::{BevFeature, BevGridSpec, FeatureMap, Hit, MappingTable, Provenance};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u16(&mut self, x: u16) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f32(&mut self, x: f32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn len_u32(&mut self, x: usize, path: &Path) -> Result<()> {
        let x = u32::try_from(x).map_err(|_| Error::format(path, "dimension exceeds u32"))?;
        self.u32(x);
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.path, "unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::format(self.path, format!("missing {} magic", String::from_utf8_lossy(magic))));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(Error::format(self.path, format!("unsupported version {v}")));
        }
        Ok(())
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(self.path, "trailing bytes"));
        }
        Ok(())
    }
    /// Guards allocations against corrupt headers.
    fn expect_remaining(&self, n: usize) -> Result<()> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(self.path, "unexpected end of file"));
        }
        Ok(())
    }
}

fn checked_product(dims: &[usize], path: &Path) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(path, "dimensions overflow"))
}

pub fn encode_mapping(table: &MappingTable) -> Result<Vec<u8>> {
    let path = Path::new("<mapping>");
    let grid = table.grid();
    let mut w = Writer(Vec::with_capacity(128 + grid.num_cells() * 4 + table.total_hits() * 20));
    w.0.extend_from_slice(b"BMAP");
    w.u32(VERSION);
    w.len_u32(grid.nx, path)?;
    w.len_u32(grid.ny, path)?;
    w.len_u32(grid.z_samples.len(), path)?;
    w.len_u32(table.n_cameras(), path)?;
    let p = table.provenance();
    for d in [&p.scene, &p.cam_mask, &p.roi] {
        w.0.extend_from_slice(d);
    }
    for x in [grid.x_range.0, grid.x_range.1, grid.y_range.0, grid.y_range.1] {
        w.f64(x);
    }
    for &z in &grid.z_samples {
        w.f64(z);
    }
    for c in table.hit_counts() {
        w.u32(c);
    }
    for h in table.all_hits() {
        w.u16(h.camera_index);
        w.u16(h.z_level);
        w.f64(h.u);
        w.f64(h.v);
    }
    Ok(w.0)
}

pub fn decode_mapping(bytes: &[u8], path: &Path) -> Result<MappingTable> {
    let mut r = Reader { bytes, pos: 0, path };
    r.header(b"BMAP")?;
    let (nx, ny, nz, n_cameras) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
    let provenance = Provenance { scene: r.array()?, cam_mask: r.array()?, roi: r.array()? };
    let x_range = (r.f64()?, r.f64()?);
    let y_range = (r.f64()?, r.f64()?);
    r.expect_remaining(checked_product(&[nz, 8], path)?)?;
    let z_samples = (0..nz).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let grid = BevGridSpec::new(nx, ny, x_range, y_range, z_samples).map_err(|e| Error::validation(path, "grid", e))?;
    r.expect_remaining(checked_product(&[nx, ny, 4], path)?)?;
    let counts = (0..nx * ny).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let total: usize = counts.iter().map(|&c| c as usize).sum();
    r.expect_remaining(checked_product(&[total, 20], path)?)?;
    let hits = (0..total)
        .map(|_| Ok(Hit { camera_index: r.u16()?, z_level: r.u16()?, u: r.f64()?, v: r.f64()? }))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    MappingTable::from_parts(grid, n_cameras, &counts, hits, provenance)
        .map_err(|e| Error::validation(path, "mapping", e))
}

pub fn encode_feature_map(f: &FeatureMap) -> Result<Vec<u8>> {
    let path = Path::new("<feature map>");
    let mut w = Writer(Vec::with_capacity(40 + f.data().len() * 4));
    w.0.extend_from_slice(b"FMAP");
    w.u32(VERSION);
    w.len_u32(f.channels(), path)?;
    w.len_u32(f.height(), path)?;
    w.len_u32(f.width(), path)?;
    w.len_u32(f.camera_index, path)?;
    w.f64(f.stride);
    for &x in f.data() {
        w.f32(x as f32);
    }
    Ok(w.0)
}

pub fn decode_feature_map(bytes: &[u8], path: &Path) -> Result<FeatureMap> {
    let mut r = Reader { bytes, pos: 0, path };
    r.header(b"FMAP")?;
    let (c, h, w, cam) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
    let stride = r.f64()?;
    let n = checked_product(&[c, h, w], path)?;
    r.expect_remaining(checked_product(&[n, 4], path)?)?;
    let data = (0..n).map(|_| Ok(r.f32()? as f64)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    FeatureMap::new(c, h, w, data, cam, stride).map_err(|e| Error::validation(path, "feature map", e))
}

pub fn encode_bev_feature(f: &BevFeature) -> Result<Vec<u8>> {
    let path = Path::new("<bev feature>");
    let mut w = Writer(Vec::with_capacity(24 + f.data().len() * 4 + f.hit_counts().len() * 4));
    w.0.extend_from_slice(b"BEVF");
    w.u32(VERSION);
    w.len_u32(f.channels(), path)?;
    w.len_u32(f.ny(), path)?;
    w.len_u32(f.nx(), path)?;
    for &x in f.data() {
        w.f32(x as f32);
    }
    for &c in f.hit_counts() {
        w.u32(c);
    }
    Ok(w.0)
}

pub fn decode_bev_feature(bytes: &[u8], path: &Path) -> Result<BevFeature> {
    let mut r = Reader { bytes, pos: 0, path };
    r.header(b"BEVF")?;
    let (c, ny, nx) = (r.usize()?, r.usize()?, r.usize()?);
    let cells = checked_product(&[ny, nx], path)?;
    let n = checked_product(&[c, cells], path)?;
    r.expect_remaining(checked_product(&[n + cells, 4], path)?)?;
    let data = (0..n).map(|_| Ok(r.f32()? as f64)).collect::<Result<Vec<_>>>()?;
    let counts = (0..cells).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    BevFeature::new(c, ny, nx, data, counts).map_err(|e| Error::validation(path, "bev feature", e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_mapping(table: &MappingTable, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_mapping(table)?)
}

pub fn load_mapping(path: impl AsRef<Path>) -> Result<MappingTable> {
    let path = path.as_ref();
    decode_mapping(&read(path)?, path)
}

pub fn save_feature_map(f: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_feature_map(f)?)
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    decode_feature_map(&read(path)?, path)
}

pub fn save_bev_feature(f: &BevFeature, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_bev_feature(f)?)
}

pub fn load_bev_feature(path: impl AsRef<Path>) -> Result<BevFeature> {
    let path = path.as_ref();
    decode_bev_feature(&read(path)?, path)
}
