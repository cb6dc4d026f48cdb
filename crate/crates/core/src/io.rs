//! On-disk formats: scene manifests with PNG rasters, float32 grids with JSON
//! sidecars, and single-file checkpoints.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::oracle::RadioMaps;
use crate::scene::{SceneSpec, TxDescriptor};

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    read(path)
}

/// Write a file, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write(path, bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, serde_json::to_string_pretty(value)?.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&read(path)?)?)
}

/// Scene manifest as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub side_length_m: f64,
    pub grid_size: usize,
    pub seed: u64,
    pub tx_list: Vec<TxDescriptor>,
    /// PNG path relative to the manifest.
    pub building_file: String,
}

/// Encode a building raster as 8-bit grayscale PNG (0 outdoor, 255 building).
pub fn buildings_to_png(buildings: &Mask) -> Result<Vec<u8>> {
    let n = buildings.size() as u32;
    let pixels: Vec<u8> = buildings.iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = image::GrayImage::from_raw(n, n, pixels).expect("n*n buffer");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn buildings_from_png(bytes: &[u8]) -> Result<Mask> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.into_luma8();
    if img.width() != img.height() {
        return Err(Error::shape(
            "square raster",
            format!("{}x{}", img.width(), img.height()),
        ));
    }
    let n = img.width() as usize;
    let mut cells = Vec::with_capacity(n * n);
    for &v in img.as_raw() {
        match v {
            0 => cells.push(false),
            255 => cells.push(true),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "building raster value {other} is neither 0 nor 255"
                )))
            }
        }
    }
    Grid::from_vec(n, cells)
}

/// Write `scene` as `<path>` (JSON) plus a sibling `<stem>_buildings.png`.
pub fn save_scene(scene: &SceneSpec, path: &Path) -> Result<()> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    let png_name = format!("{stem}_buildings.png");
    let png_path = path.with_file_name(&png_name);
    write(&png_path, &buildings_to_png(scene.buildings())?)?;
    let manifest = SceneManifest {
        side_length_m: scene.side_length_m(),
        grid_size: scene.grid_size(),
        seed: scene.seed,
        tx_list: scene.tx_list.clone(),
        building_file: png_name,
    };
    write_json(path, &manifest)
}

pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    let manifest: SceneManifest = read_json(path)?;
    let png = path.with_file_name(&manifest.building_file);
    let buildings = buildings_from_png(&read(&png)?)?;
    if buildings.size() != manifest.grid_size {
        return Err(Error::shape(manifest.grid_size, buildings.size()));
    }
    SceneSpec::new(
        manifest.side_length_m,
        buildings,
        manifest.tx_list,
        manifest.seed,
    )
}

/// JSON sidecar describing a raw float32 grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub dtype: String,
    pub shape: [usize; 2],
    pub units: String,
    pub byte_order: String,
}

pub fn grid_to_f32_bytes(grid: &Grid<f64>) -> Vec<u8> {
    grid.iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect()
}

pub fn grid_from_f32_bytes(size: usize, bytes: &[u8]) -> Result<Grid<f64>> {
    if bytes.len() != size * size * 4 {
        return Err(Error::shape(size * size * 4, bytes.len()));
    }
    let vals = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Grid::from_vec(size, vals)
}

/// Base64 of the little-endian float32 raster, as served over HTTP.
pub fn grid_to_base64(grid: &Grid<f64>) -> String {
    base64::engine::general_purpose::STANDARD.encode(grid_to_f32_bytes(grid))
}

pub fn grid_from_base64(size: usize, text: &str) -> Result<Grid<f64>> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(text)
        .map_err(|e| Error::InvalidConfig(format!("bad base64: {e}")))?;
    grid_from_f32_bytes(size, &bytes)
}

/// Write `<dir>/<name>.f32` and `<dir>/<name>.json`.
pub fn write_grid(dir: &Path, name: &str, grid: &Grid<f64>, units: &str) -> Result<()> {
    write(&dir.join(format!("{name}.f32")), &grid_to_f32_bytes(grid))?;
    let side = GridSidecar {
        dtype: "float32".into(),
        shape: [grid.size(), grid.size()],
        units: units.into(),
        byte_order: "little".into(),
    };
    write_json(&dir.join(format!("{name}.json")), &side)
}

pub fn read_grid(dir: &Path, name: &str) -> Result<(Grid<f64>, GridSidecar)> {
    let side: GridSidecar = read_json(&dir.join(format!("{name}.json")))?;
    if side.dtype != "float32" || side.shape[0] != side.shape[1] {
        return Err(Error::shape(
            "square float32 grid",
            format!("{} {:?}", side.dtype, side.shape),
        ));
    }
    let grid = grid_from_f32_bytes(side.shape[0], &read(&dir.join(format!("{name}.f32")))?)?;
    Ok((grid, side))
}

pub fn write_maps(dir: &Path, maps: &RadioMaps) -> Result<()> {
    write_grid(dir, "rss_dbm", &maps.rss_dbm, "dBm")?;
    write_grid(dir, "exposure_dbuv", &maps.exposure_dbuv, "dBuV/m")?;
    write_grid(
        dir,
        "valid_mask",
        &maps.valid_mask.map(|&b| b as u8 as f64),
        "bool",
    )
}

pub fn read_maps(dir: &Path) -> Result<RadioMaps> {
    let (rss_dbm, _) = read_grid(dir, "rss_dbm")?;
    let (exposure_dbuv, _) = read_grid(dir, "exposure_dbuv")?;
    let (valid, _) = read_grid(dir, "valid_mask")?;
    Ok(RadioMaps {
        rss_dbm,
        exposure_dbuv,
        valid_mask: valid.map(|&v| v != 0.0),
    })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"EMFCKPT1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlobEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArchiveHeader {
    header: serde_json::Value,
    blobs: Vec<BlobEntry>,
}

/// Single-file archive: magic, u64 header length, JSON header, float32 blobs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: serde_json::Value,
    pub blobs: Vec<(String, Vec<f32>)>,
}

impl Checkpoint {
    pub fn new(header: serde_json::Value) -> Self {
        Checkpoint {
            header,
            blobs: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, data: Vec<f32>) {
        self.blobs.push((name.to_string(), data));
    }

    pub fn blob(&self, name: &str) -> Result<&[f32]> {
        self.blobs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| Error::Checkpoint(format!("missing blob {name}")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let head = ArchiveHeader {
            header: self.header.clone(),
            blobs: self
                .blobs
                .iter()
                .map(|(n, d)| BlobEntry {
                    name: n.clone(),
                    len: d.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&head)?;
        let mut out = Vec::new();
        out.write_all(CHECKPOINT_MAGIC).expect("vec write");
        out.write_all(&(json.len() as u64).to_le_bytes())
            .expect("vec write");
        out.extend_from_slice(&json);
        for (_, d) in &self.blobs {
            out.extend(d.iter().flat_map(|v| v.to_le_bytes()));
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a checkpoint archive".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(16..16 + hlen)
            .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
        let head: ArchiveHeader = serde_json::from_slice(body)?;
        let mut off = 16 + hlen;
        let mut blobs = Vec::with_capacity(head.blobs.len());
        for e in head.blobs {
            let raw = bytes
                .get(off..off + 4 * e.len)
                .ok_or_else(|| Error::Checkpoint(format!("truncated blob {}", e.name)))?;
            blobs.push((
                e.name,
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ));
            off += 4 * e.len;
        }
        if off != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last blob".into()));
        }
        Ok(Checkpoint {
            header: head.header,
            blobs,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_bytes(&read(path)?)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneGenerator;

    #[test]
    fn scene_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let scene = SceneGenerator::for_grid(64).generate(5).unwrap();
        let cand = crate::scene::deployable_candidates(&scene, 4).unwrap();
        let scene = scene.with_txs(vec![TxDescriptor::at(cand[3])]).unwrap();
        let path = dir.path().join("s.json");
        save_scene(&scene, &path).unwrap();
        let back = load_scene(&path).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn png_rejects_gray_levels() {
        let img = image::GrayImage::from_raw(16, 16, vec![7u8; 256]).unwrap();
        let mut buf = std::io::Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png).unwrap();
        assert!(buildings_from_png(buf.get_ref()).is_err());
    }

    #[test]
    fn maps_round_trip_as_float32() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::from_fn(16, |i, j| -100.0 + i as f64 * 0.5 - j as f64 * 0.25);
        write_grid(dir.path(), "x", &g, "dBm").unwrap();
        let (back, side) = read_grid(dir.path(), "x").unwrap();
        assert_eq!(back, g);
        assert_eq!(side.units, "dBm");
        assert_eq!(grid_from_base64(16, &grid_to_base64(&g)).unwrap(), g);
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let mut c = Checkpoint::new(serde_json::json!({"kind": "test", "seed": 3}));
        c.push("a", vec![1.0, -2.5, 3.25]);
        c.push("b", vec![]);
        let bytes = c.to_bytes().unwrap();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), c);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"garbage garbage garbage").is_err());
    }
}
