//! Region of interest: rasterized buildings, transmitters, coordinate transforms
//! and the deployable-location lattice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Px};

pub const DEFAULT_SIDE_M: f64 = 800.0;
pub const DEFAULT_GRID: usize = 128;
pub const DEFAULT_FREQUENCY_HZ: f64 = 3.5e9;
pub const MIN_OUTDOOR_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Antenna {
    #[default]
    IsotropicVertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxDescriptor {
    pub position_px: Px,
    #[serde(default)]
    pub power_dbm: f64,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default)]
    pub antenna: Antenna,
}

fn default_frequency() -> f64 {
    DEFAULT_FREQUENCY_HZ
}

impl TxDescriptor {
    /// Isotropic 0 dBm transmitter at 3.5 GHz.
    pub fn at(position_px: Px) -> Self {
        TxDescriptor {
            position_px,
            power_dbm: 0.0,
            frequency_hz: DEFAULT_FREQUENCY_HZ,
            antenna: Antenna::IsotropicVertical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    side_length_m: f64,
    buildings: Mask,
    pub tx_list: Vec<TxDescriptor>,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(
        side_length_m: f64,
        buildings: Mask,
        tx_list: Vec<TxDescriptor>,
        seed: u64,
    ) -> Result<Self> {
        let n = buildings.size();
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "grid size {n} must be a power of two >= 16"
            )));
        }
        if !(side_length_m > 0.0 && side_length_m.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "side length {side_length_m} must be positive"
            )));
        }
        let scene = SceneSpec {
            side_length_m,
            buildings,
            tx_list: Vec::new(),
            seed,
        };
        for tx in &tx_list {
            scene.check_deployable(tx.position_px)?;
        }
        Ok(SceneSpec { tx_list, ..scene })
    }

    /// Building-free scene.
    pub fn open(grid_size: usize, side_length_m: f64) -> Result<Self> {
        SceneSpec::new(side_length_m, Grid::filled(grid_size, false), Vec::new(), 0)
    }

    pub fn side_length_m(&self) -> f64 {
        self.side_length_m
    }

    pub fn grid_size(&self) -> usize {
        self.buildings.size()
    }

    pub fn resolution_m_per_px(&self) -> f64 {
        self.side_length_m / self.grid_size() as f64
    }

    /// `true` at building pixels.
    pub fn buildings(&self) -> &Mask {
        &self.buildings
    }

    pub fn is_building(&self, p: Px) -> bool {
        self.buildings[p]
    }

    /// Outdoor pixels: where users live and metrics are measured.
    pub fn outdoor_mask(&self) -> Mask {
        self.buildings.map(|b| !b)
    }

    pub fn outdoor_fraction(&self) -> f64 {
        1.0 - self.buildings.count() as f64 / self.buildings.len() as f64
    }

    pub fn with_txs(&self, tx_list: Vec<TxDescriptor>) -> Result<Self> {
        for tx in &tx_list {
            self.check_deployable(tx.position_px)?;
        }
        Ok(SceneSpec {
            tx_list,
            ..self.clone()
        })
    }

    pub fn check_bounds(&self, p: Px) -> Result<()> {
        if self.buildings.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                i: p.0 as i64,
                j: p.1 as i64,
                size: self.grid_size(),
            })
        }
    }

    pub fn check_deployable(&self, p: Px) -> Result<()> {
        self.check_bounds(p)?;
        if self.is_building(p) {
            return Err(Error::NotDeployable(p.0, p.1));
        }
        Ok(())
    }

    /// Pixel center in meters: `((i + 0.5)·res, (j + 0.5)·res)`.
    pub fn px_to_m(&self, p: Px) -> Result<(f64, f64)> {
        self.check_bounds(p)?;
        let r = self.resolution_m_per_px();
        Ok(((p.0 as f64 + 0.5) * r, (p.1 as f64 + 0.5) * r))
    }

    pub fn m_to_px(&self, x: f64, y: f64) -> Result<Px> {
        let r = self.resolution_m_per_px();
        let (fi, fj) = ((x / r).floor(), (y / r).floor());
        let n = self.grid_size() as f64;
        if !(fi >= 0.0 && fj >= 0.0 && fi < n && fj < n) {
            return Err(Error::OutOfBounds {
                i: fi as i64,
                j: fj as i64,
                size: self.grid_size(),
            });
        }
        Ok((fi as usize, fj as usize))
    }

    /// Euclidean distance in meters between two pixel centers.
    pub fn distance_m(&self, a: Px, b: Px) -> f64 {
        let di = a.0 as f64 - b.0 as f64;
        let dj = a.1 as f64 - b.1 as f64;
        (di * di + dj * dj).sqrt() * self.resolution_m_per_px()
    }

    /// Left-right mirror of buildings and transmitters.
    pub fn flip_h(&self) -> Self {
        let n = self.grid_size();
        let txs = self.tx_list.iter().map(|t| TxDescriptor {
            position_px: (t.position_px.0, n - 1 - t.position_px.1),
            ..*t
        });
        SceneSpec {
            buildings: self.buildings.flip_h(),
            tx_list: txs.collect(),
            ..self.clone()
        }
    }

    /// Top-bottom mirror of buildings and transmitters.
    pub fn flip_v(&self) -> Self {
        let n = self.grid_size();
        let txs = self.tx_list.iter().map(|t| TxDescriptor {
            position_px: (n - 1 - t.position_px.0, t.position_px.1),
            ..*t
        });
        SceneSpec {
            buildings: self.buildings.flip_v(),
            tx_list: txs.collect(),
            ..self.clone()
        }
    }
}

/// Procedural city generator: axis-aligned rectangular buildings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGenerator {
    pub grid_size: usize,
    pub side_length_m: f64,
    pub n_buildings: usize,
    /// Building edge length range in pixels, inclusive.
    pub min_size_px: usize,
    pub max_size_px: usize,
    pub max_retries: usize,
}

impl Default for SceneGenerator {
    fn default() -> Self {
        SceneGenerator {
            grid_size: DEFAULT_GRID,
            side_length_m: DEFAULT_SIDE_M,
            n_buildings: 12,
            min_size_px: DEFAULT_GRID / 16,
            max_size_px: DEFAULT_GRID / 5,
            max_retries: 16,
        }
    }
}

impl SceneGenerator {
    /// Defaults scaled to a given grid size.
    pub fn for_grid(grid_size: usize) -> Self {
        SceneGenerator {
            grid_size,
            min_size_px: (grid_size / 16).max(1),
            max_size_px: (grid_size / 5).max(2),
            ..SceneGenerator::default()
        }
    }

    pub fn generate(&self, seed: u64) -> Result<SceneSpec> {
        if self.min_size_px == 0
            || self.min_size_px > self.max_size_px
            || self.max_size_px > self.grid_size
        {
            return Err(Error::InvalidConfig(format!(
                "building size range {}..={} does not fit a {} grid",
                self.min_size_px, self.max_size_px, self.grid_size
            )));
        }
        let n = self.grid_size;
        for attempt in 0..=self.max_retries {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(attempt as u64);
            let mut raster = Grid::filled(n, false);
            for _ in 0..self.n_buildings {
                let h = rng.random_range(self.min_size_px..=self.max_size_px);
                let w = rng.random_range(self.min_size_px..=self.max_size_px);
                let i0 = rng.random_range(0..=n - h);
                let j0 = rng.random_range(0..=n - w);
                for i in i0..i0 + h {
                    for j in j0..j0 + w {
                        raster[(i, j)] = true;
                    }
                }
            }
            let scene = SceneSpec::new(self.side_length_m, raster, Vec::new(), seed)?;
            if scene.outdoor_fraction() >= MIN_OUTDOOR_FRACTION {
                return Ok(scene);
            }
        }
        Err(Error::InfeasibleScene(format!(
            "fewer than {:.0}% outdoor pixels after {} retries",
            MIN_OUTDOOR_FRACTION * 100.0,
            self.max_retries
        )))
    }
}

/// Permissible base-station sites restricted to a stride lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct DeployableSet {
    pub mask: Mask,
    pub candidate_stride: usize,
    candidates: Vec<Px>,
}

impl DeployableSet {
    pub fn new(scene: &SceneSpec, stride: usize) -> Result<Self> {
        let candidates = deployable_candidates(scene, stride)?;
        Ok(DeployableSet {
            mask: scene.outdoor_mask(),
            candidate_stride: stride,
            candidates,
        })
    }

    pub fn candidates(&self) -> &[Px] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn index_of(&self, p: Px) -> Option<usize> {
        self.candidates.iter().position(|&c| c == p)
    }
}

/// Outdoor lattice points `(s/2 + k·s, s/2 + l·s)` in row-major order.
pub fn deployable_candidates(scene: &SceneSpec, stride: usize) -> Result<Vec<Px>> {
    if stride == 0 {
        return Err(Error::InvalidConfig("candidate stride must be >= 1".into()));
    }
    let n = scene.grid_size();
    let off = stride / 2;
    let mut out = Vec::new();
    for i in (off..n).step_by(stride) {
        for j in (off..n).step_by(stride) {
            if !scene.is_building((i, j)) {
                out.push((i, j));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InfeasibleScene(format!(
            "no outdoor candidate on the stride-{stride} lattice"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(n: usize) -> SceneSpec {
        SceneSpec::open(n, 800.0).unwrap()
    }

    #[test]
    fn empty_generator_gives_empty_raster() {
        let g = SceneGenerator {
            n_buildings: 0,
            ..SceneGenerator::default()
        };
        let s = g.generate(7).unwrap();
        assert_eq!(s.buildings().count(), 0);
    }

    #[test]
    fn generator_is_deterministic_and_seed_sensitive() {
        let g = SceneGenerator::default();
        let a = g.generate(7).unwrap();
        let b = g.generate(7).unwrap();
        let c = g.generate(8).unwrap();
        assert_eq!(a.buildings(), b.buildings());
        assert_ne!(a.buildings(), c.buildings());
        assert!(a.outdoor_fraction() >= MIN_OUTDOOR_FRACTION);
    }

    #[test]
    fn overcrowded_generator_is_infeasible() {
        let g = SceneGenerator {
            n_buildings: 400,
            min_size_px: 20,
            max_size_px: 40,
            max_retries: 2,
            ..SceneGenerator::default()
        };
        assert!(matches!(g.generate(1), Err(Error::InfeasibleScene(_))));
        let bad = SceneGenerator {
            min_size_px: 10,
            max_size_px: 200,
            ..SceneGenerator::default()
        };
        assert!(matches!(bad.generate(1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn pixel_centers() {
        let s = open(128);
        assert_eq!(s.resolution_m_per_px(), 6.25);
        assert_eq!(s.px_to_m((0, 0)).unwrap(), (3.125, 3.125));
        assert_eq!(s.px_to_m((64, 64)).unwrap(), (403.125, 403.125));
        assert!(s.px_to_m((128, 0)).is_err());
        assert!(s.m_to_px(800.0, 10.0).is_err());
        assert!(s.m_to_px(-0.1, 10.0).is_err());
        for i in 0..128 {
            for j in (0..128).step_by(7) {
                let (x, y) = s.px_to_m((i, j)).unwrap();
                assert_eq!(s.m_to_px(x, y).unwrap(), (i, j));
            }
        }
    }

    #[test]
    fn grid_size_must_be_power_of_two() {
        assert!(SceneSpec::open(8, 800.0).is_err());
        assert!(SceneSpec::open(48, 800.0).is_err());
        assert!(SceneSpec::open(16, 800.0).is_ok());
    }

    #[test]
    fn tx_must_be_outdoor_and_in_bounds() {
        let mut raster = Grid::filled(16, false);
        raster[(3, 3)] = true;
        assert!(matches!(
            SceneSpec::new(100.0, raster.clone(), vec![TxDescriptor::at((3, 3))], 0),
            Err(Error::NotDeployable(3, 3))
        ));
        assert!(matches!(
            SceneSpec::new(100.0, raster, vec![TxDescriptor::at((16, 0))], 0),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn candidate_counts() {
        let s = open(128);
        assert_eq!(deployable_candidates(&s, 4).unwrap().len(), 1024);
        assert_eq!(deployable_candidates(&s, 1).unwrap().len(), 16384);
        let full = SceneSpec::new(800.0, Grid::filled(16, true), vec![], 0).unwrap();
        assert!(matches!(
            deployable_candidates(&full, 1),
            Err(Error::InfeasibleScene(_))
        ));
        assert!(deployable_candidates(&s, 0).is_err());
    }

    #[test]
    fn candidates_are_outdoor_and_row_major() {
        let s = SceneGenerator::for_grid(64).generate(3).unwrap();
        let c = deployable_candidates(&s, 4).unwrap();
        assert!(c.len() <= 256);
        assert!(c.iter().all(|&p| !s.is_building(p)));
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }
}
