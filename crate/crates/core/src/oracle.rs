//! Deterministic multi-wall free-space propagation model.
//!
//! RSS per pixel is best-server over transmitters; exposure is the field
//! strength of the summed power densities of all transmitters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Px};
use crate::scene::{SceneSpec, TxDescriptor};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const FREE_SPACE_IMPEDANCE: f64 = 376.73;
/// Value of an RSS pixel that no transmitter reaches.
pub const RSS_FLOOR_DBM: f64 = -150.0;
/// Value of an exposure pixel with no field.
pub const EXPOSURE_FLOOR_DBUV: f64 = 0.0;
/// 6 V/m in dBµV/m.
pub const EXPOSURE_LIMIT_DBUV: f64 = 135.563_025_007_672_88;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub wall_loss_db: f64,
    pub d_min_m: f64,
    pub rx_gain_dbi: f64,
    pub impedance_ohm: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            wall_loss_db: 10.0,
            d_min_m: 3.125,
            rx_gain_dbi: 2.15,
            impedance_ohm: FREE_SPACE_IMPEDANCE,
        }
    }
}

impl PropagationParams {
    /// Defaults with the distance clamp set to half a pixel of `scene`.
    pub fn for_scene(scene: &SceneSpec) -> Self {
        PropagationParams {
            d_min_m: scene.resolution_m_per_px() / 2.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wall_loss_db >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "wall_loss_db {} must be >= 0",
                self.wall_loss_db
            )));
        }
        if !(self.d_min_m > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "d_min_m {} must be > 0",
                self.d_min_m
            )));
        }
        if !(self.impedance_ohm > 0.0) {
            return Err(Error::InvalidConfig("impedance must be > 0".into()));
        }
        Ok(())
    }
}

/// Paired RSS and exposure rasters for one transmitter configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMaps {
    pub rss_dbm: Grid<f64>,
    pub exposure_dbuv: Grid<f64>,
    /// `true` where the quantity is measurable (outdoor).
    pub valid_mask: Mask,
}

impl RadioMaps {
    pub fn floor(valid_mask: Mask) -> Self {
        let n = valid_mask.size();
        RadioMaps {
            rss_dbm: Grid::filled(n, RSS_FLOOR_DBM),
            exposure_dbuv: Grid::filled(n, EXPOSURE_FLOOR_DBUV),
            valid_mask,
        }
    }

    pub fn flip_h(&self) -> Self {
        RadioMaps {
            rss_dbm: self.rss_dbm.flip_h(),
            exposure_dbuv: self.exposure_dbuv.flip_h(),
            valid_mask: self.valid_mask.flip_h(),
        }
    }

    pub fn flip_v(&self) -> Self {
        RadioMaps {
            rss_dbm: self.rss_dbm.flip_v(),
            exposure_dbuv: self.exposure_dbuv.flip_v(),
            valid_mask: self.valid_mask.flip_v(),
        }
    }
}

/// Free-space path loss in dB.
pub fn fspl_db(d_m: f64, f_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d_m * f_hz / SPEED_OF_LIGHT).log10()
}

/// Number of building runs crossed on the grid line between two pixel centers.
///
/// Cells are visited with an exact integer DDA: a row boundary is crossed at
/// `t = (2k+1) / (2|di|)` and a column boundary at `t = (2m+1) / (2|dj|)`;
/// simultaneous crossings step diagonally. The visited set is therefore
/// invariant under reversal and mirroring, and so is the count. A run of
/// building cells counts once no matter how thick it is.
pub fn wall_crossings(a: Px, b: Px, buildings: &Mask) -> u32 {
    let di = b.0 as i64 - a.0 as i64;
    let dj = b.1 as i64 - a.1 as i64;
    let (si, sj) = (di.signum(), dj.signum());
    let (ai, aj) = (di.abs(), dj.abs());
    let (mut i, mut j) = (a.0 as i64, a.1 as i64);
    let (mut k, mut m) = (0i64, 0i64);
    let mut inside = buildings[a];
    let mut runs = inside as u32;
    while k < ai || m < aj {
        // Compare (2k+1)/(2ai) with (2m+1)/(2aj) by cross-multiplication.
        let row_t = (2 * k + 1) * aj;
        let col_t = (2 * m + 1) * ai;
        if k < ai && (m >= aj || row_t < col_t) {
            i += si;
            k += 1;
        } else if m < aj && (k >= ai || col_t < row_t) {
            j += sj;
            m += 1;
        } else {
            i += si;
            j += sj;
            k += 1;
            m += 1;
        }
        let b_here = buildings[(i as usize, j as usize)];
        if b_here && !inside {
            runs += 1;
        }
        inside = b_here;
    }
    runs
}

/// Path gain (negative loss) from `tx` to pixel `p`.
pub fn path_gain_db(
    tx: &TxDescriptor,
    p: Px,
    scene: &SceneSpec,
    params: &PropagationParams,
) -> Result<f64> {
    scene.check_bounds(p)?;
    scene.check_bounds(tx.position_px)?;
    let d = scene.distance_m(tx.position_px, p).max(params.d_min_m);
    let walls = wall_crossings(tx.position_px, p, scene.buildings());
    Ok(-(fspl_db(d, tx.frequency_hz) + walls as f64 * params.wall_loss_db))
}

/// Per-transmitter contribution: received power (dBm, unfloored) and power
/// density (W/m²).
#[derive(Debug, Clone, PartialEq)]
pub struct TxField {
    pub rss_dbm: Vec<f64>,
    pub power_density: Vec<f64>,
}

pub fn tx_field(scene: &SceneSpec, tx: &TxDescriptor, params: &PropagationParams) -> TxField {
    let n = scene.grid_size();
    let res = scene.resolution_m_per_px();
    let eirp_w = 10f64.powf((tx.power_dbm - 30.0) / 10.0);
    let mut rss = Vec::with_capacity(n * n);
    let mut dens = Vec::with_capacity(n * n);
    let (ti, tj) = tx.position_px;
    for i in 0..n {
        for j in 0..n {
            let di = i as f64 - ti as f64;
            let dj = j as f64 - tj as f64;
            let d = ((di * di + dj * dj).sqrt() * res).max(params.d_min_m);
            let walls = wall_crossings(tx.position_px, (i, j), scene.buildings()) as f64;
            let wall_db = walls * params.wall_loss_db;
            rss.push(tx.power_dbm + params.rx_gain_dbi - (fspl_db(d, tx.frequency_hz) + wall_db));
            dens.push(eirp_w / (4.0 * std::f64::consts::PI * d * d) * 10f64.powf(-wall_db / 10.0));
        }
    }
    TxField {
        rss_dbm: rss,
        power_density: dens,
    }
}

/// Aggregate per-transmitter fields into maps (best-server RSS, summed density).
pub fn combine_fields<'a>(
    valid_mask: Mask,
    fields: impl IntoIterator<Item = &'a TxField>,
    params: &PropagationParams,
) -> RadioMaps {
    let n = valid_mask.size();
    let mut best = vec![f64::NEG_INFINITY; n * n];
    let mut density = vec![0.0f64; n * n];
    for f in fields {
        for t in 0..n * n {
            best[t] = best[t].max(f.rss_dbm[t]);
            density[t] += f.power_density[t];
        }
    }
    let rss = best.into_iter().map(|v| v.max(RSS_FLOOR_DBM)).collect();
    let exposure = density
        .into_iter()
        .map(|s| field_dbuv(s, params.impedance_ohm))
        .collect();
    RadioMaps {
        rss_dbm: Grid::from_vec(n, rss).expect("n*n"),
        exposure_dbuv: Grid::from_vec(n, exposure).expect("n*n"),
        valid_mask,
    }
}

/// Field strength `20·log10(sqrt(η·S) / 1 µV/m)`, floored.
pub fn field_dbuv(power_density: f64, impedance_ohm: f64) -> f64 {
    if power_density <= 0.0 {
        return EXPOSURE_FLOOR_DBUV;
    }
    let e = (impedance_ohm * power_density).sqrt();
    (20.0 * (e / 1e-6).log10()).max(EXPOSURE_FLOOR_DBUV)
}

/// Reference maps for the scene's own transmitter list.
pub fn compute_maps(scene: &SceneSpec, params: &PropagationParams) -> RadioMaps {
    let fields: Vec<TxField> = scene
        .tx_list
        .iter()
        .map(|tx| tx_field(scene, tx, params))
        .collect();
    combine_fields(scene.outdoor_mask(), &fields, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(n: usize, rects: &[(usize, usize, usize, usize)]) -> Mask {
        let mut g = Grid::filled(n, false);
        for &(i0, j0, i1, j1) in rects {
            for i in i0..=i1 {
                for j in j0..=j1 {
                    g[(i, j)] = true;
                }
            }
        }
        g
    }

    #[test]
    fn crossings_basic_cases() {
        let empty = raster(16, &[]);
        assert_eq!(wall_crossings((0, 0), (15, 15), &empty), 0);
        assert_eq!(wall_crossings((4, 4), (4, 4), &empty), 0);
        // Solid 4x4 block between (2,8) and (13,8) on a vertical line.
        let block = raster(16, &[(6, 6, 9, 9)]);
        assert_eq!(wall_crossings((2, 8), (13, 8), &block), 1);
        // Hand-traced diagonal through the block: cells (k,k) for k = 2..=13.
        assert_eq!(wall_crossings((2, 2), (13, 13), &block), 1);
        // Two separate blocks on a row.
        let two = raster(16, &[(5, 3, 7, 4), (5, 9, 7, 11)]);
        assert_eq!(wall_crossings((6, 0), (6, 15), &two), 2);
        assert_eq!(wall_crossings((6, 15), (6, 0), &two), 2);
    }

    #[test]
    fn crossings_symmetric_on_generated_scene() {
        let s = crate::scene::SceneGenerator::for_grid(32)
            .generate(11)
            .unwrap();
        let b = s.buildings();
        for a in [(0, 0), (3, 17), (31, 5), (16, 16)] {
            for p in [(31, 31), (0, 31), (7, 2), (20, 29)] {
                assert_eq!(wall_crossings(a, p, b), wall_crossings(p, a, b));
            }
        }
    }

    #[test]
    fn friis_reference_values() {
        // 20·log10(4π·10·3.5e9/c) evaluated independently: 63.3291 dB.
        assert!((fspl_db(10.0, 3.5e9) - 63.329_144).abs() < 1e-3);
        assert!((fspl_db(3.125, 3.5e9) - 53.226_145).abs() < 1e-3);
    }

    #[test]
    fn path_gain_examples() {
        let s = SceneSpec::open(128, 800.0).unwrap();
        let params = PropagationParams::default();
        let tx = TxDescriptor::at((10, 10));
        assert!((path_gain_db(&tx, (10, 10), &s, &params).unwrap() + 53.226_145).abs() < 1e-3);
        // 6.25 m pixels: (10,10)->(10,18) is 50 m.
        let g = path_gain_db(&tx, (10, 18), &s, &params).unwrap();
        assert!((g + fspl_db(50.0, 3.5e9)).abs() < 1e-12);
        assert!(path_gain_db(&tx, (128, 0), &s, &params).is_err());
    }

    #[test]
    fn single_tx_maps() {
        // 10 m pixels: neighbour pixel is exactly 10 m away.
        let s = SceneSpec::open(16, 160.0)
            .unwrap()
            .with_txs(vec![TxDescriptor::at((5, 5))])
            .unwrap();
        let params = PropagationParams::default();
        let m = compute_maps(&s, &params);
        assert!((m.rss_dbm[(5, 6)] - (-61.179_144)).abs() < 1e-3);
        assert!((m.exposure_dbuv[(5, 6)] - 84.768_203).abs() < 1e-3);

        let two = s
            .with_txs(vec![TxDescriptor::at((5, 5)), TxDescriptor::at((5, 5))])
            .unwrap();
        let m2 = compute_maps(&two, &params);
        assert_eq!(m2.rss_dbm[(5, 6)], m.rss_dbm[(5, 6)]);
        assert!((m2.exposure_dbuv[(5, 6)] - m.exposure_dbuv[(5, 6)] - 3.0103).abs() < 1e-3);
    }

    #[test]
    fn no_tx_gives_floor_maps() {
        let s = SceneSpec::open(16, 160.0).unwrap();
        let m = compute_maps(&s, &PropagationParams::default());
        assert!(m.rss_dbm.iter().all(|&v| v == RSS_FLOOR_DBM));
        assert!(m.exposure_dbuv.iter().all(|&v| v == EXPOSURE_FLOOR_DBUV));
    }

    #[test]
    fn params_validation() {
        assert!(PropagationParams::default().validate().is_ok());
        assert!(PropagationParams {
            wall_loss_db: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PropagationParams {
            d_min_m: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        const { assert!(70.0 < EXPOSURE_LIMIT_DBUV) };
        assert!(
            (field_dbuv(6.0 * 6.0 / FREE_SPACE_IMPEDANCE, FREE_SPACE_IMPEDANCE)
                - EXPOSURE_LIMIT_DBUV)
                .abs()
                < 1e-9
        );
    }
}
