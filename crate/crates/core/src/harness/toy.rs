use crate::error::Result;
use crate::grid::{Grid, Px};
use crate::oracle::RadioMaps;
use crate::predictor::{Predictor, PredictorKind};
use crate::scene::SceneSpec;

/// Synthetic predictor on an open scene: a station covers a disc whose
/// radius is large at one dominant position and small everywhere else.
/// Exposure stays at zero so the compliance gate never binds.
#[derive(Debug, Clone)]
pub struct DominantActionPredictor {
    scene: SceneSpec,
    pub dominant: Px,
    pub strong_radius: f64,
    pub weak_radius: f64,
}

impl DominantActionPredictor {
    pub fn new(grid_size: usize, dominant: Px) -> Result<Self> {
        let scene = SceneSpec::open(grid_size, grid_size as f64 * 10.0)?;
        scene.check_deployable(dominant)?;
        Ok(DominantActionPredictor {
            scene,
            dominant,
            strong_radius: grid_size as f64 * 0.6,
            weak_radius: 1.5,
        })
    }
}

impl Predictor for DominantActionPredictor {
    fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    fn predict(&self, txs: &[Px]) -> Result<RadioMaps> {
        for &p in txs {
            self.scene.check_deployable(p)?;
        }
        let n = self.scene.grid_size();
        let covered = |(i, j): Px| {
            txs.iter().any(|&(ti, tj)| {
                let r = if (ti, tj) == self.dominant {
                    self.strong_radius
                } else {
                    self.weak_radius
                };
                let (di, dj) = (i as f64 - ti as f64, j as f64 - tj as f64);
                di * di + dj * dj <= r * r
            })
        };
        Ok(RadioMaps {
            rss_dbm: Grid::from_fn(n, |i, j| if covered((i, j)) { -60.0 } else { -150.0 }),
            exposure_dbuv: Grid::filled(n, 0.0),
            valid_mask: self.scene.outdoor_mask(),
        })
    }

    fn kind(&self) -> PredictorKind {
        PredictorKind::OracleDirect
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Thresholds;
    use crate::predictor::evaluate_placement;

    #[test]
    fn dominant_position_wins_by_a_margin() {
        let p = DominantActionPredictor::new(16, (10, 6)).unwrap();
        let t = Thresholds::default();
        let strong = evaluate_placement(&p, &[(10, 6)], &t).unwrap();
        let weak = evaluate_placement(&p, &[(2, 2)], &t).unwrap();
        assert!(strong.cr > 0.6 && weak.cr < 0.1, "{strong:?} {weak:?}");
        assert_eq!(strong.er, 1.0);
    }
}
