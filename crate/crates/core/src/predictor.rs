//! Map predictors bound to one scene: the propagation oracle itself or a
//! trained surrogate. Both return maps with the same contract.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::TrainedSurrogate;
use crate::grid::Px;
use crate::metrics::{self, Thresholds};
use crate::oracle::{combine_fields, tx_field, PropagationParams, RadioMaps, TxField};
use crate::scene::{SceneSpec, TxDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    SurrogateGan,
    OracleDirect,
}

pub trait Predictor: Send + Sync {
    fn scene(&self) -> &SceneSpec;

    /// Maps for transmitters at `txs` (in addition to nothing else).
    fn predict(&self, txs: &[Px]) -> Result<RadioMaps>;

    fn predict_many(&self, configs: &[Vec<Px>]) -> Result<Vec<RadioMaps>> {
        configs.iter().map(|c| self.predict(c)).collect()
    }

    fn kind(&self) -> PredictorKind;
}

fn check_txs(scene: &SceneSpec, txs: &[Px]) -> Result<()> {
    txs.iter().try_for_each(|&p| scene.check_deployable(p))
}

/// Exact oracle maps with per-transmitter fields memoized.
pub struct OraclePredictor {
    scene: SceneSpec,
    params: PropagationParams,
    template: TxDescriptor,
    cache: Mutex<HashMap<Px, Arc<TxField>>>,
}

impl OraclePredictor {
    pub fn new(scene: &SceneSpec) -> Self {
        Self::with_params(scene, PropagationParams::for_scene(scene))
    }

    pub fn with_params(scene: &SceneSpec, params: PropagationParams) -> Self {
        OraclePredictor {
            scene: scene.with_txs(Vec::new()).expect("empty tx list"),
            params,
            template: TxDescriptor::at((0, 0)),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn params(&self) -> &PropagationParams {
        &self.params
    }

    fn field(&self, p: Px) -> Arc<TxField> {
        if let Some(f) = self.cache.lock().expect("cache lock").get(&p) {
            return f.clone();
        }
        let f = Arc::new(tx_field(
            &self.scene,
            &TxDescriptor {
                position_px: p,
                ..self.template
            },
            &self.params,
        ));
        self.cache.lock().expect("cache lock").insert(p, f.clone());
        f
    }
}

impl Predictor for OraclePredictor {
    fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    fn predict(&self, txs: &[Px]) -> Result<RadioMaps> {
        check_txs(&self.scene, txs)?;
        let fields: Vec<Arc<TxField>> = txs.iter().map(|&p| self.field(p)).collect();
        Ok(combine_fields(
            self.scene.outdoor_mask(),
            fields.iter().map(|f| f.as_ref()),
            &self.params,
        ))
    }

    fn kind(&self) -> PredictorKind {
        PredictorKind::OracleDirect
    }
}

/// Trained surrogate evaluated on one scene.
pub struct SurrogatePredictor {
    scene: SceneSpec,
    model: Arc<TrainedSurrogate>,
}

impl SurrogatePredictor {
    pub fn new(scene: &SceneSpec, model: Arc<TrainedSurrogate>) -> Result<Self> {
        if model.header.grid_size != scene.grid_size() {
            return Err(Error::InvalidConfig(format!(
                "checkpoint grid {} does not match scene grid {}",
                model.header.grid_size,
                scene.grid_size()
            )));
        }
        Ok(SurrogatePredictor {
            scene: scene.with_txs(Vec::new()).expect("empty tx list"),
            model,
        })
    }

    pub fn model(&self) -> &TrainedSurrogate {
        &self.model
    }
}

impl Predictor for SurrogatePredictor {
    fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    fn predict(&self, txs: &[Px]) -> Result<RadioMaps> {
        check_txs(&self.scene, txs)?;
        self.model.predict_scene(&self.scene, txs)
    }

    fn predict_many(&self, configs: &[Vec<Px>]) -> Result<Vec<RadioMaps>> {
        for c in configs {
            check_txs(&self.scene, c)?;
        }
        let inputs: Vec<_> = configs
            .iter()
            .map(|c| crate::dataset::encode_input(&self.scene, c))
            .collect();
        self.model.predict_batch(&inputs)
    }

    fn kind(&self) -> PredictorKind {
        PredictorKind::SurrogateGan
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub cr: f64,
    pub er: f64,
}

/// Coverage and exposure rates of `maps` over their valid (outdoor) pixels.
pub fn rates(maps: &RadioMaps, thresholds: &Thresholds) -> Result<Rates> {
    Ok(Rates {
        cr: metrics::coverage_rate(&maps.rss_dbm, &maps.valid_mask, thresholds.phi_dbm)?,
        er: metrics::exposure_rate(&maps.exposure_dbuv, &maps.valid_mask, thresholds.gamma_dbuv)?,
    })
}

pub fn evaluate_placement(
    predictor: &dyn Predictor,
    txs: &[Px],
    thresholds: &Thresholds,
) -> Result<Rates> {
    rates(&predictor.predict(txs)?, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::compute_maps;
    use crate::scene::SceneGenerator;

    #[test]
    fn oracle_predictor_matches_compute_maps_exactly() {
        let scene = SceneGenerator::for_grid(32).generate(5).unwrap();
        let outdoor: Vec<Px> = scene
            .outdoor_mask()
            .indexed()
            .filter(|(_, &o)| o)
            .map(|(p, _)| p)
            .collect();
        let txs = vec![outdoor[10], outdoor[400], outdoor[700]];
        let pred = OraclePredictor::new(&scene);
        let with = scene
            .with_txs(txs.iter().map(|&p| TxDescriptor::at(p)).collect())
            .unwrap();
        let want = compute_maps(&with, &PropagationParams::for_scene(&scene));
        assert_eq!(pred.predict(&txs).unwrap(), want);
        // Second call served from the cache.
        assert_eq!(pred.predict(&txs).unwrap(), want);
    }

    #[test]
    fn rejects_building_pixels_and_handles_empty() {
        let scene = SceneGenerator::for_grid(32).generate(5).unwrap();
        let building = scene.buildings().indexed().find(|(_, &b)| b).unwrap().0;
        let pred = OraclePredictor::new(&scene);
        assert!(matches!(
            pred.predict(&[building]),
            Err(Error::NotDeployable(..))
        ));
        let r = evaluate_placement(&pred, &[], &Thresholds::default()).unwrap();
        assert_eq!(r, Rates { cr: 0.0, er: 1.0 });
    }
}
