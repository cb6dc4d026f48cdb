use std::sync::{Arc, RwLock};

use emfplan_core::dqn::Policy;
use emfplan_core::gan::TrainedSurrogate;
use emfplan_core::{OraclePredictor, Predictor, Result, SceneSpec, SurrogatePredictor};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorMode {
    /// Trained surrogate; requests fail with 409 until one is loaded.
    #[default]
    Gan,
    Oracle,
}

/// A scene with everything bound to it. Immutable once built.
pub struct LoadedScene {
    pub scene: SceneSpec,
    pub oracle: Arc<OraclePredictor>,
    pub surrogate: Option<Arc<SurrogatePredictor>>,
    pub policy: Option<Arc<Policy>>,
}

impl LoadedScene {
    pub fn new(
        scene: SceneSpec,
        surrogate: Option<Arc<TrainedSurrogate>>,
        policy: Option<Policy>,
    ) -> Result<Self> {
        let surrogate = match surrogate {
            Some(m) => Some(Arc::new(SurrogatePredictor::new(&scene, m)?)),
            None => None,
        };
        Ok(LoadedScene {
            oracle: Arc::new(OraclePredictor::new(&scene)),
            surrogate,
            policy: policy.map(Arc::new),
            scene,
        })
    }

    pub fn predictor(&self, mode: PredictorMode) -> Result<Arc<dyn Predictor>, ApiError> {
        match mode {
            PredictorMode::Oracle => Ok(self.oracle.clone()),
            PredictorMode::Gan => match &self.surrogate {
                Some(s) => Ok(s.clone()),
                None => Err(ApiError::no_checkpoint("surrogate")),
            },
        }
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    scene: Arc<RwLock<Option<Arc<LoadedScene>>>>,
    pub mode: PredictorMode,
}

impl AppState {
    pub fn new(mode: PredictorMode) -> Self {
        AppState {
            scene: Arc::default(),
            mode,
        }
    }

    pub fn with_scene(mode: PredictorMode, loaded: LoadedScene) -> Self {
        let s = Self::new(mode);
        s.set_scene(loaded);
        s
    }

    /// Swap in a fully built scene; in-flight requests keep the old one.
    pub fn set_scene(&self, loaded: LoadedScene) {
        *self.scene.write().expect("scene lock") = Some(Arc::new(loaded));
    }

    pub fn current(&self) -> Result<Arc<LoadedScene>, ApiError> {
        self.scene
            .read()
            .expect("scene lock")
            .clone()
            .ok_or_else(ApiError::no_scene)
    }
}
