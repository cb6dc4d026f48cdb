use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use base64::Engine;
use emfplan_core::dqn::Policy;
use emfplan_core::env::TraceRecord;
use emfplan_core::io::{buildings_to_png, grid_to_base64, SceneManifest};
use emfplan_core::metrics::coverage_indicator;
use emfplan_core::predictor::rates;
use emfplan_core::{EnvConfig, PlacementEnv, Px, Thresholds};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::state::{AppState, LoadedScene, PredictorMode};

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_request",
            e.body_text(),
        )
    })
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn thresholds(t: Option<Thresholds>) -> Result<Thresholds, ApiError> {
    let t = t.unwrap_or_default();
    t.validate()?;
    Ok(t)
}

pub async fn health(State(state): State<AppState>) -> Json<Value> {
    let loaded = state.current().ok();
    Json(json!({
        "status": "ok",
        "mode": state.mode,
        "scene_loaded": loaded.is_some(),
        "surrogate_loaded": loaded.as_ref().is_some_and(|l| l.surrogate.is_some()),
        "policy_loaded": loaded.as_ref().is_some_and(|l| l.policy.is_some()),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResponse {
    pub manifest: SceneManifest,
    /// 8-bit grayscale PNG, 255 = building.
    pub buildings_png: String,
}

pub async fn scene(State(state): State<AppState>) -> ApiResult<SceneResponse> {
    let loaded = state.current()?;
    let s = &loaded.scene;
    let png = buildings_to_png(s.buildings())?;
    Ok(Json(SceneResponse {
        manifest: SceneManifest {
            side_length_m: s.side_length_m(),
            grid_size: s.grid_size(),
            seed: s.seed,
            tx_list: s.tx_list.clone(),
            building_file: "inline".into(),
        },
        buildings_png: base64::engine::general_purpose::STANDARD.encode(png),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub tx_list: Vec<Px>,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    /// Overrides the server's predictor mode for this request.
    #[serde(default)]
    pub predictor: Option<PredictorMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub grid_size: usize,
    /// Row-major little-endian float32, base64.
    pub rss_map: String,
    pub exposure_map: String,
    /// Row-major bytes (1 covered, 0 not), base64.
    pub coverage_mask: String,
    pub cr: f64,
    pub er: f64,
}

pub async fn predict(
    State(state): State<AppState>,
    payload: Result<Json<PredictRequest>, JsonRejection>,
) -> ApiResult<PredictResponse> {
    let req = body(payload)?;
    let loaded = state.current()?;
    let t = thresholds(req.thresholds)?;
    let predictor = loaded.predictor(req.predictor.unwrap_or(state.mode))?;
    let resp = blocking(move || {
        let maps = predictor.predict(&req.tx_list)?;
        let r = rates(&maps, &t)?;
        let cov: Vec<u8> = coverage_indicator(&maps.rss_dbm, t.phi_dbm)
            .iter()
            .map(|&b| b as u8)
            .collect();
        Ok(PredictResponse {
            grid_size: maps.rss_dbm.size(),
            rss_map: grid_to_base64(&maps.rss_dbm),
            exposure_map: grid_to_base64(&maps.exposure_dbuv),
            coverage_mask: base64::engine::general_purpose::STANDARD.encode(cov),
            cr: r.cr,
            er: r.er,
        })
    })
    .await?;
    Ok(Json(resp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestRequest {
    #[serde(default)]
    pub deployed: Vec<Px>,
    pub n_bs: usize,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    #[serde(default)]
    pub predictor: Option<PredictorMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub placements: Vec<Px>,
    pub cr: f64,
    pub er: f64,
    pub per_step: Vec<TraceRecord>,
}

fn suggest_blocking(
    loaded: &LoadedScene,
    policy: &Policy,
    req: SuggestRequest,
    mode: PredictorMode,
) -> Result<SuggestResponse, ApiError> {
    if req.n_bs == 0 {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_request",
            "n_bs must be >= 1",
        ));
    }
    let cfg = EnvConfig {
        n_bs_budget: req.n_bs,
        thresholds: thresholds(req.thresholds)?,
        candidate_stride: policy.header.candidate_stride,
        ..Default::default()
    };
    let mut env = PlacementEnv::new(loaded.predictor(mode)?, cfg)?;
    let placed = policy.place(&mut env, &req.deployed, req.n_bs)?;
    Ok(SuggestResponse {
        placements: placed.placements,
        cr: placed.cr,
        er: placed.er,
        per_step: placed.per_step,
    })
}

pub async fn suggest(
    State(state): State<AppState>,
    payload: Result<Json<SuggestRequest>, JsonRejection>,
) -> ApiResult<SuggestResponse> {
    let req = body(payload)?;
    let loaded = state.current()?;
    let policy = loaded
        .policy
        .clone()
        .ok_or_else(|| ApiError::no_checkpoint("policy"))?;
    let mode = req.predictor.unwrap_or(state.mode);
    let loaded: Arc<LoadedScene> = loaded;
    Ok(Json(
        blocking(move || suggest_blocking(&loaded, &policy, req, mode)).await?,
    ))
}
