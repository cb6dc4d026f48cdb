#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod baselines;
pub mod dataset;
pub mod dqn;
pub mod env;
pub mod error;
pub mod gan;
pub mod grid;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod predictor;
pub mod scene;

pub use env::{EnvConfig, PlacementEnv};
pub use error::{Error, Result};
pub use grid::{Grid, Mask, Px};
pub use metrics::Thresholds;
pub use oracle::{PropagationParams, RadioMaps};
pub use predictor::{OraclePredictor, Predictor, Rates, SurrogatePredictor};
pub use scene::{DeployableSet, SceneGenerator, SceneSpec, TxDescriptor};
