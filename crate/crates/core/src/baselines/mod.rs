//! Reference placement strategies and reference map regressors.

mod regressors;
mod search;

pub use regressors::{ConvAutoencoder, UNetRegressor, AUTOENCODER_LEVELS};
pub use search::{brute_force, random_search, stride_hint, SearchResult};
