//! Panel econometrics for the asset-price channel of monetary policy.
//!
//! The crate covers the whole workflow on monthly country panels:
//!
//! - [`panel`]: long-format panel ingestion, balancing and transforms.
//! - [`index`]: market-cap weighted sectoral index construction and
//!   market-depth ratios.
//! - [`unit_root`]: ADF tests with MacKinnon p-values and the Fisher panel
//!   combination.
//! - [`pvar`]: panel VAR by GMM on forward orthogonal deviations, moment
//!   selection criteria, companion stability and Cholesky impulse responses.
//! - [`coint`]: the Kao residual-based panel cointegration test.
//! - [`ardl`]: Pooled Mean Group and Mean Group panel ARDL estimators.
//! - [`simulate`]: seeded data-generating processes with known parameters.
//! - [`pipeline`]: the declarative end-to-end run that writes every table,
//!   plot and a manifest.

pub mod ardl;
pub mod coint;
pub mod error;
pub mod index;
pub mod linalg;
pub mod panel;
pub mod pipeline;
pub mod pvar;
pub mod simulate;
pub mod stats;
pub mod time;
pub mod unit_root;

pub use error::{Error, Result};
pub use panel::PanelDataset;
pub use time::YearMonth;
