//! Matrix-variate Gaussian (MVG) mechanism for differentially private
//! matrix-valued queries, with i.i.d. Gaussian and Laplace baselines and an
//! experiment harness.

pub mod budget;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod metrics;
pub mod sampler;
pub mod sensitivity;

pub use budget::{BudgetMode, BudgetReport, PrivacyParams, QueryKind, QuerySpec};
pub use error::{MvgError, Result};
pub use mechanisms::{PerturbResult, PrecisionAllocation};
pub use metrics::EvalReport;
pub use sampler::{NoiseDesign, RandomStream};
pub use sensitivity::DataBounds;
