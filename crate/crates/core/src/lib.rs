//! Simulation and quasi-maximum-likelihood estimation of multivariate
//! spatiotemporal log-ARCH (vec-spARCH) processes.
//!
//! The model for an `n x p` panel `Y_t` observed at `n` locations is
//!
//! ```text
//! Y_t      = H_t^{1/2} ∘ Ξ_t
//! ln H_t   = A + W ln Y_t^(2) Ψ + ln Y_{t-1}^(2) Π
//! ```
//!
//! After the log-squared transformation it becomes a linear spatiotemporal
//! autoregression in `ln Y_t^(2)`, which is what the simulator solves and the
//! estimator fits. Numerical code is generic over [`Real`] (`f32` or `f64`);
//! the `*64` aliases below are what the CLI and the Monte-Carlo harness use.

pub mod error;
pub mod estimator;
pub mod likelihood;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod monte_carlo;
pub mod optim;
pub mod presets;
pub mod report;
pub mod scalar;
pub mod simulate;
pub mod special;
pub mod spectral;
pub mod stability;
pub mod weights;

pub use error::{Error, PanelIndex, Result};
pub use estimator::{fit, standard_errors, validate_assumptions, AssumptionReport, FitOptions, FitResult};
pub use model::{
    error_dist_moments, log_sq_transform, pack_params, packed_len, unpack_params, AMode, ATilde, Dimensions,
    ErrorDist, ErrorKind, ModelConfig, Panel, ParamSet,
};
pub use ingest::{
    load_panel, panel_summary, read_panel, to_returns, write_panel, IngestOptions, MissingPolicy, PanelSchema, RawPanelRecord,
};
pub use likelihood::{log_likelihood, log_likelihood_gradient, residuals, LikelihoodWorkspace};
pub use monte_carlo::{builtin_design, emit_tables, run_design, BuiltinModel, McDesign, McReport, McSize, TableFormat};
pub use report::{fit_csv, fit_document, Markers};
pub use scalar::Real;
pub use simulate::{simulate, Noise, SimOptions, SimOutput};
pub use spectral::{log_det_s, WeightSpectrum};
pub use stability::{check_stability, stationary_log_mean, StabilityMethod, StabilityReport};
pub use weights::{validate_weights, Contiguity, SpatialWeights, ValidationReport, WeightsFormat};

pub type Panel64 = Panel<f64>;
pub type ParamSet64 = ParamSet<f64>;
pub type SpatialWeights64 = SpatialWeights<f64>;
pub type ModelConfig64 = ModelConfig<f64>;
pub type SimOutput64 = SimOutput<f64>;
pub type FitResult64 = FitResult<f64>;
