//! Drift estimation for scalar ergodic diffusions observed on [0, T].
//!
//! The pipeline reduces a continuously observed diffusion to a discrete
//! heteroscedastic regression model by sequential kernel estimation on a
//! uniform spatial grid, fits it by weighted least squares in an empirically
//! orthonormal trigonometric basis, improves the fit by block shrinkage of
//! the leading Fourier coefficients, and chooses the weights adaptively by
//! penalized cost minimization. A Monte Carlo bench measures the risk
//! improvement and the oracle-inequality behavior of the adaptive procedure.

pub mod bench;
pub mod csvio;
pub mod density;
pub mod design;
pub mod drift;
pub mod error;
pub mod select;
pub mod sequential;
pub mod shrink;
pub mod simulate;
pub mod spectral;

pub use bench::{ExperimentConfig, RiskReport, ScaleSetup};
pub use density::{integrate, invariant_density, InvariantDensity, QuadRule, QuadratureSpec};
pub use design::{build_grid, choose_n, schedule_params, validate_h1, GridSpec, Schedule};
pub use drift::{check_class_membership, drift_by_label, drift_library, DriftSpec};
pub use error::{Error, Result};
pub use select::{adaptive_estimate, select, weight_family, Rho, SelectionResult, WeightFamily};
pub use sequential::{regression_data, SequentialObservations};
pub use shrink::{class_sup_bound, shrink, shrink_coefficient, ShrinkageConfig};
pub use simulate::{simulate_path, simulate_path_with, DiffusionPath, GaussianNoise, ZeroNoise};
pub use spectral::{
    build_basis, empirical_norm_sq, fourier_coefficients, variance_proxies, wls_fit, BasisMatrix,
    PiecewiseEstimate, SpectralData, WeightVector,
};
