//! Simulation and stability verification for linear systems driven by
//! compound-Poisson and Wiener noise, with slowly varying parameters and
//! parameter or state resetting.
//!
//! The state equation is `dX = A X dt + B dL + C dW`: `B` loads the jump
//! components of `L`, `C` the Wiener noise.

pub mod drift_monitor;
pub mod error;
pub mod experiment;
pub mod hybrid_sys;
pub mod levy_measure;
pub mod linalg;
pub mod linear_sde;
pub mod lyapunov_cert;
pub mod oracles;
pub mod polynomial;
pub mod process_sim;
pub mod quadrature;

pub use drift_monitor::{
    doleans_exponential, jump_term_decomposition, lyapunov_value, reset_jump_xi, verify_drift_inequality,
    DriftConditionParams, DriftReport, ResetJumpRecord,
};
pub use error::{Error, Result};
pub use experiment::{boundedness_test, HybridScenario, Mode, Verdict};
pub use hybrid_sys::{
    simulate_parameter_reset, simulate_parameter_varying, simulate_state_reset, Containment, ResetMode, ResetSpec,
    ThetaProcessSpec,
};
pub use levy_measure::{
    absolute_moment, moment_condition_check, polynomial_jump_integral, truncate, JumpLaw, LevyDensity, LevyMeasureSpec,
};
pub use linear_sde::{simulate_ti, simulate_with_jumps, NoiseSpec, SystemMatrices, Trajectory};
pub use lyapunov_cert::{certify, parametric_certificate, verify_certificate, Certificate, ParametricCertificate, ParametricFamily};
pub use oracles::{
    discounted_jump_sum_expectation, mc_estimate, prod_exp_expectation, stationary_covariance, McEstimate, OracleResult,
};
pub use polynomial::Polynomial;
pub use process_sim::{sample_compound_poisson, sample_jump_path, sample_reset_times, ResetProcess, SeedSpec};
