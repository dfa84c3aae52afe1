//! Composable finite-size key rates for coherent-state continuous-variable QKD.
//!
//! The crate is organised around the data flow of a single protocol run:
//!
//! * [`channel`] models the passive Gaussian channel (transmittance, excess noise)
//!   and the expected covariance matrix it produces.
//! * [`holevo`] bounds Eve's information from a covariance triple via symplectic
//!   eigenvalues.
//! * [`estimation`] turns observed norms and inner products into certified
//!   covariance bounds and runs the parameter-estimation test.
//! * [`finite_size`] assembles the key length from entropy, leakage, Holevo term
//!   and the finite-size corrections, and optimises the modulation variance.
//! * [`sim`] executes the protocol end to end on sampled heterodyne data.
//! * [`oracle`] checks the concentration inequalities the estimation relies on by
//!   brute-force sampling.
//!
//! All variances are in shot-noise units (vacuum quadrature variance 1).

pub mod channel;
pub mod error;
pub mod estimation;
pub mod finite_size;
pub mod holevo;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod stats;

pub use channel::{ChannelModel, ExpectedCovariance, Modulation};
pub use error::{Error, Result};
pub use estimation::{GammaEstimates, PeThresholds, SummaryStats};
pub use finite_size::{KeyRateReport, ProtocolParams, SecurityBudget};
pub use holevo::CovarianceTriple;
