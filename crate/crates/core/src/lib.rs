//! Adaptive observers for Takagi-Sugeno systems with multiplicative unknown
//! parameters.
//!
//! * [`tsmodel`]: T-S models, convex weights and the sector-nonlinearity
//!   decomposition; [`model_io`] holds their JSON documents.
//! * [`lmi`]: gain synthesis as a conic program, rank tests and the
//!   annihilation residuals. [`conic`] is the embedded interior-point solver.
//! * [`certify`]: eigenvalue re-verification and the Lyapunov audit.
//! * [`simulator`]: RK4 co-simulation of plant and observer.
//! * [`example`]: the three-state benchmark system; [`random`] generates
//!   seeded random models.

pub mod certify;
pub mod conic;
pub mod example;
pub mod linalg;
pub mod lmi;
pub mod model_io;
pub mod parallel;
pub mod random;
pub mod simulator;
pub mod tsmodel;

pub use certify::{certify, lyapunov_decrease_audit, CertificationReport};
pub use lmi::{solve_design, DesignError, DesignSpec, Objective, ObserverDesign};
pub use parallel::Execution;
pub use simulator::{run, SimError, SimScenario, Trajectory};
pub use tsmodel::{snl_decompose, ModelError, ParamAffineModel, TsModel};
