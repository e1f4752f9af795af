//! One- and two-level optimized restricted additive Schwarz preconditioners
//! for the heterogeneous Helmholtz equation with impedance boundary
//! conditions, discretized by P1 finite elements on a structured mesh.
//!
//! The two-level method uses a coarse space assembled from local generalized
//! eigenproblems posed on oversampled subdomains.

pub mod analysis;
pub mod assembly;
pub mod coarse;
pub mod decomposition;
pub mod error;
pub mod gevp;
pub mod linalg;
pub mod local_ops;
pub mod medium;
pub mod mesh;
pub mod setup;
pub mod solver;

pub use assembly::{DofMap, EnergyMatrix, GlobalSystem};
pub use coarse::CoarseSpace;
pub use decomposition::{Partition, Subdomain};
pub use error::{Error, Result};
pub use gevp::{EigenBundle, FilterStrategy};
pub use linalg::C64;
pub use local_ops::LocalSolver;
pub use medium::{BuiltinMedium, GaussianSource, MediumField};
pub use mesh::{Bounds, Mesh};
pub use setup::{Setup, SetupConfig, SetupTimings};
pub use solver::{GmresConfig, Schwarz, SolverState};
