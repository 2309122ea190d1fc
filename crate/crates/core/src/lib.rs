//! Double-sparse dictionary learning.
//!
//! Observations follow `y = A* x* + noise` where both the code `x*` and
//! every column of `A*` are sparse. Learning happens in two stages:
//! [`init::initialize`] recovers the column supports and coarse directions
//! of `A*` from reweighted second moments, and [`descent::descend`] refines
//! the estimate with a support-projected gradient surrogate. [`eval`]
//! aligns an estimate with the truth and [`harness`] runs Monte Carlo
//! sweeps over sample size and method.
//!
//! ```
//! use dsparse::{model, rng, GenerativeConfig};
//!
//! let cfg = GenerativeConfig::block_benchmark();
//! let dict = model::generate_dictionary(&cfg).unwrap();
//! let samples = model::draw_samples(&dict, &cfg, 10, &mut rng::seeded(1)).unwrap();
//! assert_eq!(samples.observations.dim(), (64, 10));
//! ```

pub mod cli;
pub mod descent;
pub mod error;
pub mod eval;
pub mod harness;
pub mod init;
pub mod matrix_io;
pub mod model;
pub mod rng;
pub mod spectral;

pub use descent::{DescentConfig, DescentTrace, SupportMask};
pub use error::{Error, Result};
pub use eval::{EvalReport, MatchResult};
pub use harness::{ExperimentSpec, Method, ResultRow};
pub use init::{InitConfig, InitMode, InitOutcome, InitStats};
pub use model::{Dictionary, GenerativeConfig, SampleSet, SparseCode};
pub use spectral::{SpectralPair, SymMatrix};
