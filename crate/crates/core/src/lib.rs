//! Sign-based stochastic optimization with variance-reduced gradient
//! estimators, a simulated 1-bit majority-vote parameter server, and the
//! reference oracles used to check them.
//!
//! Layout:
//!
//! * [`vector`], [`sign`], [`rng`]: dense vectors, sign operators with the
//!   packed 1-bit encoding, and deterministic splittable random streams.
//! * [`oracles`]: synthetic objectives with known smoothness, noise and
//!   gradient bounds.
//! * [`optimizers`]: SSVR, SSVR-FS and the signSGD / Signum / SGD baselines.
//! * [`majority_vote`]: the distributed protocol, Options 1 and 2.
//! * [`verify`]: brute-force checks (finite differences, vote enumeration,
//!   SVRG reference, Monte-Carlo).
//! * [`bench`]: config-driven runs, CSV output and rate fitting.

pub mod bench;
pub mod error;
pub mod majority_vote;
pub mod metrics;
pub mod optimizers;
pub mod oracles;
pub mod rng;
pub mod sign;
pub mod vector;
pub mod verify;

pub use error::{Error, Result};
pub use metrics::{MetricsRow, RunResult, RunSummary};
pub use rng::RngStream;
pub use sign::{sign, sign_bit, stochastic_sign, BitSignVector, SignVector};
pub use vector::{norm_l1, norm_l2, norm_linf, project_l2, DenseVector};
