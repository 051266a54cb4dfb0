//! Closed-loop latency analysis for goal-oriented communication systems.
//!
//! The crate models the round-trip latency of a control loop (command uplink,
//! edge computation, compression, feedback downlink) as a sum of gamma,
//! negative-binomial and Gaussian terms, and evaluates its distribution
//! analytically through saddlepoint approximation:
//!
//! * [`dist`] — elementary latency terms and their cumulant generating
//!   functions (CGFs), exact CDFs/PMFs, and random samplers.
//! * [`saddlepoint`] — the generic engine: saddlepoint equation solver,
//!   Lugannani–Rice CDF, saddlepoint density and mass functions.
//! * [`scenario`] — physical system parameters (links, compute, compression)
//!   and the builders that translate them into CGF models.
//! * [`latency`] — the composed latency CDFs (event-triggered, control link,
//!   feedback link, closed loop), the Gaussian-smoothed variants, the
//!   conditional excess, and the compression-ratio gradient of the CDF.
//! * [`oracles`] — independent ground truth: Monte Carlo simulation of the
//!   full loop, truncated-convolution baseline, exact lattice convolution.
//! * [`optimizer`] — feedback-period allocation, power expressions,
//!   feasibility bounds on the compression ratio, and the weighted
//!   tail-probability/power objective with ternary, grid and gradient search.
//!
//! The `cgc` binary exposes the analyses as CLI subcommands producing CSV
//! curves and JSON summaries together with a reproducibility manifest.

pub mod dist;
pub mod error;
pub mod latency;
pub mod oracles;
pub mod optimizer;
pub mod saddlepoint;
pub mod scenario;
pub(crate) mod special;

pub use error::Error;

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
