//! Memory-centric power allocation (MCPA) for multi-robot embodied question
//! answering.
//!
//! Robots hold long-horizon visual memories and share one uplink to an edge
//! server. Instead of maximizing throughput, the allocator weights each robot
//! by how much its memory is expected to improve question-answering accuracy.
//! That value is measured with a *generative adversarial exam*: a small pilot
//! sample of the robot's data is turned into an exam, and the server's
//! existing memory takes it. Low scores mean novel memory.
//!
//! Module map:
//!
//! - [`channel`]: Rayleigh-fading multi-antenna uplink, reduced to MRC gains
//!   and interference coefficients.
//! - [`qom`]: frame counts, pilot overhead, per-robot weights and the
//!   quality-of-memory objective.
//! - [`gae`]: pilot sampling, exam generation and practice tests against a
//!   synthetic oracle or a remote chat-completion model.
//! - [`solver`]: the minorize-maximize loop with a projected-gradient inner
//!   solver, and the asymptotic water-filling closed form.
//! - [`baselines`]: MaxRate, MaxCov, Fairness, Greedy, Remember and Uniform.
//! - [`harness`]: scenario configuration, seeded Monte-Carlo campaigns and
//!   CSV output.
//!
//! All quantities are linear SI units (W, Hz, s, bits). Random draws use
//! ChaCha8 (`rand_chacha`) with per-purpose streams, see [`rng`].

pub mod baselines;
pub mod channel;
pub mod error;
pub mod gae;
pub mod harness;
pub mod parallel;
pub mod qom;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use qom::PowerVector;
