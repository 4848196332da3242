//! Monte Carlo laboratory and deterministic kernels for the extremes of the
//! characteristic polynomial of the circular beta ensemble.
//!
//! The crate is organised by subsystem:
//!
//! - [`rng`]: reproducible per-replica random streams and the Verblunsky
//!   coefficient samplers.
//! - [`opuc`]: the Szegő / Prüfer recursions over a θ-mesh, the
//!   characteristic polynomial and the eigenvalue counting function.
//! - [`extremes`]: centering, arcs, global and local maxima, extremal
//!   point configurations.
//! - [`martingale`]: the derivative martingale, the Verblunsky MGF and the
//!   proper-martingale normalizers.
//! - [`decoration`]: the coupled decoration diffusions and their barrier
//!   events.
//! - [`barriers`]: deterministic barrier envelopes and Bessel-3 bridges.
//! - [`polymath`]: Fejér kernels, Bernstein and roots-of-unity interpolation
//!   checks, FFT evaluation of polynomials on the circle.
//! - [`point_process`]: metrics on marked configurations, Poisson sampling
//!   and Poisson-approximation bound evaluators.
//! - [`limits`]: reference limit laws and goodness-of-fit statistics.
//! - [`experiment`]: batch orchestration behind the `cbe` binary.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod barriers;
pub mod decoration;
pub mod error;
pub mod experiment;
pub mod extremes;
pub mod limits;
pub mod martingale;
pub mod opuc;
pub mod point_process;
pub mod polymath;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use opuc::Sigma;
pub use rng::RngStream;
