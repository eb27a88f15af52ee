//! Estimation of spin-Hamiltonian coefficients from noisy quench-dynamics
//! time series, with a trainable coordinate-wise LSTM optimizer benchmarked
//! against hand-designed optimizers (SGD, Adam, L-BFGS, Nelder-Mead).
//!
//! The crate is organized around the lifecycle of one estimation problem:
//!
//! * [`sim`] builds and diagonalizes parameterized spin Hamiltonians and
//!   evolves product states through a quench;
//! * [`objective`] turns a ground-truth Hamiltonian into a noisy dataset and
//!   evaluates the data-misfit loss and its exact gradient;
//! * [`metaopt`] is the coordinate-wise LSTM update rule, with full
//!   backpropagation through unrolled optimization trajectories;
//! * [`trainer`] meta-trains the LSTM over randomly sampled problems;
//! * [`baselines`] are the hand-designed optimizers run on the same problems;
//! * [`stats`] aggregates trajectories into benchmark statistics.

pub mod baselines;
pub mod error;
pub mod metaopt;
pub mod objective;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod trainer;
pub mod trajectory;

pub use error::{CoreError, Result};
