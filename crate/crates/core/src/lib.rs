//! Core numerics for comparing multilayer perceptrons that carry one learnable
//! SiLU slope per hidden neuron against Kolmogorov-Arnold networks whose edges
//! carry `w_b * SiLU(x) + w_s * spline(x)` activations.
//!
//! Everything in this crate is `no_std` + `alloc`: dense matrices, seeded
//! random streams, B-spline bases, activations with analytic gradients,
//! networks with reverse-mode backward passes, losses and optimizers, and the
//! in-memory half of the data pipeline (synthetic generators, stratified
//! splits, standardization). File IO, result export and the benchmark runner
//! live in the `kanbench` crate.
//!
//! ```
//! use kanbench_core::network::{HeadKind, Network, NetworkSpec};
//! use kanbench_core::numerics::RngStream;
//!
//! let spec = NetworkSpec::mlp(7, vec![2, 2, 2], HeadKind::Softmax { classes: 3 });
//! let net = Network::init(&spec, &mut RngStream::derive(0, 0)).unwrap();
//! assert_eq!(net.param_count(), 43);
//! ```
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod activations;
pub mod bspline;
pub mod data;
pub mod error;
pub mod network;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
