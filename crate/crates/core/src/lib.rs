//! Zero-forcing and QR-based dirty paper coding (DPC) for near-field
//! multiuser MISO downlinks.
//!
//! The crate models a uniform planar array serving single-antenna users
//! through a line-of-sight spherical-wave channel, solves the sum-rate
//! optimal power allocations for ZF and DPC precoding, and drives the
//! rate-region, contour and gain-profile experiments that compare the two.
//!
//! Lengths are expressed in wavelengths unless a function says otherwise,
//! and powers are normalised to the receiver noise variance.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod dpc;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod region;
pub mod waterfill;
pub mod zf;

pub use channel::{build_channel, channel_coefficient, channel_gram, ChannelMatrix, ScenarioConfig};
pub use dpc::{
    best_order_exhaustive, best_order_greedy, decompose, dpc_sum_rate, DpcDecomposition, DpcSolution, EncodingOrder,
};
pub use error::{Error, Result};
pub use geometry::{build_array, build_users, far_field_boundary, ArrayConfig, Position, UserLayout};
pub use region::{area_improvement, dpc_region, region_union, zf_region, RatePoint, RateRegion};
pub use waterfill::{solve_waterfill, PowerAllocation, WaterfillProblem};
pub use zf::{build_zf, zf_sum_rate, ZfPrecoder};

pub use num_complex::Complex64;
