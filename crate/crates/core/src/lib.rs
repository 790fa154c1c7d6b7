//! Regional simulator for the spread of agropastoralism.
//!
//! Local populations carry three adaptive traits (technology, the share of
//! agropastoral activity and the realized fraction of potential economies)
//! that climb the gradient of their relative growth rate. Regions are
//! clustered from a climate raster, coupled through influence-driven trade
//! and migration fluxes, and integrated forward in time. An analysis layer
//! turns the simulated transition times into lag–distance statistics,
//! broadened timing histograms and immigrant-fraction maps.
//!
//! Module map:
//!
//! - [`climate`]: Miami NPP, temperature limitation, food extraction and
//!   agropastoral-economy potentials, anomaly time slices.
//! - [`mesh`]: cellular-automaton regionalization of the grid and the region
//!   adjacency graph.
//! - [`dynamics`]: subsistence intensity, growth rate, fitness gradients and
//!   trait rates.
//! - [`exchange`]: influence fluxes, cultural and demic diffusion, source
//!   attribution.
//! - [`engine`]: forward-Euler integration, scenarios and transition
//!   detection.
//! - [`analysis`]: great-circle distances, lag–distance regression, timing
//!   broadening, focus histograms and immigrant maps.
//! - [`pipeline`]: raster to regions to simulation to statistics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod climate;
pub mod config;
pub mod dynamics;
pub mod engine;
mod error;
pub mod exchange;
pub mod io;
pub mod mesh;
pub mod pipeline;
pub mod svg;
pub mod synthetic;

pub use error::{Error, Result};

/// Mean Earth radius used for every spherical computation, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
