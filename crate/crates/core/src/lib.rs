//! Core library for probabilistic target search and tracking in unknown
//! 2-D environments.
//!
//! The crate is organized around the planning pipeline:
//!
//! * [`env`] — occupancy grids, raycasting, field-of-view tests, and
//!   simulated lidar mapping of an initially unknown map.
//! * [`models`] — unicycle robot dynamics, the random-walk target model,
//!   and the intermittent range-bearing observation model.
//! * [`belief`] — weighted-particle representation of the target belief
//!   with predict/update/resample steps.
//! * [`mi`] — mutual-information reward between the predicted belief and
//!   the next measurement, approximated with per-component sigma points,
//!   plus a Monte Carlo oracle and diagnostics.
//! * [`hierarchy`] — three-layer particle abstraction: coarse-grid
//!   clustering, obstacle-aware goal selection, critical-particle
//!   extraction, and fine-grid simplification.
//! * [`planner`] — belief tree search with UCB selection, progressive
//!   widening over observations, and rollout recycling.

pub mod belief;
pub mod env;
pub mod geom;
pub mod hierarchy;
pub mod mi;
pub mod models;
pub mod planner;
