//! Multi-stage stochastic bidding of an energy community in the day-ahead,
//! secondary reserve and intraday electricity markets.
//!
//! The pipeline runs: historical data ([`history`]) → bootstrap fan ([`fan`])
//! → forward-selection tree ([`reduction`]) → MILP ([`model`]) → solver
//! ([`solver`]) → bids and reports ([`bids`], [`report`]).

pub mod bids;
pub mod config;
pub mod error;
pub mod fan;
pub mod history;
pub mod instances;
pub mod model;
pub mod pipeline;
pub mod reduction;
pub mod renewables;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod synthetic;
pub mod schedule;
pub mod tree;

pub use error::{Error, Result};
