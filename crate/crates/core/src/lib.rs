//! Signal chain for carried-object detection with a cascaded FMCW
//! TDM-MIMO radar: echo simulation, range-velocity and angle processing,
//! tracking, per-track decisions and metrics.

pub mod classes;
pub mod error;
pub mod preprocess;
pub mod radar;
pub mod sim;
pub mod decision;
pub mod eval;
pub mod formats;
pub mod tracking;
