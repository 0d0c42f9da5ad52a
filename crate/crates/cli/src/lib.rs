//! Scenario-driven front end for `covdyn`: scenario files, run modes and
//! field export.

pub mod export;
pub mod expr;
pub mod run;
pub mod scenario;
