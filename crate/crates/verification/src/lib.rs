//! Studies that exercise the `dslad` tape end to end.
//!
//! * [`burgers`]: gradient of an explicit upwind solver for the coupled
//!   Burgers equations, checked against finite differences.
//! * [`spline`]: bicubic interpolation recorded per component and as 4-lane
//!   pack statements.
//! * [`solve`]: a linear solve recorded element by element and as a single
//!   DSL statement.
//!
//! Every study produces a [`report::Report`]; the `bench` binary prints
//! them as JSON or CSV.

pub mod burgers;
pub mod report;
pub mod solve;
pub mod spline;
