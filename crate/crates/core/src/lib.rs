//! Simulation and analysis toolkit for a spherical fingertip sensor that
//! combines embedded barometers with time-of-flight proximity sensing.

pub mod cli;
pub mod collision;
pub mod kinematics;
pub mod numfmt;
pub mod sensor;
pub mod estimator;
pub mod geometry;
pub mod latency;
pub mod mapping;
pub mod reactive;
