//! Stokes geometry, formal invariants and Stokes data of meromorphic
//! connections on a punctured disc.

pub mod cli;
pub mod expr;
pub mod factors;
pub mod formal;
pub mod geometry;
pub mod integrator;
pub mod laurent;
pub mod linalg;
pub mod numstokes;
pub mod rational;
pub mod sheafmodel;
pub mod stokesdata;
