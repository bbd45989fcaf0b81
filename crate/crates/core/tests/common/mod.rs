//! Independent oracles and fixtures shared by integration tests. The oracles
//! never call into the solver paths they are used to check.
#![allow(dead_code)]

pub mod grid_search;
pub mod learning;
pub mod sweep;
pub mod systems;
