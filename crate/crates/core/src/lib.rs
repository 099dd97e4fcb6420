pub mod backends;
pub mod dsl;
pub mod executor;
pub mod geometry;
pub mod guidance;
pub mod inversion;
pub mod planner;
pub mod service;
