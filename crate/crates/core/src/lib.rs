pub mod geometry;
pub mod harness;
pub mod mappings;
pub mod operators;
pub mod solvers;
