pub mod cli;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod learning;
pub mod model;
pub mod objectives;
pub mod operators;
pub mod random;
