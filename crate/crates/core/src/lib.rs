pub mod agent;
pub mod algorithms;
pub mod comms;
pub mod experiments;
pub mod functions;
pub mod graph;
pub mod problem;
pub mod rng;
pub mod solvers;
