pub mod algebra;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod propagate;
pub mod rng;
pub mod synth;
