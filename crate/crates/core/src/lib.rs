pub mod classifiers;
pub mod cli;
pub mod error;
pub mod features;
pub mod ingest;
pub mod rng;
pub mod select;
pub mod sim;
pub mod synth;
