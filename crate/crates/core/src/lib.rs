pub mod attest;
pub mod codec;
pub mod counters;
pub mod crypto;
pub mod en;
pub mod fesr;
pub mod func;
pub mod heatmap;
pub mod ids;
pub mod rng;
pub mod setups;
pub mod sim;
pub mod steel;
pub mod world;
