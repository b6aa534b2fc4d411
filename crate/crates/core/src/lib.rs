pub mod env;
pub mod geometry;
pub mod perception;
pub mod region;
pub mod mb;
pub mod sac;
pub mod agent;
pub mod harness;
pub mod verify;
