//! Periodic sinusoidal implicit neural representations for seamless
//! tileable textures.
//!
//! The crate fits a coordinate network whose first layer holds integer
//! multiples of a base frequency `2*pi/P`, which makes the whole network
//! periodic with period `P`. Training against a Poisson-style gradient
//! matching loss turns a non-tileable texture patch into a seamless tile,
//! and a stack of such networks blended by a continuous level parameter
//! gives anti-aliased multiresolution evaluation.

pub mod baseline;
pub mod cli;
pub mod diffcore;
pub mod mrnet;
pub mod pinr;
pub mod texio;
pub mod torusmap;
pub mod trainer;
