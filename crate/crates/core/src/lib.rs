//! Knowledge-graph semantic compression over a rate-splitting downlink, with
//! joint power, compute and compression-ratio allocation for energy
//! efficiency.

pub mod alloc;
pub mod compress;
pub mod energy;
pub mod harness;
pub mod kg;
pub mod phy;
