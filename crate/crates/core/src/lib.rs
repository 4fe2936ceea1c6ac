//! Hard instances, K-parallel oracles, baseline methods, and audits for
//! round-complexity lower bounds of parallel convex optimization over `l_p`
//! balls.

pub mod audit;
pub mod error;
pub mod geometry;
pub mod instance;
pub mod smoothing;
pub mod algorithms;
pub mod oracle;
