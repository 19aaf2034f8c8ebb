pub mod dyad;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod formulas;
pub mod gate;
pub mod metrics;
pub mod noise;
pub mod oracle;
pub mod protocols;
pub mod qubit;

pub use error::{Error, Result};

/// Library version tagged onto every sweep row.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
