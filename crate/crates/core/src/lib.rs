//! Exit, transit and return-time statistics for volume-preserving maps.

pub mod analytic;
pub mod csvio;
pub mod error;
pub mod maps;
pub mod quadrature;
pub mod region;
pub mod resonance;
pub mod sampling;
pub mod stats;
pub mod transit;

pub use error::{Error, Result};
pub use maps::{PhasePoint, VolumeMap};
pub use region::Region;
pub use transit::{TimeValue, TransitDecomposition};
