pub mod asymptotics;
pub mod cross_section;
pub mod error;
pub mod oracle;
pub mod potential;
pub mod quadrature;
pub mod threshold;

pub use cross_section::{CrossSection, LinearProfile, TransverseMode};
pub use error::{Error, Result};
