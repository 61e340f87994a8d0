pub mod error;
pub mod gompertz;
pub mod harness;
pub mod inference;
pub mod kmsurv;
pub mod likelihood;
pub mod linalg;
pub mod model;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod quadrature;
pub mod simulate;

pub use error::{Error, Result};
