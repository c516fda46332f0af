pub mod certify;
pub mod error;
pub mod experiments;
pub mod kdense;
pub mod linalg;
pub mod maxcut;
pub mod recovery;
pub mod rng;
pub mod sampling;
pub mod sdp;

pub use error::{Error, Result};
