pub mod dsp;
pub mod edm;
pub mod error;
pub mod experiment;
pub mod localizer;
pub mod pipeline;
pub mod sim;
pub mod srp;

pub use error::{Error, Result};
