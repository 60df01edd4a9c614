pub mod corpus;
pub mod encoder;
pub mod error;
pub mod fsio;
pub mod inference;
pub mod metaeval;
pub mod model;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
