pub mod ddpg;
pub mod efsm;
pub mod env;
pub mod error;
pub mod harness;
pub mod reviser;

pub use error::{Error, Result};
