pub mod bell;
pub mod error;
pub mod io;
pub mod monogamy;
pub mod protocol;
pub mod qlinalg;
pub mod sampler;
pub mod tomography;

pub use error::{Error, Result};
