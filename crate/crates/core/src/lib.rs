//! Suicide-risk detection from user post histories.

pub mod cattention;
pub mod container;
pub mod corpus;
pub mod doc2vec;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod lexicons;
pub mod postagger;
pub mod resources;
pub mod shallow;
pub mod textprep;

pub use error::{Error, ErrorClass, Result};
