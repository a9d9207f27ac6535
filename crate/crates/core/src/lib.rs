//! Hierarchical graph embeddings for cold-start item recommendation.
//!
//! Item embeddings of a matrix-factorisation model are refined by one layer
//! per level of an item category tree. Each layer attends over the members of
//! a category and adds the resulting category vector back to every member, so
//! a cold item with a handful of interactions inherits the signal of its
//! siblings.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
