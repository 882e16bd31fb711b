//! Reader community detection and communitized learning-to-rank for recommending
//! open education resources next to passages of scholarly papers.
//!
//! Readers are described by profile features (courses, skills) and behavior
//! features (quote locations and text, questions, comments, ratings, replies).
//! Readers with a profile are clustered with K-medoids; a MaxEnt classifier
//! trained on their behavior assigns the others. Each community gets a linear
//! ranker trained by coordinate ascent over meta-path walk and text features.

pub mod community;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod hetgraph;
pub mod ranker;
pub mod seed;
pub mod simgen;
pub mod text;
pub mod workflow;

pub use error::{Error, Result};
