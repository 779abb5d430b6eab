//! Exact-arithmetic toolkit for finitely supported measures on ω ∪ {PF},
//! density submeasures, their exhaustive ideals and Katětov reductions.

pub mod asymptotic;
pub mod blocks;
pub mod bound;
pub mod classify;
pub mod disjoint;
pub mod error;
pub mod expr;
pub mod extract;
pub mod ideal;
pub mod katetov;
pub mod lp;
pub mod measure;
pub mod rational;
pub mod sampling;
pub mod sequences;
pub mod setspec;
pub mod submeasure;

pub use error::{Error, Result};
pub use measure::{FinMeasure, NonNegMeasure, Point};
pub use rational::Q;
