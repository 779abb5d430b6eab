//! Katětov reductions between ideals on ω.

pub mod density;
pub mod reduction;
pub mod refute;
pub mod successor;
pub mod transport;
pub mod verify;
