//! Reference computations written without the closed forms under test.

pub mod fw;
pub mod lp;
pub mod rollout;
