//! State-space transforms: the Zvonkin map that removes the irregular drift
//! part, and the Lamperti map that reduces a general scalar SDE to additive
//! noise.

mod lamperti;
mod zvonkin;

pub use lamperti::{lamperti_reduce, LampertiReduction};
pub use zvonkin::{build_zvonkin, ZvonkinTransform, DEFAULT_KNOT_SPACING, TABLE_MARGIN};
