//! Exact computation of the obstruction group to divisibility of degree-zero
//! 0-cycles from the combinatorics of a special fiber, together with the
//! degeneration audits used for K3 surfaces.

pub mod arith;
pub mod corpus;
pub mod document;
pub mod fiber;
pub mod groups;
pub mod kulikov;
pub mod linalg;
pub mod obstruction;
pub mod oracle;
pub mod par;
