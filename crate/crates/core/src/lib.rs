pub mod base;
pub mod opt;
pub mod structure;
pub mod linalg;

pub use linalg::{Complex64, ComplexMatrix, LeveledElement};
