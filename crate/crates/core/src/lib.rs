//! Andrews-Curtis move calculus, handle structures of group presentations,
//! an invariant-level model of the topology operations that moves compile
//! to, and a restricted recognizer for sphere-like presentations.

pub mod compiler;
pub mod handles;
pub mod homology;
pub mod moves;
pub mod recognizer;
pub mod ribbon;
pub mod search;
pub mod topology;
pub mod words;

pub use homology::{abelianization_matrix, smith_normal_form, HomologyError, Matrix, Scalar, SmithForm};
pub use words::{cyclic_reduce, free_reduce, parse_presentation, Letter, ParseError, Presentation, Sign, Word};

/// Exponent-sum matrices with arbitrary-precision entries.
pub type IntegerMatrix = Matrix<num_bigint::BigInt>;
pub type IntegerSmithForm = SmithForm<num_bigint::BigInt>;
