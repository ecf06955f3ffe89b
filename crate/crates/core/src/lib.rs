//! Validity of multipartite quantum process matrices and of their tensor
//! products.
//!
//! The crate decides whether an operator is a valid process (positivity,
//! trace normalization and the allowed Hilbert–Schmidt term types), finds
//! explicit witnesses when a tensor product of two valid processes fails to
//! be a process, and cross-checks both decisions with a brute-force
//! probability-normalization oracle over random local channels.
//!
//! Conventions used throughout: matrices are row-major; composite indices are
//! big-endian (leftmost factor most significant); a party contributes its
//! input subsystems and then its output subsystems, parties in declared
//! order.

pub mod error;
pub mod gallery;
pub mod hsbasis;
pub mod io_format;
pub mod linalg;
pub mod oracle;
pub mod process;
pub mod product;

pub use error::{Error, Result};
pub use hsbasis::{decompose, make_basis, reconstruct, HSBasis, HSTerm, TermTolerance};
pub use linalg::{min_eigenvalue, partial_trace, permute_subsystems, tensor, CMatrix, SubsystemShape};
pub use process::{
    classify_term, is_valid_process, reduced_process, signalling_directions, Party, PartyLayout,
    PartyTag, ProcessMatrix, Side, SubParty, SubsystemRef, TermSignature, Tolerances, ValidityReport,
};
pub use product::{
    check_sequence, corollary_check, find_blocking_pairs, tensor_product, PartyPairing, ProductReport,
    SequenceReport,
};

pub use num_complex::Complex64 as C64;
