//! Orthonormal Legendre bases on [-1, 1]^d.
//!
//! Everything here uses the probability-normalized convention: basis functions
//! are orthonormal against the uniform density (1/2 per dimension) and
//! quadrature weights sum to one, so expansion coefficients are expectations.

mod legendre;
mod multi_index;
mod quadrature;
mod triple;

pub use legendre::{legendre, orthonormal_legendre, orthonormal_legendre_all};
pub use multi_index::{index_count, multi_index_set, tensor_basis_eval, IndexSet, MultiIndex};
pub use quadrature::{gauss_legendre, QuadratureRule, TensorGrid};
pub use triple::{triple_products, TripleProductTensor};
