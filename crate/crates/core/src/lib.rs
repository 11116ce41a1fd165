//! Finite-dimensional operator-algebra toolkit for extending unital
//! completely positive maps to amalgamated free products.
//!
//! The crate works with concrete matrix C*-algebras: a family of unital
//! algebras `A_i ⊂ M_{n_i}` sharing a common unital subalgebra `B` through
//! embeddings `ε_i`. Given UCP maps `Φ_i : A_i → B(H)` whose restrictions
//! to `B` agree, it builds an explicit Stinespring-type dilation tower and
//! from it a single UCP map `Φ` on the *-algebraic amalgamated free product
//! with `Φ|_{A_i} = Φ_i`, together with verifiable residuals for every
//! identity the construction promises (restriction, multiplicativity on
//! expectation kernels, complete positivity).
//!
//! Modules mirror the layers of the construction:
//!
//! * [`linalg`] — deterministic dense complex kernel (Hermitian eigen,
//!   rank-revealing orthonormalization, isometry completion).
//! * [`algebra`] — validated matrix C*-algebras, embeddings, canonical
//!   trace-preserving conditional expectations, intertwiner spaces.
//! * [`cpmap`] — UCP maps, Gram–Choi positivity tests, minimal Stinespring
//!   dilations via GNS, reducing-subspace splits, minimal-dilation unitaries.
//! * [`tower`] — the word-indexed family `{H_w, ρ_w, π_{i,w}}` realizing the
//!   recursive dilation of the seed representations, truncated at depth `L`.
//! * [`freeprod`] — formal elements of the *-algebraic free product with
//!   multiplication, adjoint and kernel-centered normal form.
//! * [`extend`] — the assembled extension `Φ = P_H τ(·)|_H`, its evaluator
//!   and the verification suites (product formula, Gram positivity witness).

pub mod algebra;
pub mod cpmap;
pub mod error;
pub mod extend;
pub mod freeprod;
pub mod linalg;
pub mod tol;
pub mod tower;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use tol::TolerancePolicy;
