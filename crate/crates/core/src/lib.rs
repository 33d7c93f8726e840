//! Marginal utility-based prices, their first-order sensitivities and the
//! risk-tolerance wealth process in finite-state incomplete markets.
//!
//! Everything in this crate is a pure function of its inputs. The crate is
//! `no_std` and only needs an allocator; file formats, reports, the command
//! line and parallel drivers live in the `utilprice` companion crate.
//!
//! The main pipeline is
//!
//! 1. build a [`FiniteMarket`] (directly, from a [`TreeModel`] via
//!    [`reduce_tree`], or with [`random::random_market`]),
//! 2. solve the optimal investment problem with [`solver::solve_primal`],
//! 3. run [`sensitivity::analyze`] to obtain the second-order structure
//!    (`G`, `H`), the derivative processes and the sensitivity parameters
//!    `p'(x)` and `D(x)`,
//! 4. inspect the risk-tolerance wealth process with
//!    [`risk_tolerance::rt_exists`] and friends.
#![cfg_attr(not(test), no_std)]
// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod basis_risk;
pub mod error;
pub mod expansions;
pub mod linalg;
pub mod lp;
pub mod market;
pub mod random;
pub mod risk_tolerance;
pub mod sensitivity;
pub mod solver;
pub mod ssd;
pub mod utility;

pub use error::{Error, Result};
pub use market::{reduce_tree, FiniteMarket, TreeModel, TreeNode};
pub use utility::Utility;

/// Re-exported so downstream crates can name matrix types without a direct
/// nalgebra dependency.
pub use nalgebra::{DMatrix, DVector};
