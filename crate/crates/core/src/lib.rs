//! Entry-wise ℓp low-rank approximation by column subset selection.
//!
//! [`css::css_exact`] enumerates column subsets and is within a factor
//! `c_{p,k}` of optimal; [`bicriteria`] and [`rank_reduction`] trade that
//! exactness for polynomial time. [`adversarial`] builds the instances on
//! which the factor is tight, and [`verification`] checks the identities the
//! guarantee rests on.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod bicriteria;
pub mod combinatorics;
pub mod css;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod par;
pub mod rank_reduction;
pub mod regression;
pub mod report;
pub mod verification;

pub use css::{css_exact, CssError, CssResult, Factorization, RatioBound};
pub use matrix::{ColumnSubset, DenseMatrix, MatrixError, PNorm, PNormError, SubsetKind};
pub use par::Exec;
pub use regression::{RegressionConfig, RegressionError, RegressionSolution};
pub use report::ApproxReport;
