// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod kernel;
pub mod quadrature;
pub mod laplace;
pub mod probe;
pub mod filter;
pub mod splitting;
pub mod recursive;
pub mod problems;
pub mod harness;
