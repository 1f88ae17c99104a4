//! Numerical laboratory for weighted Hardy inequalities with non-doubling
//! boundary weights on intervals and radial balls.

pub mod discretization;
pub mod expr;
pub mod hardy;
pub mod quadrature;
pub mod tridiag;
pub mod variational;
pub mod weights;
