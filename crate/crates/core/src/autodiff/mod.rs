//! Reverse-mode automatic differentiation over dense matrices and sparse
//! value columns.
//!
//! A [`Tape`] records every operation as it is evaluated. Calling
//! [`Tape::backward`] on a `1 x 1` node walks the record in reverse and
//! accumulates adjoints for every node that depends on a parameter.
//!
//! ```
//! use hmge::autodiff::Tape;
//! use ndarray::array;
//!
//! let mut tape = Tape::new();
//! let w = tape.parameter(array![[0.0]], false);
//! let y = tape.sigmoid(w).unwrap();
//! let loss = tape.sum(y).unwrap();
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(w)[[0, 0]], 0.25);
//! ```

mod gradcheck;
mod tape;

pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use tape::{sigmoid, Parameter, Tape, Var};
