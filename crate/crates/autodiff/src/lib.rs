//! Minimal dense-tensor numerical core with reverse-mode automatic
//! differentiation.
//!
//! Values are `f64` everywhere. A forward pass is recorded on a [`Tape`];
//! parameters live in a [`ParamStore`] outside the tape so a single store can
//! be shared by many tapes (one per worker). After [`Tape::backward`] the
//! resulting [`Gradients`] are accumulated into the store, and [`Adam`] applies
//! a bias-corrected update. Gradients accumulate until
//! [`ParamStore::zero_grad`] is called.
//!
//! ```
//! use mpe_autodiff::{ParamStore, Tape, Tensor};
//!
//! let mut store = ParamStore::new();
//! let w = store.add("w", Tensor::vector(vec![1.0, 2.0]), true).unwrap();
//!
//! let mut tape = Tape::new();
//! let x = tape.constant(Tensor::vector(vec![3.0, 4.0]));
//! let wv = tape.param(&store, w);
//! let prod = tape.mul(wv, x).unwrap();
//! let loss = tape.sum(prod);
//! tape.backward(loss).unwrap().accumulate(&mut store);
//!
//! assert_eq!(tape.value(loss).item(), 11.0);
//! assert_eq!(store.grad(w).unwrap().data(), &[3.0, 4.0]);
//! ```

mod adam;
mod checkpoint;
mod error;
mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use error::{Error, Result};
pub use gradcheck::{grad_check, relative_error, GradCheckConfig, GradCheckReport, ParamCheck, REL_ERROR_FLOOR};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{BackwardFn, Gradients, Tape, Var};
pub use tensor::Tensor;
