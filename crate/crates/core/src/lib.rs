//! Head gesture recognition with a two-layer cascade of discrete hidden
//! Markov models over vector-quantized angular velocity.
//!
//! The simple layer classifies fixed-length windows into seven one-way
//! gestures; the complex layer watches the queue of simple labels for
//! shakes and nods.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod error;
pub mod eval;
pub mod gesture;
pub mod harness;
pub mod hmm;
pub mod seeds;
pub mod training;
pub mod vq;

pub use cascade::{CascadeModel, CascadeState, EventKind, GestureEvent};
pub use error::{Error, Result};
pub use gesture::{Dataset, GestureLabel, MotionSequence};
