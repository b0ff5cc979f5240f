//! Syntax-guided self-attention at desk scale.
//!
//! * [`conllu`] reads dependency trees,
//! * [`sdoi`] turns them into attention masks,
//! * [`numerics`] is the differentiable `f64` substrate,
//! * [`encoder`] is the transformer stack with the syntax-guided layer,
//! * [`heads`] scores spans, classes and next tokens,
//! * [`harness`] generates synthetic data and drives training runs.

pub mod conllu;
pub mod numerics;
pub mod encoder;
pub mod harness;
pub mod heads;
pub mod sdoi;
