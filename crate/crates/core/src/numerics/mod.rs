//! Dense `f64` matrices, a reverse-mode autodiff tape, Adam, and text
//! checkpoints for parameter sets.

mod adam;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use params::{ParamId, ParamSet};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

/// Additive attention mask: `0` where allowed, `-inf` where blocked.
pub fn mask_from(allowed: impl Fn(usize, usize) -> bool, n: usize) -> Tensor {
    let data = (0..n * n)
        .map(|k| if allowed(k / n, k % n) { 0.0 } else { f64::NEG_INFINITY })
        .collect();
    Tensor::new(n, n, data).expect("square mask")
}
