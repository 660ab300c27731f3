//! Dense ReLU networks with exact gradients, Hessian-vector products,
//! Adam, and the parameter-space algebra used by target networks and
//! meta-learning.

mod adam;
mod params;
pub mod serialize;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use params::{blend, sgd_step, ForwardCache, Head, Layer, ParamSet, RBackward, RCache};

/// Hidden widths used for quick experiments.
pub const DESK_HIDDEN: [usize; 3] = [64, 32, 16];
/// Hidden widths of the full-size networks.
pub const FULL_HIDDEN: [usize; 3] = [500, 250, 120];

/// `input -> hidden... -> output` layer sizes.
pub fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = Vec::with_capacity(hidden.len() + 2);
    s.push(input);
    s.extend_from_slice(hidden);
    s.push(output);
    s
}
