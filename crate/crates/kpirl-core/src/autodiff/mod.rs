//! Reverse-mode automatic differentiation on an explicit tape, with
//! second-order support via sweeps recorded as ordinary tape nodes.

mod fdcheck;
mod tape;
mod tensor;

pub use fdcheck::check_grad_fd;
pub use tape::{DualValue, NodeId, Tape};
pub use tensor::{BroadcastClass, Tensor};
