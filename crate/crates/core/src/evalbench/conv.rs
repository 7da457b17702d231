use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of one convolution layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStepParams {
    /// Spatial size of the (square) input.
    pub input_dim: u64,
    /// Input channels.
    pub input_depth: u64,
    /// Spatial size of the (square) kernel.
    pub kernel_dim: u64,
    /// Number of kernels, i.e. output channels.
    pub kernel_count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSteps {
    pub traditional: u64,
    pub dwsc: u64,
}

/// Multiply-accumulate step counts of a standard convolution,
/// `N·Di²·Dk²·M`, and of its depthwise separable factorization,
/// `M·Di²·(Dk² + N)`.
pub fn conv_steps(p: ConvStepParams) -> Result<ConvSteps> {
    if p.input_dim == 0 || p.input_depth == 0 || p.kernel_dim == 0 || p.kernel_count == 0 {
        return Err(Error::Config(format!("convolution parameters must be >= 1: {p:?}")));
    }
    let overflow = || Error::Overflow("convolution step count");
    let di2 = p.input_dim.checked_mul(p.input_dim).ok_or_else(overflow)?;
    let dk2 = p.kernel_dim.checked_mul(p.kernel_dim).ok_or_else(overflow)?;
    let traditional = p
        .kernel_count
        .checked_mul(di2)
        .and_then(|v| v.checked_mul(dk2))
        .and_then(|v| v.checked_mul(p.input_depth))
        .ok_or_else(overflow)?;
    let dwsc = dk2
        .checked_add(p.kernel_count)
        .and_then(|v| v.checked_mul(di2))
        .and_then(|v| v.checked_mul(p.input_depth))
        .ok_or_else(overflow)?;
    Ok(ConvSteps { traditional, dwsc })
}
