//! A small reverse-mode engine for the selective-removal U-Net.
//!
//! Tensors are `(batch, channels, height, width)` in row-major order. The
//! network topology is fixed (see [`model`]); every forward pass records a
//! tape of operations that [`model::Network::backward`] replays in reverse.

pub mod adam;
pub mod gradcheck;
pub mod io;
pub mod model;
pub mod ops;
pub mod train;

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{AdamConfig, DEFAULT_LEARNING_RATE};
pub use gradcheck::{check_gradients, standard_check, GradCheckReport};
pub use io::{load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use model::{Gradients, LayerKind, Network};
pub use train::{predict, train, EpochRow, TrainOptions, TrainReport};

/// Scalar type the engine can run in.
pub trait Real: Float + FromPrimitive + ToPrimitive + AddAssign + MulAssign + Default + Debug + Send + Sync + 'static {
    /// `c = a · b + beta · c` on row-major buffers with explicit strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }
}

// SAFETY (both impls): callers pass slices whose extents cover every
// (row, col) reachable through the given dimensions and strides; `ops`
// checks this with debug assertions before each call.
impl Real for f32 {
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        rsa: isize,
        csa: isize,
        b: &[f32],
        rsb: isize,
        csb: isize,
        beta: f32,
        c: &mut [f32],
        rsc: isize,
        csc: isize,
    ) {
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc,
            )
        }
    }
}

impl Real for f64 {
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        rsa: isize,
        csa: isize,
        b: &[f64],
        rsb: isize,
        csb: isize,
        beta: f64,
        c: &mut [f64],
        rsc: isize,
        csc: isize,
    ) {
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc,
            )
        }
    }
}

/// Dense 4-D tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    pub data: Vec<T>,
    pub dims: [usize; 4],
}

impl<T: Real> Tensor4<T> {
    pub fn new(data: Vec<T>, dims: [usize; 4]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("tensor dims must be positive, got {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "tensor data has {} elements, dims {dims:?} need {len}",
                data.len()
            )));
        }
        Ok(Tensor4 { data, dims })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Tensor4 {
            data: vec![T::zero(); dims.iter().product()],
            dims,
        }
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn item(&self, b: usize) -> &[T] {
        let len = self.item_len();
        &self.data[b * len..(b + 1) * len]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [T] {
        let len = self.item_len();
        &mut self.data[b * len..(b + 1) * len]
    }

    pub fn cast<U: Real>(&self) -> Tensor4<U> {
        Tensor4 {
            data: self.data.iter().map(|&x| U::of(x.to_f64().unwrap_or(f64::NAN))).collect(),
            dims: self.dims,
        }
    }
}

/// How the head maps its single channel into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Sigmoid,
    Clamp,
}

impl OutputActivation {
    pub fn id(self) -> u8 {
        match self {
            OutputActivation::Sigmoid => 0,
            OutputActivation::Clamp => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(OutputActivation::Sigmoid),
            1 => Some(OutputActivation::Clamp),
            _ => None,
        }
    }
}

/// Network topology and input geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub levels: usize,
    pub base_channels: usize,
    pub rows: usize,
    pub width: usize,
    pub output_activation: OutputActivation,
}

impl NetConfig {
    /// 32 × 1024 input, 16 base channels.
    pub fn full() -> Self {
        NetConfig {
            levels: 3,
            base_channels: 16,
            rows: 32,
            width: 1024,
            output_activation: OutputActivation::Sigmoid,
        }
    }

    /// 16 × 256 input, 8 base channels.
    pub fn toy() -> Self {
        NetConfig {
            levels: 3,
            base_channels: 8,
            rows: 16,
            width: 256,
            output_activation: OutputActivation::Sigmoid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.base_channels == 0 || self.rows == 0 || self.width == 0 {
            return Err(Error::Config(format!("network dimensions must be positive: {self:?}")));
        }
        let div = 1usize << self.levels;
        if !self.rows.is_multiple_of(div) || !self.width.is_multiple_of(div) {
            return Err(Error::Config(format!(
                "rows {} and width {} must be divisible by 2^levels = {div}",
                self.rows, self.width
            )));
        }
        Ok(())
    }

    /// Channel count at encoder depth `i` (the bottleneck is `i == levels`).
    pub fn channels_at(&self, depth: usize) -> usize {
        self.base_channels << depth
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::full()
    }
}
