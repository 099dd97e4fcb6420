use std::fmt::{Debug, Display};

use ndarray::{Array1, Array2, Array4, ScalarOperand, Zip};
use num_traits::{Float, FromPrimitive, ToPrimitive};

use super::GuidanceError;

/// Scalar type of the numeric core: `f32` in normal use, `f64` as the oracle mode.
pub trait Real: Float + FromPrimitive + ToPrimitive + ScalarOperand + Default + Debug + Display + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Rank-4 (N, C, H, W) array of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseTensor<T: Real = f32> {
    data: Array4<T>,
}

impl<T: Real> NoiseTensor<T> {
    pub fn from_array(data: Array4<T>) -> Result<Self, GuidanceError> {
        if data.shape().contains(&0) {
            return Err(GuidanceError::InvalidShape(format!("{:?}", data.shape())));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(GuidanceError::NonFinite);
        }
        Ok(Self { data })
    }

    pub fn from_vec(shape: (usize, usize, usize, usize), values: Vec<T>) -> Result<Self, GuidanceError> {
        let len = values.len();
        let data = Array4::from_shape_vec(shape, values)
            .map_err(|_| GuidanceError::InvalidShape(format!("{shape:?} with {len} values")))?;
        Self::from_array(data)
    }

    pub fn filled(shape: (usize, usize, usize, usize), value: T) -> Result<Self, GuidanceError> {
        Self::from_array(Array4::from_elem(shape, value))
    }

    pub fn zeros(shape: (usize, usize, usize, usize)) -> Result<Self, GuidanceError> {
        Self::filled(shape, T::zero())
    }

    /// Wrap without the finiteness scan; callers check results themselves.
    pub(crate) fn from_array_unchecked(data: Array4<T>) -> Self {
        Self { data }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn array(&self) -> &Array4<T> {
        &self.data
    }

    pub fn into_array(self) -> Array4<T> {
        self.data
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.data.iter().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> NoiseTensor<U> {
        NoiseTensor { data: self.data.mapv(|v| U::from(v).expect("float cast")) }
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<(), GuidanceError> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(GuidanceError::ShapeMismatch { left: self.shape(), right: other.shape() })
        }
    }

    /// Root-mean-square of the elementwise difference.
    pub fn rms_diff(&self, other: &Self) -> Result<T, GuidanceError> {
        self.ensure_same_shape(other)?;
        let mut acc = T::zero();
        Zip::from(&self.data).and(&other.data).for_each(|&a, &b| acc = acc + (a - b) * (a - b));
        Ok((acc / T::from_usize(self.len()).unwrap()).sqrt())
    }

    /// Sum of squared elementwise differences.
    pub fn sq_dist(&self, other: &Self) -> Result<T, GuidanceError> {
        self.ensure_same_shape(other)?;
        let mut acc = T::zero();
        Zip::from(&self.data).and(&other.data).for_each(|&a, &b| acc = acc + (a - b) * (a - b));
        Ok(acc)
    }
}

/// 1×1 convolution: `weight` is C_out × C_in, `bias` has C_out entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T: Real = f32> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> ConvParams<T> {
    pub fn identity(channels: usize) -> Self {
        Self { weight: Array2::eye(channels), bias: Array1::zeros(channels) }
    }

    pub fn new(weight: Array2<T>, bias: Array1<T>) -> Result<Self, GuidanceError> {
        let (r, c) = weight.dim();
        if r != c || bias.len() != r {
            return Err(GuidanceError::DimensionMismatch(format!(
                "conv weight {r}x{c} with bias of {}",
                bias.len()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn channels(&self) -> usize {
        self.bias.len()
    }

    /// Flattened as weight (row-major) followed by bias.
    pub fn to_flat(&self) -> Vec<T> {
        self.weight.iter().chain(self.bias.iter()).copied().collect()
    }

    pub fn from_flat(channels: usize, flat: &[T]) -> Result<Self, GuidanceError> {
        let need = channels * channels + channels;
        if flat.len() != need {
            return Err(GuidanceError::DimensionMismatch(format!("expected {need} conv values, got {}", flat.len())));
        }
        let weight = Array2::from_shape_vec((channels, channels), flat[..channels * channels].to_vec())
            .expect("length checked");
        let bias = Array1::from(flat[channels * channels..].to_vec());
        Ok(Self { weight, bias })
    }

    pub fn cast<U: Real>(&self) -> ConvParams<U> {
        ConvParams {
            weight: self.weight.mapv(|v| U::from(v).expect("float cast")),
            bias: self.bias.mapv(|v| U::from(v).expect("float cast")),
        }
    }
}

/// Per-(n, c) mean and std over the spatial dims.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats<T: Real = f32> {
    pub mean: Array2<T>,
    pub std: Array2<T>,
}
