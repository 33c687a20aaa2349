//! Rank-3 value grid with a matching gradient grid.
//!
//! Every signal and activation is a `depth × 1 × height` block. The width of
//! one is implicit. Values are stored channel-major: channel `c` occupies
//! `values[c * height..(c + 1) * height]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{length_err, shape_err, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    depth: usize,
    height: usize,
    values: Vec<f64>,
    grad: Vec<f64>,
}

impl Tensor {
    /// All-zero tensor. Panics if either dimension is zero.
    pub fn zeros(depth: usize, height: usize) -> Self {
        assert!(
            depth > 0 && height > 0,
            "tensor dimensions must be positive"
        );
        Tensor {
            depth,
            height,
            values: vec![0.0; depth * height],
            grad: vec![0.0; depth * height],
        }
    }

    pub fn from_values(depth: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if depth == 0 || height == 0 {
            return Err(length_err!(
                "tensor dimensions must be positive, got {depth}x{height}"
            ));
        }
        if values.len() != depth * height {
            return Err(shape_err!(
                "{} values cannot fill a {depth}x{height} tensor",
                values.len()
            ));
        }
        let grad = vec![0.0; values.len()];
        Ok(Tensor {
            depth,
            height,
            values,
            grad,
        })
    }

    /// Builds a tensor from equally long channels.
    pub fn from_channels(channels: &[&[f64]]) -> Result<Self> {
        let height = channels.first().map_or(0, |c| c.len());
        if channels.iter().any(|c| c.len() != height) {
            return Err(shape_err!("channels have differing lengths"));
        }
        let values = channels.iter().flat_map(|c| c.iter().copied()).collect();
        Self::from_values(channels.len(), height, values)
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.depth, self.height)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    #[inline]
    pub fn grad_mut(&mut self) -> &mut [f64] {
        &mut self.grad
    }

    /// Simultaneous access to values (read) and gradient (write).
    #[inline]
    pub fn split_mut(&mut self) -> (&[f64], &mut [f64]) {
        (&self.values, &mut self.grad)
    }

    #[inline]
    pub fn get(&self, channel: usize, index: usize) -> f64 {
        self.values[channel * self.height + index]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, index: usize, value: f64) {
        self.values[channel * self.height + index] = value;
    }

    #[inline]
    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.values[channel * self.height..(channel + 1) * self.height]
    }

    #[inline]
    pub fn channel_mut(&mut self, channel: usize) -> &mut [f64] {
        &mut self.values[channel * self.height..(channel + 1) * self.height]
    }

    #[inline]
    pub fn grad_channel(&self, channel: usize) -> &[f64] {
        &self.grad[channel * self.height..(channel + 1) * self.height]
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Contiguous block of rows `start..start + len` (values only, fresh gradient).
    pub fn slice_height(&self, start: usize, len: usize) -> Result<Tensor> {
        if len == 0 || start + len > self.height {
            return Err(length_err!(
                "slice {start}..{} outside height {}",
                start + len,
                self.height
            ));
        }
        let mut values = Vec::with_capacity(self.depth * len);
        for c in 0..self.depth {
            values.extend_from_slice(&self.channel(c)[start..start + len]);
        }
        Tensor::from_values(self.depth, len, values)
    }

    /// Stacks the given channels of `self` into a new tensor.
    pub fn select_channels(&self, channels: &[usize]) -> Result<Tensor> {
        if let Some(&bad) = channels.iter().find(|&&c| c >= self.depth) {
            return Err(shape_err!(
                "channel {bad} out of range for depth {}",
                self.depth
            ));
        }
        let mut values = Vec::with_capacity(channels.len() * self.height);
        for &c in channels {
            values.extend_from_slice(self.channel(c));
        }
        Tensor::from_values(channels.len(), self.height, values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Tensor {
            depth: self.depth,
            height: self.height,
            grad: vec![0.0; self.values.len()],
            values,
        }
    }

    pub(crate) fn ensure_same_shape(&self, other: &Tensor, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape_err!(
                "{what}: {}x{} vs {}x{}",
                self.depth,
                self.height,
                other.depth,
                other.height
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_major_layout() {
        let t = Tensor::from_channels(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(t.get(2, 1), 6.0);
        assert_eq!(t.grad().len(), t.values().len());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::from_values(2, 2, vec![0.0; 3]).is_err());
        assert!(Tensor::from_values(0, 2, vec![]).is_err());
        assert!(Tensor::from_channels(&[&[1.0], &[1.0, 2.0]]).is_err());
    }

    #[test]
    fn slice_keeps_every_channel() {
        let t = Tensor::from_channels(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        let s = t.slice_height(1, 2).unwrap();
        assert_eq!(s.values(), &[2.0, 3.0, 5.0, 6.0]);
        assert!(t.slice_height(2, 2).is_err());
    }
}
