//! Latent and video tensors: small row-major (frames x dims) blocks of f64.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The state `z_t` at a diffusion timestep: `frames` rows of `dim` reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    frames: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Latent {
    pub fn zeros(frames: usize, dim: usize) -> Self {
        Latent {
            frames,
            dim,
            data: vec![0.0; frames * dim],
        }
    }

    pub fn from_vec(frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * dim {
            return Err(Error::invalid(format!(
                "latent payload has {} entries, expected {}x{}",
                data.len(),
                frames,
                dim
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("latent entries must be finite"));
        }
        Ok(Latent { frames, dim, data })
    }

    /// Standard-normal latent drawn from `rng`, row-major order.
    pub fn standard_normal<R: Rng + ?Sized>(frames: usize, dim: usize, rng: &mut R) -> Self {
        let data = (0..frames * dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Latent { frames, dim, data }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frame(&self, f: usize) -> &[f64] {
        &self.data[f * self.dim..(f + 1) * self.dim]
    }

    pub fn same_shape(&self, other: &Latent) -> bool {
        self.frames == other.frames && self.dim == other.dim
    }

    /// `self + c * other`, shapes must match.
    pub fn axpy(&self, c: f64, other: &Latent) -> Latent {
        debug_assert!(self.same_shape(other));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + c * b)
            .collect();
        Latent {
            frames: self.frames,
            dim: self.dim,
            data,
        }
    }

    pub fn scale(&self, c: f64) -> Latent {
        Latent {
            frames: self.frames,
            dim: self.dim,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Latent) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entry-wise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Latent) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A decoded toy "video": the same (frames x dims) layout in decoded space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Video {
    frames: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Video {
    pub fn from_vec(frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * dim {
            return Err(Error::invalid(format!(
                "video payload has {} entries, expected {}x{}",
                data.len(),
                frames,
                dim
            )));
        }
        Ok(Video { frames, dim, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, f: usize) -> &[f64] {
        &self.data[f * self.dim..(f + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_shape() {
        assert!(Latent::from_vec(2, 3, vec![0.0; 5]).is_err());
        assert!(Latent::from_vec(2, 3, vec![f64::NAN; 6]).is_err());
    }

    #[test]
    fn axpy_and_scale() {
        let a = Latent::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let b = Latent::from_vec(1, 2, vec![10.0, 20.0]).unwrap();
        let c = a.axpy(0.5, &b);
        assert_eq!(c.as_slice(), &[6.0, 12.0]);
        assert_eq!(a.scale(3.0).as_slice(), &[3.0, 6.0]);
    }
}
