//! Small numeric helpers shared by the encoder and the linker.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;
pub type Vector = Array1<f64>;

/// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn fan_in_uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Matrix {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Matrix::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..=bound))
}

pub fn normal_like<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    // Sum of uniforms; keeps the dependency list short and is plenty for init.
    Matrix::from_shape_fn((rows, cols), |_| {
        let s: f64 = (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum();
        s * scale * (3.0f64 / 4.0).sqrt()
    })
}

pub fn ensure_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy computed from a logit: `-(y ln σ(x) + (1-y) ln(1-σ(x)))`.
pub fn bce_with_logit(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}
