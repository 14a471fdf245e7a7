//! Floating-point scalar abstraction.
//!
//! All numerical code in this crate is generic over [`Real`], so the same
//! likelihood, belief and acquisition routines run in `f32` or `f64`. The
//! tolerances quoted in tests (1e-10, 1e-12) only hold for `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, panicking only if the value is unrepresentable.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<S: Real>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Logistic function evaluated without overflow for large |x|.
pub fn sigmoid<S: Real>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Softmax of `logits` with max subtraction. Empty input gives an empty vector.
pub fn softmax<S: Real>(logits: &[S]) -> Vec<S> {
    let max = logits
        .iter()
        .copied()
        .fold(S::neg_infinity(), |m, x| if x > m { x } else { m });
    if logits.is_empty() {
        return Vec::new();
    }
    let exps: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy<S: Real>(probs: &[S]) -> S {
    probs
        .iter()
        .filter(|&&p| p > S::zero())
        .map(|&p| -p * p.ln())
        .sum()
}
