//! Vectors stored as `mantissa · 2^exponent`.
//!
//! Rescaling by a power of two is exact, so moving magnitude between the
//! mantissa and the exponent never changes the represented value.

use std::f64::consts::LN_2;

use ndarray::Array1;

use super::Stabilization;

const BAND: (f64, f64) = (1e-100, 1e100);

/// `x · 2^k` without intermediate overflow for large `|k|`.
pub(crate) fn ldexp(mut x: f64, mut k: i64) -> f64 {
    let big = 2f64.powi(1000);
    let small = 2f64.powi(-1000);
    while k > 1000 {
        x *= big;
        k -= 1000;
    }
    while k < -1000 {
        x *= small;
        k += 1000;
    }
    x * 2f64.powi(k as i32)
}

#[derive(Clone, Debug)]
pub(crate) struct Scaled {
    pub m: Array1<f64>,
    pub e: i64,
}

impl Scaled {
    pub fn new(m: Array1<f64>, e: i64) -> Self {
        Self { m, e }
    }

    /// Moves the magnitude of the largest entry into the exponent when the
    /// mode asks for it.
    pub fn rebalance(mut self, mode: Stabilization) -> Self {
        let top = self.m.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if !(top > 0.0) || !top.is_finite() {
            return self;
        }
        let go = match mode {
            Stabilization::Off => false,
            Stabilization::On => true,
            Stabilization::Auto => top < BAND.0 || top > BAND.1,
        };
        if go {
            let k = top.log2().floor() as i64;
            if k != 0 {
                self.m.mapv_inplace(|x| ldexp(x, -k));
                self.e += k;
            }
        }
        self
    }

    /// `self ⊙ other`.
    pub fn hadamard(&self, other: &Scaled) -> Scaled {
        Scaled::new(&self.m * &other.m, self.e + other.e)
    }

    pub fn ln_at(&self, i: usize) -> f64 {
        self.m[i].ln() + self.e as f64 * LN_2
    }

    pub fn value(&self) -> Array1<f64> {
        self.m.mapv(|x| ldexp(x, self.e))
    }
}
