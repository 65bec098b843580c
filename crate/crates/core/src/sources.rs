//! Random sources: correlated Gaussian pairs and the Brownian sensor field.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::stream_rng;

/// Jointly Gaussian `(X, Y)` with iid components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPairSpec {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub n: usize,
}

impl GaussianPairSpec {
    pub fn new(sigma_x: f64, sigma_y: f64, rho: f64, n: usize) -> Result<Self> {
        if !(sigma_x > 0.0 && sigma_x.is_finite() && sigma_y > 0.0 && sigma_y.is_finite()) {
            return Err(Error::input("standard deviations must be positive and finite"));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::input(format!("correlation must lie in (-1, 1), got {rho}")));
        }
        if n == 0 {
            return Err(Error::input("dimension must be positive"));
        }
        Ok(Self {
            sigma_x,
            sigma_y,
            rho,
            n,
        })
    }

    /// Covariance `[[σX², ρσXσY], [ρσXσY, σY²]]`.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let c = self.rho * self.sigma_x * self.sigma_y;
        [[self.sigma_x * self.sigma_x, c], [c, self.sigma_y * self.sigma_y]]
    }
}

/// One draw of `(x, y)`: `y = ρ(σY/σX)x + σY√(1−ρ²)w`.
pub fn sample_pair<R: Rng + ?Sized>(spec: &GaussianPairSpec, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    let gain = spec.rho * spec.sigma_y / spec.sigma_x;
    let noise = spec.sigma_y * (1.0 - spec.rho * spec.rho).sqrt();
    for _ in 0..spec.n {
        let xi = spec.sigma_x * rng.sample::<f64, _>(StandardNormal);
        let w: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(gain * xi + noise * w);
    }
    (x, y)
}

/// `n` iid `N(0, σ²)` components.
pub fn sample_gaussian<R: Rng + ?Sized>(sigma: f64, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Samples of a Wiener process in space at `u = m/n`, one independent path
/// per time slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianField {
    n: usize,
    sigma: f64,
    slots: usize,
    /// Row `k` holds `X_{1/n}(k), …, X_{n/n}(k)`.
    samples: Vec<f64>,
}

/// Cumulative sums of iid `N(0, σ²/n)` increments; slot `k` uses substream
/// `k` of `seed`.
pub fn gen_brownian_field(n: usize, sigma: f64, slots: usize, seed: u64) -> Result<BrownianField> {
    if n == 0 || slots == 0 {
        return Err(Error::input("need n ≥ 1 and at least one slot"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::input("σ must be positive"));
    }
    let step = sigma / (n as f64).sqrt();
    let mut samples = vec![0.0; n * slots];
    samples.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
        let mut rng = stream_rng(seed, k as u64);
        let mut acc = 0.0;
        for v in row.iter_mut() {
            acc += step * rng.sample::<f64, _>(StandardNormal);
            *v = acc;
        }
    });
    Ok(BrownianField {
        n,
        sigma,
        slots,
        samples,
    })
}

impl BrownianField {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// `X_{m/n}(k)` for `m` in `1..=n`; `m = 0` is the pinned origin.
    pub fn value(&self, slot: usize, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.samples[slot * self.n + m - 1]
        }
    }

    /// Node `m`'s block over all slots.
    pub fn node_series(&self, m: usize) -> Vec<f64> {
        (0..self.slots).map(|k| self.value(k, m)).collect()
    }

    pub fn slot(&self, k: usize) -> &[f64] {
        &self.samples[k * self.n..(k + 1) * self.n]
    }

    /// CSV with columns `slot,m,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "slot,m,value")?;
        for k in 0..self.slots {
            for m in 1..=self.n {
                writeln!(out, "{k},{m},{:e}", self.value(k, m))?;
            }
        }
        Ok(())
    }
}

/// A draw of the Brownian bridge at fraction `t ∈ [0,1]` of a step with
/// endpoint values `a`, `b` and step variance `step_var`.
pub fn bridge_sample<R: Rng + ?Sized>(a: f64, b: f64, t: f64, step_var: f64, rng: &mut R) -> f64 {
    let mean = a + t * (b - a);
    let sd = (step_var * t * (1.0 - t)).sqrt();
    mean + sd * rng.sample::<f64, _>(StandardNormal)
}
