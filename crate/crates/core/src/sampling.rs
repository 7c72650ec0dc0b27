//! Seeded perturbation directions.
//!
//! # Bit-level contract
//!
//! Every random quantity in the crate is drawn from a [`Stream`], which wraps
//! `ChaCha8Rng` seeded through `SeedableRng::seed_from_u64`. ChaCha output is
//! fixed by its specification, so a stream is reproducible on any platform.
//!
//! * uniform `[0, 1)`: the top 53 bits of `next_u64`, scaled by `2^-53`.
//! * standard normal: Marsaglia's polar method on pairs of uniforms mapped to
//!   `(-1, 1)`; the second variate of each accepted pair is cached and
//!   returned by the next call.
//! * uniform index in `0..n`: Lemire's multiply-shift with rejection.
//!
//! Seeds for individual directions are derived with [`derive_seed`], a chain
//! of SplitMix64 finalizers over `(master, domain, a, b)`. The k-th direction
//! of iteration t therefore never has to be stored: `(seed, tag, dim)` is
//! enough to regenerate it bit for bit.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Perturbation distribution for `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistTag {
    /// `u ~ N(0, I_d)`.
    Gaussian,
    /// `u ~ Unif(S^{d-1})`.
    Sphere,
    /// `u ~ Unif({e_1, .., e_d})`.
    Coordinate,
}

impl DistTag {
    pub const ALL: [DistTag; 3] = [DistTag::Gaussian, DistTag::Sphere, DistTag::Coordinate];

    /// `E[u_i^2]`, i.e. the diagonal of `E[u u^T]`.
    pub fn second_moment(self, dim: usize) -> f64 {
        match self {
            DistTag::Gaussian => 1.0,
            DistTag::Sphere | DistTag::Coordinate => 1.0 / dim as f64,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DistTag::Gaussian => "gaussian",
            DistTag::Sphere => "sphere",
            DistTag::Coordinate => "coordinate",
        }
    }
}

impl fmt::Display for DistTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(DistTag::Gaussian),
            "sphere" => Ok(DistTag::Sphere),
            "coordinate" | "coord" => Ok(DistTag::Coordinate),
            other => Err(Error::Config(format!("unknown distribution `{other}`"))),
        }
    }
}

/// A direction stored by seed; see [`materialize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DirectionSpec {
    pub seed: u64,
    pub tag: DistTag,
    pub dim: usize,
}

impl DirectionSpec {
    pub fn new(seed: u64, tag: DistTag, dim: usize) -> Self {
        Self { seed, tag, dim }
    }

    pub fn materialize(&self) -> Result<ParamVector> {
        materialize(self)
    }
}

/// A point in `R^d` with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDimension { min: 1, got: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    /// Wraps a vector produced by arithmetic on finite inputs. Callers that
    /// can overflow must use [`ParamVector::new`].
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream domains keep seeds for different purposes disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Direction = 1,
    Noise = 2,
    Init = 3,
    Repeat = 4,
    Trial = 5,
    Aux = 6,
}

/// `mix(mix(mix(master + GOLDEN*domain) ^ a*GOLDEN) ^ b*GOLDEN)` with
/// `mix` = [`mix64`] and wrapping arithmetic.
pub fn derive_seed(master: u64, domain: Domain, a: u64, b: u64) -> u64 {
    let h = mix64(master.wrapping_add(GOLDEN.wrapping_mul(domain as u64)));
    let h = mix64(h ^ a.wrapping_mul(GOLDEN));
    mix64(h ^ b.wrapping_mul(GOLDEN))
}

/// Seed of the k-th direction sampled at iteration `t`.
pub fn direction_seed(master: u64, iteration: u64, k: u64) -> u64 {
    derive_seed(master, Domain::Direction, iteration, k)
}

/// Seed of the shared observation noise `xi` of iteration `t`.
pub fn noise_seed(master: u64, iteration: u64) -> u64 {
    derive_seed(master, Domain::Noise, iteration, 0)
}

/// Deterministic random stream; see the module docs for the exact mapping.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n` (Lemire). `n` must be nonzero.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.rng.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal via the polar method.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let a = 2.0 * self.uniform() - 1.0;
            let b = 2.0 * self.uniform() - 1.0;
            let s = a * a + b * b;
            if s > 0.0 && s < 1.0 {
                let scale = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(b * scale);
                return a * scale;
            }
        }
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }
}

/// Regenerates the direction described by `spec`.
pub fn materialize(spec: &DirectionSpec) -> Result<ParamVector> {
    let mut out = vec![0.0; spec.dim];
    materialize_into(spec, &mut out)?;
    Ok(ParamVector(out))
}

/// Writes the direction into `out` (length `spec.dim`), avoiding allocation
/// in the estimator loops.
pub fn materialize_into(spec: &DirectionSpec, out: &mut [f64]) -> Result<()> {
    if spec.dim == 0 {
        return Err(Error::InvalidDimension { min: 1, got: 0 });
    }
    if out.len() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            found: out.len(),
        });
    }
    let mut stream = Stream::new(spec.seed);
    match spec.tag {
        DistTag::Gaussian => stream.fill_normal(out),
        DistTag::Sphere => loop {
            stream.fill_normal(out);
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        },
        DistTag::Coordinate => {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[stream.index(spec.dim)] = 1.0;
        }
    }
    Ok(())
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// `alpha * x + y`.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<ParamVector> {
    check_dims(x, y)?;
    Ok(ParamVector(
        x.iter().zip(y).map(|(xi, yi)| alpha * xi + yi).collect(),
    ))
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
