//! Synthetic benchmark functions with an optional Gaussian noise channel.
//!
//! All four functions have optimal value zero. Observation noise is additive,
//! `f(theta; xi) = F(theta) + sigma * z` with `z ~ N(0, 1)` drawn from the
//! stream seeded by `noise_seed`. Evaluations that share a noise seed
//! therefore share `xi`.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::sampling::{materialize_into, DirectionSpec, DistTag, Stream};

/// Central-difference step of [`grad_oracle`].
pub const FD_STEP: f64 = 1e-5;

/// Black-box access to `f(theta; xi)`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Noisy evaluation; deterministic in `(theta, noise_seed)`.
    fn eval(&self, theta: &[f64], noise_seed: u64) -> Result<f64>;

    /// Noise-free value `F(theta)`.
    fn clean(&self, theta: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Ackley,
    Levy,
    Quadratic,
    Rosenbrock,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 4] = [
        ObjectiveKind::Ackley,
        ObjectiveKind::Levy,
        ObjectiveKind::Quadratic,
        ObjectiveKind::Rosenbrock,
    ];

    pub fn min_dim(self) -> usize {
        match self {
            ObjectiveKind::Rosenbrock => 2,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Ackley => "ackley",
            ObjectiveKind::Levy => "levy",
            ObjectiveKind::Quadratic => "quadratic",
            ObjectiveKind::Rosenbrock => "rosenbrock",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ackley" => Ok(ObjectiveKind::Ackley),
            "levy" => Ok(ObjectiveKind::Levy),
            "quadratic" => Ok(ObjectiveKind::Quadratic),
            "rosenbrock" => Ok(ObjectiveKind::Rosenbrock),
            other => Err(Error::Config(format!("unknown objective `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub dim: usize,
    pub noise_sigma: f64,
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind, dim: usize) -> Result<Self> {
        Self::with_noise(kind, dim, 0.0)
    }

    pub fn with_noise(kind: ObjectiveKind, dim: usize, noise_sigma: f64) -> Result<Self> {
        let spec = Self {
            kind,
            dim,
            noise_sigma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < self.kind.min_dim() {
            return Err(Error::InvalidDimension {
                min: self.kind.min_dim(),
                got: self.dim,
            });
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sigma must be finite and nonnegative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    pub fn check_input(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective input"));
        }
        Ok(())
    }
}

impl Objective for ObjectiveSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &[f64], noise_seed: u64) -> Result<f64> {
        let value = self.clean(theta)?;
        if self.noise_sigma > 0.0 {
            Ok(value + self.noise_sigma * Stream::new(noise_seed).normal())
        } else {
            Ok(value)
        }
    }

    fn clean(&self, theta: &[f64]) -> Result<f64> {
        self.check_input(theta)?;
        Ok(match self.kind {
            ObjectiveKind::Ackley => ackley(theta),
            ObjectiveKind::Levy => levy(theta),
            ObjectiveKind::Quadratic => quadratic(theta),
            ObjectiveKind::Rosenbrock => rosenbrock(theta),
        })
    }
}

fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cos = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cos.exp() + 20.0 + E
}

fn levy(x: &[f64]) -> f64 {
    let w = |v: f64| 1.0 + (v - 1.0) / 4.0;
    let d = x.len();
    let w1 = w(x[0]);
    let wd = w(x[d - 1]);
    let mut total = (PI * w1).sin().powi(2);
    for &xi in &x[..d - 1] {
        let wi = w(xi);
        total += (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2));
    }
    total + (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2))
}

fn quadratic(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

/// Gradient of the clean function: analytic for Quadratic, central
/// differences with step [`FD_STEP`] otherwise.
pub fn grad_oracle(spec: &ObjectiveSpec, theta: &[f64]) -> Result<Vec<f64>> {
    spec.check_input(theta)?;
    if spec.kind == ObjectiveKind::Quadratic {
        return Ok(theta.to_vec());
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + FD_STEP;
        let up = spec.clean(&probe)?;
        probe[i] = orig - FD_STEP;
        let down = spec.clean(&probe)?;
        probe[i] = orig;
        grad.push((up - down) / (2.0 * FD_STEP));
    }
    Ok(grad)
}

/// Monte-Carlo estimate of `F_mu(theta) = E_u[F(theta + mu u)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothedValue {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
    /// Exact value where one is known (Quadratic).
    pub closed_form: Option<f64>,
}

/// Closed-form smoothed Quadratic: `0.5 |theta|^2 + 0.5 mu^2 E|u|^2`.
pub fn quadratic_smoothed_value(theta: &[f64], mu: f64, tag: DistTag) -> f64 {
    let u_sq = match tag {
        DistTag::Gaussian => theta.len() as f64,
        DistTag::Sphere | DistTag::Coordinate => 1.0,
    };
    quadratic(theta) + 0.5 * mu * mu * u_sq
}

pub fn smoothed_value_oracle(
    spec: &ObjectiveSpec,
    theta: &[f64],
    mu: f64,
    tag: DistTag,
    trials: usize,
    seed: u64,
) -> Result<SmoothedValue> {
    spec.check_input(theta)?;
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let closed_form = (spec.kind == ObjectiveKind::Quadratic)
        .then(|| quadratic_smoothed_value(theta, mu, tag));
    if mu == 0.0 {
        return Ok(SmoothedValue {
            mean: spec.clean(theta)?,
            std_err: 0.0,
            trials,
            closed_form,
        });
    }
    let values = sample_perturbed(spec, theta, mu, tag, trials, seed)?;
    let (mean, std_err) = mean_and_std_err(&values);
    Ok(SmoothedValue {
        mean,
        std_err,
        trials,
        closed_form,
    })
}

/// `F(theta + mu u_i)` for `trials` independent directions from `seed`.
pub(crate) fn sample_perturbed(
    spec: &ObjectiveSpec,
    theta: &[f64],
    mu: f64,
    tag: DistTag,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let dim = theta.len();
    par::map_indexed(trials, |i| {
        let dir = DirectionSpec::new(
            crate::sampling::derive_seed(seed, crate::sampling::Domain::Trial, i as u64, 0),
            tag,
            dim,
        );
        let mut x = vec![0.0; dim];
        materialize_into(&dir, &mut x)?;
        for (xi, ti) in x.iter_mut().zip(theta) {
            *xi = ti + mu * *xi;
        }
        spec.clean(&x)
    })
    .into_iter()
    .collect()
}

/// `∇F_mu(theta)`: exact for Quadratic (`theta`), otherwise the Monte-Carlo
/// mean of [`grad_oracle`] at perturbed points.
pub fn smoothed_gradient_oracle(
    spec: &ObjectiveSpec,
    theta: &[f64],
    mu: f64,
    tag: DistTag,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.check_input(theta)?;
    if spec.kind == ObjectiveKind::Quadratic || mu == 0.0 {
        return grad_oracle(spec, theta);
    }
    let dim = theta.len();
    let grads: Result<Vec<Vec<f64>>> = par::map_indexed(trials.max(1), |i| {
        let dir = DirectionSpec::new(
            crate::sampling::derive_seed(seed, crate::sampling::Domain::Aux, i as u64, 0),
            tag,
            dim,
        );
        let mut x = vec![0.0; dim];
        materialize_into(&dir, &mut x)?;
        for (xi, ti) in x.iter_mut().zip(theta) {
            *xi = ti + mu * *xi;
        }
        grad_oracle(spec, &x)
    })
    .into_iter()
    .collect();
    let grads = grads?;
    let n = grads.len() as f64;
    let mut mean = vec![0.0; dim];
    for g in &grads {
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

pub(crate) fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{norm2, Stream};

    fn spec(kind: ObjectiveKind, dim: usize) -> ObjectiveSpec {
        ObjectiveSpec::new(kind, dim).unwrap()
    }

    #[test]
    fn optimum_values() {
        assert_eq!(spec(ObjectiveKind::Quadratic, 4).eval(&[0.0; 4], 0).unwrap(), 0.0);
        assert_eq!(spec(ObjectiveKind::Quadratic, 2).eval(&[3.0, 4.0], 0).unwrap(), 12.5);
        assert!(spec(ObjectiveKind::Ackley, 5).eval(&[0.0; 5], 0).unwrap().abs() < 1e-14);
        assert!(spec(ObjectiveKind::Levy, 6).eval(&[1.0; 6], 0).unwrap().abs() < 1e-14);
        assert_eq!(spec(ObjectiveKind::Rosenbrock, 6).eval(&[1.0; 6], 0).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        let q = spec(ObjectiveKind::Quadratic, 2);
        assert_eq!(q.eval(&[f64::NAN, 0.0], 0).unwrap_err(), Error::NonFinite("objective input"));
        assert!(matches!(q.eval(&[0.0], 0), Err(Error::DimensionMismatch { .. })));
        assert!(ObjectiveSpec::new(ObjectiveKind::Rosenbrock, 1).is_err());
        assert!(ObjectiveSpec::new(ObjectiveKind::Ackley, 0).is_err());
        assert!(ObjectiveSpec::new(ObjectiveKind::Quadratic, 1).is_ok());
        assert!(ObjectiveSpec::with_noise(ObjectiveKind::Quadratic, 1, -1.0).is_err());
    }

    #[test]
    fn clean_eval_is_deterministic() {
        let s = spec(ObjectiveKind::Ackley, 3);
        let x = [0.3, -1.2, 2.0];
        assert_eq!(s.eval(&x, 1).unwrap(), s.eval(&x, 999).unwrap());
    }

    #[test]
    fn noise_averages_out() {
        let sigma = 0.5;
        let s = ObjectiveSpec::with_noise(ObjectiveKind::Quadratic, 2, sigma).unwrap();
        let x = [1.0, 2.0];
        let clean = s.clean(&x).unwrap();
        let n = 10_000;
        let mean = (0..n).map(|i| s.eval(&x, i).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - clean).abs() < 5.0 * sigma / 100.0);
        assert_eq!(s.eval(&x, 7).unwrap(), s.eval(&x, 7).unwrap());
    }

    #[test]
    fn gradient_oracle_values() {
        let q = spec(ObjectiveKind::Quadratic, 2);
        assert_eq!(grad_oracle(&q, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(grad_oracle(&q, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let r = spec(ObjectiveKind::Rosenbrock, 2);
        let g = grad_oracle(&r, &[1.0, 1.0]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
    }

    #[test]
    fn rosenbrock_gradient_matches_analytic() {
        // d/dx0 = -400 x0 (x1 - x0^2) - 2 (1 - x0), d/dx1 = 200 (x1 - x0^2)
        let r = spec(ObjectiveKind::Rosenbrock, 2);
        let (a, b) = (0.3, -0.7);
        let g = grad_oracle(&r, &[a, b]).unwrap();
        let exact = [-400.0 * a * (b - a * a) - 2.0 * (1.0 - a), 200.0 * (b - a * a)];
        for i in 0..2 {
            assert!((g[i] - exact[i]).abs() < 1e-5 * exact[i].abs().max(1.0));
        }
    }

    #[test]
    fn directional_derivative_agrees_with_oracle() {
        let mut rng = Stream::new(77);
        for kind in ObjectiveKind::ALL {
            for dim in [2usize, 10, 50] {
                let s = spec(kind, dim);
                let theta: Vec<f64> = (0..dim).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
                let g = grad_oracle(&s, &theta).unwrap();
                let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
                let n = norm2(&v);
                v.iter_mut().for_each(|x| *x /= n);
                let h = FD_STEP;
                let plus: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + h * d).collect();
                let minus: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t - h * d).collect();
                let fd = (s.clean(&plus).unwrap() - s.clean(&minus).unwrap()) / (2.0 * h);
                let an: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
                let scale = fd.abs().max(an.abs()).max(1.0);
                assert!((fd - an).abs() / scale < 1e-4, "{kind} d={dim}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn functions_are_nonnegative() {
        let mut rng = Stream::new(1234);
        for kind in ObjectiveKind::ALL {
            let s = spec(kind, 10);
            for _ in 0..1000 {
                let x: Vec<f64> = (0..10).map(|_| rng.uniform_range(-5.0, 5.0)).collect();
                assert!(s.clean(&x).unwrap() >= -1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn smoothed_value_closed_form() {
        let q = spec(ObjectiveKind::Quadratic, 3);
        let sv = smoothed_value_oracle(&q, &[0.0; 3], 1.0, DistTag::Sphere, 10, 0).unwrap();
        assert_eq!(sv.closed_form, Some(0.5));
        // |u| = 1 on the sphere, so every sample is exactly 0.5
        assert!((sv.mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smoothed_value_zero_radius_is_exact() {
        for kind in ObjectiveKind::ALL {
            let s = spec(kind, 4);
            let x = [0.1, -0.4, 0.9, 1.3];
            let sv = smoothed_value_oracle(&s, &x, 0.0, DistTag::Gaussian, 5, 3).unwrap();
            assert_eq!(sv.mean, s.clean(&x).unwrap());
            assert_eq!(sv.std_err, 0.0);
        }
    }

    #[test]
    fn smoothed_value_monte_carlo() {
        let q = spec(ObjectiveKind::Quadratic, 4);
        let sv =
            smoothed_value_oracle(&q, &[1.0, 0.0, 0.0, 0.0], 0.05, DistTag::Sphere, 100_000, 8)
                .unwrap();
        let expected = 0.50125;
        assert!((sv.closed_form.unwrap() - expected).abs() < 1e-15);
        assert!((sv.mean - expected).abs() < 4.0 * sv.std_err, "{sv:?}");
    }
}
