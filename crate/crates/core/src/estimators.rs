//! Gradient estimators.
//!
//! Every estimator reduces to the same sum over probes `(u, y)`:
//!
//! ```text
//! g = (1 / divisor) * sum_k  w_k * ((y_k - b) / mu) * u_k
//! ```
//!
//! * finite differences: `b = f(theta; xi)`, `w = 1`, `divisor = K`.
//! * REINFORCE with a Gaussian policy: the score `(x - theta) / mu^2` with
//!   `x - theta = mu u` is `u / mu`, and the importance weight is
//!   `pi(x) / p(x)` with `p = pi`, so `w = exp(0) = 1`.
//! * importance-sampled REINFORCE: `w = pi(x) / p(x)` evaluated from the two
//!   log densities at the sampled point.
//! * ZoAR: `b` is the mean of the history values and `divisor = |H| - 1`.
//!
//! Because all routes share [`accumulate`], the finite-difference and
//! Gaussian REINFORCE estimates agree bit for bit.

use std::collections::VecDeque;
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::sampling::{
    direction_seed, materialize_into, noise_seed, DirectionSpec, DistTag, ParamVector,
};

/// Largest log-weight whose exponential is a normal finite f64 with margin.
const LN_WEIGHT_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Single-point baseline finite differences.
    Vanilla,
    /// Mean of the last N vanilla estimates.
    ZoHS,
    /// Averaged baseline with query reuse over an N-block history.
    ZoAR,
}

impl EstimatorKind {
    /// Objective queries consumed per iteration.
    pub fn queries_per_iteration(self, k: usize) -> u64 {
        match self {
            EstimatorKind::Vanilla | EstimatorKind::ZoHS => k as u64 + 1,
            EstimatorKind::ZoAR => k as u64,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Vanilla => "vanilla",
            EstimatorKind::ZoHS => "zohs",
            EstimatorKind::ZoAR => "zoar",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(EstimatorKind::Vanilla),
            "zohs" => Ok(EstimatorKind::ZoHS),
            "zoar" => Ok(EstimatorKind::ZoAR),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// How the per-probe term is formulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    #[default]
    FiniteDifference,
    /// Score-function estimator under the Gaussian policy `N(theta, mu^2 I)`.
    Reinforce,
    /// Score-function estimator with proposal `p(theta + mu u)`.
    ImportanceSampled,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::FiniteDifference => "fd",
            Route::Reinforce => "reinforce",
            Route::ImportanceSampled => "is",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fd" | "zoo" | "finite_difference" => Ok(Route::FiniteDifference),
            "reinforce" => Ok(Route::Reinforce),
            "is" | "importance" => Ok(Route::ImportanceSampled),
            other => Err(Error::Config(format!("unknown route `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Smoothing radius.
    pub mu: f64,
    /// New queries per iteration.
    pub k: usize,
    /// History depth in blocks.
    pub n: usize,
    pub tag: DistTag,
    #[serde(default)]
    pub route: Route,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mu: 0.05,
            k: 10,
            n: 6,
            tag: DistTag::Gaussian,
            route: Route::FiniteDifference,
        }
    }
}

impl EstimatorConfig {
    pub fn new(mu: f64, k: usize, n: usize, tag: DistTag) -> Self {
        Self {
            mu,
            k,
            n,
            tag,
            route: Route::FiniteDifference,
        }
    }

    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }

    pub fn validate(&self, kind: EstimatorKind) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if kind == EstimatorKind::ZoAR && self.n * self.k < 2 {
            return Err(Error::Config(
                "ZoAR needs n * k >= 2 (the estimate divides by |H| - 1)".into(),
            ));
        }
        if self.route == Route::Reinforce && self.tag != DistTag::Gaussian {
            return Err(Error::Config(
                "the reinforce route needs Gaussian directions; use the importance-sampled route"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// One black-box evaluation `y = f(theta_{t'} + mu u; xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRecord {
    pub dir: DirectionSpec,
    pub value: f64,
    pub iteration: u64,
}

/// Ring of the `N * K` most recent query records, oldest first.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    records: VecDeque<QueryRecord>,
    block_size: usize,
    depth: usize,
}

impl HistoryBuffer {
    pub fn new(block_size: usize, depth: usize) -> Result<Self> {
        if block_size == 0 || depth == 0 {
            return Err(Error::Config("history needs k >= 1 and n >= 1".into()));
        }
        Ok(Self {
            records: VecDeque::with_capacity(block_size * depth),
            block_size,
            depth,
        })
    }

    pub fn capacity(&self) -> usize {
        self.block_size * self.depth
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = &QueryRecord> {
        self.records.iter()
    }

    /// Appends one block of `K` records, evicting the oldest block when full.
    pub fn push_block(&mut self, block: impl IntoIterator<Item = QueryRecord>) -> Result<()> {
        let block: Vec<QueryRecord> = block.into_iter().collect();
        if block.len() != self.block_size {
            return Err(Error::BlockSize {
                expected: self.block_size,
                found: block.len(),
            });
        }
        if block.iter().any(|r| !r.value.is_finite()) {
            return Err(Error::NonFinite("query record value"));
        }
        if self.records.len() + block.len() > self.capacity() {
            self.records.drain(..self.block_size);
        }
        self.records.extend(block);
        Ok(())
    }
}

/// Gradient estimate plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub gradient: ParamVector,
    /// Objective evaluations consumed to produce this estimate.
    pub queries: u64,
    /// The true estimate is `exp(ln_scale) * gradient`; zero unless the
    /// importance weights overflowed.
    pub ln_scale: f64,
    pub overflow: bool,
}

/// Importance ratio `gamma = pi(x) / p(x)` in value and log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaFactor {
    pub value: f64,
    pub ln: f64,
}

/// Closed-form `gamma` linking importance-sampled REINFORCE to finite
/// differences. `value` may overflow to `inf` or underflow to `0` for large
/// `d`; `ln` stays finite.
pub fn gamma_factor(tag: DistTag, dim: usize, mu: f64) -> GammaFactor {
    let d = dim as f64;
    let ln = match tag {
        DistTag::Gaussian => 0.0,
        DistTag::Sphere => (1.0 - d / 2.0) * LN_2 - 0.5 - mu.ln() - libm::lgamma(d / 2.0),
        DistTag::Coordinate => d.ln() - 0.5 - (d / 2.0) * (2.0 * PI * mu * mu).ln(),
    };
    GammaFactor {
        value: ln.exp(),
        ln,
    }
}

/// `ln N(x; theta, mu^2 I)` at `x = theta + mu u`, given `|u|^2`.
fn ln_policy_density(u_sq: f64, dim: usize, mu: f64) -> f64 {
    -(dim as f64 / 2.0) * (2.0 * PI * mu * mu).ln() - u_sq / 2.0
}

/// `ln p(x)` of the proposal induced by `tag` at `x = theta + mu u`.
fn ln_proposal_density(tag: DistTag, u_sq: f64, dim: usize, mu: f64) -> f64 {
    let d = dim as f64;
    match tag {
        DistTag::Gaussian => ln_policy_density(u_sq, dim, mu),
        // uniform on the radius-mu sphere: 1 / area
        DistTag::Sphere => {
            libm::lgamma(d / 2.0) - LN_2 - (d / 2.0) * PI.ln() - (d - 1.0) * mu.ln()
        }
        // uniform over the d points theta + mu e_i
        DistTag::Coordinate => -d.ln(),
    }
}

/// `ln(pi(x) / p(x))` for one probe under `route`.
fn ln_weight(route: Route, tag: DistTag, u: &[f64], mu: f64) -> f64 {
    match route {
        Route::FiniteDifference => 0.0,
        Route::Reinforce | Route::ImportanceSampled => {
            let proposal = if route == Route::Reinforce {
                DistTag::Gaussian
            } else {
                tag
            };
            let u_sq: f64 = u.iter().map(|v| v * v).sum();
            ln_policy_density(u_sq, u.len(), mu) - ln_proposal_density(proposal, u_sq, u.len(), mu)
        }
    }
}

/// Shared reduction for every estimator; see the module docs.
fn accumulate<'a>(
    dim: usize,
    mu: f64,
    baseline: f64,
    divisor: f64,
    route: Route,
    tag: DistTag,
    probes: impl Iterator<Item = (&'a [f64], f64)> + Clone,
) -> Result<(Vec<f64>, f64, bool)> {
    let ln_weights: Vec<f64> = probes
        .clone()
        .map(|(u, _)| ln_weight(route, tag, u, mu))
        .collect();
    let (ln_ref, overflow) = match ln_weights.iter().cloned().reduce(f64::max) {
        Some(hi) if hi > LN_WEIGHT_LIMIT => (hi, true),
        Some(hi) if hi < -LN_WEIGHT_LIMIT => (hi, true),
        _ => (0.0, false),
    };
    let mut g = vec![0.0; dim];
    for ((u, y), lw) in probes.zip(&ln_weights) {
        if u.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: u.len(),
            });
        }
        let w = (lw - ln_ref).exp();
        let coef = w * ((y - baseline) / mu);
        for (gi, ui) in g.iter_mut().zip(u) {
            *gi += coef * ui;
        }
    }
    for gi in &mut g {
        *gi /= divisor;
    }
    Ok((g, ln_ref, overflow))
}

/// Single-point-baseline estimate from explicit probes `(u_k, y_k)` and the
/// center value `f(theta; xi)`.
pub fn single_point_from_probes(
    route: Route,
    tag: DistTag,
    mu: f64,
    center: f64,
    probes: &[(&[f64], f64)],
) -> Result<Estimate> {
    let dim = probes.first().ok_or(Error::Empty("probes"))?.0.len();
    let (g, ln_scale, overflow) = accumulate(
        dim,
        mu,
        center,
        probes.len() as f64,
        route,
        tag,
        probes.iter().copied(),
    )?;
    Ok(Estimate {
        gradient: ParamVector::from_raw(g),
        queries: probes.len() as u64 + 1,
        ln_scale,
        overflow,
    })
}

/// Queries `f(theta + mu u_k; xi)` for the K directions of `iteration`.
/// Returns the records and the materialized directions.
pub fn query_block(
    obj: &dyn Objective,
    theta: &[f64],
    cfg: &EstimatorConfig,
    iteration: u64,
    master_seed: u64,
) -> Result<(Vec<QueryRecord>, Vec<Vec<f64>>)> {
    let dim = theta.len();
    let xi = noise_seed(master_seed, iteration);
    let mut records = Vec::with_capacity(cfg.k);
    let mut dirs = Vec::with_capacity(cfg.k);
    let mut x = vec![0.0; dim];
    for k in 0..cfg.k {
        let dir = DirectionSpec::new(direction_seed(master_seed, iteration, k as u64), cfg.tag, dim);
        let mut u = vec![0.0; dim];
        materialize_into(&dir, &mut u)?;
        for ((xi_, ti), ui) in x.iter_mut().zip(theta).zip(&u) {
            *xi_ = ti + cfg.mu * ui;
        }
        let value = obj.eval(&x, xi)?;
        records.push(QueryRecord {
            dir,
            value,
            iteration,
        });
        dirs.push(u);
    }
    Ok((records, dirs))
}

fn single_point_estimate(
    obj: &dyn Objective,
    theta: &[f64],
    cfg: &EstimatorConfig,
    route: Route,
    iteration: u64,
    master_seed: u64,
) -> Result<Estimate> {
    let mut cfg = *cfg;
    cfg.route = route;
    cfg.validate(EstimatorKind::Vanilla)?;
    let center = obj.eval(theta, noise_seed(master_seed, iteration))?;
    let (records, dirs) = query_block(obj, theta, &cfg, iteration, master_seed)?;
    let probes: Vec<(&[f64], f64)> = dirs
        .iter()
        .zip(&records)
        .map(|(u, r)| (u.as_slice(), r.value))
        .collect();
    single_point_from_probes(route, cfg.tag, cfg.mu, center, &probes)
}

/// Finite-difference estimate `(1/K) sum_k [f(theta + mu u_k) - f(theta)] / mu * u_k`.
pub fn fd_estimate(
    obj: &dyn Objective,
    theta: &[f64],
    cfg: &EstimatorConfig,
    iteration: u64,
    master_seed: u64,
) -> Result<Estimate> {
    single_point_estimate(obj, theta, cfg, Route::FiniteDifference, iteration, master_seed)
}

/// REINFORCE with policy `N(theta, mu^2 I)` and baseline `f(theta; xi)`.
/// Requires Gaussian directions.
pub fn reinforce_gs_estimate(
    obj: &dyn Objective,
    theta: &[f64],
    cfg: &EstimatorConfig,
    iteration: u64,
    master_seed: u64,
) -> Result<Estimate> {
    single_point_estimate(obj, theta, cfg, Route::Reinforce, iteration, master_seed)
}

/// Importance-sampled REINFORCE with the proposal given by `cfg.tag`.
/// When the weights leave the f64 range the result carries `overflow` and a
/// nonzero `ln_scale` instead of failing.
pub fn reinforce_is_estimate(
    obj: &dyn Objective,
    theta: &[f64],
    cfg: &EstimatorConfig,
    iteration: u64,
    master_seed: u64,
) -> Result<Estimate> {
    single_point_estimate(obj, theta, cfg, Route::ImportanceSampled, iteration, master_seed)
}

/// Mean of the stored values.
pub fn averaged_baseline(buffer: &HistoryBuffer) -> Result<f64> {
    if buffer.is_empty() {
        return Err(Error::Empty("history buffer"));
    }
    Ok(buffer.records().map(|r| r.value).sum::<f64>() / buffer.len() as f64)
}

/// History estimate from explicit probes: `(1/(n-1)) sum (y - mean(y)) / mu * u`.
pub fn zoar_from_probes(
    route: Route,
    tag: DistTag,
    mu: f64,
    probes: &[(&[f64], f64)],
) -> Result<(Vec<f64>, f64, bool)> {
    if probes.len() < 2 {
        return Err(Error::InsufficientHistory { have: probes.len() });
    }
    let baseline = probes.iter().map(|p| p.1).sum::<f64>() / probes.len() as f64;
    accumulate(
        probes[0].0.len(),
        mu,
        baseline,
        (probes.len() - 1) as f64,
        route,
        tag,
        probes.iter().copied(),
    )
}

/// Averaged-baseline, query-reuse estimate over every record in `buffer`.
/// Directions are regenerated from their seeds; no new queries are made.
pub fn zoar_estimate(buffer: &HistoryBuffer, mu: f64) -> Result<ParamVector> {
    zoar_estimate_routed(buffer, mu, Route::FiniteDifference).map(|e| e.gradient)
}

pub fn zoar_estimate_routed(buffer: &HistoryBuffer, mu: f64, route: Route) -> Result<Estimate> {
    if buffer.len() < 2 {
        return Err(Error::InsufficientHistory { have: buffer.len() });
    }
    let first = buffer.records().next().expect("nonempty");
    let tag = first.dir.tag;
    let dirs: Vec<ParamVector> = buffer
        .records()
        .map(|r| r.dir.materialize())
        .collect::<Result<_>>()?;
    let probes: Vec<(&[f64], f64)> = dirs
        .iter()
        .zip(buffer.records())
        .map(|(u, r)| (u.as_slice(), r.value))
        .collect();
    let (g, ln_scale, overflow) = zoar_from_probes(route, tag, mu, &probes)?;
    Ok(Estimate {
        gradient: ParamVector::from_raw(g),
        queries: 0,
        ln_scale,
        overflow,
    })
}

/// Arithmetic mean of recent vanilla estimates.
pub fn zohs_estimate<V: AsRef<[f64]>>(recent: &[V]) -> Result<ParamVector> {
    let first = recent.first().ok_or(Error::Empty("gradient list"))?.as_ref();
    let mut mean = vec![0.0; first.len()];
    for g in recent {
        let g = g.as_ref();
        if g.len() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: g.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v;
        }
    }
    let n = recent.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(ParamVector::from_raw(mean))
}

/// History constant `C_N`; equals 1 at `N = 1` and grows with `N`.
pub fn c_n_constant(beta1: f64, n: usize) -> Result<f64> {
    if !(beta1 > 0.0 && beta1 < 1.0) {
        return Err(Error::Config(format!("beta1 must lie in (0, 1), got {beta1}")));
    }
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let b = beta1;
    let n = n as f64;
    let num = 2.0 * (1.0 - b).powi(2) * n * n - 3.0 * (1.0 - b) * (1.0 - 3.0 * b) * n
        - b * (2.0 - 13.0 * b)
        + 1.0;
    Ok(num / (6.0 * b * (1.0 + b)))
}

/// Per-run estimator state: owns the history for ZoAR and the recent
/// vanilla estimates for ZoHS.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    kind: EstimatorKind,
    cfg: EstimatorConfig,
    history: HistoryBuffer,
    recent: VecDeque<ParamVector>,
}

impl EstimatorState {
    pub fn new(kind: EstimatorKind, cfg: EstimatorConfig) -> Result<Self> {
        cfg.validate(kind)?;
        Ok(Self {
            kind,
            cfg,
            history: HistoryBuffer::new(cfg.k, cfg.n)?,
            recent: VecDeque::with_capacity(cfg.n),
        })
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    /// Estimate at `theta = theta_{t-1}` for iteration `t >= 1`.
    pub fn estimate(
        &mut self,
        obj: &dyn Objective,
        theta: &[f64],
        iteration: u64,
        master_seed: u64,
    ) -> Result<Estimate> {
        match self.kind {
            EstimatorKind::Vanilla => {
                single_point_estimate(obj, theta, &self.cfg, self.cfg.route, iteration, master_seed)
            }
            EstimatorKind::ZoHS => {
                let est = single_point_estimate(
                    obj,
                    theta,
                    &self.cfg,
                    self.cfg.route,
                    iteration,
                    master_seed,
                )?;
                if self.recent.len() == self.cfg.n {
                    self.recent.pop_front();
                }
                self.recent.push_back(est.gradient);
                Ok(Estimate {
                    gradient: zohs_estimate(self.recent.make_contiguous())?,
                    ..est
                })
            }
            EstimatorKind::ZoAR => {
                let (records, _) = query_block(obj, theta, &self.cfg, iteration, master_seed)?;
                self.history.push_block(records)?;
                if self.history.len() < 2 {
                    // K = 1 warm-up: a single record carries no baseline-free signal
                    return Ok(Estimate {
                        gradient: ParamVector::zeros(theta.len()),
                        queries: self.cfg.k as u64,
                        ln_scale: 0.0,
                        overflow: false,
                    });
                }
                let est = zoar_estimate_routed(&self.history, self.cfg.mu, self.cfg.route)?;
                Ok(Estimate {
                    queries: self.cfg.k as u64,
                    ..est
                })
            }
        }
    }
}
