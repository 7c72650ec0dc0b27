//! Update rules and the optimization loop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind, EstimatorState};
use crate::objectives::Objective;
use crate::sampling::ParamVector;

/// Runs abort once `|F(theta)|` exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    Sgd,
    /// Adam on the zeroth-order gradient.
    AdaMM,
    /// Adam-like, with the second moment tracking the squared first moment.
    RAdaZO,
}

impl UpdateRule {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateRule::Sgd => "sgd",
            UpdateRule::AdaMM => "adamm",
            UpdateRule::RAdaZO => "radazo",
        }
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(UpdateRule::Sgd),
            "adamm" | "adam" => Ok(UpdateRule::AdaMM),
            "radazo" => Ok(UpdateRule::RAdaZO),
            other => Err(Error::Config(format!("unknown update rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub rule: UpdateRule,
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub zeta: f64,
    /// Adam bias correction; only read by [`UpdateRule::AdaMM`].
    pub bias_correction: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rule: UpdateRule::RAdaZO,
            eta: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            zeta: 1e-8,
            bias_correction: false,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(eta: f64) -> Self {
        Self {
            rule: UpdateRule::Sgd,
            eta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::Config(format!("zeta must be positive, got {}", self.zeta)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        Ok(())
    }
}

/// First and second moments plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl MomentState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// Starts from an explicit `v_0`; `v0` entries must be nonnegative.
    pub fn with_v0(v0: Vec<f64>) -> Self {
        Self {
            m: vec![0.0; v0.len()],
            v: v0,
            t: 0,
        }
    }
}

/// `theta - eta * g`.
pub fn sgd_step(theta: &[f64], g: &[f64], cfg: &OptimizerConfig) -> ParamVector {
    ParamVector::from_raw(theta.iter().zip(g).map(|(t, gi)| t - cfg.eta * gi).collect())
}

/// R-AdaZO: `m = b1 m + (1-b1) g`, `v = b2 v + (1-b2) m^2`,
/// `theta -= eta m / sqrt(v + zeta)`. No bias correction.
pub fn radazo_step(
    theta: &[f64],
    state: &MomentState,
    g: &[f64],
    cfg: &OptimizerConfig,
) -> (ParamVector, MomentState) {
    let mut next = state.clone();
    next.t += 1;
    let mut out = theta.to_vec();
    for i in 0..theta.len() {
        let m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
        let v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * m * m;
        next.m[i] = m;
        next.v[i] = v;
        out[i] -= cfg.eta * m / (v + cfg.zeta).sqrt();
    }
    (ParamVector::from_raw(out), next)
}

/// Adam on the raw gradient: `v` tracks `g^2`. With `bias_correction` the
/// moments are divided by `1 - beta^t` before the step.
pub fn adamm_step(
    theta: &[f64],
    state: &MomentState,
    g: &[f64],
    cfg: &OptimizerConfig,
) -> (ParamVector, MomentState) {
    let mut next = state.clone();
    next.t += 1;
    let (c1, c2) = if cfg.bias_correction {
        let t = next.t as i32;
        (1.0 - cfg.beta1.powi(t), 1.0 - cfg.beta2.powi(t))
    } else {
        (1.0, 1.0)
    };
    let mut out = theta.to_vec();
    for i in 0..theta.len() {
        let m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
        let v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        next.m[i] = m;
        next.v[i] = v;
        out[i] -= cfg.eta * (m / c1) / (v / c2 + cfg.zeta).sqrt();
    }
    (ParamVector::from_raw(out), next)
}

/// Stateful wrapper dispatching on [`UpdateRule`].
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    state: MomentState,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: MomentState::new(dim),
        })
    }

    pub fn state(&self) -> &MomentState {
        &self.state
    }

    pub fn step(&mut self, theta: &[f64], g: &[f64]) -> ParamVector {
        match self.cfg.rule {
            UpdateRule::Sgd => {
                self.state.t += 1;
                sgd_step(theta, g, &self.cfg)
            }
            UpdateRule::AdaMM => {
                let (next, state) = adamm_step(theta, &self.state, g, &self.cfg);
                self.state = state;
                next
            }
            UpdateRule::RAdaZO => {
                let (next, state) = radazo_step(theta, &self.state, g, &self.cfg);
                self.state = state;
                next
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: u64,
    pub queries_cum: u64,
    pub f_clean: f64,
    /// `f_clean - 0`; every synthetic objective has optimum zero.
    pub gap: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    Completed,
    Diverged(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub fingerprint: String,
    pub rows: Vec<TraceRow>,
    pub status: TraceStatus,
}

impl Trace {
    pub fn final_gap(&self) -> Option<f64> {
        self.rows.last().map(|r| r.gap)
    }
}

/// Everything a single optimization run needs besides the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub kind: EstimatorKind,
    pub estimator: EstimatorConfig,
    pub optimizer: OptimizerConfig,
    pub iterations: u64,
    pub master_seed: u64,
}

impl RunSettings {
    pub fn fingerprint(&self) -> String {
        let e = &self.estimator;
        let o = &self.optimizer;
        format!(
            "est={} route={} tag={} mu={} k={} n={} rule={} eta={} beta1={} beta2={} zeta={} bc={} T={} seed={}",
            self.kind, e.route, e.tag, e.mu, e.k, e.n, o.rule, o.eta, o.beta1, o.beta2, o.zeta,
            o.bias_correction, self.iterations, self.master_seed
        )
    }
}

#[cfg(not(target_arch = "wasm32"))]
struct Clock(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Clock {
    fn start() -> Self {
        Clock(std::time::Instant::now())
    }
    fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

// std::time::Instant is unavailable on wasm32-unknown-unknown
#[cfg(target_arch = "wasm32")]
struct Clock;

#[cfg(target_arch = "wasm32")]
impl Clock {
    fn start() -> Self {
        Clock
    }
    fn elapsed_ms(&self) -> f64 {
        0.0
    }
}

/// Runs the loop and calls `observe(t, theta_t)` after every update
/// (and once with `t = 0` for the initial point).
pub fn run_optimization_with(
    obj: &dyn Objective,
    settings: &RunSettings,
    theta0: &[f64],
    mut observe: impl FnMut(u64, &[f64]),
) -> Result<Trace> {
    if theta0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            found: theta0.len(),
        });
    }
    let mut theta = ParamVector::new(theta0.to_vec())?;
    let mut estimator = EstimatorState::new(settings.kind, settings.estimator)?;
    let mut optimizer = Optimizer::new(settings.optimizer, theta.dim())?;
    let clock = Clock::start();

    let f0 = obj.clean(&theta)?;
    let mut rows = Vec::with_capacity(settings.iterations as usize + 1);
    rows.push(TraceRow {
        iter: 0,
        queries_cum: 0,
        f_clean: f0,
        gap: f0,
        wall_ms: clock.elapsed_ms(),
    });
    observe(0, &theta);
    let mut queries = 0u64;
    let mut status = TraceStatus::Completed;

    for t in 1..=settings.iterations {
        let est = estimator.estimate(obj, &theta, t, settings.master_seed)?;
        if est.overflow {
            return Err(Error::WeightOverflow {
                ln_weight: est.ln_scale,
            });
        }
        queries += est.queries;
        let next = optimizer.step(&theta, &est.gradient);
        if !next.is_finite() {
            status = TraceStatus::Diverged(t);
            break;
        }
        theta = next;
        let f = obj.clean(&theta)?;
        rows.push(TraceRow {
            iter: t,
            queries_cum: queries,
            f_clean: f,
            gap: f,
            wall_ms: clock.elapsed_ms(),
        });
        observe(t, &theta);
        if !f.is_finite() || f.abs() > DIVERGENCE_LIMIT {
            status = TraceStatus::Diverged(t);
            break;
        }
    }
    Ok(Trace {
        fingerprint: settings.fingerprint(),
        rows,
        status,
    })
}

pub fn run_optimization(obj: &dyn Objective, settings: &RunSettings, theta0: &[f64]) -> Result<Trace> {
    run_optimization_with(obj, settings, theta0, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{ObjectiveKind, ObjectiveSpec};
    use crate::sampling::{DistTag, Stream};

    fn radazo(eta: f64) -> OptimizerConfig {
        OptimizerConfig {
            eta,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn sgd_examples() {
        let cfg = OptimizerConfig::sgd(0.1);
        assert_eq!(sgd_step(&[1.0, 1.0], &[1.0, 0.0], &cfg).as_slice(), &[0.9, 1.0]);
        assert_eq!(sgd_step(&[1.0, 2.0], &[0.0, 0.0], &cfg).as_slice(), &[1.0, 2.0]);
        let g = [0.5, -0.25];
        let once = sgd_step(&[1.0, 1.0], &g, &cfg);
        let twice = sgd_step(&once, &g, &cfg);
        for i in 0..2 {
            assert!((twice[i] - (1.0 - 2.0 * 0.1 * g[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn radazo_one_step_hand_trace() {
        let cfg = OptimizerConfig {
            beta1: 0.8,
            beta2: 0.95,
            zeta: 1e-3,
            eta: 0.05,
            ..OptimizerConfig::default()
        };
        let v0 = vec![0.2, 0.0, 1.5];
        let g = [1.0, -3.0, 0.4];
        let theta = [0.1, 0.2, 0.3];
        let (next, state) = radazo_step(&theta, &MomentState::with_v0(v0.clone()), &g, &cfg);
        for i in 0..3 {
            let m1 = (1.0 - cfg.beta1) * g[i];
            let denom = (cfg.beta2 * v0[i] + (1.0 - cfg.beta2) * m1 * m1 + cfg.zeta).sqrt();
            let expected = theta[i] - cfg.eta * m1 / denom;
            assert!((next[i] - expected).abs() < 1e-15);
            assert_eq!(state.m[i], m1);
        }
        assert_eq!(state.t, 1);
    }

    #[test]
    fn radazo_zero_gradient_never_moves() {
        let cfg = radazo(0.01);
        let mut opt = Optimizer::new(cfg, 2).unwrap();
        let mut theta = ParamVector::new(vec![0.3, -0.7]).unwrap();
        for _ in 0..100 {
            theta = opt.step(&theta, &[0.0, 0.0]);
        }
        assert_eq!(theta.as_slice(), &[0.3, -0.7]);
    }

    #[test]
    fn radazo_step_bound() {
        // m / sqrt(v) <= 1 / sqrt(1 - beta2) once v >= (1 - beta2) m^2
        let cfg = OptimizerConfig {
            zeta: 1e-300,
            ..radazo(0.01)
        };
        let bound = cfg.eta / (1.0 - cfg.beta2).sqrt();
        let mut rng = Stream::new(4);
        let mut opt = Optimizer::new(cfg, 5).unwrap();
        let mut theta = ParamVector::zeros(5);
        for _ in 0..2000 {
            let g: Vec<f64> = (0..5).map(|_| 100.0 * rng.normal()).collect();
            let next = opt.step(&theta, &g);
            for i in 0..5 {
                assert!((next[i] - theta[i]).abs() <= bound * (1.0 + 1e-12));
            }
            assert!(opt.state().v.iter().all(|&v| v >= 0.0));
            theta = next;
        }
    }

    #[test]
    fn adamm_one_step_hand_trace() {
        let g = [2.0, -1.0];
        let theta = [0.0, 0.0];
        let plain = OptimizerConfig {
            rule: UpdateRule::AdaMM,
            ..radazo(0.1)
        };
        let (next, state) = adamm_step(&theta, &MomentState::new(2), &g, &plain);
        for i in 0..2 {
            let m = 0.1 * g[i];
            let v = 0.001 * g[i] * g[i];
            assert!((next[i] + 0.1 * m / (v + 1e-8).sqrt()).abs() < 1e-15);
            assert!((state.v[i] - v).abs() < 1e-15 * v);
        }
        let corrected = OptimizerConfig {
            bias_correction: true,
            ..plain
        };
        let (next, _) = adamm_step(&theta, &MomentState::new(2), &g, &corrected);
        // first corrected step: m_hat = g, v_hat = g^2
        for i in 0..2 {
            let expected = -0.1 * g[i] / (g[i] * g[i] + 1e-8).sqrt();
            assert!((next[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::sgd(0.0).validate().is_err());
        assert!(OptimizerConfig {
            beta2: 1.0,
            ..OptimizerConfig::default()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig {
            zeta: 0.0,
            ..OptimizerConfig::default()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig::default().validate().is_ok());
    }

    fn settings(kind: EstimatorKind, iterations: u64) -> RunSettings {
        RunSettings {
            kind,
            estimator: EstimatorConfig::new(0.05, 10, 6, DistTag::Gaussian),
            optimizer: OptimizerConfig::default(),
            iterations,
            master_seed: 17,
        }
    }

    #[test]
    fn zero_iterations_keeps_initial_row() {
        let obj = ObjectiveSpec::new(ObjectiveKind::Quadratic, 3).unwrap();
        let theta0 = [1.0, 2.0, 2.0];
        let trace = run_optimization(&obj, &settings(EstimatorKind::ZoAR, 0), &theta0).unwrap();
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.rows[0].gap, 4.5);
        assert_eq!(trace.status, TraceStatus::Completed);
    }

    #[test]
    fn runs_are_deterministic() {
        let obj = ObjectiveSpec::new(ObjectiveKind::Ackley, 8).unwrap();
        let theta0 = [0.5; 8];
        for kind in [EstimatorKind::Vanilla, EstimatorKind::ZoHS, EstimatorKind::ZoAR] {
            let a = run_optimization(&obj, &settings(kind, 50), &theta0).unwrap();
            let b = run_optimization(&obj, &settings(kind, 50), &theta0).unwrap();
            let strip = |t: &Trace| {
                t.rows
                    .iter()
                    .map(|r| (r.iter, r.queries_cum, r.f_clean.to_bits()))
                    .collect::<Vec<_>>()
            };
            assert_eq!(strip(&a), strip(&b));
        }
    }

    #[test]
    fn query_accounting_in_trace() {
        let obj = ObjectiveSpec::new(ObjectiveKind::Quadratic, 4).unwrap();
        for (kind, per) in [
            (EstimatorKind::Vanilla, 11),
            (EstimatorKind::ZoHS, 11),
            (EstimatorKind::ZoAR, 10),
        ] {
            let trace = run_optimization(&obj, &settings(kind, 20), &[1.0; 4]).unwrap();
            for r in &trace.rows {
                assert_eq!(r.queries_cum, per * r.iter);
            }
        }
    }

    #[test]
    fn zoar_quadratic_d100_improves() {
        let obj = ObjectiveSpec::new(ObjectiveKind::Quadratic, 100).unwrap();
        let mut rng = Stream::new(2);
        let theta0: Vec<f64> = (0..100).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let trace = run_optimization(&obj, &settings(EstimatorKind::ZoAR, 2000), &theta0).unwrap();
        assert_eq!(trace.rows.len(), 2001);
        assert!(trace.final_gap().unwrap() < trace.rows[0].gap);
    }

    #[test]
    fn divergence_is_recorded() {
        let obj = ObjectiveSpec::new(ObjectiveKind::Rosenbrock, 4).unwrap();
        let mut s = settings(EstimatorKind::Vanilla, 200);
        s.optimizer = OptimizerConfig::sgd(10.0);
        let trace = run_optimization(&obj, &s, &[2.0; 4]).unwrap();
        assert!(matches!(trace.status, TraceStatus::Diverged(_)));
    }
}
