//! wasm-bindgen exports for the browser demo. Every function returns a JSON
//! string so the page can stay plain JavaScript.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;
use zoar_core::bench::{aggregate, run_experiment, RunConfig};
use zoar_core::estimators::gamma_factor;
use zoar_core::sampling::{Domain, Stream, derive_seed};
use zoar_core::verify::{frozen_zoar_samples, trace_variance};
use zoar_core::{DistTag, EstimatorConfig, EstimatorKind, ObjectiveKind, ObjectiveSpec, UpdateRule};

const MAX_DIM: usize = 500;
const MAX_ITERATIONS: u64 = 5000;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, JsError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(fail)
}

fn mean_gap_curve(cfg: &RunConfig) -> Result<Value, JsError> {
    let agg = aggregate(&run_experiment(cfg).map_err(fail)?).map_err(fail)?;
    let iter: Vec<u64> = agg.rows.iter().map(|r| r.iter).collect();
    let gap: Vec<f64> = agg.rows.iter().map(|r| r.mean_gap).collect();
    Ok(json!({ "iter": iter, "mean_gap": gap, "excluded": agg.excluded }))
}

/// Mean optimality gap per iteration for Vanilla, ZoAR without history and
/// ZoAR with `depth` blocks, all from the same starting point.
#[wasm_bindgen]
pub fn optimization_curves(
    objective: &str,
    rule: &str,
    dim: usize,
    iterations: u64,
    depth: usize,
    repeats: usize,
    seed: u64,
) -> Result<String, JsError> {
    if dim > MAX_DIM || iterations > MAX_ITERATIONS {
        return Err(JsError::new(&format!("demo limits: dim <= {MAX_DIM}, iterations <= {MAX_ITERATIONS}")));
    }
    let obj = ObjectiveSpec::new(parse::<ObjectiveKind>(objective)?, dim).map_err(fail)?;
    let rule = parse::<UpdateRule>(rule)?;
    let mut series = Vec::new();
    for (label, kind, n) in [
        ("Vanilla".to_string(), EstimatorKind::Vanilla, 1),
        ("ZoAR N=1".to_string(), EstimatorKind::ZoAR, 1),
        (format!("ZoAR N={depth}"), EstimatorKind::ZoAR, depth),
    ] {
        let mut cfg = RunConfig::new(obj, kind);
        cfg.estimator.n = n;
        cfg.optimizer.rule = rule;
        cfg.iterations = iterations;
        cfg.repeats = repeats;
        cfg.master_seed = seed;
        cfg.validate().map_err(fail)?;
        let mut curve = mean_gap_curve(&cfg)?;
        curve["label"] = json!(label);
        series.push(curve);
    }
    Ok(json!({ "objective": objective, "rule": rule.as_str(), "dim": dim, "series": series }).to_string())
}

/// `ln gamma` for dimensions `1..=max_dim` at radius `mu`, per direction
/// distribution.
#[wasm_bindgen]
pub fn gamma_profile(mu: f64, max_dim: usize) -> Result<String, JsError> {
    if !(mu > 0.0 && mu.is_finite()) || max_dim == 0 || max_dim > MAX_DIM {
        return Err(JsError::new("need mu > 0 and 1 <= max_dim <= 500"));
    }
    let dims: Vec<usize> = (1..=max_dim).collect();
    let series: Vec<Value> = [DistTag::Gaussian, DistTag::Sphere, DistTag::Coordinate]
        .into_iter()
        .map(|tag| {
            let ln: Vec<f64> = dims.iter().map(|&d| gamma_factor(tag, d, mu).ln).collect();
            json!({ "label": tag.as_str(), "ln_gamma": ln })
        })
        .collect();
    Ok(json!({ "mu": mu, "dims": dims, "series": series }).to_string())
}

/// Frozen-point estimator variance for history depths `1..=max_depth` on the
/// Quadratic, relative to depth 1, next to the `1/N` reference.
#[wasm_bindgen]
pub fn variance_profile(dim: usize, k: usize, max_depth: usize, trials: usize, seed: u64) -> Result<String, JsError> {
    if dim == 0 || dim > MAX_DIM || max_depth == 0 || max_depth > 32 || !(2..=20_000).contains(&trials) {
        return Err(JsError::new("need 1 <= dim <= 500, 1 <= max_depth <= 32, 2 <= trials <= 20000"));
    }
    let obj = ObjectiveSpec::new(ObjectiveKind::Quadratic, dim).map_err(fail)?;
    let mut s = Stream::new(derive_seed(seed, Domain::Init, 0, 0));
    let theta: Vec<f64> = (0..dim).map(|_| s.uniform_range(-1.0, 1.0)).collect();
    let mut variance = Vec::with_capacity(max_depth);
    for n in 1..=max_depth {
        let cfg = EstimatorConfig::new(0.05, k, n, DistTag::Gaussian);
        let thetas = vec![theta.clone(); n];
        let samples = frozen_zoar_samples(&obj, &thetas, &cfg, trials, seed).map_err(fail)?;
        variance.push(trace_variance(&samples).map_err(fail)?);
    }
    let ratio: Vec<f64> = variance.iter().map(|v| v / variance[0]).collect();
    let reference: Vec<f64> = (1..=max_depth).map(|n| 1.0 / n as f64).collect();
    Ok(json!({
        "depth": (1..=max_depth).collect::<Vec<_>>(),
        "variance": variance,
        "ratio": ratio,
        "inverse_depth": reference,
    })
    .to_string())
}
