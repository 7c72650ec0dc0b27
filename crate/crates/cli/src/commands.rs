use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use zoar_core::bench::{
    aggregate, emit_plot_svg, read_aggregate_csv, run_experiment, speedup, speedup_queries,
    write_aggregate_csv, write_trace_csv, Aggregate, RunConfig, Speedup, Theta0Mode,
};
use zoar_core::optimizers::TraceStatus;
use zoar_core::verify::{run_suite, Suite};
use zoar_core::EstimatorKind;

use crate::config::{seed_from_env, ConfigDoc, ConfigError};

/// Maps onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit 2: bad arguments, config or input files.
    Usage(String),
    /// Exit 3: every repeat diverged.
    Diverged(String),
    /// Exit 4: at least one verification check failed.
    Verify(usize),
    /// Exit 1: anything else.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Diverged(_) => 3,
            Failure::Verify(_) => 4,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Diverged(m) | Failure::Runtime(m) => m.clone(),
            Failure::Verify(n) => format!("{n} check(s) failed"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(format!("config error: {e}"))
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn speedup_json(s: Speedup) -> Value {
    match s {
        Speedup::Ratio(r) if r.is_finite() => json!(r),
        Speedup::Ratio(_) => json!("inf"),
        Speedup::Unreachable => json!("unreachable"),
    }
}

fn theta0_json(mode: Theta0Mode) -> Value {
    match mode {
        Theta0Mode::FixedValue(v) => json!({ "fixed": v }),
        Theta0Mode::SeededUniform { lo, hi } => json!({ "uniform": [lo, hi] }),
    }
}

fn config_json(cfg: &RunConfig) -> Value {
    let e = &cfg.estimator;
    let o = &cfg.optimizer;
    json!({
        "objective": { "kind": cfg.objective.kind.as_str(), "dim": cfg.objective.dim, "noise_sigma": cfg.objective.noise_sigma },
        "estimator": { "kind": cfg.kind.as_str(), "mu": e.mu, "k": e.k, "n": e.n, "tag": e.tag.as_str(), "route": e.route.as_str() },
        "optimizer": { "rule": o.rule.as_str(), "eta": o.eta, "beta1": o.beta1, "beta2": o.beta2, "zeta": o.zeta, "bias_correction": o.bias_correction },
        "run": { "iterations": cfg.iterations, "repeats": cfg.repeats, "seed": cfg.master_seed, "theta0": theta0_json(cfg.theta0) },
    })
}

/// Result of running one configuration into a directory.
pub struct CellOutcome {
    pub aggregate: Option<Aggregate>,
    pub queries_per_iteration: u64,
}

/// Runs `cfg` and writes `trace_<r>.csv`, `aggregate.csv` and
/// `summary.json` into `out`.
pub fn execute(cfg: &RunConfig, out: &Path, reference: Option<&Aggregate>) -> Result<CellOutcome, Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let traces = run_experiment(cfg).map_err(runtime)?;
    for (r, t) in traces.iter().enumerate() {
        write_trace_csv(t, &out.join(format!("trace_{r}.csv"))).map_err(runtime)?;
    }
    let diverged: Vec<Value> = traces
        .iter()
        .enumerate()
        .filter_map(|(r, t)| match t.status {
            TraceStatus::Diverged(at) => Some(json!({ "repeat": r, "iteration": at })),
            TraceStatus::Completed => None,
        })
        .collect();
    let agg = aggregate(&traces).ok();
    let per_iter = cfg.kind.queries_per_iteration(cfg.estimator.k);
    let mut summary = json!({
        "config": config_json(cfg),
        "queries_per_iteration": per_iter,
        "completed": traces.len() - diverged.len(),
        "diverged": diverged,
        "initial_gap": traces.first().and_then(|t| t.rows.first()).map(|r| r.gap),
        "final_mean_gap": agg.as_ref().and_then(Aggregate::final_mean_gap),
    });
    if let Some(a) = &agg {
        write_aggregate_csv(a, &out.join("aggregate.csv")).map_err(runtime)?;
        if let (Some(reference), Some(target)) = (reference, reference.and_then(Aggregate::final_mean_gap)) {
            summary["speedup"] = json!({
                "target_gap": target,
                "iterations": speedup_json(speedup(reference, a, target)),
            });
        }
    }
    write_json(&out.join("summary.json"), &summary)?;
    Ok(CellOutcome {
        aggregate: agg,
        queries_per_iteration: per_iter,
    })
}

fn load_aggregate(path: &Path) -> Result<Aggregate, Failure> {
    read_aggregate_csv(path).map_err(|e| match e {
        zoar_core::Error::Csv { line, msg } => {
            Failure::Usage(format!("{}: line {line}: {msg}", path.display()))
        }
        other => Failure::Usage(format!("{}: {other}", path.display())),
    })
}

pub fn cmd_run(config: &Path, out: &Path, reference: Option<&Path>) -> Result<(), Failure> {
    let cfg = ConfigDoc::load(config)?.to_run_config(seed_from_env()?)?;
    let reference = reference.map(load_aggregate).transpose()?;
    let outcome = execute(&cfg, out, reference.as_ref())?;
    match outcome.aggregate {
        Some(a) => {
            println!(
                "{} {} d={} T={} repeats={}: final mean gap {}",
                cfg.objective.kind,
                cfg.kind,
                cfg.objective.dim,
                cfg.iterations,
                cfg.repeats,
                a.final_mean_gap().unwrap_or(f64::NAN)
            );
            if a.excluded > 0 {
                println!("{} of {} repeats diverged", a.excluded, cfg.repeats);
            }
            Ok(())
        }
        None => Err(Failure::Diverged(format!("all {} repeats diverged", cfg.repeats))),
    }
}

fn fmt_speedup(s: Speedup) -> String {
    match s {
        Speedup::Ratio(r) => r.to_string(),
        Speedup::Unreachable => "unreachable".into(),
    }
}

/// Target multipliers of the reference's final mean gap used as columns of
/// the speedup table.
pub const SWEEP_TARGETS: [(&str, f64); 3] = [("x100", 100.0), ("x10", 10.0), ("x1", 1.0)];

pub fn cmd_sweep(config: &Path, out: &Path, reference: Option<&str>) -> Result<(), Failure> {
    let doc = ConfigDoc::load(config)?;
    let seed = seed_from_env()?;
    let cells = doc.expand();
    let configs: Vec<(String, RunConfig)> = cells
        .into_iter()
        .map(|(name, d)| {
            d.to_run_config(seed)
                .map(|c| (name.clone(), c))
                .map_err(|e| Failure::Usage(format!("config error in cell `{name}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let ref_index = match reference {
        None => 0,
        Some(name) => configs.iter().position(|(n, _)| n == name).ok_or_else(|| {
            let known: Vec<&str> = configs.iter().map(|(n, _)| n.as_str()).collect();
            Failure::Usage(format!("unknown reference cell `{name}`; cells are: {}", known.join(" | ")))
        })?,
    };
    fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;

    let mut outcomes = Vec::with_capacity(configs.len());
    for (i, (name, cfg)) in configs.iter().enumerate() {
        let dir = out.join(format!("cell_{i:03}"));
        let outcome = execute(cfg, &dir, None)?;
        println!(
            "cell_{i:03} {name}: final mean gap {}",
            outcome
                .aggregate
                .as_ref()
                .and_then(Aggregate::final_mean_gap)
                .map_or("diverged".to_string(), |g| g.to_string())
        );
        outcomes.push(outcome);
    }

    let reference_agg = outcomes[ref_index].aggregate.clone();
    let ref_per_iter = outcomes[ref_index].queries_per_iteration;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(out.join("speedup.csv"))
        .map_err(runtime)?;
    let mut header = vec!["cell".to_string(), "name".into(), "estimator".into(), "zoar".into(), "reference".into(), "final_mean_gap".into()];
    header.extend(SWEEP_TARGETS.iter().map(|(t, _)| format!("speedup_{t}")));
    header.push("queries_speedup_x1".into());
    w.write_record(&header).map_err(runtime)?;
    let mut all_diverged = false;
    for (i, ((name, cfg), outcome)) in configs.iter().zip(&outcomes).enumerate() {
        let mut row = vec![
            format!("cell_{i:03}"),
            name.clone(),
            cfg.kind.as_str().to_string(),
            (cfg.kind == EstimatorKind::ZoAR).to_string(),
            (i == ref_index).to_string(),
        ];
        match (&outcome.aggregate, &reference_agg) {
            (Some(a), Some(r)) => {
                let base = r.final_mean_gap().unwrap_or(f64::NAN);
                row.push(a.final_mean_gap().unwrap_or(f64::NAN).to_string());
                for (_, mult) in SWEEP_TARGETS {
                    row.push(fmt_speedup(speedup(r, a, base * mult)));
                }
                row.push(fmt_speedup(speedup_queries(r, ref_per_iter, a, outcome.queries_per_iteration, base)));
            }
            (Some(a), None) => {
                row.push(a.final_mean_gap().unwrap_or(f64::NAN).to_string());
                row.extend(std::iter::repeat_n("reference diverged".to_string(), SWEEP_TARGETS.len() + 1));
            }
            (None, _) => {
                all_diverged = true;
                row.push("diverged".into());
                row.extend(std::iter::repeat_n("diverged".to_string(), SWEEP_TARGETS.len() + 1));
            }
        }
        w.write_record(&row).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    if all_diverged {
        return Err(Failure::Diverged("every repeat of at least one cell diverged".into()));
    }
    Ok(())
}

fn series_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    if stem == "aggregate" {
        if let Some(parent) = path.parent().and_then(Path::file_name).and_then(|s| s.to_str()) {
            return parent.to_string();
        }
    }
    stem.to_string()
}

pub fn cmd_plot(inputs: &[PathBuf], out: &Path, log_y: bool) -> Result<(), Failure> {
    let series = inputs
        .iter()
        .map(|p| Ok((series_name(p), load_aggregate(p)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    emit_plot_svg(&series, out, log_y).map_err(runtime)
}

pub fn cmd_verify(suite: &str, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let suite: Suite = suite.parse().map_err(|e: zoar_core::Error| Failure::Usage(e.to_string()))?;
    let reports = run_suite(suite, seed).map_err(runtime)?;
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} of {} checks passed", reports.len() - failed, reports.len());
    if let Some(path) = out {
        let doc = json!({
            "suite": suite.as_str(),
            "seed": seed,
            "passed": failed == 0,
            "checks": reports,
        });
        write_json(path, &doc)?;
    }
    if failed > 0 {
        Err(Failure::Verify(failed))
    } else {
        Ok(())
    }
}
