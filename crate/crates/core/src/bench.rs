//! Multi-seed experiments, aggregation, speedups and trace output.
//!
//! Aggregates use the population standard deviation. Per-iteration sums are
//! taken over sorted values so the result does not depend on trace order.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::objectives::{Objective, ObjectiveSpec};
use crate::optimizers::{run_optimization, OptimizerConfig, RunSettings, TraceStatus};
use crate::par;
use crate::sampling::{derive_seed, Domain, Stream};

pub use crate::optimizers::{Trace, TraceRow};

/// Lower clamp for gaps on a logarithmic axis.
pub const LOG_FLOOR: f64 = 1e-16;

pub const TRACE_HEADER: [&str; 5] = ["iter", "queries_cum", "f_clean", "gap", "wall_ms"];
pub const AGGREGATE_HEADER: [&str; 4] = ["iter", "mean_gap", "std_gap", "n"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Theta0Mode {
    /// Every coordinate set to the same value.
    FixedValue(f64),
    /// Uniform on `[lo, hi)` per coordinate, drawn from the master seed.
    SeededUniform { lo: f64, hi: f64 },
}

impl Default for Theta0Mode {
    fn default() -> Self {
        Theta0Mode::SeededUniform { lo: -2.0, hi: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub objective: ObjectiveSpec,
    pub kind: EstimatorKind,
    pub estimator: EstimatorConfig,
    pub optimizer: OptimizerConfig,
    pub iterations: u64,
    pub repeats: usize,
    pub master_seed: u64,
    pub theta0: Theta0Mode,
}

impl RunConfig {
    /// Desk-scale defaults: `d = 100`, `T = 2000`, 5 repeats.
    pub fn new(objective: ObjectiveSpec, kind: EstimatorKind) -> Self {
        Self {
            objective,
            kind,
            estimator: EstimatorConfig::default(),
            optimizer: OptimizerConfig::default(),
            iterations: 2000,
            repeats: 5,
            master_seed: 0,
            theta0: Theta0Mode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.estimator.validate(self.kind)?;
        self.optimizer.validate()?;
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        match self.theta0 {
            Theta0Mode::FixedValue(v) if !v.is_finite() => {
                Err(Error::Config("theta0 value must be finite".into()))
            }
            Theta0Mode::SeededUniform { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                Err(Error::Config(format!("theta0 range [{lo}, {hi}) is empty")))
            }
            _ => Ok(()),
        }
    }

    /// The shared starting point. It depends only on the master seed, so
    /// every method and repeat in a comparison starts from the same place.
    pub fn initial_point(&self) -> Vec<f64> {
        let d = self.objective.dim;
        match self.theta0 {
            Theta0Mode::FixedValue(v) => vec![v; d],
            Theta0Mode::SeededUniform { lo, hi } => {
                let mut s = Stream::new(derive_seed(self.master_seed, Domain::Init, 0, 0));
                (0..d).map(|_| s.uniform_range(lo, hi)).collect()
            }
        }
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        derive_seed(self.master_seed, Domain::Repeat, repeat as u64, 0)
    }

    pub fn settings(&self, repeat: usize) -> RunSettings {
        RunSettings {
            kind: self.kind,
            estimator: self.estimator,
            optimizer: self.optimizer,
            iterations: self.iterations,
            master_seed: self.repeat_seed(repeat),
        }
    }
}

/// One trace per repeat; divergence is recorded in each trace's status.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<Trace>> {
    cfg.validate()?;
    let theta0 = cfg.initial_point();
    par::map_indexed(cfg.repeats, |r| {
        let obj: &dyn Objective = &cfg.objective;
        run_optimization(obj, &cfg.settings(r), &theta0)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub iter: u64,
    pub mean_gap: f64,
    pub std_gap: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub rows: Vec<AggregateRow>,
    /// Diverged traces left out of the statistics.
    pub excluded: usize,
}

impl Aggregate {
    pub fn final_mean_gap(&self) -> Option<f64> {
        self.rows.last().map(|r| r.mean_gap)
    }

    /// First iteration whose mean gap is at most `target`.
    pub fn first_hit(&self, target: f64) -> Option<u64> {
        self.rows.iter().find(|r| r.mean_gap <= target).map(|r| r.iter)
    }
}

fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

pub fn aggregate(traces: &[Trace]) -> Result<Aggregate> {
    let kept: Vec<&Trace> = traces
        .iter()
        .filter(|t| t.status == TraceStatus::Completed)
        .collect();
    let excluded = traces.len() - kept.len();
    let first = kept.first().ok_or(Error::Empty("aggregate: no completed traces"))?;
    let len = first.rows.len();
    if let Some(bad) = kept.iter().find(|t| t.rows.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            found: bad.rows.len(),
        });
    }
    let n = kept.len();
    let mut column = vec![0.0; n];
    let mut rows = Vec::with_capacity(len);
    for i in 0..len {
        for (c, t) in column.iter_mut().zip(&kept) {
            *c = t.rows[i].gap;
        }
        let mean = sorted_sum(&mut column) / n as f64;
        let mut sq: Vec<f64> = column.iter().map(|g| (g - mean) * (g - mean)).collect();
        let std = (sorted_sum(&mut sq) / n as f64).sqrt();
        rows.push(AggregateRow {
            iter: first.rows[i].iter,
            mean_gap: mean,
            std_gap: std,
            n,
        });
    }
    Ok(Aggregate { rows, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Speedup {
    Ratio(f64),
    Unreachable,
}

impl Speedup {
    pub fn ratio(self) -> Option<f64> {
        match self {
            Speedup::Ratio(r) => Some(r),
            Speedup::Unreachable => None,
        }
    }
}

impl std::fmt::Display for Speedup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Speedup::Ratio(r) => write!(f, "{r}"),
            Speedup::Unreachable => f.write_str("unreachable"),
        }
    }
}

fn ratio(reference: f64, candidate: f64) -> Speedup {
    if candidate == 0.0 {
        // both already at the target on the initial row
        if reference == 0.0 {
            Speedup::Ratio(1.0)
        } else {
            Speedup::Ratio(f64::INFINITY)
        }
    } else {
        Speedup::Ratio(reference / candidate)
    }
}

/// Iterations the reference needs to reach `target_gap` divided by the
/// iterations the candidate needs.
pub fn speedup(reference: &Aggregate, candidate: &Aggregate, target_gap: f64) -> Speedup {
    match (reference.first_hit(target_gap), candidate.first_hit(target_gap)) {
        (Some(r), Some(c)) => ratio(r as f64, c as f64),
        _ => Speedup::Unreachable,
    }
}

/// Like [`speedup`] but counting objective queries, given each method's
/// queries per iteration.
pub fn speedup_queries(
    reference: &Aggregate,
    reference_per_iter: u64,
    candidate: &Aggregate,
    candidate_per_iter: u64,
    target_gap: f64,
) -> Speedup {
    match (reference.first_hit(target_gap), candidate.first_hit(target_gap)) {
        (Some(r), Some(c)) => ratio(
            (r * reference_per_iter) as f64,
            (c * candidate_per_iter) as f64,
        ),
        _ => Speedup::Unreachable,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path)?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Csv {
        line,
        msg: e.to_string(),
    }
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in &trace.rows {
        w.write_record([
            r.iter.to_string(),
            r.queries_cum.to_string(),
            r.f_clean.to_string(),
            r.gap.to_string(),
            r.wall_ms.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv(agg: &Aggregate, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(AGGREGATE_HEADER).map_err(csv_err)?;
    for r in &agg.rows {
        w.write_record([
            r.iter.to_string(),
            r.mean_gap.to_string(),
            r.std_gap.to_string(),
            r.n.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let file = File::open(path)?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(std::io::BufReader::new(file));
    let found = r.headers().map_err(csv_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Csv {
            line: 1,
            msg: format!("expected header `{}`", header.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, line: u64, i: usize, name: &str) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::Csv {
        line,
        msg: format!("missing column `{name}`"),
    })?;
    raw.trim().parse().map_err(|_| Error::Csv {
        line,
        msg: format!("bad value `{raw}` in column `{name}`"),
    })
}

/// Reads a trace CSV; the returned trace has an empty fingerprint and
/// `Completed` status.
pub fn read_trace_csv(path: &Path) -> Result<Trace> {
    let rows = read_rows(path, &TRACE_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(TraceRow {
                iter: field(&rec, line, 0, "iter")?,
                queries_cum: field(&rec, line, 1, "queries_cum")?,
                f_clean: field(&rec, line, 2, "f_clean")?,
                gap: field(&rec, line, 3, "gap")?,
                wall_ms: field(&rec, line, 4, "wall_ms")?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Trace {
        fingerprint: String::new(),
        rows,
        status: TraceStatus::Completed,
    })
}

pub fn read_aggregate_csv(path: &Path) -> Result<Aggregate> {
    let rows = read_rows(path, &AGGREGATE_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(AggregateRow {
                iter: field(&rec, line, 0, "iter")?,
                mean_gap: field(&rec, line, 1, "mean_gap")?,
                std_gap: field(&rec, line, 2, "std_gap")?,
                n: field(&rec, line, 3, "n")?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Aggregate { rows, excluded: 0 })
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders mean gap against iteration, one polyline per series. With
/// `log_y`, gaps are clamped at [`LOG_FLOOR`] before taking `log10`.
pub fn render_plot_svg(series: &[(String, Aggregate)], log_y: bool) -> String {
    const W: f64 = 720.0;
    const H: f64 = 440.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 170.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;

    let ty = |g: f64| if log_y { g.max(LOG_FLOOR).log10() } else { g };
    let points = series.iter().flat_map(|(_, a)| a.rows.iter());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for r in points {
        let y = ty(r.mean_gap);
        if !y.is_finite() {
            continue;
        }
        x_lo = x_lo.min(r.iter as f64);
        x_hi = x_hi.max(r.iter as f64);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if x_lo > x_hi {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_hi == x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi == y_lo {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * pw;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        let ylabel = if log_y { format!("1e{yv:.1}") } else { format!("{yv:.3e}") };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.0}</text>"#,
            sx(xv),
            H - BOTTOM + 18.0,
            xv
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(yv) + 4.0,
            ylabel
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        LEFT + pw / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        if log_y { "gap (log10)" } else { "gap" }
    );
    for (i, (name, agg)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = agg
            .rows
            .iter()
            .filter(|r| ty(r.mean_gap).is_finite())
            .map(|r| format!("{:.2},{:.2}", sx(r.iter as f64), sy(ty(r.mean_gap))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape_xml(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot_svg(series: &[(String, Aggregate)], path: &Path, log_y: bool) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(render_plot_svg(series, log_y).as_bytes())?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::ObjectiveKind;

    fn trace_with_gaps(gaps: &[f64]) -> Trace {
        Trace {
            fingerprint: String::new(),
            rows: gaps
                .iter()
                .enumerate()
                .map(|(i, &g)| TraceRow {
                    iter: i as u64,
                    queries_cum: 11 * i as u64,
                    f_clean: g,
                    gap: g,
                    wall_ms: 0.0,
                })
                .collect(),
            status: TraceStatus::Completed,
        }
    }

    fn agg_from_means(means: &[f64]) -> Aggregate {
        Aggregate {
            rows: means
                .iter()
                .enumerate()
                .map(|(i, &m)| AggregateRow {
                    iter: i as u64,
                    mean_gap: m,
                    std_gap: 0.0,
                    n: 1,
                })
                .collect(),
            excluded: 0,
        }
    }

    fn small_config(kind: EstimatorKind) -> RunConfig {
        let mut cfg = RunConfig::new(ObjectiveSpec::new(ObjectiveKind::Quadratic, 10).unwrap(), kind);
        cfg.iterations = 30;
        cfg.repeats = 3;
        cfg.master_seed = 9;
        cfg
    }

    #[test]
    fn aggregate_population_std() {
        let agg = aggregate(&[trace_with_gaps(&[1.0, 1.0]), trace_with_gaps(&[1.0, 3.0])]).unwrap();
        assert_eq!(agg.rows[1].mean_gap, 2.0);
        assert_eq!(agg.rows[1].std_gap, 1.0);
        assert_eq!(agg.rows[0].std_gap, 0.0);
        assert_eq!(agg.rows[1].n, 2);
    }

    #[test]
    fn aggregate_excludes_diverged() {
        let mut bad = trace_with_gaps(&[1.0, 1e13]);
        bad.status = TraceStatus::Diverged(1);
        let agg = aggregate(&[trace_with_gaps(&[2.0, 0.5]), bad.clone()]).unwrap();
        assert_eq!(agg.excluded, 1);
        assert_eq!(agg.rows[1].mean_gap, 0.5);
        assert!(matches!(aggregate(&[bad]), Err(Error::Empty(_))));
        assert!(matches!(aggregate(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn speedup_definition() {
        let mut reference = vec![10.0; 801];
        reference[800] = 0.5;
        let mut candidate = vec![10.0; 801];
        candidate[100..].fill(0.5);
        let (r, c) = (agg_from_means(&reference), agg_from_means(&candidate));
        assert_eq!(speedup(&r, &c, 1.0), Speedup::Ratio(8.0));
        assert_eq!(speedup(&r, &r, 1.0), Speedup::Ratio(1.0));
        assert_eq!(speedup(&r, &c, 0.1), Speedup::Unreachable);
        assert_eq!(speedup_queries(&r, 11, &c, 10, 1.0), Speedup::Ratio(8800.0 / 1000.0));
    }

    #[test]
    fn run_experiment_repeats_and_determinism() {
        let cfg = small_config(EstimatorKind::ZoAR);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.len(), 3);
        let strip = |ts: &[Trace]| -> Vec<Vec<u64>> {
            ts.iter()
                .map(|t| t.rows.iter().map(|r| r.f_clean.to_bits()).collect())
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_ne!(a[0].fingerprint, a[1].fingerprint);
        assert_ne!(strip(&a)[0], strip(&a)[1]);
        for t in &a {
            assert_eq!(t.rows.len(), 31);
            assert_eq!(t.rows[0].gap, a[0].rows[0].gap);
        }
    }

    #[test]
    fn zero_iterations_single_row() {
        let mut cfg = small_config(EstimatorKind::Vanilla);
        cfg.iterations = 0;
        cfg.repeats = 1;
        let traces = run_experiment(&cfg).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].rows.len(), 1);
        let theta0 = cfg.initial_point();
        assert_eq!(traces[0].rows[0].gap, cfg.objective.clean(&theta0).unwrap());
    }

    #[test]
    fn initial_point_modes() {
        let mut cfg = small_config(EstimatorKind::Vanilla);
        assert!(cfg.initial_point().iter().all(|&x| (-2.0..2.0).contains(&x)));
        cfg.theta0 = Theta0Mode::FixedValue(0.25);
        assert_eq!(cfg.initial_point(), vec![0.25; 10]);
        cfg.theta0 = Theta0Mode::SeededUniform { lo: 1.0, hi: 1.0 };
        assert!(cfg.validate().is_err());
        cfg.theta0 = Theta0Mode::default();
        cfg.repeats = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = trace_with_gaps(&[0.1 + 0.2, 1e-300, 12345.678901234567]);
        t.rows[1].wall_ms = 3.25;
        write_trace_csv(&t, &p).unwrap();
        let back = read_trace_csv(&p).unwrap();
        assert_eq!(back.rows, t.rows);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("iter,queries_cum,f_clean,gap,wall_ms\n"));
        assert!(!text.contains('\r'));

        let agg = aggregate(&[t.clone(), trace_with_gaps(&[1.0, 2.0, 3.0])]).unwrap();
        let pa = dir.path().join("a.csv");
        write_aggregate_csv(&agg, &pa).unwrap();
        assert_eq!(read_aggregate_csv(&pa).unwrap().rows, agg.rows);
    }

    #[test]
    fn empty_trace_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_trace_csv(&trace_with_gaps(&[]), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "iter,queries_cum,f_clean,gap,wall_ms\n");
    }

    #[test]
    fn malformed_csv_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "iter,mean_gap,std_gap,n\n0,1.0,0,1\n1,oops,0,1\n").unwrap();
        match read_aggregate_csv(&p) {
            Err(Error::Csv { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&p, "a,b\n").unwrap();
        assert!(matches!(read_aggregate_csv(&p), Err(Error::Csv { line: 1, .. })));
    }

    #[test]
    fn svg_shapes() {
        let one = vec![("only".to_string(), agg_from_means(&[2.0]))];
        let svg = render_plot_svg(&one, true);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);

        let zero = vec![("z".to_string(), agg_from_means(&[1.0, 0.0, -1.0]))];
        let svg = render_plot_svg(&zero, true);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        assert!(svg.contains("1e-16.0"));

        let two = vec![
            ("a<b".to_string(), agg_from_means(&[3.0, 2.0])),
            ("c".to_string(), agg_from_means(&[1.0, 0.5])),
        ];
        let svg = render_plot_svg(&two, false);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
    }
}
