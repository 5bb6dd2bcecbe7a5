//! Batch front end: resolves run configurations, drives the diagnostics and
//! writes versioned reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use limlab::diagnostics::{
    ap_membership_trend, estimate_doubling, radial_window_infimum, strip_infimum, unit_cube_infimum, BallFamily,
    DoublingEstimate, InfimumReport, Membership, MembershipTrend,
};
use limlab::limits::{radial_census, trace_ray, trace_vertical, LimitCensus, Schedule, TraceConfig, TraceReport};
use limlab::rp::{rp_terms, sup_rp_sweep, RpReport, SweepReport, SweepVerdict, Verdict};
use limlab::suites::{run_suite, strip_chain, Suite, SuiteReport};
use limlab::trend::Trend;
use limlab::witnesses::{axis_chain, loglog_function, TestFunction};
use limlab::{Cube, QuadratureConfig, WeightKind, WeightSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const SUITE_FAILED: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] limlab::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use limlab::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } => exit::USAGE,
            CliError::Core(E::InvalidParameter(_) | E::DimensionMismatch { .. } | E::Precondition(_)) => exit::USAGE,
            CliError::Core(E::SingularPoint(_) | E::ZeroMass { .. } | E::InsufficientDivergence { .. }) => exit::NUMERICAL,
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Classify,
    Trace,
    Census,
    Suite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Report,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LineArg {
    Ray { direction: Vec<f64> },
    Vertical { base: Vec<f64> },
}

/// Fully resolved inputs of one run; embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub weight_path: Option<PathBuf>,
    pub weight: Option<WeightSpec>,
    pub function: Option<TestFunction>,
    pub suite: Option<String>,
    pub p: f64,
    pub q: Option<f64>,
    pub d: usize,
    pub i_max: i32,
    pub samples: usize,
    pub seed: u64,
    pub t_grid: Schedule,
    pub rays: usize,
    pub line: Option<LineArg>,
    pub out: PathBuf,
    pub format: Format,
}

impl RunConfig {
    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig::default().with_seed(self.seed).with_samples(self.samples)
    }
}

/// Parses `t0:ratio:n` or `t0:ratio:n:o1,o2,...`.
pub fn parse_t_grid(spec: &str) -> Result<Schedule, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if !(3..=4).contains(&parts.len()) {
        return usage(format!("t-grid must be t0:ratio:n[:offsets], got {spec:?}"));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number {s:?} in t-grid")));
    let offsets = match parts.get(3) {
        Some(o) => parse_list(o)?,
        None => Schedule::default().offsets,
    };
    let n = parts[2]
        .trim()
        .parse::<usize>()
        .map_err(|_| CliError::Usage(format!("bad count {:?} in t-grid", parts[2])))?;
    let s = Schedule {
        t0: num(parts[0])?,
        ratio: num(parts[1])?,
        n,
        offsets,
    };
    s.validate()?;
    Ok(s)
}

/// Comma-separated reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number {v:?}"))))
        .collect()
}

/// A function document path, or one of `constant:C`, `loglog`, `inverse-norm`,
/// `axis-chain:K`, `strip-chain:K` in dimension `d`.
pub fn resolve_function(spec: &str, d: usize) -> Result<TestFunction, CliError> {
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let int_arg = || arg.parse::<i32>().map_err(|_| CliError::Usage(format!("{name} needs an integer, got {arg:?}")));
    let f = match name {
        "constant" => TestFunction::constant(d, arg.parse().map_err(|_| CliError::Usage(format!("bad constant {arg:?}")))?),
        "loglog" => loglog_function(d),
        "inverse-norm" => TestFunction::inverse_norm(d),
        "axis-chain" => axis_chain(d, int_arg()?)?,
        "strip-chain" => strip_chain(d, int_arg()?)?,
        _ => {
            let path = Path::new(spec);
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.into(),
                source,
            })?;
            let f: TestFunction =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed function document: {e}")))?;
            if f.d != d {
                return usage(format!("function has d = {}, but --d is {d}", f.d));
            }
            f
        }
    };
    Ok(f)
}

pub fn read_weight(path: &Path) -> Result<WeightSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    Ok(WeightSpec::from_json(&text)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Yes,
    No,
    NotGuaranteed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub reason: String,
}

impl Prediction {
    fn new(label: Label, reason: impl Into<String>) -> Self {
        Self {
            label,
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub radial_limits: Prediction,
    pub cube_averages: Prediction,
    pub vertical_limits: Prediction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub ap: MembershipTrend,
    pub aq: Option<MembershipTrend>,
    pub doubling: DoublingEstimate,
    pub rp: RpReport,
    pub sweep: Option<SweepReport>,
    pub unit_cube_infimum: InfimumReport,
    pub strip_infimum: Option<InfimumReport>,
    pub window_infimum: Option<InfimumReport>,
    pub predictions: Predictions,
}

const AP_LEVELS: [u32; 6] = [1, 2, 3, 4, 5, 6];
const AP_BALLS: usize = 32;
const CUBE_SEARCH_RADIUS: f64 = 4096.0;
const STRIP_HEIGHT: u32 = 1024;
const WINDOW_RADIUS: f64 = 16384.0;

fn is_radial(w: &WeightSpec) -> bool {
    matches!(w.kind, WeightKind::Constant { .. } | WeightKind::Power { .. } | WeightKind::RadialProfile { .. })
}

/// Runs every weight diagnostic and derives the theorem predictions.
pub fn run_classify(cfg: &RunConfig) -> Result<Classification, CliError> {
    let Some(w) = &cfg.weight else {
        return usage("classify needs --weight");
    };
    let quad = cfg.quadrature();
    let d = w.d;
    let p = cfg.p;
    let ap = ap_membership_trend(w, p, &quad, &AP_LEVELS, AP_BALLS)?;
    let aq = cfg.q.map(|q| ap_membership_trend(w, q, &quad, &AP_LEVELS, AP_BALLS)).transpose()?;
    let family = BallFamily::new(AP_BALLS, (0.01, 100.0), Cube::new(vec![0.0; d], 50.0)?);
    let doubling = estimate_doubling(w, &quad, &family)?;
    let rp = rp_terms(w, p, (1, cfg.i_max), &quad)?;
    let unit = unit_cube_infimum(w, CUBE_SEARCH_RADIUS, 0.5, &quad)?;
    let strip = strip_infimum(w, &Cube::new(vec![0.0; d - 1], 1.0)?, STRIP_HEIGHT, &quad)?;
    let window = if is_radial(w) { radial_window_infimum(w, WINDOW_RADIUS).ok() } else { None };
    let sweep = if matches!(w.kind, WeightKind::Product { .. }) && p > 1.0 {
        let grid: Vec<f64> = (0..=12).map(|k| f64::from(k).exp2()).collect();
        Some(sup_rp_sweep(w, p, &grid, (1, cfg.i_max), &quad)?)
    } else {
        None
    };
    let predictions = predict(d, p, cfg.q, &ap, aq.as_ref(), &rp, &unit, &strip, window.as_ref(), sweep.as_ref(), w);
    Ok(Classification {
        ap,
        aq,
        doubling,
        rp,
        sweep,
        unit_cube_infimum: unit,
        strip_infimum: Some(strip),
        window_infimum: window,
        predictions,
    })
}

#[allow(clippy::too_many_arguments)]
fn predict(
    d: usize,
    p: f64,
    q: Option<f64>,
    ap: &MembershipTrend,
    aq: Option<&MembershipTrend>,
    rp: &RpReport,
    unit: &InfimumReport,
    strip: &InfimumReport,
    window: Option<&InfimumReport>,
    sweep: Option<&SweepReport>,
    w: &WeightSpec,
) -> Predictions {
    use Label::*;
    if ap.verdict != Membership::Bounded {
        let why = format!("A_p membership not established ({:?})", ap.verdict);
        return Predictions {
            radial_limits: Prediction::new(NotGuaranteed, why.clone()),
            cube_averages: Prediction::new(NotGuaranteed, why.clone()),
            vertical_limits: Prediction::new(NotGuaranteed, why),
        };
    }
    let radial = match rp.verdict {
        Verdict::Converged => Prediction::new(Yes, "R_p finite"),
        Verdict::Diverged => Prediction::new(No, "R_p infinite: some function tends to infinity"),
        _ => Prediction::new(NotGuaranteed, "R_p verdict inconclusive"),
    };
    let below_dim = p < d as f64;
    let cubes = match (below_dim, unit.trend) {
        (false, _) => Prediction::new(NotGuaranteed, "p >= d"),
        (true, Trend::BoundedBelow) => Prediction::new(Yes, "unit-cube masses bounded below"),
        (true, Trend::Vanishing) => Prediction::new(No, "unit-cube masses vanish"),
        _ => Prediction::new(NotGuaranteed, "unit-cube infimum inconclusive"),
    };
    let vertical = if radial.label == No {
        Prediction::new(No, "radial limits fail")
    } else if let Some(win) = window.filter(|_| is_radial(w)) {
        match win.trend {
            Trend::BoundedBelow => Prediction::new(Yes, "radial weight with window integrals bounded below"),
            _ => Prediction::new(NotGuaranteed, "radial weight with vanishing window integrals"),
        }
    } else if let Some(s) = sweep.filter(|_| p > 1.0 && below_dim) {
        match s.verdict {
            SweepVerdict::UniformlyBounded => Prediction::new(Yes, "product weight with translated R_p uniformly bounded"),
            _ => Prediction::new(NotGuaranteed, "product weight with translated R_p unbounded"),
        }
    } else if strip.trend != Trend::BoundedBelow {
        Prediction::new(NotGuaranteed, "strip masses vanish or are inconclusive")
    } else if let (Some(q), Some(aq)) = (q, aq) {
        let in_aq = aq.verdict == Membership::Bounded;
        let qd = q * d as f64;
        if in_aq && p > 1.0 && below_dim && q <= (p + d as f64 - 1.0) / d as f64 && unit.trend == Trend::BoundedBelow {
            Prediction::new(Yes, "A_q with q <= (p+d-1)/d and unit-cube masses bounded below")
        } else {
            Prediction::new(NotGuaranteed, format!("no sufficient condition holds for q = {q} (qd-d+1 = {})", qd - d as f64 + 1.0))
        }
    } else {
        Prediction::new(NotGuaranteed, "no sufficient condition checked; pass --q")
    };
    Predictions {
        radial_limits: radial,
        cube_averages: cubes,
        vertical_limits: vertical,
    }
}

pub fn run_trace(cfg: &RunConfig) -> Result<TraceReport, CliError> {
    let Some(f) = &cfg.function else {
        return usage("trace needs --function");
    };
    let tc = TraceConfig::default();
    Ok(match &cfg.line {
        Some(LineArg::Ray { direction }) => trace_ray(f, direction, &cfg.t_grid, &tc)?,
        Some(LineArg::Vertical { base }) => trace_vertical(f, base, &cfg.t_grid, &tc)?,
        None => return usage("trace needs --ray or --vertical"),
    })
}

pub fn run_census(cfg: &RunConfig) -> Result<LimitCensus, CliError> {
    let Some(f) = &cfg.function else {
        return usage("census needs --function");
    };
    Ok(radial_census(f, cfg.rays, &cfg.t_grid, cfg.seed, &TraceConfig::default())?)
}

pub fn run_suite_cmd(cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    let name = cfg.suite.as_deref().unwrap_or_default();
    let Some(suite) = Suite::parse(name) else {
        let known: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        return usage(format!("unknown suite {name:?}; known: {}", known.join(", ")));
    };
    if cfg.weight.is_some() && suite != Suite::DivergenceWitness {
        return usage(format!("suite {name} takes no --weight"));
    }
    Ok(run_suite(suite, cfg.seed, cfg.weight.as_ref())?)
}

/// The rendered artifact of a run plus a one-line summary for the terminal.
pub struct Output {
    pub text: String,
    pub summary: Vec<String>,
    pub exit_code: i32,
}

fn report(cfg: &RunConfig, result: serde_json::Value) -> String {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "version": VERSION,
        "config": cfg,
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_with_config(cfg: &RunConfig, body: &str) -> String {
    format!(
        "# schema_version: {SCHEMA_VERSION}\n# version: {VERSION}\n# config: {}\n{body}",
        serde_json::to_string(cfg).expect("configs serialize")
    )
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("results serialize")
}

/// Runs the configured command and renders its artifact.
pub fn execute(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut exit_code = exit::OK;
    let (text, summary) = match cfg.command {
        Command::Classify => {
            let c = run_classify(cfg)?;
            let pr = &c.predictions;
            let summary = vec![
                format!("A_p trend: {:?} (slope {:.3})", c.ap.verdict, c.ap.slope),
                format!("doubling estimate: {:.4}", c.doubling.value),
                format!("R_p: {:?}", c.rp.verdict),
                format!("unit-cube infimum: {:?}", c.unit_cube_infimum.trend),
                format!("radial limits: {:?} ({})", pr.radial_limits.label, pr.radial_limits.reason),
                format!("cube averages: {:?} ({})", pr.cube_averages.label, pr.cube_averages.reason),
                format!("vertical limits: {:?} ({})", pr.vertical_limits.label, pr.vertical_limits.reason),
            ];
            let text = match cfg.format {
                Format::Report => report(cfg, to_value(&c)),
                Format::Csv => csv_with_config(cfg, &c.rp.to_csv()),
            };
            (text, summary)
        }
        Command::Trace => {
            let t = run_trace(cfg)?;
            let summary = vec![format!("verdict: {}", t.verdict.label())];
            let text = match cfg.format {
                Format::Report => report(cfg, to_value(&t)),
                Format::Csv => csv_with_config(cfg, &t.to_csv()),
            };
            (text, summary)
        }
        Command::Census => {
            if cfg.format == Format::Csv {
                return usage("census writes reports only");
            }
            let c = run_census(cfg)?;
            let summary = vec![format!(
                "converged {:.3}, oscillating {:.3}, divergent {:.3}, modal value {:?}",
                c.converged_fraction, c.oscillating_fraction, c.divergent_fraction, c.modal_value
            )];
            (report(cfg, to_value(&c)), summary)
        }
        Command::Suite => {
            if cfg.format == Format::Csv {
                return usage("suite writes reports only");
            }
            let s = run_suite_cmd(cfg)?;
            let summary = s.criteria.iter().map(|c| c.summary()).collect();
            if !s.passed {
                exit_code = exit::SUITE_FAILED;
            }
            (report(cfg, to_value(&s)), summary)
        }
    };
    Ok(Output {
        text,
        summary,
        exit_code,
    })
}

/// Writes `text` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.into(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Recovers the embedded configuration from a report or CSV artifact.
pub fn config_from_artifact(text: &str) -> Result<RunConfig, CliError> {
    let bad = |e: serde_json::Error| CliError::Usage(format!("artifact has no readable config: {e}"));
    if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# config: ")) {
        return serde_json::from_str(line).map_err(bad);
    }
    let doc: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
    match doc.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        other => return usage(format!("unsupported schema version {other:?}")),
    }
    serde_json::from_value(doc["config"].clone()).map_err(bad)
}
