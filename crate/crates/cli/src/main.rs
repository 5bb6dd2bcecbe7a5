use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use limlab::QuadratureConfig;
use limlab_cli::{
    config_from_artifact, execute, parse_list, parse_t_grid, read_weight, resolve_function, write_atomic, CliError,
    Command, Format, LineArg, RunConfig,
};

#[derive(Parser)]
#[command(name = "limlab", version, about = "Limits at infinity of weighted Sobolev functions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Weight diagnostics and theorem predictions.
    Classify(Common),
    /// One radial or vertical trace.
    Trace(Common),
    /// Radial census over seeded directions.
    Census(Common),
    /// Built-in reproduction suite.
    Suite {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Re-runs the configuration embedded in a report.
    Replay {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Report,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Weight document `{kind, d, params}`.
    #[arg(long)]
    weight: Option<PathBuf>,
    /// Function document or builtin (`constant:C`, `loglog`, `inverse-norm`, `axis-chain:K`, `strip-chain:K`).
    #[arg(long)]
    function: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 40)]
    imax: i32,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// `t0:ratio:n[:o1,o2,...]`
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long, default_value_t = 64)]
    rays: usize,
    /// Ray direction, comma separated.
    #[arg(long, conflicts_with = "vertical", allow_hyphen_values = true)]
    ray: Option<String>,
    /// Vertical base point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    vertical: Option<String>,
}

fn resolve(command: Command, suite: Option<String>, c: Common) -> Result<RunConfig, CliError> {
    let weight = c.weight.as_deref().map(read_weight).transpose()?;
    let d = match (c.d, &weight) {
        (Some(d), Some(w)) if d != w.d => return Err(CliError::Usage(format!("--d {d} but the weight has d = {}", w.d))),
        (Some(d), _) => d,
        (None, Some(w)) => w.d,
        (None, None) => 3,
    };
    let function = c.function.as_deref().map(|f| resolve_function(f, d)).transpose()?;
    let line = match (c.ray, c.vertical) {
        (Some(r), _) => Some(LineArg::Ray { direction: parse_list(&r)? }),
        (_, Some(v)) => Some(LineArg::Vertical { base: parse_list(&v)? }),
        _ => None,
    };
    let t_grid = c.t_grid.as_deref().map(parse_t_grid).transpose()?.unwrap_or_default();
    let format = match c.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Report) => Format::Report,
        None if command == Command::Trace => Format::Csv,
        None => Format::Report,
    };
    if c.p.is_nan() || c.p < 1.0 {
        return Err(CliError::Usage(format!("--p must be at least 1, got {}", c.p)));
    }
    Ok(RunConfig {
        command,
        weight_path: c.weight,
        weight,
        function,
        suite,
        p: c.p,
        q: c.q,
        d,
        i_max: c.imax,
        samples: c.samples.unwrap_or(QuadratureConfig::default().samples_per_region),
        seed: c.seed,
        t_grid,
        rays: c.rays,
        line,
        out: c.out,
        format,
    })
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let cfg = match cli.command {
        Cmd::Classify(c) => resolve(Command::Classify, None, c)?,
        Cmd::Trace(c) => resolve(Command::Trace, None, c)?,
        Cmd::Census(c) => resolve(Command::Census, None, c)?,
        Cmd::Suite { name, common } => resolve(Command::Suite, Some(name), common)?,
        Cmd::Replay { report, out } => {
            let text = std::fs::read_to_string(&report).map_err(|source| CliError::Io { path: report, source })?;
            let cfg = config_from_artifact(&text)?;
            let output = execute(&cfg)?;
            write_atomic(&out, &output.text)?;
            return Ok(finish(output));
        }
    };
    let output = execute(&cfg)?;
    write_atomic(&cfg.out, &output.text)?;
    Ok(finish(output))
}

fn finish(output: limlab_cli::Output) -> i32 {
    for line in &output.summary {
        println!("{line}");
    }
    output.exit_code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
