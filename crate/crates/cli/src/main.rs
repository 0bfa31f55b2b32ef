use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use opprec_core::experiment::{
    self, emit_report, seed_from_env, Beta, ExperimentSpec, Format, Geometry, OperatorKind, Refinement, Row,
};

#[derive(Parser)]
#[command(
    name = "opprec",
    version,
    about = "Operator preconditioning experiments on NVB meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a mesh family and report condition numbers and timings per level.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Cube,
    UnitSquare,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefineArg {
    Uniform,
    Corners,
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorArg {
    SingleLayer,
    Stiffness,
    Mass,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "cube")]
    geometry: GeometryArg,
    #[arg(long = "refine", value_enum, default_value = "uniform")]
    refine: RefineArg,
    /// Number of table rows.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    /// A positive number or `auto`.
    #[arg(long, default_value = "5.3")]
    beta: String,
    #[arg(long, value_enum, default_value = "single-layer")]
    operator: OperatorArg,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Compare fast operators against dense oracles on small levels.
    #[arg(long)]
    dense_check: bool,
}

fn parse_beta(s: &str) -> Result<Beta> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Beta::Auto);
    }
    let b: f64 = s.parse().with_context(|| format!("invalid beta `{s}`"))?;
    if b.is_nan() || b <= 0.0 {
        bail!("beta must be positive, got {b}");
    }
    Ok(Beta::Fixed(b))
}

fn render(rows: &[Row], format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => experiment::rows_to_csv(rows),
        Format::Json => experiment::rows_to_json(rows)?,
    })
}

fn run(args: RunArgs) -> Result<()> {
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring thread pool")?;
    }
    let spec = ExperimentSpec {
        geometry: match args.geometry {
            GeometryArg::Cube => Geometry::Cube,
            GeometryArg::UnitSquare => Geometry::UnitSquare,
        },
        refinement: match args.refine {
            RefineArg::Uniform => Refinement::Uniform,
            RefineArg::Corners => Refinement::Corners,
        },
        levels: args.levels,
        s: args.s,
        beta: parse_beta(&args.beta)?,
        operator: match args.operator {
            OperatorArg::SingleLayer => OperatorKind::SingleLayer,
            OperatorArg::Stiffness => OperatorKind::Stiffness,
            OperatorArg::Mass => OperatorKind::Mass,
            OperatorArg::None => OperatorKind::None,
        },
        seed: seed_from_env(),
        dense_check: args.dense_check,
    };
    let format = match args.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    spec.validate()?;

    let mut rows = Vec::new();
    let mut flush_error = None;
    let result = experiment::run_experiment_with(&spec, |row| {
        rows.push(row.clone());
        eprintln!(
            "level {}: dofs {} kappa_ga {}",
            rows.len() - 1,
            row.dofs,
            row.kappa_ga
                .map(experiment::format_number)
                .unwrap_or_else(|| "-".into())
        );
        if let Some(path) = &args.out {
            if let Err(e) = emit_report(&rows, format, path) {
                flush_error.get_or_insert(e);
            }
        }
    });
    if let Some(e) = flush_error {
        return Err(e).context("writing report");
    }
    let output = result?;
    if let Some(beta) = output.beta {
        eprintln!("beta = {}", experiment::format_number(beta));
    }
    for (level, dev) in output.dense_deviation.iter().enumerate() {
        if let Some(d) = dev {
            eprintln!("level {level}: dense oracle deviation {d:.3e}");
        }
    }
    match &args.out {
        Some(path) => emit_report(&output.rows, format, path).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", render(&output.rows, format)?),
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
    }
}
