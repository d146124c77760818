use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sfe_harness::catalog::{CaseId, CaseKind, CaseSpec};
use sfe_harness::config::{CaseOverrides, RunConfig};
use sfe_harness::emit::emit;
use sfe_harness::study::{run_case, CaseOutcome, StudyOptions};

#[derive(Parser)]
#[command(name = "sfe", version, about = "Spectral embedded-domain solvers with smooth forcing extension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fourier continuation of a function from an interval.
    Extend(CommonArgs),
    /// Elliptic convergence studies.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Write every solved field as CSV and binary into the output directory.
        #[arg(long)]
        dump: bool,
        /// With --dump, also write each assembled constraint system.
        #[arg(long, requires = "dump")]
        dump_systems: bool,
    },
    /// Heat-equation convergence studies.
    Heat(CommonArgs),
    /// Dirichlet eigenvalues by shifted inverse iteration.
    Eigs(CommonArgs),
    /// Run any mix of cases named in a config file (or the whole catalog).
    Converge(CommonArgs),
    /// Print the case catalog.
    ListCases,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML file listing cases and parameter overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog case to run with its defaults (repeatable).
    #[arg(long = "case")]
    cases: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "sfe-out")]
    out: PathBuf,
    /// Random seed; overrides seeds in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent cells.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the grid sizes of every selected case.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Override the regularity orders of every selected case.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    k: Option<Vec<i32>>,
}

fn select(args: &CommonArgs, kind: Option<CaseKind>) -> Result<(Vec<CaseSpec>, Option<usize>)> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => RunConfig::default(),
    };
    for c in &args.cases {
        config.case.push(CaseOverrides::for_case(c.parse()?));
    }
    if config.case.is_empty() {
        config.case = CaseId::ALL
            .iter()
            .filter(|id| kind.map_or(true, |k| id.kind() == k))
            .map(|&id| CaseOverrides::for_case(id))
            .collect();
    }
    for o in &mut config.case {
        if args.n.is_some() {
            o.n = args.n.clone();
        }
        if args.k.is_some() {
            o.k = args.k.clone();
        }
    }
    let specs = config.resolve(args.seed)?;
    if let Some(kind) = kind {
        if let Some(s) = specs.iter().find(|s| s.id.kind() != kind) {
            bail!("case {} does not belong to this subcommand", s.id);
        }
    }
    Ok((specs, args.threads.or(config.threads)))
}

fn summarize(outcome: &CaseOutcome) {
    if let Some(rec) = outcome.convergence() {
        for (k, rate) in &rec.rates {
            let errors: Vec<String> = rec
                .rows_for(*k)
                .map(|r| {
                    let flag = if r.within_tolerance { "" } else { "*" };
                    format!("N={}:{:.3e}{flag}", r.n, r.error_inf)
                })
                .collect();
            let slope = rate.slope.map_or("n/a".to_string(), |s| format!("{s:.3}"));
            println!("  k={k:>2}  rate={slope}  {}", errors.join("  "));
        }
        for f in &rec.failures {
            println!("  failed k={} N={}: {}", f.k, f.n, f.message);
        }
        if rec.rows.iter().any(|r| !r.within_tolerance && r.error_inf.is_finite()) {
            println!("  * constraint residual above tolerance (truncated least-squares solution)");
        }
        for (k, res) in &rec.reference_residuals {
            println!("  reference k={k}: constraint residual {res:.3e}");
        }
    }
    if let Some(rec) = outcome.eigen() {
        for r in &rec.rows {
            println!(
                "  N={} shift={} lambda={:.10} lambda*|Omega|={:.6} iterations={}",
                r.n, r.shift, r.eigenvalue, r.scaled, r.iterations
            );
        }
        for (n, k, shift, msg) in &rec.failures {
            println!("  failed N={n} k={k} shift={shift}: {msg}");
        }
    }
}

fn execute(args: &CommonArgs, kind: Option<CaseKind>, opts: StudyOptions) -> Result<()> {
    let (specs, threads) = select(args, kind)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("building thread pool")?;
    for spec in &specs {
        println!("{}", spec.id);
        let outcome = pool.install(|| run_case(spec, &opts))?;
        summarize(&outcome);
        for path in emit(&outcome, spec, &args.out, threads)? {
            println!("  wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::ListCases => {
            for id in CaseId::ALL {
                println!("{:<22} {}", id.as_str(), id.description());
            }
            Ok(())
        }
        Command::Extend(a) => execute(&a, Some(CaseKind::Extension), StudyOptions::default()),
        Command::Solve {
            common,
            dump,
            dump_systems,
        } => {
            let opts = StudyOptions {
                dump_dir: dump.then(|| common.out.join("fields")),
                dump_systems,
            };
            execute(&common, Some(CaseKind::Elliptic), opts)
        }
        Command::Heat(a) => execute(&a, Some(CaseKind::Heat), StudyOptions::default()),
        Command::Eigs(a) => execute(&a, Some(CaseKind::Eigen), StudyOptions::default()),
        Command::Converge(a) => execute(&a, None, StudyOptions::default()),
    }
}
