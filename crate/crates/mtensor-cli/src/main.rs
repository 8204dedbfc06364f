mod parse;
mod suite;

use clap::{Args, Parser, Subcommand, ValueEnum};
use minkowski_tensors::error::{Error, Result};
use minkowski_tensors::experiments::{convergence_study, ExperimentConfig};
use minkowski_tensors::smoothbody::{phi_general_curvature, phi_j1_smooth};
use minkowski_tensors::sphereint::QuadratureSpec;
use minkowski_tensors::symtensor::{metric_tensor, SymTensor};
use minkowski_tensors::valuations::{local_tensor, LocalTensorSpec};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Minkowski tensors of polytopes and smooth bodies.
#[derive(Parser)]
#[command(name = "mtensor", version)]
struct Cli {
    /// Worker threads (overrides MTENSOR_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate Q^m φ_k^{r,s,j}(P, η) on one body.
    Compute(ComputeArgs),
    /// Run the identity checks and print a pass/fail table.
    IdentitySuite(SuiteArgs),
    /// Lifted-paraboloid convergence studies.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Summary,
}

#[derive(Args)]
struct ComputeArgs {
    /// Built-in body such as `cube`, `segment:L=2`, `box:a=1,b=2,c=3`, `geodesic:R=1,level=3`.
    #[arg(long, conflicts_with_all = ["polytope", "surface"])]
    body: Option<String>,
    /// Polytope file (JSON with `dimension`, `vertices`, optional `faces`).
    #[arg(long, conflicts_with = "surface")]
    polytope: Option<PathBuf>,
    /// Smooth surface in R^3: `ball:R=1`, `paraboloid:h=1`, `ellipsoid:a=1,b=1,c=2`.
    #[arg(long)]
    surface: Option<String>,
    /// Ambient dimension for built-in bodies.
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    j: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    /// Test function: `full`, `bump:mu=0.3`, `indicator:mu=0.3,axis=0;0;-1`, `box:lo=..,hi=..,cone=..`.
    #[arg(long, default_value = "full")]
    eta: String,
    #[command(flatten)]
    quad: QuadArgs,
    /// Write the tensor in text form to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Summary)]
    format: Format,
}

#[derive(Args)]
struct QuadArgs {
    /// Relative quadrature tolerance.
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
    /// Seed of the randomized quadrature.
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

impl QuadArgs {
    fn spec(&self) -> Result<QuadratureSpec> {
        let q = QuadratureSpec { rel_tol: self.tol, seed: self.seed, ..QuadratureSpec::default() };
        q.validate()?;
        Ok(q)
    }
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    all: bool,
    #[arg(long)]
    translation: bool,
    #[arg(long)]
    homogeneity: bool,
    #[arg(long)]
    valuation: bool,
    #[arg(long)]
    independence: bool,
    #[arg(long)]
    mcmullen: bool,
    #[command(flatten)]
    quad: QuadArgs,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum ExperimentAction {
    /// Run a TOML experiment configuration.
    Run {
        config: PathBuf,
        /// Override the configuration's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the CSV table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the JSON summary (levels, target, certificate) here.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Regime(_) | Error::WindowTooSmall(_) | Error::Numeric(_) | Error::DegenerateChart(_) | Error::NotOrthogonal(_) | Error::NotOrthonormal(_) => 3,
        _ => 2,
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::Config(e.to_string()))
        }
    }
}

fn tensor_csv(t: &SymTensor) -> String {
    let mut s = String::from("index,value\n");
    for (alpha, v) in t.multi_indices().iter().zip(t.coeffs()) {
        let idx: Vec<String> = alpha.iter().map(|i| i.to_string()).collect();
        s.push_str(&format!("{},{:e}\n", idx.join(" "), v));
    }
    s
}

fn tensor_summary(label: &str, t: &SymTensor, err: f64) -> String {
    if t.rank() == 0 {
        return format!("{label} = {}\nerror estimate {err:.3e}\n", t.value());
    }
    let mut s = format!("{label}: dimension {}, rank {}, error estimate {err:.3e}\n", t.dimension(), t.rank());
    for (alpha, v) in t.multi_indices().iter().zip(t.coeffs()) {
        if *v != 0.0 {
            let idx: Vec<String> = alpha.iter().map(|i| i.to_string()).collect();
            s.push_str(&format!("  [{}] {v}\n", idx.join(" ")));
        }
    }
    s
}

fn compute(a: &ComputeArgs) -> Result<()> {
    let quad = a.quad.spec()?;
    let spec = LocalTensorSpec::new(a.k, a.r, a.s, a.j, a.m);
    let (tensor, err) = if let Some(text) = &a.surface {
        let surface = parse::surface(text)?;
        let f = parse::weight(&a.eta)?;
        let (v, e) = match a.j {
            1 => phi_j1_smooth(&surface, a.r, a.s, &f, &quad)?,
            0 => return Err(Error::Unsupported("smooth surfaces support j = 1 only".into())),
            _ => phi_general_curvature(&surface, a.k, a.r, a.s, &f, &quad)?,
        };
        if a.k != 1 {
            return Err(Error::Unsupported(format!("smooth surfaces support k = 1 only, got k = {}", a.k)));
        }
        (metric_tensor(3).power(a.m).sym_product(&v)?, e)
    } else {
        let p = match (&a.body, &a.polytope) {
            (Some(b), None) => parse::body(b, a.n)?,
            (None, Some(path)) => parse::polytope_file(path)?,
            _ => return Err(Error::Config("give one of --body, --polytope or --surface".into())),
        };
        spec.validate(p.ambient_dim()).map_err(|e| Error::Config(e.to_string()))?;
        let eta = parse::eta(&a.eta, p.ambient_dim())?;
        let v = local_tensor(&p, &spec, &eta, &quad)?;
        (v.tensor, v.error_estimate)
    };
    if let Some(path) = &a.out {
        write_output(Some(path), &tensor.to_text())?;
    }
    let text = match a.format {
        Format::Csv => tensor_csv(&tensor),
        Format::Summary => tensor_summary(&spec.to_string(), &tensor, err),
    };
    write_output(None, &text)
}

fn identity_suite(a: &SuiteArgs) -> Result<bool> {
    let mut scope = suite::Scope {
        translation: a.translation,
        homogeneity: a.homogeneity,
        valuation: a.valuation,
        independence: a.independence,
        mcmullen: a.mcmullen,
    };
    if a.all || scope.is_empty() {
        scope = suite::Scope::all();
    }
    let rows = suite::run(scope, &a.quad.spec()?)?;
    let ok = rows.iter().all(|r| r.status == "PASS");
    let text = match a.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r).map_err(|e| Error::Numeric(e.to_string()))?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?).map_err(|e| Error::Numeric(e.to_string()))?
        }
        Format::Summary => {
            let failed: Vec<String> = rows.iter().filter(|r| r.status != "PASS").map(|r| format!("  {} {} {} defect {:.3e}\n", r.check, r.case, r.mapping, r.defect)).collect();
            format!("{} checks, {} failed\n{}", rows.len(), failed.len(), failed.concat())
        }
    };
    write_output(a.out.as_deref(), &text)?;
    Ok(ok)
}

fn experiment(action: &ExperimentAction) -> Result<()> {
    let ExperimentAction::Run { config, seed, out, summary, format } = action;
    let text = std::fs::read_to_string(config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(s) = seed {
        cfg.seed = *s;
    }
    if cfg.name.is_empty() {
        cfg.name = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    let report = convergence_study(&cfg)?;
    if let Some(path) = summary {
        write_output(Some(path), &report.summary_json()?)?;
    }
    let body = match format {
        Format::Csv => report.to_csv()?,
        Format::Summary => report.summary_json()?,
    };
    write_output(out.as_deref(), &body)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Compute(a) => compute(a).map(|_| true),
        Command::IdentitySuite(a) => identity_suite(a),
        Command::Experiment { action } => experiment(action).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| std::env::var("MTENSOR_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
