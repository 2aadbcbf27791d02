//! `matchprior` command-line front end.
//!
//! Exit status: 0 ok, 1 check failure, 2 input error, 3 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use matchprior::approx::{credible_interval_with_full, evaluate_with_full, PValues, TailFormat};
use matchprior::inference::{fit_full, FitResult};
use matchprior::montecarlo::{
    parse_methods, replicate_data, run_coverage, run_type1, MethodSpec, ModelId, SimConfig, DEFAULT_SEED,
};
use matchprior::numerics::format_sig;
use matchprior::prior::{matching_log_prior, pde_residual, Prior, PriorSpec, TraceMode, TraceOptions};
use matchprior::{exp_ratio_model, logistic_model, Dataset, Model, ParamPoint};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Parser, Debug)]
#[command(name = "matchprior", version, about = "Matching-prior p-values, credible intervals and simulation studies")]
struct Cli {
    /// Directory for output files and manifest.json; without it the manifest goes to stderr.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
enum Command {
    /// R, T and p-values for H0: psi = psi0 on a CSV dataset.
    Pvalue(PvalueArgs),
    /// Equal-tailed credible interval for psi on a CSV dataset.
    Ci(CiArgs),
    /// Monte Carlo type I error study.
    Simulate(SimulateArgs),
    /// Monte Carlo coverage of credible intervals.
    Coverage(CoverageArgs),
    /// PDE residual of a prior over a parameter grid.
    Check(CheckArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Trace {
    Backward,
    Forward,
}

impl Trace {
    fn options(self) -> TraceOptions {
        TraceOptions::default().with_mode(self.mode())
    }

    fn mode(self) -> TraceMode {
        match self {
            Trace::Backward => TraceMode::Backward,
            Trace::Forward => TraceMode::Forward,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Scale {
    /// 100,000 exponential-ratio or 10,000 logistic replicates.
    Desk,
    /// 1,000,000 exponential-ratio or 10,000 logistic replicates.
    Full,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct DataArgs {
    /// CSV file with a header row and columns x,y.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "exp-ratio")]
    model: ModelId,
    /// default, loglambda, qfam:<q>[@c|@hat], analytic-invpsi, analytic-invpsilambda.
    #[arg(long, default_value = "default")]
    ic: String,
    #[arg(long, default_value = "bn")]
    format: TailFormat,
    #[arg(long, value_enum, default_value_t = Trace::Backward)]
    trace: Trace,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct PvalueArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: DataArgs,
    #[arg(long, allow_negative_numbers = true)]
    psi0: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct CiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: DataArgs,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct StudyArgs {
    #[arg(long, default_value = "exp-ratio")]
    model: ModelId,
    /// Sample size per replicate [default: 10 exp-ratio, 30 logistic].
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<u64>,
    /// Comma-separated methods, e.g. lrt,ic-default,qfam:2/5.
    #[arg(long)]
    methods: Option<String>,
    /// Master seed [default: 20240601].
    #[arg(long)]
    seed: Option<u64>,
    /// Null value [default: the true psi].
    #[arg(long, allow_negative_numbers = true)]
    psi0: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Trace::Backward)]
    trace: Trace,
}

impl StudyArgs {
    fn config(&self, default_reps: u64) -> Result<SimConfig, CliError> {
        let reps = self.reps.unwrap_or(default_reps);
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        let mut cfg = match self.model {
            ModelId::ExpRatio => SimConfig::exp_ratio(reps, seed),
            ModelId::Logistic => SimConfig::logistic(reps, seed),
        };
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(m) = &self.methods {
            cfg.methods = parse_methods(m).map_err(CliError::from)?;
        }
        if let Some(p) = self.psi0 {
            cfg.psi0 = p;
        }
        cfg.threads = self.threads;
        cfg.trace = self.trace.options();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pins every defaulted field so the manifest is self-contained.
    fn pin(&mut self, cfg: &SimConfig) {
        self.n = Some(cfg.n);
        self.reps = Some(cfg.reps);
        self.seed = Some(cfg.master_seed);
        self.psi0 = Some(cfg.psi0);
        self.methods = Some(cfg.methods.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","));
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    study: StudyArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Replicate count when --reps is absent.
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct CoverageArgs {
    #[command(flatten)]
    #[serde(flatten)]
    study: StudyArgs,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value = "bn")]
    format: TailFormat,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct CheckArgs {
    #[arg(long, default_value = "exp-ratio")]
    model: ModelId,
    #[arg(long, default_value = "default")]
    ic: String,
    /// CSV dataset; without it one is simulated from --n and --seed.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Points per axis.
    #[arg(long, default_value_t = 5)]
    grid: usize,
    /// psi range of the grid [default: 0.5 2.5 exp-ratio, -0.5 1.5 logistic].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    psi_range: Option<Vec<f64>>,
    /// lambda range of the grid [default: 0.5 2.5 exp-ratio, -2 0 logistic].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    lambda_range: Option<Vec<f64>>,
    /// psi value the initial curve passes through [default: 1 exp-ratio, 0.5 logistic].
    #[arg(long, allow_negative_numbers = true)]
    anchor: Option<f64>,
    /// Exit with status 1 unless the largest |residual| is below this.
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = Trace::Backward)]
    trace: Trace,
}

#[derive(Args, Debug, Clone)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Compare the regenerated outputs with the files next to the manifest.
    #[arg(long)]
    verify: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InputDigest {
    path: PathBuf,
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    tool: String,
    version: String,
    seed: Option<u64>,
    input: Option<InputDigest>,
    command: Command,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
}

impl From<matchprior::Error> for CliError {
    fn from(e: matchprior::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

/// Everything a command produced.
struct Output {
    name: &'static str,
    text: String,
    files: Vec<(String, Vec<u8>)>,
    input: Option<InputDigest>,
    seed: Option<u64>,
    check_failed: bool,
}

impl Output {
    fn new(name: &'static str, text: String) -> Self {
        Self { name, text, files: Vec::new(), input: None, seed: None, check_failed: false }
    }
}

fn sig(v: f64) -> String {
    format_sig(v, 6)
}

fn read_input(path: &Path) -> Result<(Vec<u8>, InputDigest), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let digest = InputDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    };
    Ok((bytes, digest))
}

fn build_model(id: ModelId, data: &Dataset) -> Result<Box<dyn Model>, CliError> {
    let model: Box<dyn Model> = match id {
        ModelId::ExpRatio => Box::new(exp_ratio_model()),
        ModelId::Logistic => Box::new(logistic_model(data.x().to_vec()).map_err(input_err)?),
    };
    model.validate(data).map_err(input_err)?;
    Ok(model)
}

fn load(args: &DataArgs) -> Result<(Box<dyn Model>, Dataset, InputDigest), CliError> {
    let (bytes, digest) = read_input(&args.data)?;
    let data = Dataset::read_csv(bytes.as_slice())
        .map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
    let model = build_model(args.model, &data)
        .map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", args.data.display())),
            other => other,
        })?;
    Ok((model, data, digest))
}

fn parse_prior(ic: &str, full: Option<&FitResult>) -> Result<Prior, CliError> {
    let spec: PriorSpec = ic.parse().map_err(input_err)?;
    Ok(spec.resolve(full)?)
}

fn header(out: &mut String, model: &dyn Model, data: &Dataset, full: &FitResult) {
    let _ = writeln!(out, "model       {} (n = {})", model.name(), data.len());
    let _ = writeln!(out, "psi_hat     {}", sig(full.estimate.psi));
    let _ = writeln!(out, "lambda_hat  {}", sig(full.estimate.lambda));
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_pvalue(args: &PvalueArgs) -> Result<Output, CliError> {
    let a = &args.common;
    let (model, data, digest) = load(a)?;
    let full = fit_full(model.as_ref(), &data)?;
    model.check_domain(ParamPoint::new(args.psi0, full.estimate.lambda)).map_err(input_err)?;
    let prior = parse_prior(&a.ic, Some(&full))?;
    let res = evaluate_with_full(model.as_ref(), &data, &full, args.psi0, &prior, &a.trace.options())?;
    let p = res.p_values(a.format);
    let lrt = PValues::lrt(res.r);
    let mut text = String::new();
    header(&mut text, model.as_ref(), &data, &full);
    let _ = writeln!(text, "psi0        {}", sig(args.psi0));
    let _ = writeln!(text, "prior       {} {}", a.ic, prior.label());
    let _ = writeln!(text, "format      {}", a.format);
    let _ = writeln!(text, "R           {}", sig(res.r));
    let _ = writeln!(text, "T           {}", sig(res.t));
    let _ = writeln!(text, "one-sided   {}", sig(p.one_sided));
    let _ = writeln!(text, "two-sided   {}", sig(p.two_sided));
    let _ = writeln!(text, "lrt         {} one-sided, {} two-sided", sig(lrt.one_sided), sig(lrt.two_sided));
    let _ = writeln!(text, "near-singular {}", yes_no(res.near_singular));
    let _ = writeln!(text, "lr-clamped  {}", yes_no(res.lr_clamped));
    let mut out = Output::new("pvalue", text);
    out.input = Some(digest);
    Ok(out)
}

fn cmd_ci(args: &CiArgs) -> Result<Output, CliError> {
    let a = &args.common;
    let (model, data, digest) = load(a)?;
    let full = fit_full(model.as_ref(), &data)?;
    let prior = parse_prior(&a.ic, Some(&full))?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::Input(format!("--level must lie in (0, 1), got {}", args.level)));
    }
    let (lo, hi) =
        credible_interval_with_full(model.as_ref(), &data, &full, &prior, args.level, a.format, &a.trace.options())?;
    let mut text = String::new();
    header(&mut text, model.as_ref(), &data, &full);
    let _ = writeln!(text, "prior       {} {}", a.ic, prior.label());
    let _ = writeln!(text, "format      {}", a.format);
    let _ = writeln!(text, "level       {}", sig(args.level));
    let _ = writeln!(text, "interval    ({}, {})", sig(lo), sig(hi));
    let mut out = Output::new("ci", text);
    out.input = Some(digest);
    Ok(out)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))
}

fn cmd_simulate(args: &mut SimulateArgs) -> Result<Output, CliError> {
    let default_reps = match (args.study.model, args.scale) {
        (ModelId::ExpRatio, Scale::Desk) => 100_000,
        (ModelId::ExpRatio, Scale::Full) => 1_000_000,
        (ModelId::Logistic, _) => 10_000,
    };
    let mut cfg = args.study.config(default_reps)?;
    cfg.alpha = args.alpha;
    cfg.validate()?;
    args.study.pin(&cfg);
    let report = run_type1(&cfg)?;
    let mut out = Output::new("simulate", report.to_table());
    out.files.push(("report.csv".into(), csv_bytes(&report.rows())?));
    out.seed = Some(cfg.master_seed);
    Ok(out)
}

#[derive(Serialize)]
struct CoverageRow {
    method: String,
    covered: u64,
    total: u64,
    degenerate: u64,
    rate: f64,
}

fn cmd_coverage(args: &mut CoverageArgs) -> Result<Output, CliError> {
    if args.study.methods.is_none() {
        let cfg = args.study.config(1)?;
        let methods: Vec<String> =
            cfg.methods.iter().filter(|m| !matches!(m, MethodSpec::Lrt)).map(|m| m.to_string()).collect();
        args.study.methods = Some(methods.join(","));
    }
    let cfg = args.study.config(1_000)?;
    args.study.pin(&cfg);
    let report = run_coverage(&cfg, args.level, args.format)?;
    let rows: Vec<CoverageRow> = report
        .methods
        .iter()
        .map(|(m, c)| CoverageRow {
            method: m.to_string(),
            covered: c.covered,
            total: c.total,
            degenerate: c.degenerate,
            rate: c.covered as f64 / c.total as f64,
        })
        .collect();
    let mut out = Output::new("coverage", report.to_table());
    out.files.push(("coverage.csv".into(), csv_bytes(&rows)?));
    out.seed = Some(cfg.master_seed);
    Ok(out)
}

fn range(given: &Option<Vec<f64>>, default: (f64, f64), name: &str) -> Result<(f64, f64), CliError> {
    let (lo, hi) = match given {
        Some(v) => (v[0], v[1]),
        None => default,
    };
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(CliError::Input(format!("--{name}-range needs LO <= HI, got {lo} {hi}")));
    }
    Ok((lo, hi))
}

fn cmd_check(args: &mut CheckArgs) -> Result<Output, CliError> {
    if args.grid < 1 {
        return Err(CliError::Input("--grid must be at least 1".into()));
    }
    let (psi_default, lambda_default, anchor_default) = match args.model {
        ModelId::ExpRatio => ((0.5, 2.5), (0.5, 2.5), 1.0),
        ModelId::Logistic => ((-0.5, 1.5), (-2.0, 0.0), 0.5),
    };
    let psi = range(&args.psi_range, psi_default, "psi")?;
    let lambda = range(&args.lambda_range, lambda_default, "lambda")?;
    let anchor = *args.anchor.get_or_insert(anchor_default);
    args.psi_range = Some(vec![psi.0, psi.1]);
    args.lambda_range = Some(vec![lambda.0, lambda.1]);

    let mut digest = None;
    let (model, data) = match &args.data {
        Some(path) => {
            let (bytes, d) = read_input(path)?;
            let data = Dataset::read_csv(bytes.as_slice()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            digest = Some(d);
            (build_model(args.model, &data)?, data)
        }
        None => {
            let seed = *args.seed.get_or_insert(DEFAULT_SEED);
            let mut cfg = match args.model {
                ModelId::ExpRatio => SimConfig::exp_ratio(1, seed),
                ModelId::Logistic => SimConfig::logistic(1, seed),
            };
            cfg.n = *args.n.get_or_insert(cfg.n);
            cfg.validate()?;
            replicate_data(&cfg, 0)?
        }
    };
    let model = model.as_ref();
    let full = fit_full(model, &data).ok();
    let prior = parse_prior(&args.ic, full.as_ref())?;
    let opts = TraceOptions::precise().with_mode(args.trace.mode());

    let anchored;
    let surface: Box<dyn Fn(ParamPoint) -> matchprior::Result<f64> + '_> = match &prior {
        Prior::Matching(ic) => {
            anchored = ic.anchored(anchor);
            Box::new(matching_log_prior(model, &data, &anchored, opts))
        }
        Prior::Analytic { log_density, .. } => {
            let f = log_density.clone();
            Box::new(move |w| Ok(f(w)))
        }
    };

    let at = |lo: f64, hi: f64, k: usize| {
        if args.grid == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (args.grid - 1) as f64
        }
    };
    let mut worst = (0.0f64, ParamPoint::new(f64::NAN, f64::NAN));
    let mut table = String::new();
    let _ = writeln!(table, "{:>12} {:>12} {:>12}", "psi", "lambda", "residual");
    for i in 0..args.grid {
        for j in 0..args.grid {
            let w = ParamPoint::new(at(psi.0, psi.1, i), at(lambda.0, lambda.1, j));
            let r = pde_residual(model, &data, &surface, w)?;
            let _ = writeln!(table, "{:>12} {:>12} {:>12}", sig(w.psi), sig(w.lambda), sig(r));
            if !(r.abs() <= worst.0) {
                worst = (r.abs(), w);
            }
        }
    }
    let ok = worst.0 < args.threshold;
    let mut text = String::new();
    let _ = writeln!(text, "model       {} (n = {})", model.name(), data.len());
    let _ = writeln!(text, "prior       {} {}", args.ic, prior.label());
    let _ = write!(text, "{table}");
    let _ = writeln!(
        text,
        "max |residual| {} at ({}, {}); threshold {}: {}",
        sig(worst.0),
        sig(worst.1.psi),
        sig(worst.1.lambda),
        sig(args.threshold),
        if ok { "ok" } else { "FAILED" }
    );
    let mut out = Output::new("check", text);
    out.input = digest;
    out.seed = if args.data.is_none() { args.seed } else { None };
    out.check_failed = !ok;
    Ok(out)
}

/// Runs `command`, returning the output and the command with defaults pinned.
fn execute(mut command: Command) -> Result<(Output, Command), CliError> {
    let data = match &mut command {
        Command::Pvalue(a) => Some(&mut a.common.data),
        Command::Ci(a) => Some(&mut a.common.data),
        Command::Check(a) => a.data.as_mut(),
        _ => None,
    };
    if let Some(path) = data {
        *path = fs::canonicalize(&*path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    }
    let out = match &mut command {
        Command::Pvalue(a) => cmd_pvalue(a)?,
        Command::Ci(a) => cmd_ci(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Coverage(a) => cmd_coverage(a)?,
        Command::Check(a) => cmd_check(a)?,
        Command::Replay(_) => unreachable!("replay is resolved before execution"),
    };
    Ok((out, command))
}

fn load_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if let Some(input) = &manifest.input {
        let (_, now) = read_input(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(CliError::Input(format!(
                "{} changed since the manifest was written (sha256 {} vs {})",
                input.path.display(),
                now.sha256,
                input.sha256
            )));
        }
    }
    Ok(manifest)
}

fn emit(out: &Output, command: &Command, dir: Option<&Path>) -> Result<(), CliError> {
    print!("{}", out.text);
    let manifest = RunManifest {
        tool: "matchprior".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: out.seed,
        input: out.input.clone(),
        command: command.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numerical(e.to_string()))?;
    match dir {
        Some(dir) => {
            let io = |e: std::io::Error| CliError::Input(format!("cannot write to {}: {e}", dir.display()));
            fs::create_dir_all(dir).map_err(io)?;
            fs::write(dir.join(format!("{}.txt", out.name)), &out.text).map_err(io)?;
            for (name, bytes) in &out.files {
                fs::write(dir.join(name), bytes).map_err(io)?;
            }
            fs::write(dir.join("manifest.json"), json + "\n").map_err(io)?;
        }
        None => eprintln!("{json}"),
    }
    Ok(())
}

fn verify(out: &Output, dir: &Path) -> Vec<String> {
    let mut expected = vec![(format!("{}.txt", out.name), out.text.as_bytes().to_vec())];
    expected.extend(out.files.iter().cloned());
    expected
        .into_iter()
        .filter_map(|(name, bytes)| match fs::read(dir.join(&name)) {
            Ok(old) if old == bytes => None,
            Ok(_) => Some(format!("{name} differs")),
            Err(e) => Some(format!("{name}: {e}")),
        })
        .collect()
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let out_dir = cli.out.as_deref();
    match cli.command {
        Command::Replay(r) => {
            let manifest = load_manifest(&r.manifest)?;
            let (out, command) = execute(manifest.command)?;
            emit(&out, &command, out_dir)?;
            if r.verify {
                let dir = r.manifest.parent().unwrap_or(Path::new("."));
                let diffs = verify(&out, dir);
                if !diffs.is_empty() {
                    eprintln!("replay mismatch: {}", diffs.join("; "));
                    return Ok(false);
                }
                eprintln!("replay reproduced the recorded outputs");
            }
            Ok(!out.check_failed)
        }
        command => {
            let (out, command) = execute(command)?;
            emit(&out, &command, out_dir)?;
            Ok(!out.check_failed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
