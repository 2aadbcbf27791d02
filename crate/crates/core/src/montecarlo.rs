//! Seeded replicate harness for type I error and coverage studies.
//!
//! Replicate `i` draws from ChaCha8 keyed by `master_seed` on stream `i`, so
//! replicate streams never overlap and the outcome of each replicate does not
//! depend on which worker runs it. Per-method results are integer counts
//! combined by addition, which makes reports independent of thread count.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{credible_interval_with_full, evaluate_from_fits, PValues, TailFormat};
use crate::error::{Error, Result};
use crate::inference::{fit_constrained, fit_full, signed_root_from_fits};
use crate::model::{exp_ratio_model, logistic_model, Dataset, Model, ParamPoint};
use crate::numerics::format_sig;
use crate::prior::{PriorSpec, TraceOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "exp-ratio")]
    ExpRatio,
    #[serde(rename = "logistic")]
    Logistic,
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp-ratio" => Ok(ModelId::ExpRatio),
            "logistic" => Ok(ModelId::Logistic),
            _ => Err(Error::InvalidInput(format!("unknown model '{s}' (expected exp-ratio or logistic)"))),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelId::ExpRatio => "exp-ratio",
            ModelId::Logistic => "logistic",
        })
    }
}

/// A row of a simulation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MethodSpec {
    /// Likelihood ratio baseline, `Phi(R)` one-sided.
    Lrt,
    Prior(PriorSpec),
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lrt" => Ok(MethodSpec::Lrt),
            other => Ok(MethodSpec::Prior(other.parse()?)),
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Lrt => f.write_str("lrt"),
            MethodSpec::Prior(p) => p.fmt(f),
        }
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<MethodSpec>> {
    let methods: Vec<MethodSpec> = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::InvalidInput("empty method list".into()));
    }
    Ok(methods)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelId,
    pub n: usize,
    pub reps: u64,
    pub true_params: ParamPoint,
    pub psi0: f64,
    pub alpha: f64,
    pub methods: Vec<MethodSpec>,
    pub master_seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub trace: TraceOptions,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl SimConfig {
    /// Exponential-ratio study at `n = 10`, `psi = lambda = 1`, with the five table rows.
    pub fn exp_ratio(reps: u64, master_seed: u64) -> Self {
        Self {
            model: ModelId::ExpRatio,
            n: 10,
            reps,
            true_params: ParamPoint::new(1.0, 1.0),
            psi0: 1.0,
            alpha: 0.05,
            methods: parse_methods("lrt,ic-default,analytic-invpsi,ic-loglambda,analytic-invpsilambda").unwrap(),
            master_seed,
            threads: None,
            trace: TraceOptions::default(),
        }
    }

    /// Logistic study at `n = 30`, slope 0.5, intercept -1, with the five table rows.
    pub fn logistic(reps: u64, master_seed: u64) -> Self {
        Self {
            model: ModelId::Logistic,
            n: 30,
            reps,
            true_params: ParamPoint::new(0.5, -1.0),
            psi0: 0.5,
            alpha: 0.05,
            methods: parse_methods("lrt,ic-default,qfam:2,qfam:2/5,qfam:2/11").unwrap(),
            master_seed,
            threads: None,
            trace: TraceOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("sample size must be at least 2, got {}", self.n)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods requested".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be at least 1".into()));
        }
        let probe: Box<dyn Model> = match self.model {
            ModelId::ExpRatio => Box::new(exp_ratio_model()),
            ModelId::Logistic => Box::new(logistic_model(vec![0.0, 1.0])?),
        };
        probe.check_domain(self.true_params)?;
        probe.check_domain(ParamPoint::new(self.psi0, self.true_params.lambda))?;
        Ok(())
    }
}

/// Random stream of replicate `i`.
pub fn replicate_rng(master_seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(i);
    rng
}

/// Model and data of replicate `i`; logistic covariates are redrawn from U(0,1).
pub fn replicate_data(cfg: &SimConfig, i: u64) -> Result<(Box<dyn Model>, Dataset)> {
    let mut rng = replicate_rng(cfg.master_seed, i);
    let model: Box<dyn Model> = match cfg.model {
        ModelId::ExpRatio => Box::new(exp_ratio_model()),
        ModelId::Logistic => {
            let xs: Vec<f64> = (0..cfg.n).map(|_| rng.random::<f64>()).collect();
            Box::new(logistic_model(xs)?)
        }
    };
    let data = model.sample(cfg.true_params, cfg.n, &mut rng)?;
    Ok((model, data))
}

/// Integer tallies for one method; indices into the arrays follow [`TailFormat::ALL`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCounts {
    pub valid: u64,
    pub degenerate: u64,
    pub rejections_1sided: [u64; 2],
    pub rejections_2sided: [u64; 2],
    pub near_singular: u64,
    pub lr_clamped: u64,
}

impl MethodCounts {
    fn merge(mut self, o: &MethodCounts) -> Self {
        self.valid += o.valid;
        self.degenerate += o.degenerate;
        for k in 0..2 {
            self.rejections_1sided[k] += o.rejections_1sided[k];
            self.rejections_2sided[k] += o.rejections_2sided[k];
        }
        self.near_singular += o.near_singular;
        self.lr_clamped += o.lr_clamped;
        self
    }

    fn rate(&self, count: u64) -> f64 {
        if self.valid == 0 {
            f64::NAN
        } else {
            count as f64 / self.valid as f64
        }
    }

    pub fn type1_1sided(&self, format: TailFormat) -> f64 {
        self.rate(self.rejections_1sided[format_index(format)])
    }

    pub fn type1_2sided(&self, format: TailFormat) -> f64 {
        self.rate(self.rejections_2sided[format_index(format)])
    }
}

fn format_index(format: TailFormat) -> usize {
    match format {
        TailFormat::Bn => 0,
        TailFormat::Lr => 1,
    }
}

/// Rejection when the p-value is below the level; a level of 1 rejects everything.
fn rejects(p: f64, alpha: f64) -> bool {
    p < alpha || alpha >= 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: MethodSpec,
    pub counts: MethodCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub methods: Vec<MethodReport>,
    pub elapsed_secs: f64,
}

/// One line of the CSV form of a [`SimReport`].
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub method: String,
    pub bn_1sided: f64,
    pub bn_2sided: f64,
    pub lr_1sided: f64,
    pub lr_2sided: f64,
    pub valid: u64,
    pub degenerate: u64,
    pub near_singular: u64,
    pub lr_clamped: u64,
}

impl SimReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.methods
            .iter()
            .map(|m| {
                let c = &m.counts;
                ReportRow {
                    method: m.method.to_string(),
                    bn_1sided: c.type1_1sided(TailFormat::Bn),
                    bn_2sided: c.type1_2sided(TailFormat::Bn),
                    lr_1sided: c.type1_1sided(TailFormat::Lr),
                    lr_2sided: c.type1_2sided(TailFormat::Lr),
                    valid: c.valid,
                    degenerate: c.degenerate,
                    near_singular: c.near_singular,
                    lr_clamped: c.lr_clamped,
                }
            })
            .collect()
    }

    /// Aligned text table, methods by format and sidedness.
    pub fn to_table(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} n={} reps={} alpha={} seed={}",
            self.config.model, self.config.n, self.config.reps, self.config.alpha, self.config.master_seed
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>10} {:>10}  {:>10} {:>10}  {:>8} {:>10} {:>13} {:>10}",
            "method", "BN 1-sided", "BN 2-sided", "LR 1-sided", "LR 2-sided", "valid", "degenerate", "near-singular", "lr-clamped"
        );
        for r in rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>10} {:>10}  {:>10} {:>10}  {:>8} {:>10} {:>13} {:>10}",
                r.method,
                format_sig(r.bn_1sided, 6),
                format_sig(r.bn_2sided, 6),
                format_sig(r.lr_1sided, 6),
                format_sig(r.lr_2sided, 6),
                r.valid,
                r.degenerate,
                r.near_singular,
                r.lr_clamped
            );
        }
        out
    }

    pub fn method(&self, id: &str) -> Option<&MethodCounts> {
        self.methods.iter().find(|m| m.method.to_string() == id).map(|m| &m.counts)
    }
}

fn replicate_counts(cfg: &SimConfig, i: u64) -> Vec<MethodCounts> {
    let mut out = vec![MethodCounts::default(); cfg.methods.len()];
    let degenerate = |mut out: Vec<MethodCounts>| {
        out.iter_mut().for_each(|c| c.degenerate = 1);
        out
    };
    let Ok((model, data)) = replicate_data(cfg, i) else {
        return degenerate(out);
    };
    let model = model.as_ref();
    let fits = fit_full(model, &data).and_then(|full| {
        let constrained = fit_constrained(model, &data, cfg.psi0)?;
        let r = signed_root_from_fits(&full, &constrained)?;
        Ok((full, constrained, r))
    });
    let Ok((full, constrained, r)) = fits else {
        return degenerate(out);
    };
    for (method, counts) in cfg.methods.iter().zip(out.iter_mut()) {
        let p: Result<[PValues; 2]> = match method {
            MethodSpec::Lrt => Ok([PValues::lrt(r); 2]),
            MethodSpec::Prior(spec) => spec.resolve(Some(&full)).and_then(|prior| {
                let res = evaluate_from_fits(model, &data, &full, &constrained, &prior, &cfg.trace)?;
                counts.near_singular += res.near_singular as u64;
                counts.lr_clamped += res.lr_clamped as u64;
                Ok(TailFormat::ALL.map(|f| res.p_values(f)))
            }),
        };
        match p {
            Ok(p) => {
                counts.valid = 1;
                for k in 0..2 {
                    counts.rejections_1sided[k] = rejects(p[k].one_sided, cfg.alpha) as u64;
                    counts.rejections_2sided[k] = rejects(p[k].two_sided, cfg.alpha) as u64;
                }
            }
            Err(_) => *counts = MethodCounts { degenerate: 1, ..MethodCounts::default() },
        }
    }
    out
}

fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidInput(format!("cannot start {k} worker threads: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn merge_all(a: Vec<MethodCounts>, b: Vec<MethodCounts>) -> Vec<MethodCounts> {
    a.into_iter().zip(b.iter()).map(|(x, y)| x.merge(y)).collect()
}

/// Type I error study: every method sees the same replicate data.
pub fn run_type1(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let started = Instant::now();
    let empty = vec![MethodCounts::default(); cfg.methods.len()];
    let totals = in_pool(cfg.threads, || {
        (0..cfg.reps)
            .into_par_iter()
            .map(|i| replicate_counts(cfg, i))
            .reduce(|| empty.clone(), merge_all)
    })?;
    Ok(SimReport {
        config: cfg.clone(),
        methods: cfg.methods.iter().cloned().zip(totals).map(|(method, counts)| MethodReport { method, counts }).collect(),
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageCounts {
    pub covered: u64,
    pub total: u64,
    pub degenerate: u64,
}

impl CoverageCounts {
    fn merge(self, o: &CoverageCounts) -> Self {
        Self { covered: self.covered + o.covered, total: self.total + o.total, degenerate: self.degenerate + o.degenerate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub config: SimConfig,
    pub level: f64,
    pub format: TailFormat,
    pub methods: Vec<(MethodSpec, CoverageCounts)>,
    pub elapsed_secs: f64,
}

impl CoverageReport {
    pub fn method(&self, id: &str) -> Option<&CoverageCounts> {
        self.methods.iter().find(|(m, _)| m.to_string() == id).map(|(_, c)| c)
    }

    pub fn to_table(&self) -> String {
        let width = self.methods.iter().map(|(m, _)| m.to_string().len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} n={} reps={} level={} format={} seed={}",
            self.config.model, self.config.n, self.config.reps, self.level, self.format, self.config.master_seed
        );
        let _ = writeln!(out, "{:<width$}  {:>8} {:>8} {:>10} {:>9}", "method", "covered", "total", "degenerate", "rate");
        for (m, c) in &self.methods {
            let rate = if c.total == 0 { f64::NAN } else { c.covered as f64 / c.total as f64 };
            let _ = writeln!(
                out,
                "{:<width$}  {:>8} {:>8} {:>10} {:>9}",
                m.to_string(),
                c.covered,
                c.total,
                c.degenerate,
                format_sig(rate, 6)
            );
        }
        out
    }
}

fn replicate_coverage(cfg: &SimConfig, level: f64, format: TailFormat, i: u64) -> Vec<CoverageCounts> {
    let degenerate = vec![CoverageCounts { degenerate: 1, ..Default::default() }; cfg.methods.len()];
    let Ok((model, data)) = replicate_data(cfg, i) else {
        return degenerate;
    };
    let model = model.as_ref();
    let Ok(full) = fit_full(model, &data) else {
        return degenerate;
    };
    let truth = cfg.true_params.psi;
    cfg.methods
        .iter()
        .map(|method| {
            let interval = match method {
                MethodSpec::Lrt => Err(Error::InvalidInput("coverage needs a prior-based method".into())),
                MethodSpec::Prior(spec) => spec.resolve(Some(&full)).and_then(|prior| {
                    credible_interval_with_full(model, &data, &full, &prior, level, format, &cfg.trace)
                }),
            };
            match interval {
                Ok((lo, hi)) => CoverageCounts { covered: (lo <= truth && truth <= hi) as u64, total: 1, degenerate: 0 },
                Err(_) => CoverageCounts { degenerate: 1, ..Default::default() },
            }
        })
        .collect()
}

/// Counts how often the equal-tailed credible interval at `level` contains the true `psi`.
pub fn run_coverage(cfg: &SimConfig, level: f64, format: TailFormat) -> Result<CoverageReport> {
    cfg.validate()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level must lie in (0, 1), got {level}")));
    }
    if cfg.methods.iter().any(|m| matches!(m, MethodSpec::Lrt)) {
        return Err(Error::InvalidInput("coverage needs prior-based methods; drop lrt".into()));
    }
    let started = Instant::now();
    let empty = vec![CoverageCounts::default(); cfg.methods.len()];
    let totals = in_pool(cfg.threads, || {
        (0..cfg.reps)
            .into_par_iter()
            .map(|i| replicate_coverage(cfg, level, format, i))
            .reduce(|| empty.clone(), |a, b| a.into_iter().zip(b.iter()).map(|(x, y)| x.merge(y)).collect())
    })?;
    Ok(CoverageReport {
        config: cfg.clone(),
        level,
        format,
        methods: cfg.methods.iter().cloned().zip(totals).collect(),
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}
