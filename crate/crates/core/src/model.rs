//! Two-parameter statistical models.
//!
//! Every quantity is expressed in the global ordering `(psi, lambda)`: index 0
//! is the interest parameter, index 1 the nuisance parameter. Models whose
//! natural parameterization differs (the logistic slope/intercept pair) permute
//! at this boundary so downstream code never special-cases.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand::RngCore;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

/// A point `(psi, lambda)` of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParamPoint {
    pub psi: f64,
    pub lambda: f64,
}

impl ParamPoint {
    pub fn new(psi: f64, lambda: f64) -> Self {
        Self { psi, lambda }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.psi, self.lambda)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self { psi: v[0], lambda: v[1] }
    }
}

/// Open interval `(lo, hi)`; infinite bounds mean unrestricted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
    pub const POSITIVE: Interval = Interval { lo: 0.0, hi: f64::INFINITY };

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub psi: Interval,
    pub lambda: Interval,
}

impl Domain {
    pub fn contains(&self, w: ParamPoint) -> bool {
        self.psi.contains(w.psi) && self.lambda.contains(w.lambda)
    }
}

/// Observed rows `(x_i, y_i)`. The meaning of the columns is model specific.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!("column lengths differ ({} vs {})", x.len(), y.len())));
        }
        if x.len() < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 rows, got {}", x.len())));
        }
        if let Some(i) = x.iter().zip(&y).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidInput(format!("row {} has a non-finite value", i + 1)));
        }
        Ok(Self { x, y })
    }

    pub fn from_rows(rows: &[(f64, f64)]) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn mean_x(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.len() as f64
    }

    pub fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.len() as f64
    }

    /// Reads a headed CSV with columns `x` and `y` (any order, extra columns ignored).
    /// Rows are numbered from 1, not counting the header.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::InvalidInput(format!("cannot read CSV header: {e}")))?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidInput(format!("CSV header lacks column '{name}'")))
        };
        let (ix, iy) = (column("x")?, column("y")?);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| Error::InvalidInput(format!("row {row}: {e}")))?;
            for (idx, name, out) in [(ix, "x", &mut x), (iy, "y", &mut y)] {
                let field = record.get(idx).unwrap_or("");
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("row {row}, column {name}: '{field}' is not a number")))?;
                out.push(v);
            }
        }
        Self::new(x, y)
    }

    pub fn read_csv_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
        Self::read_csv(file)
    }
}

/// A two-parameter likelihood model.
///
/// Likelihood quantities take the dataset; the expected information also takes
/// it because it depends on the design (sample size, covariates) of the
/// observed rows.
pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;

    fn domain(&self) -> Domain;

    /// Checks that `data` fits the model's schema.
    fn validate(&self, data: &Dataset) -> Result<()>;

    fn loglik(&self, w: ParamPoint, data: &Dataset) -> Result<f64>;

    /// Gradient `(dl/dpsi, dl/dlambda)`.
    fn score(&self, w: ParamPoint, data: &Dataset) -> Result<Vector2<f64>>;

    /// Analytic matrix of second partials, when the model has one.
    fn hessian(&self, _w: ParamPoint, _data: &Dataset) -> Option<Result<Matrix2<f64>>> {
        None
    }

    /// Expected Fisher information `i_jk`.
    fn expected_info(&self, w: ParamPoint, data: &Dataset) -> Result<Matrix2<f64>>;

    /// Analytic `(d/dpsi, d/dlambda)` of the expected information, when available.
    fn expected_info_derivatives(
        &self,
        _w: ParamPoint,
        _data: &Dataset,
    ) -> Option<Result<(Matrix2<f64>, Matrix2<f64>)>> {
        None
    }

    /// Draws a dataset of `n` rows at `w`.
    fn sample(&self, w: ParamPoint, n: usize, rng: &mut dyn RngCore) -> Result<Dataset>;

    /// Starting point for the full maximum likelihood fit.
    fn initial_guess(&self, data: &Dataset) -> ParamPoint;

    /// Starting nuisance value for the fit constrained at `psi0`.
    fn constrained_initial(&self, data: &Dataset, psi0: f64) -> f64;

    fn closed_form_mle(&self, _data: &Dataset) -> Option<ParamPoint> {
        None
    }

    fn closed_form_constrained(&self, _data: &Dataset, _psi0: f64) -> Option<f64> {
        None
    }

    /// Estimates beyond this magnitude are reported as separation.
    fn separation_bound(&self) -> Option<f64> {
        None
    }

    fn check_domain(&self, w: ParamPoint) -> Result<()> {
        if self.domain().contains(w) {
            Ok(())
        } else {
            Err(Error::DomainViolation(format!("{} at (psi, lambda) = ({}, {})", self.name(), w.psi, w.lambda)))
        }
    }
}

/// Exact inverse `i^jk` of the expected information.
pub fn inverse_info(model: &dyn Model, data: &Dataset, w: ParamPoint) -> Result<Matrix2<f64>> {
    invert(&model.expected_info(w, data)?)
}

pub(crate) fn invert(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !det.is_finite() || det <= 1e-300 {
        return Err(Error::SingularInformation { det });
    }
    Ok(Matrix2::new(m[(1, 1)] / det, -m[(0, 1)] / det, -m[(1, 0)] / det, m[(0, 0)] / det))
}

/// Ratio of two exponential means, `psi = nu/mu`, with the orthogonal
/// reparameterization `mu = lambda psi^{-1/2}`, `nu = lambda psi^{1/2}`.
///
/// Rows are `(x_i, y_i)` with `x ~ Exp(mean mu)` and `y ~ Exp(mean nu)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpRatioModel;

pub fn exp_ratio_model() -> ExpRatioModel {
    ExpRatioModel
}

struct ExpStats {
    n: f64,
    xbar: f64,
    ybar: f64,
}

impl ExpRatioModel {
    fn stats(data: &Dataset) -> ExpStats {
        ExpStats { n: data.len() as f64, xbar: data.mean_x(), ybar: data.mean_y() }
    }

    // f(psi) = xbar psi^{1/2} + ybar psi^{-1/2}, so l = -n (f / lambda + 2 log lambda)
    fn f_and_derivs(s: &ExpStats, psi: f64) -> (f64, f64, f64) {
        let r = psi.sqrt();
        let f = s.xbar * r + s.ybar / r;
        let f1 = 0.5 * s.xbar / r - 0.5 * s.ybar / (psi * r);
        let f2 = -0.25 * s.xbar / (psi * r) + 0.75 * s.ybar / (psi * psi * r);
        (f, f1, f2)
    }
}

impl Model for ExpRatioModel {
    fn name(&self) -> &'static str {
        "exp-ratio"
    }

    fn domain(&self) -> Domain {
        Domain { psi: Interval::POSITIVE, lambda: Interval::POSITIVE }
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        for (i, (x, y)) in data.x().iter().zip(data.y()).enumerate() {
            if *x <= 0.0 {
                return Err(Error::InvalidInput(format!("row {}, column x: {x} is not positive", i + 1)));
            }
            if *y <= 0.0 {
                return Err(Error::InvalidInput(format!("row {}, column y: {y} is not positive", i + 1)));
            }
        }
        Ok(())
    }

    fn loglik(&self, w: ParamPoint, data: &Dataset) -> Result<f64> {
        self.check_domain(w)?;
        let s = Self::stats(data);
        Ok(-s.n * ((w.psi * s.xbar + s.ybar) / (w.lambda * w.psi.sqrt()) + 2.0 * w.lambda.ln()))
    }

    fn score(&self, w: ParamPoint, data: &Dataset) -> Result<Vector2<f64>> {
        self.check_domain(w)?;
        let s = Self::stats(data);
        let (f, f1, _) = Self::f_and_derivs(&s, w.psi);
        let l = w.lambda;
        Ok(Vector2::new(-s.n * f1 / l, s.n * f / (l * l) - 2.0 * s.n / l))
    }

    fn hessian(&self, w: ParamPoint, data: &Dataset) -> Option<Result<Matrix2<f64>>> {
        Some(self.check_domain(w).map(|_| {
            let s = Self::stats(data);
            let (f, f1, f2) = Self::f_and_derivs(&s, w.psi);
            let l = w.lambda;
            let pp = -s.n * f2 / l;
            let pl = s.n * f1 / (l * l);
            let ll = -2.0 * s.n * f / (l * l * l) + 2.0 * s.n / (l * l);
            Matrix2::new(pp, pl, pl, ll)
        }))
    }

    fn expected_info(&self, w: ParamPoint, data: &Dataset) -> Result<Matrix2<f64>> {
        self.check_domain(w)?;
        let n = data.len() as f64;
        Ok(Matrix2::new(n / (2.0 * w.psi * w.psi), 0.0, 0.0, 2.0 * n / (w.lambda * w.lambda)))
    }

    fn expected_info_derivatives(
        &self,
        w: ParamPoint,
        data: &Dataset,
    ) -> Option<Result<(Matrix2<f64>, Matrix2<f64>)>> {
        Some(self.check_domain(w).map(|_| {
            let n = data.len() as f64;
            let d_psi = Matrix2::new(-n / (w.psi * w.psi * w.psi), 0.0, 0.0, 0.0);
            let d_lambda = Matrix2::new(0.0, 0.0, 0.0, -4.0 * n / (w.lambda * w.lambda * w.lambda));
            (d_psi, d_lambda)
        }))
    }

    fn sample(&self, w: ParamPoint, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        self.check_domain(w)?;
        let r = w.psi.sqrt();
        let mean_x = w.lambda / r;
        let mean_y = w.lambda * r;
        let ex = Exp::new(1.0 / mean_x).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let ey = Exp::new(1.0 / mean_y).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            x.push(ex.sample(rng));
            y.push(ey.sample(rng));
        }
        Dataset::new(x, y)
    }

    fn initial_guess(&self, data: &Dataset) -> ParamPoint {
        self.closed_form_mle(data).unwrap_or(ParamPoint::new(1.0, 1.0))
    }

    fn constrained_initial(&self, data: &Dataset, psi0: f64) -> f64 {
        self.closed_form_constrained(data, psi0).unwrap_or(1.0)
    }

    fn closed_form_mle(&self, data: &Dataset) -> Option<ParamPoint> {
        let (xbar, ybar) = (data.mean_x(), data.mean_y());
        Some(ParamPoint::new(ybar / xbar, (xbar * ybar).sqrt()))
    }

    fn closed_form_constrained(&self, data: &Dataset, psi0: f64) -> Option<f64> {
        if !(psi0 > 0.0) {
            return None;
        }
        Some((psi0 * data.mean_x() + data.mean_y()) / (2.0 * psi0.sqrt()))
    }
}

/// Logistic regression `logit p_i = omega1 + omega2 x_i` with the slope as the
/// interest parameter: `psi = omega2`, `lambda = omega1`.
///
/// The held covariates are used by the sampler; likelihood quantities use the
/// `x` column of the dataset they are given.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    covariates: Vec<f64>,
}

pub const LOGISTIC_SEPARATION_BOUND: f64 = 30.0;

pub fn logistic_model(covariates: Vec<f64>) -> Result<LogisticModel> {
    if covariates.len() < 2 {
        return Err(Error::InvalidInput("logistic model needs at least 2 covariates".into()));
    }
    if covariates.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite covariate".into()));
    }
    Ok(LogisticModel { covariates })
}

/// `1 / (1 + exp(-eta))` without overflow.
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta))` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Sums `[w, w x, w x^2, w x^3]` weighted by `weight(p)` over the rows.
fn weighted_moments(w: ParamPoint, x: &[f64], weight: impl Fn(f64) -> f64) -> Result<[f64; 4]> {
    let mut m = [0.0; 4];
    for &xi in x {
        let eta = w.lambda + w.psi * xi;
        if !eta.is_finite() {
            return Err(Error::NonFiniteValue(format!("linear predictor at x = {xi}")));
        }
        let v = weight(sigmoid(eta));
        m[0] += v;
        m[1] += v * xi;
        m[2] += v * xi * xi;
        m[3] += v * xi * xi * xi;
    }
    Ok(m)
}

impl LogisticModel {
    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    fn info_from(m: [f64; 4]) -> Matrix2<f64> {
        // (psi, lambda) = (slope, intercept)
        Matrix2::new(m[2], m[1], m[1], m[0])
    }
}

impl Model for LogisticModel {
    fn name(&self) -> &'static str {
        "logistic"
    }

    fn domain(&self) -> Domain {
        Domain { psi: Interval::REAL, lambda: Interval::REAL }
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        for (i, y) in data.y().iter().enumerate() {
            if *y != 0.0 && *y != 1.0 {
                return Err(Error::InvalidInput(format!("row {}, column y: {y} is not 0 or 1", i + 1)));
            }
        }
        Ok(())
    }

    fn loglik(&self, w: ParamPoint, data: &Dataset) -> Result<f64> {
        let mut l = 0.0;
        for (&x, &y) in data.x().iter().zip(data.y()) {
            let eta = w.lambda + w.psi * x;
            l += y * eta - softplus(eta);
        }
        if l.is_finite() {
            Ok(l)
        } else {
            Err(Error::NonFiniteValue("logistic log-likelihood".into()))
        }
    }

    fn score(&self, w: ParamPoint, data: &Dataset) -> Result<Vector2<f64>> {
        let mut g = Vector2::zeros();
        for (&x, &y) in data.x().iter().zip(data.y()) {
            let eta = w.lambda + w.psi * x;
            if !eta.is_finite() {
                return Err(Error::NonFiniteValue(format!("linear predictor at x = {x}")));
            }
            let r = y - sigmoid(eta);
            g[0] += x * r;
            g[1] += r;
        }
        Ok(g)
    }

    fn hessian(&self, w: ParamPoint, data: &Dataset) -> Option<Result<Matrix2<f64>>> {
        Some(self.expected_info(w, data).map(|i| -i))
    }

    fn expected_info(&self, w: ParamPoint, data: &Dataset) -> Result<Matrix2<f64>> {
        weighted_moments(w, data.x(), |p| p * (1.0 - p)).map(Self::info_from)
    }

    fn expected_info_derivatives(
        &self,
        w: ParamPoint,
        data: &Dataset,
    ) -> Option<Result<(Matrix2<f64>, Matrix2<f64>)>> {
        // d w_i / d eta = w_i (1 - 2 p_i); d eta/d psi = x_i, d eta/d lambda = 1
        Some(weighted_moments(w, data.x(), |p| p * (1.0 - p) * (1.0 - 2.0 * p)).map(|m| {
            let d_psi = Matrix2::new(m[3], m[2], m[2], m[1]);
            let d_lambda = Matrix2::new(m[2], m[1], m[1], m[0]);
            (d_psi, d_lambda)
        }))
    }

    fn sample(&self, w: ParamPoint, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        if n != self.covariates.len() {
            return Err(Error::InvalidInput(format!(
                "logistic sampler holds {} covariates, asked for {n} rows",
                self.covariates.len()
            )));
        }
        let y = self
            .covariates
            .iter()
            .map(|&x| {
                let p = sigmoid(w.lambda + w.psi * x);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Dataset::new(self.covariates.clone(), y)
    }

    fn initial_guess(&self, data: &Dataset) -> ParamPoint {
        ParamPoint::new(0.0, clamped_logit(data.mean_y()))
    }

    fn constrained_initial(&self, data: &Dataset, psi0: f64) -> f64 {
        (clamped_logit(data.mean_y()) - psi0 * data.mean_x()).clamp(-LOGISTIC_SEPARATION_BOUND, LOGISTIC_SEPARATION_BOUND)
    }

    fn separation_bound(&self) -> Option<f64> {
        Some(LOGISTIC_SEPARATION_BOUND)
    }
}

fn clamped_logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln().clamp(-5.0, 5.0)
}
