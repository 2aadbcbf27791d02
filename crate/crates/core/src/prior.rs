//! Matching priors by the method of characteristics.
//!
//! The log prior `z = log pi` solves `a z_psi + b z_lambda = d` with
//! `a = (i^11)^{1/2}`, `b = i^12 (i^11)^{-1/2}` and
//! `d = -(da/dpsi + db/dlambda)`. Along the characteristics `dpsi/ds = 1`,
//! `dlambda/ds = b/a` the solution reduces to the quadrature
//! `z = Z(xi) + int d/a ds`, starting from the initial curve
//! `(Psi(xi) + s0, Lambda(xi))` on which `z = Z(xi)`.
//!
//! With a characteristic parameter `s`, points satisfy `psi = s + Psi(xi)`;
//! the initial curve sits at `s = s0`.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::FitResult;
use crate::model::{inverse_info, Dataset, Model, ParamPoint};
use crate::numerics::{
    central_diff, find_root, integrate_ode, simpson, try_central_diff, OdeTrajectory, DEFAULT_ATOL, DEFAULT_RTOL,
    DEFAULT_SIMPSON_PANELS,
};

pub type CurveFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ZFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;
pub type LogDensityFn = Arc<dyn Fn(ParamPoint) -> f64 + Send + Sync>;

const MAX_SIMPSON_PANELS: usize = 1 << 16;
const MAX_BRACKET_EXPANSIONS: usize = 60;
const TANGENCY_TOLERANCE: f64 = 1e-8;
/// Targets this close to the initial curve skip the quadrature.
const DEGENERATE_SPAN: f64 = 1e-12;

/// Coefficients of the reduced first-order PDE at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoefficients {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

fn a_b(model: &dyn Model, data: &Dataset, w: ParamPoint) -> Result<(f64, f64)> {
    let inv = inverse_info(model, data, w)?;
    let i11 = inv[(0, 0)];
    if !(i11 > 0.0) {
        return Err(Error::SingularInformation { det: f64::NAN });
    }
    let a = i11.sqrt();
    Ok((a, inv[(0, 1)] / a))
}

/// `(a, b, d)` at `w`. `d` uses the model's analytic information derivatives
/// when it has them and central differences of `a` and `b` otherwise.
pub fn pde_coefficients(model: &dyn Model, data: &Dataset, w: ParamPoint) -> Result<PdeCoefficients> {
    let inv = inverse_info(model, data, w)?;
    let (i11, i12) = (inv[(0, 0)], inv[(0, 1)]);
    if !(i11 > 0.0) {
        return Err(Error::SingularInformation { det: f64::NAN });
    }
    let a = i11.sqrt();
    let b = i12 / a;
    let (da_dpsi, db_dlambda) = match model.expected_info_derivatives(w, data) {
        Some(derivs) => {
            let (di_psi, di_lambda) = derivs?;
            // d(I^-1) = -I^-1 dI I^-1
            let dinv_psi = -(inv * di_psi * inv);
            let dinv_lambda = -(inv * di_lambda * inv);
            let da_dpsi = dinv_psi[(0, 0)] / (2.0 * a);
            let da_dlambda = dinv_lambda[(0, 0)] / (2.0 * a);
            (da_dpsi, dinv_lambda[(0, 1)] / a - i12 * da_dlambda / (a * a))
        }
        None => (
            try_central_diff(|p| Ok(a_b(model, data, ParamPoint::new(p, w.lambda))?.0), w.psi)?,
            try_central_diff(|l| Ok(a_b(model, data, ParamPoint::new(w.psi, l))?.1), w.lambda)?,
        ),
    };
    Ok(PdeCoefficients { a, b, d: -(da_dpsi + db_dlambda) })
}

/// One component `Psi` or `Lambda` of the initial-curve parameterization.
#[derive(Clone)]
pub enum CurveMap {
    Identity,
    Constant(f64),
    Custom(CurveFn),
}

impl CurveMap {
    pub fn eval(&self, xi: f64) -> f64 {
        match self {
            CurveMap::Identity => xi,
            CurveMap::Constant(c) => *c,
            CurveMap::Custom(f) => f(xi),
        }
    }

    fn derivative(&self, xi: f64) -> Result<f64> {
        match self {
            CurveMap::Identity => Ok(1.0),
            CurveMap::Constant(_) => Ok(0.0),
            CurveMap::Custom(f) => central_diff(|x| f(x), xi),
        }
    }
}

impl fmt::Debug for CurveMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveMap::Identity => write!(f, "Identity"),
            CurveMap::Constant(c) => write!(f, "Constant({c})"),
            CurveMap::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// The triple `(Psi(xi), Lambda(xi), Z(xi))` plus the base value `s0`.
///
/// `s0 = None` means "anchor at the null value": [`log_prior_ratio`] puts
/// the initial curve through the constrained fit.
#[derive(Clone)]
pub struct InitialCondition {
    pub psi: CurveMap,
    pub lambda: CurveMap,
    pub z: ZFn,
    pub s0: Option<f64>,
    pub label: String,
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialCondition")
            .field("label", &self.label)
            .field("psi", &self.psi)
            .field("lambda", &self.lambda)
            .field("s0", &self.s0)
            .finish()
    }
}

impl InitialCondition {
    /// `(0, xi, Z(xi))`, unanchored.
    pub fn new(label: impl Into<String>, z: ZFn) -> Self {
        Self { psi: CurveMap::Constant(0.0), lambda: CurveMap::Identity, z, s0: None, label: label.into() }
    }

    /// `(0, xi, -1)`.
    pub fn constant(value: f64) -> Self {
        Self::new(format!("(0,xi,{value})"), Arc::new(move |_| Ok(value)))
    }

    /// `(0, xi, -log xi)`.
    pub fn log_lambda() -> Self {
        Self::new(
            "(0,xi,-log xi)",
            Arc::new(|xi: f64| {
                if xi > 0.0 {
                    Ok(-xi.ln())
                } else {
                    Err(Error::DomainViolation(format!("-log xi needs xi > 0, got {xi}")))
                }
            }),
        )
    }

    /// `(0, xi, -log{|xi - center|^q + 1})`.
    pub fn q_family(q: f64, center: f64) -> Self {
        Self::new(format!("(0,xi,-log{{|xi-({center})|^{q}+1}})"), z_family_centered(q, center))
    }

    pub fn with_psi(mut self, psi: CurveMap) -> Self {
        self.psi = psi;
        self
    }

    pub fn with_lambda(mut self, lambda: CurveMap) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_s0(mut self, s0: f64) -> Self {
        self.s0 = Some(s0);
        self
    }

    /// Returns `Z + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let z = self.z.clone();
        Self { z: Arc::new(move |xi| Ok(z(xi)? + c)), label: format!("{}+{c}", self.label), ..self.clone() }
    }

    /// Fixes `s0` so a constant-`Psi` curve passes through `psi = anchor`;
    /// a curve that already has `s0` is returned unchanged.
    pub fn anchored(&self, anchor: f64) -> Self {
        if self.s0.is_some() {
            return self.clone();
        }
        let shift = match &self.psi {
            CurveMap::Constant(c) => *c,
            _ => 0.0,
        };
        Self { s0: Some(anchor - shift), ..self.clone() }
    }

    fn eval_z(&self, xi: f64) -> Result<f64> {
        let z = (self.z)(xi)?;
        if z.is_finite() {
            Ok(z)
        } else {
            Err(Error::NonFiniteValue(format!("initial condition Z({xi}) = {z}")))
        }
    }
}

/// `Z(xi) = -log{(xi + 1)^q + 1}` with `(xi + 1)^q` read as `|xi + 1|^q`.
pub fn z_family(q: f64) -> ZFn {
    z_family_centered(q, -1.0)
}

/// [`z_family`] centred at an arbitrary nuisance value.
pub fn z_family_centered(q: f64, center: f64) -> ZFn {
    Arc::new(move |xi: f64| {
        let pow = (xi - center).abs().powf(q);
        if !pow.is_finite() {
            return Err(Error::NonRealPower { xi, q });
        }
        Ok(-pow.ln_1p())
    })
}

/// Characteristic tracing convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    /// Follow the characteristic through the target back to the initial curve.
    Backward,
    /// Start at `(s0, lambda*)` on the initial curve and integrate up to
    /// `psi*`; lands on the target only when `b = 0`.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Starting Simpson panel count; doubled until `quad_rtol` is met.
    pub n_panels: usize,
    pub quad_rtol: f64,
    pub mode: TraceMode,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            n_panels: DEFAULT_SIMPSON_PANELS,
            quad_rtol: 1e-10,
            mode: TraceMode::Backward,
        }
    }
}

impl TraceOptions {
    /// Tolerances tight enough to finite-difference the resulting surface.
    pub fn precise() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, quad_rtol: 1e-13, ..Self::default() }
    }

    pub fn with_mode(self, mode: TraceMode) -> Self {
        Self { mode, ..self }
    }
}

/// The prior value at a target point together with the traced path.
#[derive(Debug, Clone)]
pub struct CharacteristicSolution {
    /// Curve parameter where the characteristic meets the initial curve.
    pub xi_star: f64,
    /// `lambda(s)` along the characteristic, from the target side to `s0`
    /// (backward) or from `s0` to the target abscissa (forward).
    pub lambda_path: OdeTrajectory,
    /// `Z(xi*)`.
    pub z_initial: f64,
    /// `int d/a ds` from the initial curve to the target.
    pub integral: f64,
    /// `z = Z(xi*) + integral`.
    pub z_value: f64,
    pub quadrature_panels: usize,
    /// Point reached at the target abscissa.
    pub endpoint: ParamPoint,
}

/// Characteristic slope `dlambda/ds = b/a = i^12 / i^11`, with the first
/// failure parked in `err` so the ODE solver sees a plain NaN.
fn slope_fn<'a>(
    model: &'a dyn Model,
    data: &'a Dataset,
    shift: f64,
    err: &'a RefCell<Option<Error>>,
) -> impl FnMut(f64, f64) -> f64 + 'a {
    move |s, lambda| {
        let w = ParamPoint::new(s + shift, lambda);
        if !model.domain().contains(w) {
            err.borrow_mut().get_or_insert(Error::PathLeftDomain { psi: w.psi, lambda: w.lambda });
            return f64::NAN;
        }
        match inverse_info(model, data, w) {
            Ok(inv) if inv[(0, 0)] > 0.0 => inv[(0, 1)] / inv[(0, 0)],
            Ok(_) => {
                err.borrow_mut().get_or_insert(Error::SingularInformation { det: f64::NAN });
                f64::NAN
            }
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }
}

/// Integrates `dlambda/ds = (b/a)(s + shift, lambda)` from `(s_from, lambda_from)` to `s_to`.
fn trace_lambda(
    model: &dyn Model,
    data: &Dataset,
    shift: f64,
    s_from: f64,
    lambda_from: f64,
    s_to: f64,
    opts: &TraceOptions,
) -> Result<OdeTrajectory> {
    let err = RefCell::new(None);
    let result = integrate_ode(slope_fn(model, data, shift, &err), s_from, lambda_from, s_to, opts.rtol, opts.atol);
    match (result, err.into_inner()) {
        (Ok(t), _) => {
            let (s, l) = t.end();
            model
                .check_domain(ParamPoint::new(s + shift, l))
                .map_err(|_| Error::PathLeftDomain { psi: s + shift, lambda: l })?;
            Ok(t)
        }
        (Err(_), Some(e)) => Err(e),
        (Err(e), None) => Err(e),
    }
}

/// `int_{s_a}^{s_b} (d/a)(s + shift, lambda(s)) ds` by Simpson on the dense
/// output, doubling the panels until successive estimates agree.
fn quadrature(
    model: &dyn Model,
    data: &Dataset,
    path: &OdeTrajectory,
    shift: f64,
    s_a: f64,
    s_b: f64,
    opts: &TraceOptions,
) -> Result<(f64, usize)> {
    let (g0, g1) = (path.start().0, path.end().0);
    let (lo, hi) = (g0.min(g1), g0.max(g1));
    let err = RefCell::new(None);
    let integrand = |s: f64| -> f64 {
        let s = s.clamp(lo, hi);
        let lambda = path.value_at(s).unwrap_or(f64::NAN);
        match pde_coefficients(model, data, ParamPoint::new(s + shift, lambda)) {
            Ok(c) => c.d / c.a,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let run = |n: usize| -> Result<f64> {
        simpson(integrand, s_a, s_b, n).map_err(|e| err.borrow_mut().take().unwrap_or(e))
    };
    let mut n = opts.n_panels.max(2);
    let mut prev = run(n)?;
    while n < MAX_SIMPSON_PANELS {
        n *= 2;
        let cur = run(n)?;
        if (cur - prev).abs() <= opts.quad_rtol * cur.abs().max(1.0) {
            return Ok((cur, n));
        }
        prev = cur;
    }
    Ok((prev, n))
}

/// Finds `xi` with `g(xi) = 0` by expanding a bracket around `center`.
/// Sides whose evaluation fails stop expanding.
fn bracket_and_solve(mut g: impl FnMut(f64) -> Result<f64>, center: f64) -> Result<f64> {
    let g0 = g(center)?;
    if g0 == 0.0 {
        return Ok(center);
    }
    let delta = 0.05 * center.abs().max(1.0);
    let (mut lo, mut hi) = (center, center);
    let (mut g_lo, mut g_hi) = (g0, g0);
    let (mut lo_open, mut hi_open) = (true, true);
    for k in 0..MAX_BRACKET_EXPANSIONS {
        let step = delta * 2f64.powi(k as i32);
        if lo_open {
            match g(center - step) {
                Ok(v) if v.is_finite() => {
                    lo = center - step;
                    g_lo = v;
                }
                _ => lo_open = false,
            }
        }
        if g_lo.signum() != g0.signum() {
            let hi_b = if lo == center { center } else { lo + (center - lo) };
            return find_root(|x| g(x).unwrap_or(f64::NAN), lo, hi_b, 1e-13 * center.abs().max(1.0));
        }
        if hi_open {
            match g(center + step) {
                Ok(v) if v.is_finite() => {
                    hi = center + step;
                    g_hi = v;
                }
                _ => hi_open = false,
            }
        }
        if g_hi.signum() != g0.signum() {
            return find_root(|x| g(x).unwrap_or(f64::NAN), center, hi, 1e-13 * center.abs().max(1.0));
        }
        if !lo_open && !hi_open {
            break;
        }
    }
    Err(Error::BracketingFailure(MAX_BRACKET_EXPANSIONS))
}

fn invert_curve_map(map: &CurveMap, value: f64) -> Result<f64> {
    match map {
        CurveMap::Identity => Ok(value),
        CurveMap::Constant(_) => Err(Error::TangencyDetected { xi: f64::NAN }),
        CurveMap::Custom(f) => bracket_and_solve(|xi| Ok(f(xi) - value), value),
    }
}

fn check_transversal(
    model: &dyn Model,
    data: &Dataset,
    ic: &InitialCondition,
    s0: f64,
    xi: f64,
) -> Result<()> {
    let p = ic.psi.derivative(xi)?;
    let l = ic.lambda.derivative(xi)?;
    let at = ParamPoint::new(ic.psi.eval(xi) + s0, ic.lambda.eval(xi));
    let (a, b) = a_b(model, data, at)?;
    let beta = b / a;
    let norm = (p * p + l * l).sqrt() * (1.0 + beta * beta).sqrt();
    if norm == 0.0 || ((p * beta - l) / norm).abs() < TANGENCY_TOLERANCE {
        return Err(Error::TangencyDetected { xi });
    }
    Ok(())
}

/// Evaluates the log prior at `target` by following its characteristic to the
/// initial curve and integrating `d/a` back along it.
pub fn trace_characteristic(
    model: &dyn Model,
    data: &Dataset,
    ic: &InitialCondition,
    target: ParamPoint,
    opts: &TraceOptions,
) -> Result<CharacteristicSolution> {
    model.check_domain(target)?;
    let s0 = ic.s0.ok_or_else(|| Error::InvalidInput(format!("initial condition {} has no s0", ic.label)))?;
    match opts.mode {
        TraceMode::Backward => trace_backward(model, data, ic, s0, target, opts),
        TraceMode::Forward => trace_forward(model, data, ic, s0, target, opts),
    }
}

fn trace_backward(
    model: &dyn Model,
    data: &Dataset,
    ic: &InitialCondition,
    s0: f64,
    target: ParamPoint,
    opts: &TraceOptions,
) -> Result<CharacteristicSolution> {
    let xi_star = match &ic.psi {
        CurveMap::Constant(c) => {
            let s_star = target.psi - c;
            let lambda_curve = if (s_star - s0).abs() < DEGENERATE_SPAN {
                target.lambda
            } else {
                trace_lambda(model, data, *c, s_star, target.lambda, s0, opts)?.end().1
            };
            invert_curve_map(&ic.lambda, lambda_curve)?
        }
        _ => {
            // shooting: the curve point (Psi(xi) + s0, Lambda(xi)) must lie on
            // the characteristic through the target
            let mismatch = |xi: f64| -> Result<f64> {
                let psi_curve = ic.psi.eval(xi) + s0;
                let path = trace_lambda(model, data, 0.0, target.psi, target.lambda, psi_curve, opts)?;
                Ok(ic.lambda.eval(xi) - path.end().1)
            };
            bracket_and_solve(mismatch, target.lambda)?
        }
    };
    check_transversal(model, data, ic, s0, xi_star)?;

    let shift = ic.psi.eval(xi_star);
    let s_star = target.psi - shift;
    let z_initial = ic.eval_z(xi_star)?;
    if (s_star - s0).abs() < DEGENERATE_SPAN {
        let lambda_path = trace_lambda(model, data, shift, s_star, target.lambda, s_star, opts)?;
        return Ok(CharacteristicSolution {
            xi_star,
            lambda_path,
            z_initial,
            integral: 0.0,
            z_value: z_initial,
            quadrature_panels: 0,
            endpoint: target,
        });
    }
    let lambda_path = trace_lambda(model, data, shift, s_star, target.lambda, s0, opts)?;
    let (integral, panels) = quadrature(model, data, &lambda_path, shift, s0, s_star, opts)?;
    Ok(CharacteristicSolution {
        xi_star,
        lambda_path,
        z_initial,
        integral,
        z_value: z_initial + integral,
        quadrature_panels: panels,
        endpoint: target,
    })
}

fn trace_forward(
    model: &dyn Model,
    data: &Dataset,
    ic: &InitialCondition,
    s0: f64,
    target: ParamPoint,
    opts: &TraceOptions,
) -> Result<CharacteristicSolution> {
    let xi_star = target.lambda;
    check_transversal(model, data, ic, s0, xi_star)?;
    let shift = ic.psi.eval(xi_star);
    let s_star = target.psi - shift;
    let z_initial = ic.eval_z(xi_star)?;
    let lambda_start = ic.lambda.eval(xi_star);
    let lambda_path = trace_lambda(model, data, shift, s0, lambda_start, s_star, opts)?;
    let endpoint = ParamPoint::new(target.psi, lambda_path.end().1);
    let (integral, panels) = if (s_star - s0).abs() < DEGENERATE_SPAN {
        (0.0, 0)
    } else {
        quadrature(model, data, &lambda_path, shift, s0, s_star, opts)?
    };
    Ok(CharacteristicSolution {
        xi_star,
        lambda_path,
        z_initial,
        integral,
        z_value: z_initial + integral,
        quadrature_panels: panels,
        endpoint,
    })
}

/// `z(w_hat) - z(w0)` with the initial curve anchored at `psi = w0.psi`.
///
/// For the usual `(const, xi, Z)` curves `z(w0) = Z(w0.lambda)` needs no
/// tracing, so one characteristic is traced in total.
pub fn log_prior_ratio(
    model: &dyn Model,
    data: &Dataset,
    ic: &InitialCondition,
    w_hat: ParamPoint,
    w0: ParamPoint,
    opts: &TraceOptions,
) -> Result<f64> {
    if w_hat == w0 {
        return Ok(0.0);
    }
    let ic = ic.anchored(w0.psi);
    let hat = trace_characteristic(model, data, &ic, w_hat, opts)?;
    let on_curve = matches!((&ic.psi, &ic.lambda, ic.s0), (CurveMap::Constant(c), CurveMap::Identity, Some(s0)) if c + s0 == w0.psi);
    let (z0, i0) = if on_curve {
        (ic.eval_z(w0.lambda)?, 0.0)
    } else {
        let sol = trace_characteristic(model, data, &ic, w0, opts)?;
        (sol.z_initial, sol.integral)
    };
    // grouped so a constant shift of Z cancels before the integrals enter
    Ok((hat.z_initial - z0) + (hat.integral - i0))
}

/// `a z_psi + b z_lambda - d` at `w`, with `z` differentiated numerically.
pub fn pde_residual(
    model: &dyn Model,
    data: &Dataset,
    log_prior: &dyn Fn(ParamPoint) -> Result<f64>,
    w: ParamPoint,
) -> Result<f64> {
    let c = pde_coefficients(model, data, w)?;
    let z_psi = try_central_diff(|p| log_prior(ParamPoint::new(p, w.lambda)), w.psi)?;
    let z_lambda = try_central_diff(|l| log_prior(ParamPoint::new(w.psi, l)), w.lambda)?;
    Ok(c.a * z_psi + c.b * z_lambda - c.d)
}

/// Log prior surface `w -> z(w)` for an anchored initial condition.
pub fn matching_log_prior<'a>(
    model: &'a dyn Model,
    data: &'a Dataset,
    ic: &'a InitialCondition,
    opts: TraceOptions,
) -> impl Fn(ParamPoint) -> Result<f64> + 'a {
    move |w| Ok(trace_characteristic(model, data, ic, w, &opts)?.z_value)
}

/// A prior entering the T statistic only through its log ratio.
#[derive(Clone)]
pub enum Prior {
    /// Solved numerically from an initial condition.
    Matching(InitialCondition),
    /// Closed-form log density.
    Analytic { label: String, log_density: LogDensityFn },
}

impl fmt::Debug for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Matching(ic) => f.debug_tuple("Matching").field(ic).finish(),
            Prior::Analytic { label, .. } => f.debug_struct("Analytic").field("label", label).finish(),
        }
    }
}

impl Prior {
    pub fn label(&self) -> &str {
        match self {
            Prior::Matching(ic) => &ic.label,
            Prior::Analytic { label, .. } => label,
        }
    }

    /// `log pi(w_hat) - log pi(w0)`.
    pub fn log_ratio(
        &self,
        model: &dyn Model,
        data: &Dataset,
        w_hat: ParamPoint,
        w0: ParamPoint,
        opts: &TraceOptions,
    ) -> Result<f64> {
        match self {
            Prior::Matching(ic) => log_prior_ratio(model, data, ic, w_hat, w0, opts),
            Prior::Analytic { log_density, .. } => {
                let v = log_density(w_hat) - log_density(w0);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteValue(format!("analytic log prior ratio {v}")))
                }
            }
        }
    }
}

/// `pi = 1/psi`.
pub fn inv_psi_prior() -> Prior {
    Prior::Analytic { label: "1/psi".into(), log_density: Arc::new(|w| -w.psi.ln()) }
}

/// `pi = 1/(psi lambda)`.
pub fn inv_psi_lambda_prior() -> Prior {
    Prior::Analytic { label: "1/(psi lambda)".into(), log_density: Arc::new(|w| -(w.psi * w.lambda).ln()) }
}

/// Where the q-family is centred.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Center {
    Fixed(f64),
    /// The full maximum likelihood estimate of the nuisance parameter.
    Estimate,
}

/// Named prior choices as accepted on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// `(0, xi, -1)`.
    Default,
    /// `(0, xi, -log xi)`.
    LogLambda,
    /// `(0, xi, -log{|xi - center|^q + 1})`.
    QFamily { q: f64, q_text: String, center: Center },
    InvPsi,
    InvPsiLambda,
}

/// Parses `"2/5"`, `"0.4"` or `"2"`.
pub fn parse_rational(text: &str) -> Result<f64> {
    let bad = || Error::InvalidInput(format!("cannot parse exponent '{text}'"));
    let v = match text.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0.0 {
                return Err(bad());
            }
            n / d
        }
        None => text.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

impl FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "default" | "ic-default" => return Ok(PriorSpec::Default),
            "loglambda" | "ic-loglambda" => return Ok(PriorSpec::LogLambda),
            "analytic-invpsi" => return Ok(PriorSpec::InvPsi),
            "analytic-invpsilambda" => return Ok(PriorSpec::InvPsiLambda),
            _ => {}
        }
        let rest = s
            .strip_prefix("qfam:")
            .ok_or_else(|| Error::InvalidInput(format!("unknown prior '{s}'")))?;
        let (q_text, center) = match rest.split_once('@') {
            None => (rest, Center::Fixed(-1.0)),
            Some((q, "hat")) => (q, Center::Estimate),
            Some((q, c)) => {
                let c: f64 = c.parse().map_err(|_| Error::InvalidInput(format!("bad q-family centre '{c}'")))?;
                (q, Center::Fixed(c))
            }
        };
        Ok(PriorSpec::QFamily { q: parse_rational(q_text)?, q_text: q_text.to_string(), center })
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Default => write!(f, "ic-default"),
            PriorSpec::LogLambda => write!(f, "ic-loglambda"),
            PriorSpec::InvPsi => write!(f, "analytic-invpsi"),
            PriorSpec::InvPsiLambda => write!(f, "analytic-invpsilambda"),
            PriorSpec::QFamily { q_text, center, .. } => match center {
                Center::Fixed(c) if *c == -1.0 => write!(f, "qfam:{q_text}"),
                Center::Fixed(c) => write!(f, "qfam:{q_text}@{c}"),
                Center::Estimate => write!(f, "qfam:{q_text}@hat"),
            },
        }
    }
}

impl PriorSpec {
    /// Builds the prior; `full` supplies the estimate for `Center::Estimate`.
    pub fn resolve(&self, full: Option<&FitResult>) -> Result<Prior> {
        Ok(match self {
            PriorSpec::Default => Prior::Matching(InitialCondition::constant(-1.0)),
            PriorSpec::LogLambda => Prior::Matching(InitialCondition::log_lambda()),
            PriorSpec::InvPsi => inv_psi_prior(),
            PriorSpec::InvPsiLambda => inv_psi_lambda_prior(),
            PriorSpec::QFamily { q, center, .. } => {
                let c = match center {
                    Center::Fixed(c) => *c,
                    Center::Estimate => {
                        full.ok_or_else(|| Error::InvalidInput("q-family @hat needs a fitted model".into()))?
                            .estimate
                            .lambda
                    }
                };
                Prior::Matching(InitialCondition::q_family(*q, c))
            }
        })
    }

    /// The numerically solved initial condition, if this is one.
    pub fn initial_condition(&self, full: Option<&FitResult>) -> Result<Option<InitialCondition>> {
        Ok(match self.resolve(full)? {
            Prior::Matching(ic) => Some(ic),
            Prior::Analytic { .. } => None,
        })
    }
}
