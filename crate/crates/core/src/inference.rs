//! Full and constrained maximum likelihood, the signed likelihood root and
//! the curvature factors entering the T statistic.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::{invert, Dataset, Model, ParamPoint};
use crate::numerics::try_central_diff;

pub const MAX_NEWTON_ITERATIONS: usize = 100;
pub const SCORE_TOLERANCE: f64 = 1e-8;
/// Radicands of `2 (l_hat - l_0)` down to this value are clamped to zero.
pub const RADICAND_SLACK: f64 = 1e-10;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// For constrained fits `estimate.psi` is the fixed null value.
    pub estimate: ParamPoint,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the score (the lambda component only for constrained fits).
    pub gradient_norm: f64,
}

impl FitResult {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence { iterations: self.iterations, gradient_norm: self.gradient_norm })
        }
    }
}

/// Matrix of second partials: analytic if the model has it, otherwise central
/// differences of the score.
pub fn observed_hessian(model: &dyn Model, data: &Dataset, w: ParamPoint) -> Result<Matrix2<f64>> {
    if let Some(h) = model.hessian(w, data) {
        return h;
    }
    let mut h = Matrix2::zeros();
    for j in 0..2 {
        h[(j, 0)] = try_central_diff(|p| Ok(model.score(ParamPoint::new(p, w.lambda), data)?[j]), w.psi)?;
        h[(j, 1)] = try_central_diff(|l| Ok(model.score(ParamPoint::new(w.psi, l), data)?[j]), w.lambda)?;
    }
    let off = 0.5 * (h[(0, 1)] + h[(1, 0)]);
    h[(0, 1)] = off;
    h[(1, 0)] = off;
    Ok(h)
}

fn check_separation(model: &dyn Model, w: ParamPoint) -> Result<()> {
    match model.separation_bound() {
        Some(bound) if w.psi.abs() > bound || w.lambda.abs() > bound => Err(Error::SeparationDetected { bound }),
        _ => Ok(()),
    }
}

fn sup_norm(g: &Vector2<f64>) -> f64 {
    g[0].abs().max(g[1].abs())
}

/// Tries `current + t·step` for `t = 1, 1/2, 1/4, ...` until the log-likelihood
/// does not decrease.
fn line_search(
    model: &dyn Model,
    data: &Dataset,
    current: ParamPoint,
    l_current: f64,
    step: Vector2<f64>,
) -> Result<Option<(ParamPoint, f64)>> {
    // near the optimum likelihood differences sink below rounding
    let slack = 8.0 * f64::EPSILON * l_current.abs().max(1.0);
    let mut t = 1.0;
    let mut left_domain = false;
    for _ in 0..MAX_HALVINGS {
        let cand = ParamPoint::from_vector(current.as_vector() + step * t);
        if model.domain().contains(cand) {
            if let Ok(l) = model.loglik(cand, data) {
                if l >= l_current - slack {
                    return Ok(Some((cand, l)));
                }
            }
        } else {
            left_domain = true;
        }
        t *= 0.5;
    }
    if left_domain {
        Err(Error::DomainViolation(format!("line search could not stay inside the {} domain", model.name())))
    } else {
        Ok(None)
    }
}

/// Newton iteration with step halving for the full maximum likelihood estimate.
///
/// Converges when the score sup-norm drops below [`SCORE_TOLERANCE`]; after
/// [`MAX_NEWTON_ITERATIONS`] the best iterate is returned unconverged.
pub fn mle(model: &dyn Model, data: &Dataset, init: ParamPoint) -> Result<FitResult> {
    model.check_domain(init)?;
    let mut w = init;
    let mut l = model.loglik(w, data)?;
    let mut g = model.score(w, data)?;
    let mut iterations = 0;
    for it in 0..MAX_NEWTON_ITERATIONS {
        iterations = it;
        if sup_norm(&g) < SCORE_TOLERANCE {
            (w, l, g) = polish(model, data, w, l, g)?;
            return Ok(FitResult { estimate: w, loglik: l, converged: true, iterations: it, gradient_norm: sup_norm(&g) });
        }
        let h = observed_hessian(model, data, w)?;
        let neg_h = -h;
        let concave = neg_h[(0, 0)] > 0.0 && neg_h.determinant() > 0.0;
        // fall back to Fisher scoring away from the concave region
        let step = if concave {
            invert(&neg_h)? * g
        } else {
            invert(&model.expected_info(w, data)?)? * g
        };
        match line_search(model, data, w, l, step)? {
            Some((next, l_next)) => {
                w = next;
                l = l_next;
            }
            None => break,
        }
        check_separation(model, w)?;
        g = model.score(w, data)?;
    }
    let norm = sup_norm(&g);
    Ok(FitResult { estimate: w, loglik: l, converged: norm < SCORE_TOLERANCE, iterations, gradient_norm: norm })
}

/// One unguarded Newton step from a converged point, kept if it does not lower
/// the likelihood; removes the last bit of error left by the score tolerance.
fn polish(
    model: &dyn Model,
    data: &Dataset,
    w: ParamPoint,
    l: f64,
    g: Vector2<f64>,
) -> Result<(ParamPoint, f64, Vector2<f64>)> {
    let neg_h = -observed_hessian(model, data, w)?;
    if !(neg_h[(0, 0)] > 0.0 && neg_h.determinant() > 0.0) {
        return Ok((w, l, g));
    }
    let next = ParamPoint::from_vector(w.as_vector() + invert(&neg_h)? * g);
    if model.check_domain(next).is_err() {
        return Ok((w, l, g));
    }
    match (model.loglik(next, data), model.score(next, data)) {
        (Ok(l2), Ok(g2)) if l2 >= l - 1e-12 * l.abs().max(1.0) && sup_norm(&g2) <= sup_norm(&g) => Ok((next, l2, g2)),
        _ => Ok((w, l, g)),
    }
}

/// Maximizes `l(psi0, .)` over the nuisance parameter by one-dimensional Newton.
pub fn constrained_mle(model: &dyn Model, data: &Dataset, psi0: f64, init_lambda: f64) -> Result<FitResult> {
    let mut w = ParamPoint::new(psi0, init_lambda);
    model.check_domain(w)?;
    let mut l = model.loglik(w, data)?;
    let mut g = model.score(w, data)?[1];
    let mut iterations = 0;
    for it in 0..MAX_NEWTON_ITERATIONS {
        iterations = it;
        if g.abs() < SCORE_TOLERANCE {
            let h = observed_hessian(model, data, w)?[(1, 1)];
            let next = ParamPoint::new(psi0, w.lambda - g / h);
            if h < 0.0 && model.check_domain(next).is_ok() {
                if let (Ok(l2), Ok(g2)) = (model.loglik(next, data), model.score(next, data)) {
                    if l2 >= l - 1e-12 * l.abs().max(1.0) && g2[1].abs() <= g.abs() {
                        (w, l, g) = (next, l2, g2[1]);
                    }
                }
            }
            return Ok(FitResult { estimate: w, loglik: l, converged: true, iterations: it, gradient_norm: g.abs() });
        }
        let h = observed_hessian(model, data, w)?[(1, 1)];
        let step = if h < 0.0 { -g / h } else { g / model.expected_info(w, data)?[(1, 1)] };
        match line_search(model, data, w, l, Vector2::new(0.0, step))? {
            Some((next, l_next)) => {
                w = next;
                l = l_next;
            }
            None => break,
        }
        check_separation(model, w)?;
        g = model.score(w, data)?[1];
    }
    Ok(FitResult {
        estimate: w,
        loglik: l,
        converged: g.abs() < SCORE_TOLERANCE,
        iterations,
        gradient_norm: g.abs(),
    })
}

fn closed_form_fit(model: &dyn Model, data: &Dataset, w: ParamPoint, constrained: bool) -> Result<FitResult> {
    let l = model.loglik(w, data)?;
    let g = model.score(w, data)?;
    let norm = if constrained { g[1].abs() } else { sup_norm(&g) };
    Ok(FitResult { estimate: w, loglik: l, converged: norm < SCORE_TOLERANCE, iterations: 0, gradient_norm: norm })
}

/// Full fit used by the inference pipeline: the closed form when the model has
/// one, Newton from the model's starting point otherwise. Fails unless converged.
pub fn fit_full(model: &dyn Model, data: &Dataset) -> Result<FitResult> {
    let fit = match model.closed_form_mle(data) {
        Some(w) => {
            let fit = closed_form_fit(model, data, w, false)?;
            if fit.converged {
                fit
            } else {
                mle(model, data, w)?
            }
        }
        None => mle(model, data, model.initial_guess(data))?,
    };
    check_separation(model, fit.estimate)?;
    fit.require_converged()
}

/// Constrained counterpart of [`fit_full`].
pub fn fit_constrained(model: &dyn Model, data: &Dataset, psi0: f64) -> Result<FitResult> {
    let fit = match model.closed_form_constrained(data, psi0) {
        Some(lambda) => {
            let fit = closed_form_fit(model, data, ParamPoint::new(psi0, lambda), true)?;
            if fit.converged {
                fit
            } else {
                constrained_mle(model, data, psi0, lambda)?
            }
        }
        None => constrained_mle(model, data, psi0, model.constrained_initial(data, psi0))?,
    };
    check_separation(model, fit.estimate)?;
    fit.require_converged()
}

/// `sgn(psi_hat - psi0) · sqrt(2 (l(omega_hat) - l(psi0, lambda_hat_0)))` from two fits.
pub fn signed_root_from_fits(full: &FitResult, constrained: &FitResult) -> Result<f64> {
    let radicand = 2.0 * (full.loglik - constrained.loglik);
    if radicand < -RADICAND_SLACK {
        return Err(Error::NegativeRadicand(radicand));
    }
    let diff = full.estimate.psi - constrained.estimate.psi;
    let sign = if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(sign * radicand.max(0.0).sqrt())
}

/// Signed likelihood root at the null value `psi0`.
pub fn signed_root(model: &dyn Model, data: &Dataset, psi0: f64) -> Result<f64> {
    let full = fit_full(model, data)?;
    let constrained = fit_constrained(model, data, psi0)?;
    signed_root_from_fits(&full, &constrained)
}

/// `(-l_lambda_lambda(omega0), det(-l_omega_omega(omega_hat)))`; both must be positive.
pub fn t_determinants(model: &dyn Model, data: &Dataset, omega_hat: ParamPoint, omega0: ParamPoint) -> Result<(f64, f64)> {
    let nuisance = -observed_hessian(model, data, omega0)?[(1, 1)];
    let full = (-observed_hessian(model, data, omega_hat)?).determinant();
    if !(nuisance > 0.0) {
        return Err(Error::NonPositiveCurvature(format!("-l_lambda_lambda = {nuisance} at the constrained fit")));
    }
    if !(full > 0.0) {
        return Err(Error::NonPositiveCurvature(format!("det(-l_omega_omega) = {full} at the full fit")));
    }
    Ok((nuisance, full))
}
