//! Tail-probability approximations built from the signed root `R` and the
//! prior-adjusted statistic `T`, in Barndorff-Nielsen form
//! `Phi{R + log(T/R)/R}` and Lugannani–Rice form `Phi(R) + phi(R)(1/R - 1/T)`.
//!
//! Both approximate the posterior tail `Pr(psi >= psi0 | X)`, which to the
//! same order is the sampling probability `Pr(R <= r)` at `psi0`. That value is
//! the one-sided p-value: small tails reject `psi0` in favour of smaller `psi`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fit_constrained, fit_full, observed_hessian, signed_root_from_fits, t_determinants, FitResult};
use crate::model::{invert, Dataset, Model};
#[cfg(test)]
use crate::model::ParamPoint;
use crate::numerics::{find_root, std_normal_cdf, std_normal_pdf};
use crate::prior::{Prior, TraceOptions};

/// Below this `|R|` both formats fall back to `Phi(R)`.
pub const R_EPS: f64 = 1e-5;
/// Below this `|T|` both formats fall back to `Phi(R)`.
pub const T_EPS: f64 = 1e-12;

const MAX_BRACKET_EXPANSIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailFormat {
    Bn,
    Lr,
}

impl TailFormat {
    pub const ALL: [TailFormat; 2] = [TailFormat::Bn, TailFormat::Lr];
}

impl FromStr for TailFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bn" => Ok(TailFormat::Bn),
            "lr" => Ok(TailFormat::Lr),
            _ => Err(Error::InvalidInput(format!("unknown format '{s}' (expected bn or lr)"))),
        }
    }
}

impl fmt::Display for TailFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailFormat::Bn => "bn",
            TailFormat::Lr => "lr",
        })
    }
}

/// A tail value with the policy flags that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailValue {
    pub p: f64,
    pub near_singular: bool,
    pub clamped: bool,
}

/// True where either format hits its removable singularity or `log(T/R)` is undefined.
pub fn is_near_singular(r: f64, t: f64) -> bool {
    r.abs() < R_EPS || t.abs() < T_EPS || !(t / r > 0.0)
}

fn fallback(r: f64) -> TailValue {
    TailValue { p: std_normal_cdf(r), near_singular: true, clamped: false }
}

/// `Phi{R + log(T/R)/R}`.
pub fn bn_tail(r: f64, t: f64) -> TailValue {
    if is_near_singular(r, t) {
        return fallback(r);
    }
    TailValue { p: std_normal_cdf(r + (t / r).ln() / r), near_singular: false, clamped: false }
}

/// `Phi(R) + phi(R)(1/R - 1/T)`, clamped to `[0, 1]`.
pub fn lr_tail(r: f64, t: f64) -> TailValue {
    if is_near_singular(r, t) {
        return fallback(r);
    }
    let raw = std_normal_cdf(r) + std_normal_pdf(r) * (1.0 / r - 1.0 / t);
    let p = raw.clamp(0.0, 1.0);
    TailValue { p, near_singular: false, clamped: p != raw }
}

pub fn tail(format: TailFormat, r: f64, t: f64) -> TailValue {
    match format {
        TailFormat::Bn => bn_tail(r, t),
        TailFormat::Lr => lr_tail(r, t),
    }
}

/// One- and two-sided p-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PValues {
    pub one_sided: f64,
    pub two_sided: f64,
}

impl PValues {
    /// From a tail value `p`: one-sided `p`, two-sided `2 min(p, 1 - p)`.
    pub fn from_tail(p: f64) -> Self {
        let one_sided = p.clamp(0.0, 1.0);
        Self { one_sided, two_sided: (2.0 * one_sided.min(1.0 - one_sided)).min(1.0) }
    }

    /// Likelihood ratio baseline, `Phi(R)` one-sided.
    pub fn lrt(r: f64) -> Self {
        let lower = std_normal_cdf(r);
        let upper = std_normal_cdf(-r);
        Self { one_sided: lower, two_sided: (2.0 * lower.min(upper)).min(1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailResult {
    pub r: f64,
    pub t: f64,
    pub p_bn: f64,
    pub p_lr: f64,
    pub near_singular: bool,
    pub lr_clamped: bool,
}

impl TailResult {
    pub fn from_rt(r: f64, t: f64) -> Self {
        let bn = bn_tail(r, t);
        let lr = lr_tail(r, t);
        Self { r, t, p_bn: bn.p, p_lr: lr.p, near_singular: bn.near_singular, lr_clamped: lr.clamped }
    }

    /// Approximate `Pr(psi >= psi0 | X)`.
    pub fn tail(&self, format: TailFormat) -> f64 {
        match format {
            TailFormat::Bn => self.p_bn,
            TailFormat::Lr => self.p_lr,
        }
    }

    pub fn p_values(&self, format: TailFormat) -> PValues {
        PValues::from_tail(self.tail(format))
    }
}

/// `T` from already computed fits.
pub fn t_statistic_from_fits(
    model: &dyn Model,
    data: &Dataset,
    full: &FitResult,
    constrained: &FitResult,
    prior: &Prior,
    opts: &TraceOptions,
) -> Result<f64> {
    let (w_hat, w0) = (full.estimate, constrained.estimate);
    let score = model.score(w0, data)?[0];
    if score == 0.0 {
        return Ok(0.0);
    }
    let (nuisance, det) = t_determinants(model, data, w_hat, w0)?;
    let log_ratio = prior.log_ratio(model, data, w_hat, w0, opts)?;
    let t = score * (nuisance / det).sqrt() * log_ratio.exp();
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::NonFiniteValue(format!("T = {t}")))
    }
}

/// `T = l_psi(psi0, lambda0) |-l_lambda_lambda|^{1/2} pi(w_hat) / {|-l_ww(w_hat)|^{1/2} pi(psi0, lambda0)}`.
pub fn t_statistic(model: &dyn Model, data: &Dataset, psi0: f64, prior: &Prior, opts: &TraceOptions) -> Result<f64> {
    let full = fit_full(model, data)?;
    let constrained = fit_constrained(model, data, psi0)?;
    t_statistic_from_fits(model, data, &full, &constrained, prior, opts)
}

/// `R`, `T` and both tails at `psi0`, reusing a full fit.
pub fn evaluate_with_full(
    model: &dyn Model,
    data: &Dataset,
    full: &FitResult,
    psi0: f64,
    prior: &Prior,
    opts: &TraceOptions,
) -> Result<TailResult> {
    let constrained = fit_constrained(model, data, psi0)?;
    evaluate_from_fits(model, data, full, &constrained, prior, opts)
}

pub fn evaluate_from_fits(
    model: &dyn Model,
    data: &Dataset,
    full: &FitResult,
    constrained: &FitResult,
    prior: &Prior,
    opts: &TraceOptions,
) -> Result<TailResult> {
    let r = signed_root_from_fits(full, constrained)?;
    let t = t_statistic_from_fits(model, data, full, constrained, prior, opts)?;
    Ok(TailResult::from_rt(r, t))
}

pub fn evaluate(model: &dyn Model, data: &Dataset, psi0: f64, prior: &Prior, opts: &TraceOptions) -> Result<TailResult> {
    let full = fit_full(model, data)?;
    evaluate_with_full(model, data, &full, psi0, prior, opts)
}

pub fn p_values(
    model: &dyn Model,
    data: &Dataset,
    psi0: f64,
    prior: &Prior,
    format: TailFormat,
    opts: &TraceOptions,
) -> Result<PValues> {
    Ok(evaluate(model, data, psi0, prior, opts)?.p_values(format))
}

/// Equal-tailed credible interval for `psi`: the `(1-level)/2` and
/// `(1+level)/2` posterior quantiles, found by inverting the tail approximation.
pub fn credible_interval(
    model: &dyn Model,
    data: &Dataset,
    prior: &Prior,
    level: f64,
    format: TailFormat,
    opts: &TraceOptions,
) -> Result<(f64, f64)> {
    let full = fit_full(model, data)?;
    credible_interval_with_full(model, data, &full, prior, level, format, opts)
}

pub fn credible_interval_with_full(
    model: &dyn Model,
    data: &Dataset,
    full: &FitResult,
    prior: &Prior,
    level: f64,
    format: TailFormat,
    opts: &TraceOptions,
) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level must lie in (0, 1), got {level}")));
    }
    let psi_hat = full.estimate.psi;
    let se = invert(&-observed_hessian(model, data, full.estimate)?)?[(0, 0)].sqrt();
    let step = if se.is_finite() && se > 0.0 { 0.5 * se } else { 0.1 * psi_hat.abs().max(1.0) };
    let tail_at = |psi0: f64| -> Result<f64> {
        Ok(evaluate_with_full(model, data, full, psi0, prior, opts)?.tail(format))
    };
    let half = 0.5 * (1.0 - level);
    let lo = quantile(model, psi_hat, -step, |p| Ok(tail_at(p)? - (1.0 - half)))?;
    let hi = quantile(model, psi_hat, step, |p| Ok(tail_at(p)? - half))?;
    Ok((lo, hi))
}

/// Walks from `start` in the direction of `step`, doubling the distance, until
/// `g` changes sign, then solves. Steps that would cross a domain boundary
/// halve the remaining gap instead.
fn quantile(model: &dyn Model, start: f64, step: f64, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let bounds = model.domain().psi;
    let bound = if step < 0.0 { bounds.lo } else { bounds.hi };
    let g_start = g(start)?;
    let mut inner = start;
    let mut outer = start;
    let mut g_outer = g_start;
    for k in 0..MAX_BRACKET_EXPANSIONS {
        let mut next = start + step * 2f64.powi(k as i32);
        let inside = if step < 0.0 { next > bound } else { next < bound };
        if !inside {
            next = 0.5 * (outer + bound);
        }
        let v = g(next)?;
        inner = outer;
        outer = next;
        g_outer = v;
        if v.signum() != g_start.signum() || v == 0.0 {
            break;
        }
    }
    if g_outer.signum() == g_start.signum() && g_outer != 0.0 {
        return Err(Error::BracketingFailure(MAX_BRACKET_EXPANSIONS));
    }
    let (a, b) = if inner < outer { (inner, outer) } else { (outer, inner) };
    let xtol = 1e-10 * a.abs().max(b.abs()).max(1.0);
    let mut err = None;
    let root = find_root(
        |p| match g(p) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        xtol,
    );
    match (root, err) {
        (Ok(r), _) => Ok(r),
        (Err(_), Some(e)) => Err(e),
        (Err(e), None) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{exp_ratio_model, logistic_model};
    use crate::prior::{inv_psi_lambda_prior, inv_psi_prior, InitialCondition};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // mpmath, 30 digits
    const BN_ORACLE: f64 = 0.020_296_903_633_860_65;
    const LR_ORACLE: f64 = 0.020_295_997_106_670_66;

    #[test]
    fn format_examples() {
        for r in [-2.5, -0.3, 0.7, 3.0] {
            assert_eq!(bn_tail(r, r).p, std_normal_cdf(r));
            assert_eq!(lr_tail(r, r).p, std_normal_cdf(r));
        }
        let z = bn_tail(0.0, 0.3);
        assert_eq!(z.p, 0.5);
        assert!(z.near_singular);
        assert_eq!(lr_tail(0.0, 0.3).p, 0.5);
        assert_abs_diff_eq!(bn_tail(-2.0, -2.2).p, BN_ORACLE, epsilon = 1e-14);
        assert_abs_diff_eq!(lr_tail(-2.0, -2.2).p, LR_ORACLE, epsilon = 1e-14);
        let c = lr_tail(-0.5, -5.0);
        assert!(c.clamped);
        assert_eq!(c.p, 0.0);
        let c = lr_tail(0.5, 5.0);
        assert!(c.clamped);
        assert_eq!(c.p, 1.0);
        // opposite signs and vanishing T fall back
        assert!(bn_tail(1.0, -1.0).near_singular);
        assert!(lr_tail(1.0, 1e-13).near_singular);
    }

    #[test]
    fn tail_result_flags() {
        let t = TailResult::from_rt(1e-7, 3.0);
        assert!(t.near_singular);
        assert_eq!(t.p_bn, t.p_lr);
        assert_eq!(t.p_bn, std_normal_cdf(1e-7));
        let t = TailResult::from_rt(-0.5, -5.0);
        assert!(t.lr_clamped && !t.near_singular);
    }

    #[test]
    fn p_value_rules() {
        let p = PValues::from_tail(0.5);
        assert_eq!(p.two_sided, 1.0);
        let p = PValues::from_tail(0.01);
        assert_abs_diff_eq!(p.two_sided, 0.02, epsilon = 1e-15);
        let p = PValues::from_tail(0.99);
        assert_abs_diff_eq!(p.two_sided, 0.02, epsilon = 1e-15);
        let l = PValues::lrt(-1.959963984540054);
        assert_abs_diff_eq!(l.one_sided, 0.025, epsilon = 1e-12);
        assert_abs_diff_eq!(l.two_sided, 0.05, epsilon = 1e-12);
        // psi_hat far below psi0 gives a small one-sided p-value
        let t = TailResult::from_rt(-3.0, -3.0);
        assert!(t.p_values(TailFormat::Bn).one_sided < 0.01);
        assert!(TailResult::from_rt(3.0, 3.0).p_values(TailFormat::Bn).one_sided > 0.99);
        // near-singular replicates never reject
        let t = TailResult::from_rt(0.0, 0.0);
        assert_eq!(t.p_values(TailFormat::Lr), PValues { one_sided: 0.5, two_sided: 1.0 });
    }

    #[test]
    fn format_parsing() {
        assert_eq!("BN".parse::<TailFormat>().unwrap(), TailFormat::Bn);
        assert_eq!("lr".parse::<TailFormat>().unwrap(), TailFormat::Lr);
        assert!("xx".parse::<TailFormat>().is_err());
    }

    proptest! {
        #[test]
        fn formats_agree_away_from_zero(r in 1.5f64..6.0, neg in any::<bool>(), q in 0.5f64..2.0) {
            let r = if neg { -r } else { r };
            let d = (bn_tail(r, q * r).p - lr_tail(r, q * r).p).abs();
            prop_assert!(d < 0.01, "R={r} T/R={q}: {d}");
        }

        #[test]
        fn bn_monotone_in_r_at_fixed_ratio(r1 in -6.0f64..6.0, dr in 0.001f64..2.0, q in 0.2f64..5.0) {
            let r2 = r1 + dr;
            // R + log(q)/R is increasing on each half-line only where R^2 >= log q
            let floor = q.ln().max(0.0).sqrt().max(0.05);
            prop_assume!(r1.abs() >= floor && r2.abs() >= floor && r1.signum() == r2.signum());
            prop_assert!(bn_tail(r1, q * r1).p <= bn_tail(r2, q * r2).p + 1e-15);
        }

        #[test]
        fn p_values_are_probabilities(r in -8.0f64..8.0, t in -20.0f64..20.0) {
            let res = TailResult::from_rt(r, t);
            for f in TailFormat::ALL {
                let p = res.p_values(f);
                prop_assert!((0.0..=1.0).contains(&p.one_sided));
                prop_assert!((0.0..=1.0).contains(&p.two_sided));
            }
            prop_assert!((0.0..=1.0).contains(&res.p_bn) && (0.0..=1.0).contains(&res.p_lr));
        }
    }

    fn exp_sample(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        exp_ratio_model().sample(ParamPoint::new(1.0, 1.0), 10, &mut rng).unwrap()
    }

    #[test]
    fn t_examples() {
        let m = exp_ratio_model();
        let d = exp_sample(1);
        let opts = TraceOptions::default();
        let prior = Prior::Matching(InitialCondition::constant(-1.0));
        let full = fit_full(&m, &d).unwrap();
        // the score at the full fit vanishes up to rounding
        assert!(t_statistic(&m, &d, full.estimate.psi, &prior, &opts).unwrap().abs() < T_EPS);
        assert!(evaluate(&m, &d, full.estimate.psi, &prior, &opts).unwrap().near_singular);
        for psi0 in [0.4, 0.8, 1.5, 3.0] {
            let t = t_statistic(&m, &d, psi0, &prior, &opts).unwrap();
            let analytic = t_statistic(&m, &d, psi0, &inv_psi_prior(), &opts).unwrap();
            assert_abs_diff_eq!(t, analytic, epsilon = 1e-5 * analytic.abs().max(1.0));
            let c = fit_constrained(&m, &d, psi0).unwrap();
            assert_eq!(t.signum(), m.score(c.estimate, &d).unwrap()[0].signum());
        }
    }

    #[test]
    fn numeric_priors_match_analytic_p_values() {
        let m = exp_ratio_model();
        let opts = TraceOptions::default();
        let pairs = [
            (Prior::Matching(InitialCondition::constant(-1.0)), inv_psi_prior()),
            (Prior::Matching(InitialCondition::log_lambda()), inv_psi_lambda_prior()),
        ];
        for seed in 0..20 {
            let d = exp_sample(100 + seed);
            for (num, ana) in &pairs {
                for f in TailFormat::ALL {
                    let a = p_values(&m, &d, 1.0, num, f, &opts).unwrap();
                    let b = p_values(&m, &d, 1.0, ana, f, &opts).unwrap();
                    assert_abs_diff_eq!(a.one_sided, b.one_sided, epsilon = 1e-5);
                    assert_abs_diff_eq!(a.two_sided, b.two_sided, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn symmetric_exp_data() {
        let m = exp_ratio_model();
        let d = Dataset::new(vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]).unwrap();
        let prior = Prior::Matching(InitialCondition::constant(-1.0));
        let p = p_values(&m, &d, 1.0, &prior, TailFormat::Bn, &TraceOptions::default()).unwrap();
        assert_eq!(p.two_sided, 1.0);
    }

    #[test]
    fn intervals() {
        let m = exp_ratio_model();
        let d = exp_sample(5);
        let opts = TraceOptions::default();
        let prior = Prior::Matching(InitialCondition::constant(-1.0));
        let hat = fit_full(&m, &d).unwrap().estimate.psi;
        let (lo90, hi90) = credible_interval(&m, &d, &prior, 0.90, TailFormat::Bn, &opts).unwrap();
        let (lo95, hi95) = credible_interval(&m, &d, &prior, 0.95, TailFormat::Bn, &opts).unwrap();
        assert!(lo90 < hat && hat < hi90);
        assert!(lo95 < lo90 && hi90 < hi95);
        assert!(lo95 > 0.0);
        // the endpoints are where the tail crosses the target levels
        let at = |p| evaluate(&m, &d, p, &prior, &opts).unwrap().p_bn;
        assert_abs_diff_eq!(at(lo90), 0.95, epsilon = 1e-7);
        assert_abs_diff_eq!(at(hi90), 0.05, epsilon = 1e-7);
        assert!(credible_interval(&m, &d, &prior, 1.0, TailFormat::Bn, &opts).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let lm = logistic_model(xs).unwrap();
        let ld = lm.sample(ParamPoint::new(0.5, -1.0), 30, &mut rng).unwrap();
        let (lo, hi) = credible_interval(&lm, &ld, &prior, 0.95, TailFormat::Lr, &opts).unwrap();
        let hat = fit_full(&lm, &ld).unwrap().estimate.psi;
        assert!(lo < hat && hat < hi);
    }
}
