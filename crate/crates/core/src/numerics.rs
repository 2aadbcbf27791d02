//! Numerical kernels: adaptive Dormand–Prince integration with dense output, composite Simpson quadrature, bracketing root finding,
//! central differences and the standard normal distribution.

use crate::error::{Error, Result};

/// Default relative tolerance for [`integrate_ode`].
pub const DEFAULT_RTOL: f64 = 1e-8;
/// Default absolute tolerance for [`integrate_ode`].
pub const DEFAULT_ATOL: f64 = 1e-10;
/// Default number of Simpson panels used along a characteristic.
pub const DEFAULT_SIMPSON_PANELS: usize = 128;

const MAX_ODE_STEPS: usize = 200_000;
/// Steps never exceed this fraction of the span, so the dense output stays
/// accurate between nodes.
const MAX_STEP_FRACTION: f64 = 1.0 / 32.0;
const UNDERFLOW_FRACTION: f64 = 1e-14;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Solution of a scalar initial value problem.
///
/// `grid` is strictly monotone in the direction of integration. Between nodes
/// the state comes from the fourth-order continuous extension of the
/// Dormand–Prince pair.
#[derive(Debug, Clone)]
pub struct OdeTrajectory {
    grid: Vec<f64>,
    states: Vec<f64>,
    slopes: Vec<f64>,
    /// Per-step quintic correction term of the continuous extension.
    dense: Vec<f64>,
}

impl OdeTrajectory {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn start(&self) -> (f64, f64) {
        (self.grid[0], self.states[0])
    }

    pub fn end(&self) -> (f64, f64) {
        let last = self.grid.len() - 1;
        (self.grid[last], self.states[last])
    }

    /// Number of accepted steps.
    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    fn increasing(&self) -> bool {
        self.grid.len() < 2 || self.grid[1] > self.grid[0]
    }

    /// Dense-output value at `s`, or `None` outside the integrated span.
    pub fn value_at(&self, s: f64) -> Option<f64> {
        let n = self.grid.len();
        if n == 1 {
            return (s == self.grid[0]).then_some(self.states[0]);
        }
        let (lo, hi) = if self.increasing() {
            (self.grid[0], self.grid[n - 1])
        } else {
            (self.grid[n - 1], self.grid[0])
        };
        if !(s >= lo && s <= hi) {
            return None;
        }
        // index of the first node strictly past s in integration order
        let idx = if self.increasing() {
            self.grid.partition_point(|&g| g <= s)
        } else {
            self.grid.partition_point(|&g| g >= s)
        };
        if idx == 0 {
            return Some(self.states[0]);
        }
        if idx >= n {
            return Some(self.states[n - 1]);
        }
        let i = idx - 1;
        let (s0, s1) = (self.grid[i], self.grid[i + 1]);
        if s == s0 {
            return Some(self.states[i]);
        }
        let h = s1 - s0;
        let t = (s - s0) / h;
        let (y0, y1) = (self.states[i], self.states[i + 1]);
        let r2 = y1 - y0;
        let r3 = h * self.slopes[i] - r2;
        let r4 = r2 - h * self.slopes[i + 1] - r3;
        Some(y0 + t * (r2 + (1.0 - t) * (r3 + t * (r4 + (1.0 - t) * self.dense[i]))))
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `dy/ds = rhs(s, y)` from `(s0, y0)` to `s_end` with an adaptive
/// Dormand–Prince 5(4) pair.
///
/// Integration towards smaller `s` is carried out on the negated variable
/// `u = -s`, so both directions share one stepping loop. The local error of
/// every accepted step satisfies `|err| <= rtol·|y| + atol`.
pub fn integrate_ode<F>(mut rhs: F, s0: f64, y0: f64, s_end: f64, rtol: f64, atol: f64) -> Result<OdeTrajectory>
where
    F: FnMut(f64, f64) -> f64,
{
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerances must be positive (rtol={rtol}, atol={atol})")));
    }
    if !s0.is_finite() || !s_end.is_finite() || !y0.is_finite() {
        return Err(Error::InvalidInput("non-finite ODE initial data".into()));
    }
    let f0 = rhs(s0, y0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteRhs { at: s0 });
    }
    let mut traj = OdeTrajectory { grid: vec![s0], states: vec![y0], slopes: vec![f0], dense: Vec::new() };
    if s0 == s_end {
        return Ok(traj);
    }

    let dir = if s_end > s0 { 1.0 } else { -1.0 };
    // u = dir * s runs upwards; dy/du = dir * rhs(dir * u, y)
    let mut g = |u: f64, y: f64| -> Result<f64> {
        let s = dir * u;
        let v = rhs(s, y);
        if v.is_finite() {
            Ok(dir * v)
        } else {
            Err(Error::NonFiniteRhs { at: s })
        }
    };

    let u_end = dir * s_end;
    let mut u = dir * s0;
    let mut y = y0;
    let mut k1 = dir * f0;
    let span = (u_end - u).abs();
    let h_max = span * MAX_STEP_FRACTION;
    let h_min = UNDERFLOW_FRACTION * span;
    let mut h = h_max * 0.25;

    for _ in 0..MAX_ODE_STEPS {
        let remaining = u_end - u;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let k2 = g(u + C2 * h, y + h * A21 * k1)?;
        let k3 = g(u + C3 * h, y + h * (A31 * k1 + A32 * k2))?;
        let k4 = g(u + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))?;
        let k5 = g(u + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))?;
        let k6 = g(u + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))?;
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let u_new = if last { u_end } else { u + h };
        let k7 = g(u_new, y_new)?;
        let err_abs = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = atol + rtol * y.abs().max(y_new.abs());
        let err = (err_abs / scale).abs();

        if err <= 1.0 {
            // h and the stages live in u; their product is the same in s
            traj.dense.push(h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7));
            u = u_new;
            y = y_new;
            k1 = k7;
            traj.grid.push(dir * u);
            traj.states.push(y);
            traj.slopes.push(dir * k7);
            if last {
                return Ok(traj);
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(h_max);
        if h < h_min {
            return Err(Error::StepSizeUnderflow { at: dir * u, min_step: h_min });
        }
    }
    Err(Error::MaxStepsExceeded(MAX_ODE_STEPS))
}

/// Composite Simpson rule on `[a, b]` with `n_panels` (even) subintervals.
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n_panels: usize) -> Result<f64> {
    if n_panels < 2 || n_panels % 2 != 0 {
        return Err(Error::InvalidInput(format!("Simpson needs an even panel count >= 2, got {n_panels}")));
    }
    let h = (b - a) / n_panels as f64;
    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteIntegrand { at: x })
        }
    };
    let mut sum = eval(a)? + eval(b)?;
    for i in 1..n_panels {
        let x = a + h * i as f64;
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * eval(x)?;
    }
    Ok(sum * h / 3.0)
}

/// Brent's method on a sign-changing bracket.
///
/// The returned abscissa lies inside `[lo, hi]` and the final bracket is no
/// wider than `xtol`.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("root bracket [{lo}, {hi}] is empty")));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NonFiniteValue(format!("root bracket endpoint values {fa}, {fb}")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo, hi, f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b.clamp(lo, hi));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::NonFiniteValue(format!("root function at {b}")));
        }
    }
    Ok(b.clamp(lo, hi))
}

fn diff_step(x: f64) -> (f64, f64) {
    let h = f64::EPSILON.cbrt() * x.abs().max(1.0);
    // make x ± h exactly representable so the divisor matches the step taken
    let up = x + h;
    let down = x - h;
    (up, down)
}

/// First derivative by central differences with step `cbrt(eps)·max(1, |x|)`.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64) -> Result<f64> {
    try_central_diff(|v| Ok(f(v)), x)
}

/// [`central_diff`] for fallible functions.
pub fn try_central_diff<F: FnMut(f64) -> Result<f64>>(mut f: F, x: f64) -> Result<f64> {
    let (up, down) = diff_step(x);
    let fu = f(up)?;
    let fd = f(down)?;
    let v = (fu - fd) / (up - down);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue(format!("central difference at {x}")))
    }
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `v` rounded to `digits` significant digits, positional for moderate
/// exponents and scientific otherwise.
pub fn format_sig(v: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return format!("{:.*}", digits - 1, 0.0);
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..digits as i32).contains(&exp) {
        format!("{:.*}", (digits as i32 - 1 - exp) as usize, v)
    } else {
        sci
    }
}
