//! Shared numerics: adaptive Gauss–Kronrod and tanh-sinh quadrature on the
//! half line, series summation with convex-envelope tail brackets, bracketed
//! root finding and one-dimensional minimization in log-argument space.
//!
//! Error bounds reported here are numerical-analysis bounds (Kronrod/Gauss
//! differences, successive-level differences, integral brackets), not
//! interval arithmetic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value together with an error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// slice length, so the result is reproducible bit for bit.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

// Gauss–Kronrod 7/15 nodes on [-1, 1] (abscissae in decreasing order, centre last).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = hw * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let k = kronrod * hw;
    let g = gauss * hw;
    (k, (k - g).abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
///
/// Stops when the summed Kronrod/Gauss differences fall below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    const MAX_PANELS: usize = 4000;
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (v, e) = gk15(&f, a, b);
    if !v.is_finite() {
        return Err(Error::Quadrature {
            achieved: f64::INFINITY,
            target: abs_tol,
        });
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut err = e;
    while heap.len() < MAX_PANELS {
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if (worst.b - worst.a).abs() <= 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) {
            // Cannot split further; keep the panel and give up refining.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum from the panels to shed accumulated update rounding.
    let mut values: Vec<f64> = heap.iter().map(|p| p.value).collect();
    values.sort_by(|x, y| x.total_cmp(y));
    let value = pairwise_sum(&values);
    let error: f64 = heap.iter().map(|p| p.error).sum();
    let target = abs_tol.max(rel_tol * value.abs());
    if !value.is_finite() || error > target {
        return Err(Error::Quadrature {
            achieved: error,
            target,
        });
    }
    Ok(Estimate { value, error })
}

/// Tanh-sinh (double-exponential) quadrature of `f` over `(0, 1)`.
///
/// Nodes `x = 1/(1 + exp(-π sinh t))` cluster doubly exponentially at both
/// ends and reach down to `x ≈ 1e-300`, so integrable algebraic
/// singularities at the origin are handled without a change of variables.
/// The reported error is the difference of the last two levels.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    const T_MAX: f64 = 6.1;
    let pi = std::f64::consts::PI;
    let node = |t: f64| -> f64 {
        let e = (-pi * t.sinh()).exp();
        if !e.is_finite() {
            return 0.0;
        }
        let x = 1.0 / (1.0 + e);
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let w = pi * t.cosh() * e / ((1.0 + e) * (1.0 + e));
        if w == 0.0 {
            return 0.0;
        }
        f(x) * w
    };
    let mut h = 0.5;
    let mut sum = node(0.0);
    let mut k = 1;
    while (k as f64) * h <= T_MAX {
        let t = k as f64 * h;
        sum += node(t) + node(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    let mut diff = f64::INFINITY;
    for _level in 0..9 {
        h *= 0.5;
        let mut added = 0.0;
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            let t = k as f64 * h;
            added += node(t) + node(-t);
            k += 2;
        }
        sum += added;
        let next = sum * h;
        diff = (next - estimate).abs();
        estimate = next;
        if !estimate.is_finite() {
            break;
        }
        if diff <= abs_tol.max(rel_tol * estimate.abs()) {
            return Ok(Estimate {
                value: estimate,
                error: diff,
            });
        }
    }
    Err(Error::Quadrature {
        achieved: diff,
        target: abs_tol,
    })
}

/// Independent evaluation of `∫_0^∞ f` with tanh-sinh nodes: `(0, 1]`
/// directly and `[1, ∞)` folded onto `(0, 1]` by `y = 1/t`.
pub fn dual_half_line<F: Fn(f64) -> f64>(f: F, abs_tol: f64) -> Result<Estimate> {
    let inner = tanh_sinh(&f, 0.5 * abs_tol, 0.0)?;
    let outer = tanh_sinh(|t: f64| f(1.0 / t) / (t * t), 0.5 * abs_tol, 0.0)?;
    Ok(Estimate {
        value: inner.value + outer.value,
        error: inner.error + outer.error,
    })
}

/// Behaviour of an integrand beyond the breakpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RightTail {
    /// Decays like `y^(-exponent)`, `exponent > 1`.
    Power { exponent: f64 },
    /// Decays like `exp(-rate * y)`.
    Exponential { rate: f64 },
    /// Integrate numerically up to `at`; the remainder `∫_at^∞` is supplied
    /// in closed form together with its error bound.
    Cutoff { at: f64, value: f64, error: f64 },
}

/// Description of an integral over `(0, ∞)`.
pub struct IntegrandSpec<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    /// The integrand behaves like `y^(-left_exponent)` as `y → 0`.
    pub left_exponent: f64,
    pub right: RightTail,
    /// Split point between the singular and tail pieces.
    pub breakpoint: f64,
    pub abs_tol: f64,
}

/// `∫_0^b f` as an integral over `(0, 1]` through `y = b t^{1/(1-a)}`, for
/// `f(y) ∼ C y^{-a}` at zero. The transformed integrand is
/// `b^{1-a} f(y) y^a / (1-a)`; below `y = 1e-300` the factor `f(y) y^a` is
/// frozen at its value there.
pub fn singular_left_map<'a>(f: &'a dyn Fn(f64) -> f64, a: f64, b: f64) -> impl Fn(f64) -> f64 + 'a {
    let e = 1.0 / (1.0 - a);
    let scale = b.powf(1.0 - a) * e;
    move |t: f64| {
        let y = (b * t.powf(e)).max(1e-300);
        scale * f(y) * y.powf(a)
    }
}

/// `∫_b^∞ f` as an integral over `(0, 1]` through `y = b t^{-1/(θ-1)}`, for
/// `f(y) ∼ C y^{-θ}` at infinity. The transformed integrand is
/// `b^{1-θ} f(y) y^θ / (θ-1)`, with `y` capped where `y^θ` would overflow.
pub fn power_tail_map<'a>(f: &'a dyn Fn(f64) -> f64, theta: f64, b: f64) -> impl Fn(f64) -> f64 + 'a {
    let e = 1.0 / (theta - 1.0);
    let scale = b.powf(1.0 - theta) * e;
    let cap = 1e300f64.powf(1.0 / theta.max(1.0));
    move |t: f64| {
        let y = if t <= 0.0 { cap } else { (b * t.powf(-e)).min(cap) };
        let v = f(y);
        if v == 0.0 {
            0.0
        } else {
            scale * v * y.powf(theta)
        }
    }
}

/// Certified integral over the half line via endpoint-regularizing
/// substitutions and adaptive Gauss–Kronrod.
///
/// On `(0, b]` the substitution `y = b t^{1/(1-a)}` cancels a `y^{-a}`
/// singularity; on `[b, ∞)` a power tail is mapped by
/// `y = b t^{-1/(θ-1)}` and an exponential tail by `y = b - ln(t)/κ`, both
/// onto bounded integrands on `(0, 1]`.
pub fn integrate_half_line(spec: &IntegrandSpec<'_>) -> Result<Estimate> {
    let a = spec.left_exponent;
    let b = spec.breakpoint;
    if !(a < 1.0) || !(b > 0.0) {
        return Err(Error::Domain(format!(
            "integrand spec needs left exponent < 1 and positive breakpoint, got a={a}, b={b}"
        )));
    }
    let tol = 0.25 * spec.abs_tol;
    let f = spec.f;

    let left = if a == 0.0 {
        gauss_kronrod(f, 0.0, b, tol, 0.0)?
    } else {
        gauss_kronrod(singular_left_map(f, a, b), 0.0, 1.0, tol, 0.0)?
    };

    let right = match spec.right {
        RightTail::Power { exponent } => {
            if !(exponent > 1.0) {
                return Err(Error::Domain(format!(
                    "power tail exponent must exceed 1, got {exponent}"
                )));
            }
            gauss_kronrod(power_tail_map(f, exponent, b), 0.0, 1.0, tol, 0.0)?
        }
        RightTail::Exponential { rate } => {
            if !(rate > 0.0) {
                return Err(Error::Domain(format!(
                    "exponential tail rate must be positive, got {rate}"
                )));
            }
            let g = |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let y = b - t.ln() / rate;
                f(y) / (rate * t)
            };
            gauss_kronrod(g, 0.0, 1.0, tol, 0.0)?
        }
        RightTail::Cutoff { at, value, error } => {
            if !(at > b) {
                return Err(Error::Domain(format!("cutoff {at} must lie beyond the breakpoint {b}")));
            }
            let mid = gauss_kronrod(f, b, at, tol, 0.0)?;
            Estimate {
                value: mid.value + value,
                error: mid.error + error,
            }
        }
    };

    let out = Estimate {
        value: left.value + right.value,
        error: left.error + right.error,
    };
    if out.error > spec.abs_tol {
        return Err(Error::Quadrature {
            achieved: out.error,
            target: spec.abs_tol,
        });
    }
    Ok(out)
}

/// `∫_x0^∞ g(x) dx` for an eventually decaying integrand, by adaptive
/// Gauss–Kronrod on logarithmic panels `x = x0·e^s`, with a geometric
/// extrapolation of the panels beyond the last one evaluated.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(g: F, x0: f64, rel_tol: f64) -> Result<Estimate> {
    if !(x0 > 0.0) {
        return Err(Error::Domain(format!("lower limit must be positive, got {x0}")));
    }
    const WIDTH: f64 = 0.5;
    let h = |s: f64| {
        let x = x0 * s.exp();
        let v = g(x);
        if v == 0.0 {
            0.0
        } else {
            v * x
        }
    };
    let mut panels: Vec<f64> = Vec::new();
    let mut error = 0.0;
    let mut s = 0.0;
    let mut running = 0.0;
    loop {
        let p = gauss_kronrod(h, s, s + WIDTH, 1e-300, 0.1 * rel_tol)?;
        panels.push(p.value);
        error += p.error;
        running += p.value;
        s += WIDTH;
        let n = panels.len();
        if n >= 3 {
            let last = panels[n - 1];
            let prev = panels[n - 2];
            if last == 0.0 {
                break;
            }
            let ratio = last / prev;
            let before = prev / panels[n - 3];
            if ratio > 0.0 && ratio < 0.999 {
                let rest = last * ratio / (1.0 - ratio);
                // Slow power tails: once the panel ratio has settled, the
                // geometric remainder is charged with ten times the effect
                // of the last change in ratio.
                let drift = 10.0 * last.abs() * (ratio - before).abs() / (1.0 - ratio).powi(2);
                let charge = rest.abs().min(drift);
                if charge <= 0.01 * rel_tol * running.abs() {
                    panels.push(rest);
                    error += charge;
                    break;
                }
            }
        }
        if x0 * (s + WIDTH).exp() > 1e300 || panels.len() > 1600 {
            return Err(Error::Quadrature {
                achieved: panels.last().copied().unwrap_or(f64::NAN).abs(),
                target: rel_tol * running.abs(),
            });
        }
    }
    let value = pairwise_sum(&panels);
    Ok(Estimate { value, error })
}

/// Certified bracket for `Σ_{j ≥ first} g(j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBracket {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TailBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Verify that `g` is non-increasing and convex at a geometric sequence of
/// points beyond `x0`, until it has decayed below `floor`.
fn check_convex_decreasing<F: Fn(f64) -> f64>(g: &F, x0: f64, floor: f64) -> Result<()> {
    let mut x = x0.max(0.5);
    for _ in 0..400 {
        let d = 0.25 * x;
        let (gl, gc, gr) = (g(x - 0.5 * d), g(x), g(x + 0.5 * d));
        let scale = gc.abs().max(gl.abs()).max(gr.abs());
        if scale <= floor {
            return Ok(());
        }
        let slack = 1e-11 * scale;
        if gr > gc + slack || gc > gl + slack {
            return Err(Error::Envelope(format!("tail terms increase near index {x:.6e}")));
        }
        if gl - 2.0 * gc + gr < -slack {
            return Err(Error::Envelope(format!("tail terms are not convex near index {x:.6e}")));
        }
        x *= 1.5;
        if x > 1e290 {
            break;
        }
    }
    Ok(())
}

/// Bracket `Σ_{j ≥ first} g(j)` for a non-negative, non-increasing function
/// that is convex on `[first - 1/2, ∞)`.
///
/// Convexity gives `∫_first^∞ g + g(first)/2 ≤ Σ ≤ ∫_{first-1/2}^∞ g`; the
/// point estimate is the midpoint integral with its first Euler–Maclaurin
/// correction, clamped into the bracket.
pub fn convex_tail_sum<F: Fn(f64) -> f64>(g: F, first: f64, rel_tol: f64) -> Result<TailBracket> {
    let g0 = g(first);
    if g0 == 0.0 && g(first - 0.5) == 0.0 {
        return Ok(TailBracket {
            estimate: 0.0,
            lower: 0.0,
            upper: 0.0,
        });
    }
    check_convex_decreasing(&g, first, 1e-30 * g0.abs())?;
    let start = first - 0.5;
    let upper_int = integrate_to_infinity(&g, start, rel_tol)?;
    let piece = gauss_kronrod(&g, start, first, 1e-300, 1e-12)?;
    let upper = upper_int.value + upper_int.error;
    let lower = (upper_int.value - upper_int.error - piece.value - piece.error + 0.5 * g0).max(0.0);
    let slope = (g(start + 0.25) - g(start - 0.25)) / 0.5;
    let estimate = (upper_int.value + slope / 24.0).clamp(lower, upper);
    Ok(TailBracket {
        estimate,
        lower,
        upper: upper.max(lower),
    })
}

/// Series value with a certified error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub error: f64,
    /// Number of explicitly summed terms.
    pub terms: u64,
}

/// `Σ_{k ≥ 1} term(k)`: explicit prefix plus a convex-envelope bracket of
/// the tail, evaluated through the continuous extension `tail(x)`.
///
/// The prefix length doubles from `min_terms` until the bracket width is
/// below `rel_tol · |sum|`. For finite sequences pass `len` and the sum is
/// exact.
pub fn sum_with_tail<T, E>(
    term: T,
    tail: Option<E>,
    len: Option<u64>,
    min_terms: u64,
    rel_tol: f64,
    max_terms: u64,
) -> Result<SeriesSum>
where
    T: Fn(u64) -> f64,
    E: Fn(f64) -> f64,
{
    let mut terms: Vec<f64> = Vec::new();
    let mut n = match len {
        Some(l) => l,
        None => min_terms.max(1),
    };
    loop {
        while (terms.len() as u64) < n {
            let k = terms.len() as u64 + 1;
            terms.push(term(k));
        }
        let prefix = pairwise_sum(&terms);
        let Some(ref ext) = tail else {
            return Ok(SeriesSum {
                value: prefix,
                error: 0.0,
                terms: n,
            });
        };
        if len.is_some() {
            return Ok(SeriesSum {
                value: prefix,
                error: 0.0,
                terms: n,
            });
        }
        let bracket = convex_tail_sum(ext, n as f64 + 1.0, 1e-3 * rel_tol);
        match bracket {
            Ok(b) => {
                let value = prefix + b.estimate;
                if b.width() <= rel_tol * value.abs() {
                    return Ok(SeriesSum {
                        value,
                        error: b.width(),
                        terms: n,
                    });
                }
                if n >= max_terms {
                    return Err(Error::Truncation {
                        achieved: b.width() / value.abs(),
                        requested: rel_tol,
                        modes: n,
                    });
                }
            }
            Err(e) => {
                if n >= max_terms {
                    return Err(e);
                }
            }
        }
        n = (2 * n).min(max_terms);
    }
}

/// Root of a strictly decreasing function inside `[lo, hi]`.
///
/// Illinois-modified regula falsi with a bisection step whenever the bracket
/// fails to shrink by half; stops when `|f(x)| ≤ f_tol` or the bracket has
/// collapsed to rounding level.
pub fn find_root_decreasing<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, f_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.abs() <= f_tol {
        return Ok(a);
    }
    if fb.abs() <= f_tol {
        return Ok(b);
    }
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::Domain(format!(
            "no sign change for a decreasing function on [{lo}, {hi}]: f = ({fa}, {fb})"
        )));
    }
    let mut side = 0i8;
    for _ in 0..500 {
        let width = b - a;
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx.abs() <= f_tol || width <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        if fx > 0.0 {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        if b - a > 0.5 * width {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm.abs() <= f_tol {
                return Ok(m);
            }
            if fm > 0.0 {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
            side = 0;
        }
    }
    Ok(0.5 * (a + b))
}

/// Newton iteration for a decreasing function with its derivative, kept
/// inside the bracket `[lo, hi]` by bisection fallback.
pub fn newton_bracketed<F: Fn(f64) -> (f64, f64)>(fdf: F, lo: f64, hi: f64, f_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, _) = fdf(a);
    let (fb, _) = fdf(b);
    if fa.abs() <= f_tol {
        return Ok(a);
    }
    if fb.abs() <= f_tol {
        return Ok(b);
    }
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::Domain(format!(
            "no sign change on [{lo}, {hi}]: f = ({fa}, {fb})"
        )));
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (fx, dfx) = fdf(x);
        if fx.abs() <= f_tol {
            return Ok(x);
        }
        if fx > 0.0 {
            a = x;
        } else {
            b = x;
        }
        if b - a <= 4.0 * f64::EPSILON * x.abs() {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        x = if dfx < 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Ok(x)
}

/// Location and value of a minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub argmin: f64,
    pub value: f64,
}

/// Minimize a unimodal function of a positive argument.
///
/// Works in `s = ln x`: the bracket grows geometrically from `x0` until the
/// objective turns, then golden-section search shrinks it to a relative
/// argument tolerance of `1e-8`.
pub fn minimize_convex_1d<F: Fn(f64) -> f64>(g: F, x0: f64) -> Result<Minimum> {
    if !(x0 > 0.0) {
        return Err(Error::Domain(format!("starting point must be positive, got {x0}")));
    }
    const S_LIMIT: f64 = 690.0;
    let h = |s: f64| g(s.exp());
    let s0 = x0.ln();
    let (h0, hr, hl) = (h(s0), h(s0 + 1.0), h(s0 - 1.0));
    let (mut lo, mut hi);
    if hr >= h0 && hl >= h0 {
        lo = s0 - 1.0;
        hi = s0 + 1.0;
    } else {
        let dir = if hr < h0 { 1.0 } else { -1.0 };
        let mut prev = s0;
        let mut cur = s0 + dir;
        let mut hcur = if dir > 0.0 { hr } else { hl };
        let mut step = 2.0;
        loop {
            let next = cur + dir * step;
            if next.abs() > S_LIMIT {
                return Err(Error::Solver(format!(
                    "objective is monotone up to argument e^{next:.1}; no interior minimum"
                )));
            }
            let hnext = h(next);
            if hnext >= hcur {
                lo = prev.min(next);
                hi = prev.max(next);
                break;
            }
            prev = cur;
            cur = next;
            hcur = hnext;
            step *= 2.0;
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut hc, mut hd) = (h(c), h(d));
    while hi - lo > 1e-8 {
        if hc < hd {
            hi = d;
            d = c;
            hd = hc;
            c = hi - inv_phi * (hi - lo);
            hc = h(c);
        } else {
            lo = c;
            c = d;
            hc = hd;
            d = lo + inv_phi * (hi - lo);
            hd = h(d);
        }
    }
    let (s, v) = if hc < hd { (c, hc) } else { (d, hd) };
    Ok(Minimum {
        argmin: s.exp(),
        value: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_over_half_line() {
        let f = |y: f64| (-y).exp();
        let spec = IntegrandSpec {
            f: &f,
            left_exponent: 0.0,
            right: RightTail::Exponential { rate: 1.0 },
            breakpoint: 1.0,
            abs_tol: 1e-10,
        };
        let r = integrate_half_line(&spec).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{r:?}");
        let ds = dual_half_line(f, 1e-12).unwrap();
        assert!((ds.value - 1.0).abs() < 1e-10, "{ds:?}");
    }

    #[test]
    fn polynomial_times_exponential_is_exact() {
        // ∫ y^n e^{-y} = n!
        let mut fact = 1.0;
        for n in 0..=10 {
            if n > 0 {
                fact *= n as f64;
            }
            let f = move |y: f64| y.powi(n) * (-y).exp();
            let spec = IntegrandSpec {
                f: &f,
                left_exponent: 0.0,
                right: RightTail::Exponential { rate: 1.0 },
                breakpoint: 1.0,
                abs_tol: 1e-12 * fact,
            };
            let r = integrate_half_line(&spec).unwrap();
            assert!((r.value - fact).abs() <= 1e-12 * fact, "n={n}: {} vs {fact}", r.value);
        }
    }

    #[test]
    fn singular_left_endpoint() {
        // ∫_0^1 y^{-1/2} dy + ∫_1^∞ y^{-2} dy = 2 + 1
        let f = |y: f64| if y < 1.0 { y.powf(-0.5) } else { y.powi(-2) };
        let spec = IntegrandSpec {
            f: &f,
            left_exponent: 0.5,
            right: RightTail::Power { exponent: 2.0 },
            breakpoint: 1.0,
            abs_tol: 1e-12,
        };
        let r = integrate_half_line(&spec).unwrap();
        assert!((r.value - 3.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn rejects_bad_specs() {
        let f = |y: f64| y;
        let spec = IntegrandSpec {
            f: &f,
            left_exponent: 1.0,
            right: RightTail::Power { exponent: 2.0 },
            breakpoint: 1.0,
            abs_tol: 1e-8,
        };
        assert!(matches!(integrate_half_line(&spec), Err(Error::Domain(_))));
    }

    #[test]
    fn finite_series_is_exact() {
        let s = sum_with_tail(|k| k as f64, None::<fn(f64) -> f64>, Some(10), 1, 1e-12, 10).unwrap();
        assert_eq!(s.value, 55.0);
        assert_eq!(s.error, 0.0);
    }

    #[test]
    fn basel_sum() {
        let s = sum_with_tail(
            |k| 1.0 / (k as f64 * k as f64),
            Some(|x: f64| 1.0 / (x * x)),
            None,
            16,
            1e-12,
            1 << 24,
        )
        .unwrap();
        let exact = std::f64::consts::PI.powi(2) / 6.0;
        assert!((s.value - exact).abs() < 1e-10, "{s:?}");
        assert!((s.value - exact).abs() <= s.error + 1e-15);
    }

    #[test]
    fn non_convex_tail_is_rejected() {
        // Increasing tail terms violate the envelope.
        let r = convex_tail_sum(|x: f64| 1.0 - 1.0 / x, 10.0, 1e-10);
        assert!(matches!(r, Err(Error::Envelope(_))));
    }

    #[test]
    fn roots() {
        let r = find_root_decreasing(|x| 1.0 - x, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        let r = find_root_decreasing(|x| 1.0 / (1.0 + 2.0 * x) - 1.0 / 3.0, 0.0, 10.0, 1e-15).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(matches!(
            find_root_decreasing(|x| 1.0 + x, 0.0, 1.0, 1e-12),
            Err(Error::Domain(_))
        ));
        let r = newton_bracketed(|x| (2.0 - x * x, -2.0 * x), 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn minimization() {
        let m = minimize_convex_1d(|p| p - p.sqrt(), 10.0).unwrap();
        assert!((m.argmin - 0.25).abs() < 1e-7, "{m:?}");
        assert!((m.value + 0.25).abs() < 1e-14);
        let m = minimize_convex_1d(|p| (p - 3.0).powi(2), 1.0).unwrap();
        assert!((m.argmin - 3.0).abs() < 1e-7);
        assert!(matches!(minimize_convex_1d(|p| -p, 1.0), Err(Error::Solver(_))));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }
}
