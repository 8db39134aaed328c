//! Exact log-Laplace transforms `ln E exp(-p ∫_0^T ‖X(t)‖²_{-γ} dt)` as
//! certified mode sums, split into the dominant term `S1`, the corrections
//! `S2`, `S3` and the initial-condition terms `S01`, `S02`, together with a
//! least-squares front end that extracts `(α, τ, β)` from a `p`-grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{convex_tail_sum, pairwise_sum, TailBracket};
use crate::spectrum::{InitialConditionLaw, NoiseSpec, SpectrumModel};
use crate::tauberian::{small_ball_from_laplace, snap_rational, Exponent, LogLaplaceAsymptotic, SmallBallAsymptotic};

/// Operator, norm index and noise covariance shared by field processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSetup {
    pub spectrum: SpectrumModel,
    pub gamma: f64,
    #[serde(default)]
    pub noise: NoiseSpec,
}

/// The process whose squared norm is integrated in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Process {
    /// Cylindrical Brownian motion `W`.
    Noise {
        #[serde(flatten)]
        field: FieldSetup,
    },
    /// Solution of `du + A^r u dt = dW`.
    Solution {
        #[serde(flatten)]
        field: FieldSetup,
        r: f64,
    },
    /// Independent scalar OU coordinates `dx_k = -a_k x_k dt + q_k dw_k`
    /// with unit weights.
    FiniteDimOu { drift: Vec<f64>, intensity: Vec<f64> },
}

/// Full description of one quadratic functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub process: Process,
    pub horizon: f64,
    #[serde(default)]
    pub initial: InitialConditionLaw,
}

/// Coefficients of one scalar mode `dx = -drift·x dt + intensity·dw`,
/// `x(0) ∼ N(mean, variance)`, entering the functional with `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub drift: f64,
    pub intensity: f64,
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Power-law envelopes of a field: mode coefficient
/// `q_k² w_k ∼ coef·k^{-2g}` and drift `λ_k^r ∼ drift_coef·k^{2h}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    /// `None` when the weights oscillate without a limit constant.
    pub coef: Option<f64>,
    pub g: f64,
    pub drift_coef: f64,
    pub h: f64,
}

impl ProblemSpec {
    pub fn noise(spectrum: SpectrumModel, gamma: f64, horizon: f64) -> Self {
        Self {
            process: Process::Noise {
                field: FieldSetup {
                    spectrum,
                    gamma,
                    noise: NoiseSpec::Identity,
                },
            },
            horizon,
            initial: InitialConditionLaw::zero(),
        }
    }

    pub fn solution(spectrum: SpectrumModel, gamma: f64, r: f64, horizon: f64) -> Self {
        Self {
            process: Process::Solution {
                field: FieldSetup {
                    spectrum,
                    gamma,
                    noise: NoiseSpec::Identity,
                },
                r,
            },
            horizon,
            initial: InitialConditionLaw::zero(),
        }
    }

    pub fn finite_dim(drift: Vec<f64>, intensity: Vec<f64>, horizon: f64) -> Self {
        Self {
            process: Process::FiniteDimOu { drift, intensity },
            horizon,
            initial: InitialConditionLaw::zero(),
        }
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        match &mut self.process {
            Process::Noise { field } | Process::Solution { field, .. } => field.noise = noise,
            Process::FiniteDimOu { .. } => {}
        }
        self
    }

    pub fn with_initial(mut self, initial: InitialConditionLaw) -> Self {
        self.initial = initial;
        self
    }

    pub fn field(&self) -> Option<&FieldSetup> {
        match &self.process {
            Process::Noise { field } | Process::Solution { field, .. } => Some(field),
            Process::FiniteDimOu { .. } => None,
        }
    }

    /// Exponent `r` of the drift, zero for the noise.
    pub fn drift_power(&self) -> f64 {
        match &self.process {
            Process::Solution { r, .. } => *r,
            _ => 0.0,
        }
    }

    /// Number of modes for finite-dimensional processes.
    pub fn mode_count(&self) -> Option<u64> {
        match &self.process {
            Process::FiniteDimOu { drift, .. } => Some(drift.len() as u64),
            _ => None,
        }
    }

    pub fn is_alternating(&self) -> bool {
        self.field().is_some_and(|f| f.spectrum.is_alternating())
    }

    /// Leading indices that come from stored values rather than formulas.
    pub fn prefix_len(&self) -> u64 {
        match self.field() {
            Some(f) => f
                .spectrum
                .prefix_len()
                .max(f.noise.prefix_len())
                .max(self.initial.prefix_len()),
            None => 0,
        }
    }

    /// Power-law envelopes of the mode coefficients and drifts.
    pub fn envelope(&self) -> Option<Envelope> {
        let f = self.field()?;
        let (cq, sigma) = f.noise.envelope(&f.spectrum);
        let g = f.gamma / f.spectrum.d() as f64 - sigma;
        let coef = f.spectrum.weight_envelope(f.gamma).map(|(k, _)| k * cq * cq);
        let r = self.drift_power();
        let drift_coef = f.spectrum.weyl_constant().powf(r);
        let h = 0.5 * r * f.spectrum.growth_exponent();
        Some(Envelope { coef, g, drift_coef, h })
    }

    /// Check the parameters and that the functional is almost surely finite.
    pub fn validate(&self) -> Result<()> {
        self.check(true)
    }

    /// Check the parameters only; every finite truncation of the functional
    /// is then well defined.
    pub fn validate_parameters(&self) -> Result<()> {
        self.check(false)
    }

    fn check(&self, finite: bool) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return domain(format!("horizon must be positive, got {}", self.horizon));
        }
        self.initial.validate()?;
        match &self.process {
            Process::FiniteDimOu { drift, intensity } => {
                if drift.is_empty() {
                    return domain("finite-dimensional process needs at least one mode");
                }
                if drift.len() != intensity.len() {
                    return domain(format!(
                        "drift has {} entries but intensity has {}",
                        drift.len(),
                        intensity.len()
                    ));
                }
                if drift.iter().any(|a| !a.is_finite()) {
                    return domain("drift rates must be finite");
                }
                if intensity.iter().any(|q| !(*q > 0.0 && q.is_finite())) {
                    return domain("noise intensities must be positive");
                }
                if self.initial.is_stationary() && drift.iter().any(|a| *a <= 0.0) {
                    return domain("a stationary initial law needs positive drift rates");
                }
                Ok(())
            }
            Process::Noise { field } => {
                field.spectrum.validate()?;
                field.noise.validate()?;
                if !field.gamma.is_finite() {
                    return domain("gamma must be finite");
                }
                if !self.initial.is_zero() {
                    return domain("cylindrical Brownian motion starts at zero; initial law must be zero");
                }
                let env = self.envelope().expect("field process");
                if finite && !(env.g > 0.5) {
                    let d = field.spectrum.d();
                    return domain(format!(
                        "the noise functional is infinite unless gamma > d/2 (gamma = {}, d = {d}, effective decay {})",
                        field.gamma, env.g
                    ));
                }
                Ok(())
            }
            Process::Solution { field, r } => {
                field.spectrum.validate()?;
                field.noise.validate()?;
                if !(*r > 0.0 && r.is_finite()) {
                    return domain(format!("drift exponent r must be positive, got {r}"));
                }
                if !field.gamma.is_finite() {
                    return domain("gamma must be finite");
                }
                let env = self.envelope().expect("field process");
                if !finite {
                    return Ok(());
                }
                if !(env.g + env.h > 0.5) {
                    return domain(format!(
                        "the solution functional is infinite unless gamma > d/2 - r m (gamma = {}, d = {}, r m = {})",
                        field.gamma,
                        field.spectrum.d(),
                        r * field.spectrum.m()
                    ));
                }
                let (_, sigma) = field.noise.envelope(&field.spectrum);
                let stationary_exponent = 2.0 * sigma - 2.0 * env.h;
                self.initial
                    .check_regularity(field.gamma, field.spectrum.d(), 2.0 * env.h, stationary_exponent)
            }
        }
    }

    /// Coefficients of mode `k`.
    pub fn mode(&self, k: u64) -> Result<Mode> {
        if k == 0 {
            return domain("mode index must be at least 1");
        }
        match &self.process {
            Process::FiniteDimOu { drift, intensity } => {
                let i = (k - 1) as usize;
                if i >= drift.len() {
                    return domain(format!("mode {k} exceeds the {} available", drift.len()));
                }
                let (a, q) = (drift[i], intensity[i]);
                let stationary = if a > 0.0 { q * q / (2.0 * a) } else { f64::INFINITY };
                Ok(Mode {
                    drift: a,
                    intensity: q,
                    weight: 1.0,
                    mean: self.initial.mean(k),
                    variance: self.initial.variance(k, stationary),
                })
            }
            Process::Noise { field } => Ok(Mode {
                drift: 0.0,
                intensity: field.noise.intensity(&field.spectrum, k)?,
                weight: field.spectrum.sobolev_weight(field.gamma, k)?,
                mean: 0.0,
                variance: 0.0,
            }),
            Process::Solution { field, r } => {
                let a = field.spectrum.eigenvalue(k)?.powf(*r);
                let q = field.noise.intensity(&field.spectrum, k)?;
                Ok(Mode {
                    drift: a,
                    intensity: q,
                    weight: field.spectrum.sobolev_weight(field.gamma, k)?,
                    mean: self.initial.mean(k),
                    variance: self.initial.variance(k, q * q / (2.0 * a)),
                })
            }
        }
    }

    /// Continuous extension of the mode coefficients beyond the stored
    /// prefix, on residue class `parity` for alternating weights.
    pub fn mode_at(&self, x: f64, parity: usize) -> Mode {
        match &self.process {
            Process::FiniteDimOu { .. } => unreachable!("finite-dimensional processes have no tail"),
            Process::Noise { field } => Mode {
                drift: 0.0,
                intensity: field.noise.intensity_at(&field.spectrum, x),
                weight: field.spectrum.sobolev_weight_at(field.gamma, x, parity),
                mean: 0.0,
                variance: 0.0,
            },
            Process::Solution { field, r } => {
                let a = field.spectrum.eigenvalue_at(x).powf(*r);
                let q = field.noise.intensity_at(&field.spectrum, x);
                Mode {
                    drift: a,
                    intensity: q,
                    weight: field.spectrum.sobolev_weight_at(field.gamma, x, parity),
                    mean: self.initial.mean_at(x),
                    variance: self.initial.variance_at(x, q * q / (2.0 * a)),
                }
            }
        }
    }

    fn is_noise(&self) -> bool {
        matches!(self.process, Process::Noise { .. })
    }
}

/// `ln cosh x` without overflow or cancellation.
pub fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        let s = (0.5 * x).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
    }
}

/// `ln E exp(-p ∫_0^T w²)` for a standard Brownian motion `w`.
pub fn log_laplace_bm_mode(p: f64, horizon: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return domain(format!("p must be non-negative, got {p}"));
    }
    if !(horizon > 0.0) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    Ok(-0.5 * ln_cosh((2.0 * p).sqrt() * horizon))
}

/// Per-mode contributions; the mode's log-Laplace value is
/// `-s1 + s2 - s3 - s01 - s02`, with `total` evaluated in a
/// cancellation-free form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeTerms {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s01: f64,
    pub s02: f64,
    pub total: f64,
}

/// `ln(cosh x + (y/x) sinh x) - y` for `0 ≤ |y| ≤ x`, given `x² - y²`
/// separately so that nearly equal arguments do not cancel.
fn log_ou_denominator(x: f64, y: f64, x2_minus_y2: f64, x_minus_y: f64) -> f64 {
    if x < 0.5 {
        // e^{-y}(cosh x - cosh y + y(sinhc x - sinhc y)) expanded in
        // complete homogeneous sums of x², y².
        let (x2, y2) = (x * x, y * y);
        let mut h = 1.0;
        let mut xp = 1.0;
        let mut even_fact = 2.0;
        let mut odd_fact = 6.0;
        let mut acc = h / even_fact + y * h / odd_fact;
        for n in 2..20 {
            xp *= x2;
            h = h * y2 + xp;
            let nn = n as f64;
            even_fact *= (2.0 * nn - 1.0) * (2.0 * nn);
            odd_fact *= (2.0 * nn) * (2.0 * nn + 1.0);
            let term = h / even_fact + y * h / odd_fact;
            acc += term;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        ((-y).exp() * x2_minus_y2 * acc).ln_1p()
    } else {
        let one_minus_b = x_minus_y / x;
        let one_minus_e = -(-2.0 * x).exp_m1();
        x_minus_y + (-0.5 * one_minus_b * one_minus_e).ln_1p()
    }
}

/// Log-Laplace decomposition of one OU mode
/// `dx = -a x dt + σ dw`, `x(0) ∼ N(μ0, σ0²)`, functional `p·w ∫_0^T x²`.
pub fn ou_mode_terms(p: f64, mode: &Mode, horizon: f64) -> ModeTerms {
    let c = mode.intensity * mode.intensity * mode.weight;
    let cp = c * p;
    if cp == 0.0 {
        return ModeTerms::default();
    }
    let a = mode.drift;
    let t = horizon;
    let rho = a.hypot((2.0 * cp).sqrt());
    let rho_minus_a = if a >= 0.0 { 2.0 * cp / (rho + a) } else { rho - a };
    let b = a / rho;
    let one_minus_b = rho_minus_a / rho;
    let e = (-2.0 * rho * t).exp();
    let s1 = 0.5 * t * rho_minus_a;
    let s2 = -0.5 * (-0.5 * one_minus_b).ln_1p();
    let s3 = 0.5 * (one_minus_b / (1.0 + b) * e).ln_1p();
    let x = rho * t;
    let y = a * t;
    let total_zero_ic = -0.5 * log_ou_denominator(x, y, 2.0 * cp * t * t, rho_minus_a * t);

    let (mut s01, mut s02) = (0.0, 0.0);
    if mode.mean != 0.0 || mode.variance > 0.0 {
        // ψ = (ϱ - a)/(2σ²) · (1+B)(1-E)/(1+B+(1-B)E)
        let base = if a >= 0.0 {
            p * mode.weight / (rho + a)
        } else {
            rho_minus_a / (2.0 * mode.intensity * mode.intensity)
        };
        let one_minus_e = -(-2.0 * x).exp_m1();
        let psi = base * (1.0 + b) * one_minus_e / (1.0 + b + one_minus_b * e);
        let v = 2.0 * mode.variance * psi;
        s01 = psi * mode.mean * mode.mean / (1.0 + v);
        s02 = 0.5 * v.ln_1p();
    }
    ModeTerms {
        s1,
        s2,
        s3,
        s01,
        s02,
        total: total_zero_ic - s01 - s02,
    }
}

fn noise_mode_terms(p: f64, mode: &Mode, horizon: f64) -> ModeTerms {
    let c = mode.intensity * mode.intensity * mode.weight;
    let s1 = 0.5 * ln_cosh(horizon * (2.0 * p * c).sqrt());
    ModeTerms {
        s1,
        total: -s1,
        ..ModeTerms::default()
    }
}

/// `ln E exp(-p ∫_0^T x²)` for `dx = -a x dt + σ dw`, `x(0) ∼ N(μ0, σ0²)`.
pub fn log_laplace_ou_mode(p: f64, a: f64, sigma: f64, mu0: f64, sigma0_sq: f64, horizon: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return domain(format!("p must be non-negative, got {p}"));
    }
    if !(horizon > 0.0) || !(sigma > 0.0) || !(sigma0_sq >= 0.0) || !a.is_finite() {
        return domain(format!(
            "invalid OU mode: a={a}, sigma={sigma}, sigma0^2={sigma0_sq}, T={horizon}"
        ));
    }
    let mode = Mode {
        drift: a,
        intensity: sigma,
        weight: 1.0,
        mean: mu0,
        variance: sigma0_sq,
    };
    Ok(ou_mode_terms(p, &mode, horizon).total)
}

/// Certified decomposition of a field log-Laplace transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLaplaceParts {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s01: f64,
    pub s02: f64,
    pub total: f64,
    pub truncation_modes: u64,
    pub tail_bound: f64,
}

impl LogLaplaceParts {
    fn zero() -> Self {
        Self {
            s1: 0.0,
            s2: 0.0,
            s3: 0.0,
            s01: 0.0,
            s02: 0.0,
            total: 0.0,
            truncation_modes: 0,
            tail_bound: 0.0,
        }
    }
}

/// Largest number of modes summed explicitly before giving up.
pub const MODE_CAP: u64 = 10_000_000;

const PARALLEL_CHUNK: u64 = 4096;

type ComponentGetter = fn(&ModeTerms) -> f64;

fn terms_for(spec: &ProblemSpec, p: f64, mode: &Mode) -> ModeTerms {
    if spec.is_noise() {
        noise_mode_terms(p, mode, spec.horizon)
    } else {
        ou_mode_terms(p, mode, spec.horizon)
    }
}

/// `ln E exp(-p ∫_0^T ‖X(t)‖²_{-γ} dt)` with its decomposition.
///
/// Modes are summed explicitly up to an index that doubles until the
/// convex-envelope brackets of all component tails have total width at most
/// `rel_tol·|total|`. For the noise, `S1` carries the whole sum and the other
/// components are zero.
pub fn log_laplace_field(spec: &ProblemSpec, p: f64, rel_tol: f64) -> Result<LogLaplaceParts> {
    spec.validate()?;
    if !(p >= 0.0) {
        return domain(format!("p must be non-negative, got {p}"));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return domain(format!("rel_tol must lie in (0, 1), got {rel_tol}"));
    }
    if p == 0.0 {
        return Ok(LogLaplaceParts::zero());
    }
    if let Some(n) = spec.mode_count() {
        let mut parts = LogLaplaceParts::zero();
        for k in 1..=n {
            let m = spec.mode(k)?;
            let t = ou_mode_terms(p, &m, spec.horizon);
            parts.s1 += t.s1;
            parts.s2 += t.s2;
            parts.s3 += t.s3;
            parts.s01 += t.s01;
            parts.s02 += t.s02;
            parts.total += t.total;
        }
        parts.truncation_modes = n;
        return Ok(parts);
    }

    let has_mean = !spec.initial.has_zero_mean();
    let has_var = !spec.initial.is_deterministic();
    let noise = spec.is_noise();
    let alternating = spec.is_alternating();
    let mut terms: Vec<ModeTerms> = Vec::new();
    let mut n = 64u64.max(spec.prefix_len() + 1);
    let mut last_err: Option<Error>;
    loop {
        let start = terms.len() as u64 + 1;
        if start <= n {
            let new: Result<Vec<ModeTerms>> = if n - start + 1 >= PARALLEL_CHUNK {
                (start..=n)
                    .into_par_iter()
                    .map(|k| spec.mode(k).map(|m| terms_for(spec, p, &m)))
                    .collect()
            } else {
                (start..=n)
                    .map(|k| spec.mode(k).map(|m| terms_for(spec, p, &m)))
                    .collect()
            };
            terms.extend(new?);
        }
        let prefix = |f: fn(&ModeTerms) -> f64| -> f64 {
            let v: Vec<f64> = terms.iter().map(f).collect();
            pairwise_sum(&v)
        };
        let mut parts = LogLaplaceParts {
            s1: prefix(|t| t.s1),
            s2: prefix(|t| t.s2),
            s3: prefix(|t| t.s3),
            s01: prefix(|t| t.s01),
            s02: prefix(|t| t.s02),
            total: prefix(|t| t.total),
            truncation_modes: n,
            tail_bound: 0.0,
        };

        let tails = (|| -> Result<[TailBracket; 5]> {
            let zero = TailBracket {
                estimate: 0.0,
                lower: 0.0,
                upper: 0.0,
            };
            let mut out = [zero; 5];
            let components: [(usize, bool, ComponentGetter); 5] = [
                (0, true, |t| t.s1),
                (1, !noise, |t| t.s2),
                (2, !noise, |t| t.s3),
                (3, has_mean, |t| t.s01),
                (4, has_var, |t| t.s02),
            ];
            for (slot, active, get) in components {
                if !active {
                    continue;
                }
                out[slot] = tail_of(spec, p, n, alternating, rel_tol, get)?;
            }
            Ok(out)
        })();

        match tails {
            Ok(b) => {
                parts.s1 += b[0].estimate;
                parts.s2 += b[1].estimate;
                parts.s3 += b[2].estimate;
                parts.s01 += b[3].estimate;
                parts.s02 += b[4].estimate;
                parts.total += -b[0].estimate + b[1].estimate - b[2].estimate - b[3].estimate - b[4].estimate;
                parts.tail_bound = b.iter().map(|x| x.width()).sum();
                if parts.tail_bound <= rel_tol * parts.total.abs() {
                    return Ok(parts);
                }
                last_err = Some(Error::Truncation {
                    achieved: parts.tail_bound / parts.total.abs(),
                    requested: rel_tol,
                    modes: n,
                });
            }
            Err(e) => last_err = Some(e),
        }
        if n >= MODE_CAP {
            return Err(last_err.expect("a failed attempt was recorded"));
        }
        n = (2 * n).min(MODE_CAP);
    }
}

fn tail_of(
    spec: &ProblemSpec,
    p: f64,
    n: u64,
    alternating: bool,
    rel_tol: f64,
    get: fn(&ModeTerms) -> f64,
) -> Result<TailBracket> {
    let eval = |x: f64, parity: usize| get(&terms_for(spec, p, &spec.mode_at(x, parity)));
    let first = (n + 1) as f64;
    if !alternating {
        return convex_tail_sum(|x| eval(x, 0), first, 1e-3 * rel_tol);
    }
    // Even indices 2j and odd indices 2j - 1 summed as separate families.
    let j_even = ((n + 2) / 2) as f64;
    let j_odd = ((n + 2) / 2 + ((n + 1) % 2)) as f64;
    let even = convex_tail_sum(|j| eval(2.0 * j, 0), j_even, 1e-3 * rel_tol)?;
    let odd = convex_tail_sum(|j| eval(2.0 * j - 1.0, 1), j_odd, 1e-3 * rel_tol)?;
    Ok(TailBracket {
        estimate: even.estimate + odd.estimate,
        lower: even.lower + odd.lower,
        upper: even.upper + odd.upper,
    })
}

/// `ln E exp(-p Σ_{k ≤ n_modes} w_k ∫_0^T x_k² dt)`: the transform of the
/// functional truncated to its first `n_modes` modes.
pub fn log_laplace_truncated(spec: &ProblemSpec, p: f64, n_modes: u64) -> Result<f64> {
    spec.validate_parameters()?;
    if !(p >= 0.0) {
        return domain(format!("p must be non-negative, got {p}"));
    }
    if let Some(n) = spec.mode_count() {
        if n_modes > n {
            return domain(format!("{n_modes} modes requested, {n} available"));
        }
    }
    let terms = (1..=n_modes)
        .map(|k| spec.mode(k).map(|m| terms_for(spec, p, &m).total))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

/// Geometric grid of `n` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Default fitting window: 16 points from `1e4` to `1e12`.
pub fn default_p_grid() -> Vec<f64> {
    geometric_grid(1e4, 1e12, 16)
}

/// Result of fitting `ln(-L(p)) ≈ ln α + τ ln p + β ln ln p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `(α, τ, β)` with `τ` snapped to a nearby small-denominator rational
    /// when one exists, and `α` refitted at that `τ`.
    pub asymptotic: LogLaplaceAsymptotic,
    /// Small-ball triple implied by `asymptotic`.
    pub small_ball: SmallBallAsymptotic,
    /// `τ` from the fit that includes a lower-order correction term.
    pub tau_fitted: f64,
    /// `τ` from the plain two-parameter fit.
    pub tau_plain: f64,
    /// Residual sums of squares of the corrected fits with `β = 0` and `β = 1`.
    pub rss_beta0: f64,
    pub rss_beta1: f64,
    /// Decay exponent `κ` of the `p^{-κ}` correction (for `β = 0`).
    pub correction_exponent: Option<f64>,
    /// Root-mean-square residual of the final fit.
    pub residual_rms: f64,
    pub p: Vec<f64>,
    pub totals: Vec<f64>,
}

/// Householder least squares; returns coefficients and residual sum of squares.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    let k = columns.len();
    if n < k || columns.iter().any(|c| c.len() != n) {
        return Err(Error::Fit(format!("least squares with {n} rows and {k} columns")));
    }
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut b = y.to_vec();
    for j in 0..k {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Fit("rank-deficient design".into()));
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(j) {
            let dot: f64 = v.iter().zip(&col[j..]).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vnorm2;
            for (ci, vi) in col[j..].iter_mut().zip(&v) {
                *ci -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&b[j..]).map(|(x, y)| x * y).sum();
        let f = 2.0 * dot / vnorm2;
        for (bi, vi) in b[j..].iter_mut().zip(&v) {
            *bi -= f * vi;
        }
    }
    let mut coef = vec![0.0; k];
    for j in (0..k).rev() {
        let mut s = b[j];
        for i in j + 1..k {
            s -= a[i][j] * coef[i];
        }
        let d = a[j][j];
        if d.abs() < 1e-13 * a[0][0].abs() {
            return Err(Error::Fit("ill-conditioned design".into()));
        }
        coef[j] = s / d;
    }
    let rss = b[k..].iter().map(|v| v * v).sum();
    Ok((coef, rss))
}

const KAPPA_GRID: (f64, f64, usize) = (0.02, 1.0, 99);

fn kappa_values() -> impl Iterator<Item = f64> {
    let (lo, hi, n) = KAPPA_GRID;
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Fit `(α, τ, β)` to exact log-Laplace values over `p_grid`.
///
/// The model is `ln(-L) = ln α + τ ln p + β ln ln p` plus lower-order
/// corrections: `p^{-κ}` with `κ` scanned when `β = 0`, and `1/ln p`,
/// `1/ln² p` when `β = 1`. Both values of `β` are fitted with `τ` free and
/// the smaller residual decides `β`. The fitted `τ` is snapped to a rational
/// with denominator at most 16 when one lies within 0.01, and `α` is refitted
/// at the snapped value with a second, independently scanned `p^{-κ₂}`
/// correction for `β = 0`.
pub fn fitted_asymptotic(spec: &ProblemSpec, p_grid: &[f64], rel_tol: f64) -> Result<FitReport> {
    if p_grid.len() < 8 {
        return Err(Error::Fit(format!("need at least 8 grid points, got {}", p_grid.len())));
    }
    let (lo, hi) = p_grid
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
    if !(lo > 1.0) || (hi / lo).log10() < 6.0 - 1e-9 {
        return Err(Error::Fit(format!(
            "grid must lie above 1 and span at least 6 decades, got [{lo:e}, {hi:e}]"
        )));
    }
    let mut p: Vec<f64> = p_grid.to_vec();
    p.sort_by(|a, b| a.total_cmp(b));
    let totals: Vec<f64> = p
        .iter()
        .map(|&pi| log_laplace_field(spec, pi, rel_tol).map(|r| r.total))
        .collect::<Result<_>>()?;
    fit_totals(&p, &totals)
}

struct FitData {
    p: Vec<f64>,
    lp: Vec<f64>,
    llp: Vec<f64>,
    y: Vec<f64>,
}

/// One fit of `ln(-L) - β ln ln p` against `ln α + τ ln p` plus lower-order
/// corrections; `tau` fixes `τ` instead of fitting it and `orders = 2` adds
/// a second power correction when `β = 0`. Returns `(ln α, τ, rss, κ)`.
fn corrected_fit(data: &FitData, beta: i64, tau: Option<f64>, orders: usize) -> Result<(f64, f64, f64, Option<f64>)> {
    let n = data.p.len();
    let target: Vec<f64> = data
        .y
        .iter()
        .zip(&data.llp)
        .zip(&data.lp)
        .map(|((y, ll), l)| y - beta as f64 * ll - tau.unwrap_or(0.0) * l)
        .collect();
    let mut base = vec![vec![1.0; n]];
    if tau.is_none() {
        base.push(data.lp.clone());
    }
    let unpack = |c: &[f64]| (c[0], tau.unwrap_or_else(|| c[1]));
    if beta == 1 {
        let mut cols = base;
        cols.push(data.lp.iter().map(|x| 1.0 / x).collect());
        cols.push(data.lp.iter().map(|x| 1.0 / (x * x)).collect());
        let (c, rss) = least_squares(&cols, &target)?;
        let (la, t) = unpack(&c);
        return Ok((la, t, rss, None));
    }
    let kappas: Vec<f64> = kappa_values().collect();
    let mut best: Option<(f64, f64, f64, Option<f64>)> = None;
    for (i, &kappa) in kappas.iter().enumerate() {
        let mut cols = base.clone();
        cols.push(data.p.iter().map(|x| x.powf(-kappa)).collect());
        let seconds: Vec<Option<f64>> = if orders == 2 {
            kappas[i + 1..].iter().map(|k| Some(*k)).collect()
        } else {
            vec![None]
        };
        for second in seconds {
            let mut cols = cols.clone();
            if let Some(k2) = second {
                cols.push(data.p.iter().map(|x| x.powf(-k2)).collect());
            }
            if let Ok((c, rss)) = least_squares(&cols, &target) {
                if best.is_none_or(|b| rss < b.2) {
                    let (la, t) = unpack(&c);
                    best = Some((la, t, rss, Some(kappa)));
                }
            }
        }
    }
    best.ok_or_else(|| Error::Fit("no admissible correction exponent".into()))
}

/// Fitting stage of [`fitted_asymptotic`] on precomputed totals.
pub fn fit_totals(p: &[f64], totals: &[f64]) -> Result<FitReport> {
    if p.len() != totals.len() || p.len() < 8 {
        return Err(Error::Fit("need at least 8 (p, value) pairs".into()));
    }
    for w in totals.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Fit(format!(
                "log-Laplace values are not strictly decreasing: {} then {}",
                w[0], w[1]
            )));
        }
    }
    if !(totals[0] < 0.0) {
        return Err(Error::Fit("log-Laplace values must be negative".into()));
    }
    let n = p.len();
    let lp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let data = FitData {
        p: p.to_vec(),
        llp: lp.iter().map(|x| x.ln()).collect(),
        lp,
        y: totals.iter().map(|t| (-t).ln()).collect(),
    };

    let plain = |beta: f64| -> Result<(Vec<f64>, f64)> {
        let yb: Vec<f64> = data.y.iter().zip(&data.llp).map(|(a, b)| a - beta * b).collect();
        least_squares(&[vec![1.0; n], data.lp.clone()], &yb)
    };
    let (c0, _) = plain(0.0)?;
    let (c1, _) = plain(1.0)?;
    let free0 = corrected_fit(&data, 0, None, 1)?;
    let free1 = corrected_fit(&data, 1, None, 1)?;
    let (beta, free, tau_plain) = if free1.2 < free0.2 {
        (1, free1, c1[1])
    } else {
        (0, free0, c0[1])
    };
    let tau_fitted = free.1;
    let (alpha, tau, kappa, rss) = match snap_rational(tau_fitted, 16, 0.01) {
        Some(r) => {
            let t = Exponent::Exact(r);
            let (la, _, rss, kappa) = corrected_fit(&data, beta, Some(t.to_f64()), 2)?;
            (la.exp(), t, kappa, rss)
        }
        None => (free.0.exp(), Exponent::Approx(free.1), free.3, free.2),
    };
    let asymptotic = LogLaplaceAsymptotic::new(alpha, tau, Exponent::int(beta))
        .map_err(|e| Error::Fit(format!("fitted triple is invalid: {e}")))?;
    let small_ball = small_ball_from_laplace(&asymptotic)?;
    Ok(FitReport {
        asymptotic,
        small_ball,
        tau_fitted,
        tau_plain,
        rss_beta0: free0.2,
        rss_beta1: free1.2,
        correction_exponent: kappa,
        residual_rms: (rss / n as f64).sqrt(),
        p: p.to_vec(),
        totals: totals.to_vec(),
    })
}
