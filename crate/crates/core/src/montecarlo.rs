//! Spectral Monte Carlo for the time-integrated squared norm: each mode is
//! advanced by its exact Gaussian transition on a uniform grid and the time
//! integral is taken by a fixed quadrature rule.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::mode_series;
use crate::error::{domain, Error, Result};
use crate::laplace::{Mode, ProblemSpec, Process};
use crate::quadrature::pairwise_sum;

pub const DEFAULT_MODES: u64 = 64;
pub const DEFAULT_TIME_STEPS: u64 = 1 << 10;
pub const DEFAULT_PATHS: u64 = 100_000;
pub const DEFAULT_Z: f64 = 3.0;
/// Hit count below which a small-ball estimate is flagged.
pub const MIN_HITS: u64 = 25;

/// Random words reserved for each mode of one path.
const MODE_WORD_STRIDE: u128 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Trapezoid,
    LeftPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub spec: ProblemSpec,
    pub n_modes: u64,
    pub n_time_steps: u64,
    pub n_paths: u64,
    pub seed: u64,
    #[serde(default)]
    pub integrator: Integrator,
}

impl SimulationPlan {
    pub fn new(spec: ProblemSpec, n_modes: u64, n_time_steps: u64, n_paths: u64, seed: u64) -> Result<Self> {
        let plan = Self {
            spec,
            n_modes,
            n_time_steps,
            n_paths,
            seed,
            integrator: Integrator::Trapezoid,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_defaults(spec: ProblemSpec, seed: u64) -> Result<Self> {
        Self::new(spec, DEFAULT_MODES, DEFAULT_TIME_STEPS, DEFAULT_PATHS, seed)
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate_parameters()?;
        if self.n_modes == 0 || self.n_time_steps == 0 || self.n_paths == 0 {
            return domain("modes, time steps and paths must all be at least 1");
        }
        if let Some(n) = self.spec.mode_count() {
            if self.n_modes > n {
                return domain(format!("{} modes requested, {n} available", self.n_modes));
            }
        }
        if self.n_modes > (1 << 24) {
            return domain("at most 2^24 modes can be simulated");
        }
        Ok(())
    }

    fn modes(&self) -> Result<Vec<Mode>> {
        (1..=self.n_modes).map(|k| self.spec.mode(k)).collect()
    }

    fn is_noise(&self) -> bool {
        matches!(self.spec.process, Process::Noise { .. })
    }
}

/// Point estimate with standard error; the reported interval is
/// `estimate ± z·standard_error`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub estimate: f64,
    pub standard_error: f64,
    pub n_effective: u64,
    /// Bound on the bias from dropping the modes beyond the plan's `K`.
    pub truncation_bias_bound: f64,
    pub z: f64,
}

impl EstimateWithCI {
    pub fn interval(&self) -> (f64, f64) {
        (
            self.estimate - self.z * self.standard_error,
            self.estimate + self.z * self.standard_error,
        )
    }

    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.standard_error == 0.0 {
            if self.estimate == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.estimate - target).abs() / self.standard_error
        }
    }

    pub fn contains(&self, target: f64) -> bool {
        self.z_score(target) <= self.z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallEstimate {
    pub probability: EstimateWithCI,
    pub hits: u64,
    /// Rule-of-three upper bound `3/N` when there are no hits.
    pub upper_bound: Option<f64>,
    /// Set when fewer than `MIN_HITS` samples fall in the ball.
    pub diagnostic: Option<String>,
}

impl SmallBallEstimate {
    pub fn log_probability(&self) -> f64 {
        self.probability.estimate.ln()
    }

    /// Standard error of `ln P̂` by the delta method.
    pub fn log_standard_error(&self) -> f64 {
        self.probability.standard_error / self.probability.estimate
    }
}

/// One realization on the plan's grid and, for even `M`, on the grid of
/// every second point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePair {
    pub fine: f64,
    pub coarse: Option<f64>,
}

struct Transition {
    weight: f64,
    decay: f64,
    sd: f64,
    mean: f64,
    initial_sd: f64,
}

fn transition(mode: &Mode, h: f64, noise: bool) -> Transition {
    let q = mode.intensity;
    let a = mode.drift;
    let (decay, sd) = if noise || a == 0.0 {
        (1.0, q * h.sqrt())
    } else {
        ((-a * h).exp(), q * (-(-2.0 * a * h).exp_m1() / (2.0 * a)).sqrt())
    };
    Transition {
        weight: mode.weight,
        decay,
        sd,
        mean: if noise { 0.0 } else { mode.mean },
        initial_sd: if noise { 0.0 } else { mode.variance.sqrt() },
    }
}

fn key(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

/// Random stream for `(path, mode)`; successive steps consume successive
/// words of that stream.
fn stream(key: &[u8; 32], path: u64, mode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(path);
    rng.set_word_pos(mode as u128 * MODE_WORD_STRIDE);
    rng
}

fn mode_path(tr: &Transition, rng: &mut ChaCha8Rng, steps: u64, mut visit: impl FnMut(u64, f64)) {
    let z: f64 = rng.sample(StandardNormal);
    let mut x = tr.mean + tr.initial_sd * z;
    visit(0, x);
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        x = tr.decay * x + tr.sd * z;
        visit(i, x);
    }
}

struct Prepared {
    key: [u8; 32],
    transitions: Vec<Transition>,
    steps: u64,
    h: f64,
    integrator: Integrator,
}

impl Prepared {
    fn new(plan: &SimulationPlan) -> Result<Self> {
        plan.validate()?;
        let h = plan.spec.horizon / plan.n_time_steps as f64;
        let noise = plan.is_noise();
        Ok(Self {
            key: key(plan.seed),
            transitions: plan.modes()?.iter().map(|m| transition(m, h, noise)).collect(),
            steps: plan.n_time_steps,
            h,
            integrator: plan.integrator,
        })
    }

    fn sample(&self, path: u64) -> SamplePair {
        let m = self.steps;
        let even = m.is_multiple_of(2);
        let mut fine_modes = Vec::with_capacity(self.transitions.len());
        let mut coarse_modes = Vec::with_capacity(self.transitions.len());
        for (k, tr) in self.transitions.iter().enumerate() {
            let mut rng = stream(&self.key, path, k as u64 + 1);
            let (mut fine, mut coarse) = (0.0, 0.0);
            let trapezoid = self.integrator == Integrator::Trapezoid;
            mode_path(tr, &mut rng, m, |i, x| {
                let x2 = x * x;
                let end = i == 0 || i == m;
                let wf = match (trapezoid, end) {
                    (true, true) => 0.5,
                    (true, false) => 1.0,
                    (false, _) => (i < m) as u8 as f64,
                };
                fine += wf * x2;
                if even && i % 2 == 0 {
                    let wc = match (trapezoid, end) {
                        (true, true) => 0.5,
                        (true, false) => 1.0,
                        (false, _) => (i < m) as u8 as f64,
                    };
                    coarse += wc * x2;
                }
            });
            fine_modes.push(tr.weight * self.h * fine);
            coarse_modes.push(tr.weight * 2.0 * self.h * coarse);
        }
        SamplePair {
            fine: pairwise_sum(&fine_modes),
            coarse: even.then(|| pairwise_sum(&coarse_modes)),
        }
    }
}

/// One realization of `Σ_{k ≤ K} w_k ∫_0^T x_k²(t) dt`, deterministic in
/// `(seed, path_index)`.
pub fn sample_functional(plan: &SimulationPlan, path_index: u64) -> Result<f64> {
    Ok(Prepared::new(plan)?.sample(path_index).fine)
}

/// Values `x_k(t_i)`, `i = 0..=M`, of mode `k` on path `path_index`; the
/// same draws that enter `sample_functional`.
pub fn sample_mode_path(plan: &SimulationPlan, path_index: u64, mode: u64) -> Result<Vec<f64>> {
    plan.validate()?;
    if mode == 0 || mode > plan.n_modes {
        return domain(format!("mode {mode} is outside 1..={}", plan.n_modes));
    }
    let h = plan.spec.horizon / plan.n_time_steps as f64;
    let tr = transition(&plan.spec.mode(mode)?, h, plan.is_noise());
    let mut rng = stream(&key(plan.seed), path_index, mode);
    let mut out = Vec::with_capacity(plan.n_time_steps as usize + 1);
    mode_path(&tr, &mut rng, plan.n_time_steps, |_, x| out.push(x));
    Ok(out)
}

/// `E w ∫_0^T x² dt` for one mode.
pub fn mode_functional_mean(mode: &Mode, horizon: f64, noise: bool) -> f64 {
    let q2 = mode.intensity * mode.intensity;
    let t = horizon;
    let a = mode.drift;
    if noise {
        return mode.weight * q2 * t * t / 2.0;
    }
    let x = 2.0 * a * t;
    // f1 = ∫_0^T e^{-2at} dt and f2 = ∫_0^T (1 - e^{-2at})/(2a) dt.
    let (f1, f2) = if x.abs() < 1e-3 {
        (
            t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0),
            t * t * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0),
        )
    } else {
        let f1 = -(-x).exp_m1() / (2.0 * a);
        (f1, (t - f1) / (2.0 * a))
    };
    mode.weight * ((mode.mean * mode.mean + mode.variance) * f1 + q2 * f2)
}

/// `E Σ_{k ≤ n_modes} w_k ∫_0^T x_k² dt`.
pub fn functional_mean(spec: &ProblemSpec, n_modes: u64) -> Result<f64> {
    let noise = matches!(spec.process, Process::Noise { .. });
    let terms = (1..=n_modes)
        .map(|k| spec.mode(k).map(|m| mode_functional_mean(&m, spec.horizon, noise)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

/// Upper bound on `E Σ_{k > n_modes} w_k ∫_0^T x_k² dt`; infinite when the
/// full functional has infinite mean.
pub fn truncation_tail_mean(spec: &ProblemSpec, n_modes: u64) -> Result<f64> {
    let head = functional_mean(spec, n_modes)?;
    if let Some(n) = spec.mode_count() {
        return Ok((functional_mean(spec, n)? - head).max(0.0));
    }
    let noise = matches!(spec.process, Process::Noise { .. });
    match mode_series(spec, |m| mode_functional_mean(m, spec.horizon, noise)) {
        Ok(full) => Ok((full.value + full.error - head).max(0.0)),
        Err(Error::Solver(_) | Error::Envelope(_) | Error::Truncation { .. } | Error::Quadrature { .. }) => {
            Ok(f64::INFINITY)
        }
        Err(e) => Err(e),
    }
}

/// Exact expectation of the discretized functional `Σ_k w_k h Σ_i c_i E x_k(t_i)²`
/// under the plan's rule with `n_time_steps` steps.
pub fn discretized_mean(spec: &ProblemSpec, n_modes: u64, n_time_steps: u64, integrator: Integrator) -> Result<f64> {
    if n_time_steps == 0 {
        return domain("at least one time step is needed");
    }
    let noise = matches!(spec.process, Process::Noise { .. });
    let h = spec.horizon / n_time_steps as f64;
    let mut per_mode = Vec::with_capacity(n_modes as usize);
    for k in 1..=n_modes {
        let m = spec.mode(k)?;
        let q2 = m.intensity * m.intensity;
        let second_moment = |t: f64| {
            if noise {
                return q2 * t;
            }
            let a = m.drift;
            let e = (-2.0 * a * t).exp();
            let growth = if a == 0.0 {
                t
            } else {
                -(-2.0 * a * t).exp_m1() / (2.0 * a)
            };
            (m.mean * m.mean + m.variance) * e + q2 * growth
        };
        let values: Vec<f64> = (0..=n_time_steps)
            .map(|i| {
                let c = match integrator {
                    Integrator::Trapezoid if i == 0 || i == n_time_steps => 0.5,
                    Integrator::Trapezoid => 1.0,
                    Integrator::LeftPoint if i == n_time_steps => 0.0,
                    Integrator::LeftPoint => 1.0,
                };
                c * second_moment(i as f64 * h)
            })
            .collect();
        per_mode.push(m.weight * h * pairwise_sum(&values));
    }
    Ok(pairwise_sum(&per_mode))
}

/// All samples of a plan, in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub fine: Vec<f64>,
    pub coarse: Option<Vec<f64>>,
    /// `truncation_tail_mean` of the plan.
    pub tail_mean: f64,
    pub z: f64,
}

/// Simulate every path of the plan on the current rayon pool. The result
/// does not depend on the number of worker threads.
pub fn simulate(plan: &SimulationPlan) -> Result<SampleSet> {
    let prepared = Prepared::new(plan)?;
    let pairs: Vec<SamplePair> = (0..plan.n_paths).into_par_iter().map(|i| prepared.sample(i)).collect();
    let fine = pairs.iter().map(|s| s.fine).collect();
    let coarse = pairs.iter().map(|s| s.coarse).collect::<Option<Vec<f64>>>();
    Ok(SampleSet {
        fine,
        coarse,
        tail_mean: truncation_tail_mean(&plan.spec, plan.n_modes)?,
        z: DEFAULT_Z,
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl SampleSet {
    pub fn with_z(mut self, z: f64) -> Self {
        self.z = z;
        self
    }

    fn ci(&self, values: &[f64], bias: f64) -> EstimateWithCI {
        let (estimate, standard_error) = mean_and_se(values);
        EstimateWithCI {
            estimate,
            standard_error,
            n_effective: values.len() as u64,
            truncation_bias_bound: bias,
            z: self.z,
        }
    }

    /// Sample mean of the functional.
    pub fn mean(&self) -> EstimateWithCI {
        self.ci(&self.fine, self.tail_mean)
    }

    fn laplace_of(&self, values: &[f64], p: f64) -> Result<EstimateWithCI> {
        if !(p >= 0.0) {
            return domain(format!("p must be non-negative, got {p}"));
        }
        let e: Vec<f64> = values.iter().map(|v| (-p * v).exp()).collect();
        // 1 - E e^{-pΔ} ≤ p E Δ for the dropped part Δ.
        Ok(self.ci(&e, (p * self.tail_mean).min(1.0)))
    }

    /// `E exp(-p·functional)`.
    pub fn laplace(&self, p: f64) -> Result<EstimateWithCI> {
        self.laplace_of(&self.fine, p)
    }

    /// The same estimate on the grid with half the steps.
    pub fn laplace_coarse(&self, p: f64) -> Result<EstimateWithCI> {
        match &self.coarse {
            Some(c) => self.laplace_of(c, p),
            None => domain("the coarse grid needs an even number of steps"),
        }
    }

    /// Fraction of samples at most `eps`. The bias bound is the dropped
    /// mean on the functional scale.
    pub fn small_ball(&self, eps: f64) -> Result<SmallBallEstimate> {
        if !(eps > 0.0) {
            return domain(format!("eps must be positive, got {eps}"));
        }
        let n = self.fine.len() as u64;
        let hits = self.fine.iter().filter(|&&v| v <= eps).count() as u64;
        let p = hits as f64 / n as f64;
        let probability = EstimateWithCI {
            estimate: p,
            standard_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_effective: n,
            truncation_bias_bound: self.tail_mean,
            z: self.z,
        };
        let upper_bound = (hits == 0).then(|| 3.0 / n as f64);
        let diagnostic = (hits < MIN_HITS)
            .then(|| format!("only {hits} of {n} samples fall below eps = {eps}; at least {MIN_HITS} are needed"));
        Ok(SmallBallEstimate {
            probability,
            hits,
            upper_bound,
            diagnostic,
        })
    }

    /// Write `path_index,functional_value` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::Io(e.to_string()))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["path_index", "functional_value"])
            .map_err(|e| Error::Io(e.to_string()))?;
        for (i, v) in self.fine.iter().enumerate() {
            w.write_record([i.to_string(), format!("{v:.17e}")])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))?;
        Ok(())
    }
}

pub fn estimate_laplace(plan: &SimulationPlan, p: f64) -> Result<EstimateWithCI> {
    if !(p >= 0.0) {
        return domain(format!("p must be non-negative, got {p}"));
    }
    simulate(plan)?.laplace(p)
}

pub fn estimate_small_ball(plan: &SimulationPlan, eps: f64) -> Result<SmallBallEstimate> {
    if !(eps > 0.0) {
        return domain(format!("eps must be positive, got {eps}"));
    }
    simulate(plan)?.small_ball(eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::log_laplace_truncated;
    use crate::spectrum::{InitialConditionLaw, SpectrumModel};

    fn interval() -> SpectrumModel {
        SpectrumModel::DirichletInterval {
            length: std::f64::consts::PI,
        }
    }

    #[test]
    fn p_zero_is_exact() {
        let spec = ProblemSpec::noise(interval(), 0.0, 1.0);
        let plan = SimulationPlan::new(spec, 2, 8, 100, 1).unwrap();
        let e = estimate_laplace(&plan, 0.0).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.standard_error, 0.0);
    }

    #[test]
    fn deterministic_per_path() {
        let spec = ProblemSpec::solution(interval(), 0.0, 1.0, 1.0);
        let plan = SimulationPlan::new(spec, 4, 16, 10, 7).unwrap();
        let a = sample_functional(&plan, 3).unwrap();
        let b = sample_functional(&plan, 3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, sample_functional(&plan, 4).unwrap());
        let other = SimulationPlan { seed: 8, ..plan };
        assert_ne!(a, sample_functional(&other, 3).unwrap());
    }

    #[test]
    fn trapezoid_is_exact_in_mean_for_brownian_modes() {
        let spec = ProblemSpec::noise(interval(), 0.0, 1.0);
        let d = discretized_mean(&spec, 1, 7, Integrator::Trapezoid).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        let l = discretized_mean(&spec, 1, 8, Integrator::LeftPoint).unwrap();
        assert!((l - (0.5 - 1.0 / 16.0)).abs() < 1e-15);
    }

    #[test]
    fn mode_means() {
        let spec = ProblemSpec::solution(interval(), 0.0, 1.0, 1.0);
        let m = spec.mode(1).unwrap();
        let exact = 0.5 * (1.0 - (1.0 - (-2.0f64).exp()) / 2.0);
        assert!((mode_functional_mean(&m, 1.0, false) - exact).abs() < 1e-15);
        let tiny = Mode { drift: 1e-6, ..m };
        let zero = Mode { drift: 0.0, ..m };
        let (a, b) = (
            mode_functional_mean(&tiny, 1.0, false),
            mode_functional_mean(&zero, 1.0, false),
        );
        assert!((a - b).abs() < 1e-6 && (b - 0.5).abs() < 1e-15);
        let stat = ProblemSpec::solution(interval(), 0.0, 1.0, 1.0).with_initial(InitialConditionLaw::stationary());
        let m = stat.mode(2).unwrap();
        assert!((mode_functional_mean(&m, 1.0, false) - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn tail_mean_brackets_the_next_modes() {
        let spec = ProblemSpec::noise(interval(), 2.0, 1.0);
        let tail = truncation_tail_mean(&spec, 64).unwrap();
        let next = functional_mean(&spec, 128).unwrap() - functional_mean(&spec, 64).unwrap();
        assert!(tail > next && tail < 3.0 * next, "{tail} {next}");
        assert!(truncation_tail_mean(&ProblemSpec::noise(interval(), 0.0, 1.0), 4)
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn small_laplace_check() {
        let spec = ProblemSpec::noise(interval(), 1.0, 1.0);
        let plan = SimulationPlan::new(spec.clone(), 8, 64, 4000, 11).unwrap();
        let e = estimate_laplace(&plan, 1.0).unwrap();
        let exact = log_laplace_truncated(&spec, 1.0, 8).unwrap().exp();
        assert!(e.contains(exact), "{e:?} vs {exact}");
    }

    #[test]
    fn small_ball_flags_rare_events() {
        let spec = ProblemSpec::noise(interval(), 0.0, 1.0);
        let plan = SimulationPlan::new(spec, 1, 32, 500, 3).unwrap();
        let s = estimate_small_ball(&plan, 1e-9).unwrap();
        assert_eq!(s.hits, 0);
        assert_eq!(s.upper_bound, Some(3.0 / 500.0));
        assert!(s.diagnostic.is_some());
        let s = estimate_small_ball(&plan, 5.0).unwrap();
        assert!(s.probability.estimate > 0.9 && s.diagnostic.is_none());
    }
}
