//! Eigenvalue and weight sequences for the operators, norms, noise
//! covariances and initial-condition laws that define a quadratic functional.
//!
//! Every sequence has an exact value at integer indices and a continuous
//! extension used to bracket series tails. Beyond any stored prefix the
//! extension coincides with the sequence at integers.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};

/// Eigenvalue model of the operator generating the Sobolev scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumModel {
    /// Dirichlet Laplacian on `[0, length]`: `λ_k = (πk/length)²`.
    DirichletInterval { length: f64 },
    /// Weyl envelope `λ_k = S k^{2m/d} (1 + correction·k^{-1/d})`.
    WeylGeneric {
        d: u32,
        m: f64,
        #[serde(rename = "S")]
        s: f64,
        /// Relative lower-order perturbation; zero gives the pure envelope.
        #[serde(default)]
        correction: f64,
    },
    /// Hermite operator on the line: `λ_k = k`, order 2, behaving like a
    /// two-dimensional Weyl law.
    HarmonicOscillator,
    /// Stored eigenvalues followed by the tail `tail_constant·k^{tail_exponent}`.
    ExplicitSequence {
        values: Vec<f64>,
        tail_exponent: f64,
        tail_constant: f64,
        d: u32,
    },
    /// Operator eigenvalues from `base`, Sobolev weights from the sequence
    /// `a_k` through `‖f‖²_{γ;a} = Σ a_k^{2γ/d} f_k²`.
    EquivalentNorm {
        base: Box<SpectrumModel>,
        norm: NormSequence,
    },
}

/// Sequence `a_k` of an equivalent norm, comparable to `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum NormSequence {
    /// `a_k = slope·k`.
    Linear { slope: f64 },
    /// Stored prefix then `a_k = tail_slope·k`.
    Explicit { values: Vec<f64>, tail_slope: f64 },
    /// `a_k = odd_slope·k` for odd `k` and `even_slope·k` for even `k`; has no
    /// limit `a_k/k` unless the slopes agree.
    Alternating { odd_slope: f64, even_slope: f64 },
}

impl NormSequence {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            NormSequence::Linear { slope } => *slope > 0.0,
            NormSequence::Explicit { values, tail_slope } => {
                *tail_slope > 0.0 && values.iter().all(|v| *v > 0.0 && v.is_finite())
            }
            NormSequence::Alternating { odd_slope, even_slope } => *odd_slope > 0.0 && *even_slope > 0.0,
        };
        if ok {
            Ok(())
        } else {
            domain(format!("norm sequence must be positive: {self:?}"))
        }
    }

    /// `a_k` at integer `k`.
    pub fn value(&self, k: u64) -> f64 {
        match self {
            NormSequence::Explicit { values, .. } if (k as usize) <= values.len() => values[k as usize - 1],
            _ => self.value_at(k as f64, (k % 2) as usize),
        }
    }

    /// Continuous extension on the residue class `parity` (0 even, 1 odd).
    pub fn value_at(&self, x: f64, parity: usize) -> f64 {
        match self {
            NormSequence::Linear { slope } => slope * x,
            NormSequence::Explicit { tail_slope, .. } => tail_slope * x,
            NormSequence::Alternating { odd_slope, even_slope } => {
                if parity == 1 {
                    odd_slope * x
                } else {
                    even_slope * x
                }
            }
        }
    }

    /// `lim a_k / k` when it exists.
    pub fn limit(&self) -> Option<f64> {
        match self {
            NormSequence::Linear { slope } => Some(*slope),
            NormSequence::Explicit { tail_slope, .. } => Some(*tail_slope),
            NormSequence::Alternating { odd_slope, even_slope } => (odd_slope == even_slope).then_some(*odd_slope),
        }
    }

    fn prefix_len(&self) -> u64 {
        match self {
            NormSequence::Explicit { values, .. } => values.len() as u64,
            _ => 0,
        }
    }
}

/// `4π (Γ(1 + d/2) / volume)^{2/d}`, the Weyl constant of the Dirichlet
/// Laplacian on a domain of the given volume.
pub fn weyl_constant_dirichlet_laplacian(d: u32, volume: f64) -> Result<f64> {
    if d == 0 || !(volume > 0.0) {
        return domain(format!(
            "Weyl constant needs d >= 1 and volume > 0, got d={d}, volume={volume}"
        ));
    }
    let d = d as f64;
    Ok(4.0 * std::f64::consts::PI * (gamma(1.0 + 0.5 * d) / volume).powf(2.0 / d))
}

fn check_index(k: u64) -> Result<()> {
    if k == 0 {
        domain("mode index must be at least 1")
    } else {
        Ok(())
    }
}

impl SpectrumModel {
    /// Check parameters, positivity and monotonicity of stored prefixes.
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectrumModel::DirichletInterval { length } => {
                if !(*length > 0.0 && length.is_finite()) {
                    return domain(format!("interval length must be positive, got {length}"));
                }
            }
            SpectrumModel::WeylGeneric { d, m, s, correction } => {
                if *d == 0 || !(*m > 0.0) || !(*s > 0.0) {
                    return domain(format!(
                        "Weyl model needs d >= 1, m > 0, S > 0; got d={d}, m={m}, S={s}"
                    ));
                }
                if !(*correction >= 0.0) || (*correction > 0.0 && 2.0 * m < 1.0) {
                    return domain(format!(
                        "Weyl correction {correction} would break monotonicity for m={m}"
                    ));
                }
            }
            SpectrumModel::HarmonicOscillator => {}
            SpectrumModel::ExplicitSequence {
                values,
                tail_exponent,
                tail_constant,
                d,
            } => {
                if *d == 0 || !(*tail_exponent > 0.0) || !(*tail_constant > 0.0) {
                    return domain(format!(
                        "explicit spectrum needs d >= 1 and a positive increasing tail, got d={d}, exponent={tail_exponent}, constant={tail_constant}"
                    ));
                }
                let mut prev = 0.0;
                for (i, v) in values.iter().enumerate() {
                    if !(*v > 0.0 && v.is_finite()) || *v < prev {
                        return domain(format!(
                            "explicit eigenvalue {} = {v} is not positive and non-decreasing",
                            i + 1
                        ));
                    }
                    prev = *v;
                }
                let next = tail_constant * ((values.len() + 1) as f64).powf(*tail_exponent);
                if next < prev {
                    return domain("explicit eigenvalue tail starts below the stored prefix");
                }
            }
            SpectrumModel::EquivalentNorm { base, norm } => {
                if matches!(**base, SpectrumModel::EquivalentNorm { .. }) {
                    return domain("equivalent norms cannot be nested");
                }
                base.validate()?;
                norm.validate()?;
            }
        }
        Ok(())
    }

    /// Spatial dimension entering the Weyl law.
    pub fn d(&self) -> u32 {
        match self {
            SpectrumModel::DirichletInterval { .. } => 1,
            SpectrumModel::WeylGeneric { d, .. } => *d,
            SpectrumModel::HarmonicOscillator => 2,
            SpectrumModel::ExplicitSequence { d, .. } => *d,
            SpectrumModel::EquivalentNorm { base, .. } => base.d(),
        }
    }

    /// Half-order of the operator.
    pub fn m(&self) -> f64 {
        match self {
            SpectrumModel::DirichletInterval { .. } => 1.0,
            SpectrumModel::WeylGeneric { m, .. } => *m,
            SpectrumModel::HarmonicOscillator => 1.0,
            SpectrumModel::ExplicitSequence { tail_exponent, d, .. } => 0.5 * tail_exponent * *d as f64,
            SpectrumModel::EquivalentNorm { base, .. } => base.m(),
        }
    }

    /// Weyl constant `S` in `λ_k ∼ S k^{2m/d}`.
    pub fn weyl_constant(&self) -> f64 {
        match self {
            SpectrumModel::DirichletInterval { length } => (std::f64::consts::PI / length).powi(2),
            SpectrumModel::WeylGeneric { s, .. } => *s,
            SpectrumModel::HarmonicOscillator => 1.0,
            SpectrumModel::ExplicitSequence { tail_constant, .. } => *tail_constant,
            SpectrumModel::EquivalentNorm { base, .. } => base.weyl_constant(),
        }
    }

    /// Exponent `2m/d` of the eigenvalue growth.
    pub fn growth_exponent(&self) -> f64 {
        match self {
            SpectrumModel::ExplicitSequence { tail_exponent, .. } => *tail_exponent,
            SpectrumModel::EquivalentNorm { base, .. } => base.growth_exponent(),
            _ => 2.0 * self.m() / self.d() as f64,
        }
    }

    /// Number of leading indices given by stored values rather than a formula.
    pub fn prefix_len(&self) -> u64 {
        match self {
            SpectrumModel::ExplicitSequence { values, .. } => values.len() as u64,
            SpectrumModel::EquivalentNorm { base, norm } => base.prefix_len().max(norm.prefix_len()),
            _ => 0,
        }
    }

    /// Whether the weights split into two residue classes (odd and even
    /// indices) that must be summed separately.
    pub fn is_alternating(&self) -> bool {
        matches!(
            self,
            SpectrumModel::EquivalentNorm {
                norm: NormSequence::Alternating { odd_slope, even_slope },
                ..
            } if odd_slope != even_slope
        )
    }

    /// Whether the Sobolev weights come from an equivalent-norm sequence.
    pub fn is_equivalent_norm(&self) -> bool {
        matches!(self, SpectrumModel::EquivalentNorm { .. })
    }

    /// Eigenvalue `λ_k`.
    pub fn eigenvalue(&self, k: u64) -> Result<f64> {
        check_index(k)?;
        Ok(match self {
            SpectrumModel::ExplicitSequence { values, .. } if (k as usize) <= values.len() => values[k as usize - 1],
            SpectrumModel::HarmonicOscillator => k as f64,
            SpectrumModel::EquivalentNorm { base, .. } => base.eigenvalue(k)?,
            _ => self.eigenvalue_at(k as f64),
        })
    }

    /// Continuous extension of `λ_k` beyond the stored prefix.
    pub fn eigenvalue_at(&self, x: f64) -> f64 {
        match self {
            SpectrumModel::DirichletInterval { length } => {
                let v = std::f64::consts::PI * x / length;
                v * v
            }
            SpectrumModel::WeylGeneric { d, m, s, correction } => {
                let d = *d as f64;
                let base = s * x.powf(2.0 * m / d);
                if *correction == 0.0 {
                    base
                } else {
                    base * (1.0 + correction * x.powf(-1.0 / d))
                }
            }
            SpectrumModel::HarmonicOscillator => x,
            SpectrumModel::ExplicitSequence {
                tail_exponent,
                tail_constant,
                ..
            } => tail_constant * x.powf(*tail_exponent),
            SpectrumModel::EquivalentNorm { base, .. } => base.eigenvalue_at(x),
        }
    }

    /// Weight of mode `k` in the `H^{-γ}` norm: `λ_k^{-γ/m}`, or
    /// `a_k^{-2γ/d}` for an equivalent norm.
    pub fn sobolev_weight(&self, gamma: f64, k: u64) -> Result<f64> {
        check_index(k)?;
        if gamma == 0.0 {
            return Ok(1.0);
        }
        Ok(match self {
            SpectrumModel::EquivalentNorm { base, norm } => norm.value(k).powf(-2.0 * gamma / base.d() as f64),
            _ => self.eigenvalue(k)?.powf(-gamma / self.m()),
        })
    }

    /// Continuous extension of the Sobolev weight on residue class `parity`.
    pub fn sobolev_weight_at(&self, gamma: f64, x: f64, parity: usize) -> f64 {
        if gamma == 0.0 {
            return 1.0;
        }
        match self {
            SpectrumModel::EquivalentNorm { base, norm } => {
                norm.value_at(x, parity).powf(-2.0 * gamma / base.d() as f64)
            }
            _ => self.eigenvalue_at(x).powf(-gamma / self.m()),
        }
    }

    /// Envelope `w_k ∼ K k^{-2g}` of the Sobolev weights as `(K, g)`, when
    /// the leading constant exists.
    pub fn weight_envelope(&self, gamma: f64) -> Option<(f64, f64)> {
        let d = self.d() as f64;
        match self {
            SpectrumModel::EquivalentNorm { norm, .. } => {
                let c = norm.limit()?;
                Some((c.powf(-2.0 * gamma / d), gamma / d))
            }
            _ => {
                let g = gamma * self.growth_exponent() / (2.0 * self.m());
                Some((self.weyl_constant().powf(-gamma / self.m()), g))
            }
        }
    }
}

/// Spatial covariance of the driving noise, diagonal in the eigenbasis:
/// mode `k` carries intensity `q_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Cylindrical noise, `q_k = 1`.
    #[default]
    Identity,
    /// `Q = A^{2s}`, so `q_k = λ_k^s`.
    PowerOfA { s: f64 },
    /// Stored prefix then `q_k = tail_constant·k^{tail_exponent}`.
    ExplicitQ {
        values: Vec<f64>,
        tail_exponent: f64,
        tail_constant: f64,
    },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::Identity => Ok(()),
            NoiseSpec::PowerOfA { s } if s.is_finite() => Ok(()),
            NoiseSpec::ExplicitQ {
                values,
                tail_exponent,
                tail_constant,
            } if *tail_constant > 0.0
                && tail_exponent.is_finite()
                && values.iter().all(|v| *v > 0.0 && v.is_finite()) =>
            {
                Ok(())
            }
            _ => domain(format!("noise intensities must be positive: {self:?}")),
        }
    }

    /// `q_k`.
    pub fn intensity(&self, spectrum: &SpectrumModel, k: u64) -> Result<f64> {
        check_index(k)?;
        Ok(match self {
            NoiseSpec::Identity => 1.0,
            NoiseSpec::PowerOfA { s } => spectrum.eigenvalue(k)?.powf(*s),
            NoiseSpec::ExplicitQ { values, .. } if (k as usize) <= values.len() => values[k as usize - 1],
            NoiseSpec::ExplicitQ { .. } => self.intensity_at(spectrum, k as f64),
        })
    }

    /// Continuous extension of `q_k`.
    pub fn intensity_at(&self, spectrum: &SpectrumModel, x: f64) -> f64 {
        match self {
            NoiseSpec::Identity => 1.0,
            NoiseSpec::PowerOfA { s } => spectrum.eigenvalue_at(x).powf(*s),
            NoiseSpec::ExplicitQ {
                tail_exponent,
                tail_constant,
                ..
            } => tail_constant * x.powf(*tail_exponent),
        }
    }

    /// Envelope `q_k ∼ c_q k^σ` as `(c_q, σ)`.
    pub fn envelope(&self, spectrum: &SpectrumModel) -> (f64, f64) {
        match self {
            NoiseSpec::Identity => (1.0, 0.0),
            NoiseSpec::PowerOfA { s } => (spectrum.weyl_constant().powf(*s), s * spectrum.growth_exponent()),
            NoiseSpec::ExplicitQ {
                tail_exponent,
                tail_constant,
                ..
            } => (*tail_constant, *tail_exponent),
        }
    }

    pub fn prefix_len(&self) -> u64 {
        match self {
            NoiseSpec::ExplicitQ { values, .. } => values.len() as u64,
            _ => 0,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, NoiseSpec::Identity)
    }
}

/// Rule for the per-mode means `μ_k` of a Gaussian initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MeanRule {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `μ_k = constant·k^{exponent}`.
    Power {
        constant: f64,
        exponent: f64,
    },
    /// `μ_k = √(ln k)`.
    SqrtLog,
    /// Stored prefix then `tail_constant·k^{tail_exponent}`.
    Explicit {
        values: Vec<f64>,
        tail_constant: f64,
        tail_exponent: f64,
    },
}

/// Rule for the per-mode variances `σ_k²` of a Gaussian initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum VarianceRule {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `σ_k² = constant·k^{exponent}`.
    Power {
        constant: f64,
        exponent: f64,
    },
    /// The invariant law of each mode: `σ_k² = q_k²/(2λ_k^r)`.
    Stationary,
    /// Stored prefix then `tail_constant·k^{tail_exponent}`.
    Explicit {
        values: Vec<f64>,
        tail_constant: f64,
        tail_exponent: f64,
    },
}

/// Independent Gaussian initial values `u_k(0) ∼ N(μ_k, σ_k²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InitialConditionLaw {
    #[serde(default)]
    pub mean: MeanRule,
    #[serde(default)]
    pub variance: VarianceRule,
}

impl InitialConditionLaw {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn stationary() -> Self {
        Self {
            mean: MeanRule::Zero,
            variance: VarianceRule::Stationary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mean_ok = match &self.mean {
            MeanRule::Zero | MeanRule::SqrtLog => true,
            MeanRule::Constant { value } => value.is_finite(),
            MeanRule::Power { constant, exponent } => constant.is_finite() && exponent.is_finite(),
            MeanRule::Explicit {
                values,
                tail_constant,
                tail_exponent,
            } => values.iter().all(|v| v.is_finite()) && tail_constant.is_finite() && tail_exponent.is_finite(),
        };
        let var_ok = match &self.variance {
            VarianceRule::Zero | VarianceRule::Stationary => true,
            VarianceRule::Constant { value } => *value >= 0.0 && value.is_finite(),
            VarianceRule::Power { constant, exponent } => {
                *constant >= 0.0 && constant.is_finite() && exponent.is_finite()
            }
            VarianceRule::Explicit {
                values,
                tail_constant,
                tail_exponent,
            } => {
                values.iter().all(|v| *v >= 0.0 && v.is_finite()) && *tail_constant >= 0.0 && tail_exponent.is_finite()
            }
        };
        if mean_ok && var_ok {
            Ok(())
        } else {
            domain(format!("invalid initial-condition law: {self:?}"))
        }
    }

    pub fn mean(&self, k: u64) -> f64 {
        match &self.mean {
            MeanRule::Explicit { values, .. } if (k as usize) <= values.len() => values[k as usize - 1],
            _ => self.mean_at(k as f64),
        }
    }

    pub fn mean_at(&self, x: f64) -> f64 {
        match &self.mean {
            MeanRule::Zero => 0.0,
            MeanRule::Constant { value } => *value,
            MeanRule::Power { constant, exponent } => constant * x.powf(*exponent),
            MeanRule::SqrtLog => x.ln().max(0.0).sqrt(),
            MeanRule::Explicit {
                tail_constant,
                tail_exponent,
                ..
            } => tail_constant * x.powf(*tail_exponent),
        }
    }

    /// `σ_k²`; `stationary` is the invariant variance `q_k²/(2λ_k^r)` of the mode.
    pub fn variance(&self, k: u64, stationary: f64) -> f64 {
        match &self.variance {
            VarianceRule::Explicit { values, .. } if (k as usize) <= values.len() => values[k as usize - 1],
            _ => self.variance_at(k as f64, stationary),
        }
    }

    pub fn variance_at(&self, x: f64, stationary: f64) -> f64 {
        match &self.variance {
            VarianceRule::Zero => 0.0,
            VarianceRule::Constant { value } => *value,
            VarianceRule::Power { constant, exponent } => constant * x.powf(*exponent),
            VarianceRule::Stationary => stationary,
            VarianceRule::Explicit {
                tail_constant,
                tail_exponent,
                ..
            } => tail_constant * x.powf(*tail_exponent),
        }
    }

    pub fn prefix_len(&self) -> u64 {
        let a = match &self.mean {
            MeanRule::Explicit { values, .. } => values.len(),
            _ => 0,
        };
        let b = match &self.variance {
            VarianceRule::Explicit { values, .. } => values.len(),
            _ => 0,
        };
        a.max(b) as u64
    }

    pub fn is_zero(&self) -> bool {
        let mean_zero = match &self.mean {
            MeanRule::Zero => true,
            MeanRule::Constant { value } => *value == 0.0,
            MeanRule::Power { constant, .. } => *constant == 0.0,
            MeanRule::SqrtLog => false,
            MeanRule::Explicit {
                values, tail_constant, ..
            } => *tail_constant == 0.0 && values.iter().all(|v| *v == 0.0),
        };
        mean_zero && self.is_deterministic()
    }

    /// All variances vanish.
    pub fn is_deterministic(&self) -> bool {
        match &self.variance {
            VarianceRule::Zero => true,
            VarianceRule::Constant { value } => *value == 0.0,
            VarianceRule::Power { constant, .. } => *constant == 0.0,
            VarianceRule::Stationary => false,
            VarianceRule::Explicit {
                values, tail_constant, ..
            } => *tail_constant == 0.0 && values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn has_zero_mean(&self) -> bool {
        match &self.mean {
            MeanRule::Zero => true,
            MeanRule::Constant { value } => *value == 0.0,
            MeanRule::Power { constant, .. } => *constant == 0.0,
            MeanRule::SqrtLog => false,
            MeanRule::Explicit {
                values, tail_constant, ..
            } => *tail_constant == 0.0 && values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.variance, VarianceRule::Stationary)
    }

    /// `inf_k σ_k > 0`.
    pub fn is_nondegenerate(&self) -> bool {
        match &self.variance {
            VarianceRule::Zero | VarianceRule::Stationary => false,
            VarianceRule::Constant { value } => *value > 0.0,
            VarianceRule::Power { constant, exponent } => *constant > 0.0 && *exponent >= 0.0,
            VarianceRule::Explicit {
                values,
                tail_constant,
                tail_exponent,
            } => *tail_constant > 0.0 && *tail_exponent >= 0.0 && values.iter().all(|v| *v > 0.0),
        }
    }

    /// Growth exponents `(e_μ, e_σ)` with `μ_k² = O(k^{e_μ})` (up to
    /// logarithms) and `σ_k² = O(k^{e_σ})`. The stationary variance exponent
    /// is supplied by the caller.
    fn growth(&self, stationary_exponent: f64) -> (f64, f64) {
        let mean = match &self.mean {
            MeanRule::Zero => f64::NEG_INFINITY,
            MeanRule::Constant { value } if *value == 0.0 => f64::NEG_INFINITY,
            MeanRule::Constant { .. } | MeanRule::SqrtLog => 0.0,
            MeanRule::Power { constant, exponent } => {
                if *constant == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    2.0 * exponent
                }
            }
            MeanRule::Explicit {
                tail_constant,
                tail_exponent,
                ..
            } => {
                if *tail_constant == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    2.0 * tail_exponent
                }
            }
        };
        let var = match &self.variance {
            VarianceRule::Zero => f64::NEG_INFINITY,
            VarianceRule::Constant { value } if *value == 0.0 => f64::NEG_INFINITY,
            VarianceRule::Constant { .. } => 0.0,
            VarianceRule::Power { constant, exponent }
            | VarianceRule::Explicit {
                tail_constant: constant,
                tail_exponent: exponent,
                ..
            } => {
                if *constant == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    *exponent
                }
            }
            VarianceRule::Stationary => stationary_exponent,
        };
        (mean, var)
    }

    /// Verify that `Σ_k k^{-2γ'/d}(μ_k² + σ_k²) < ∞` for every `γ' > d/2`
    /// and that the initial condition keeps the functional finite at the
    /// requested `γ`, where mode `k` retains its start for a time of order
    /// `k^{-drift_decay}`.
    pub fn check_regularity(&self, gamma: f64, d: u32, drift_decay: f64, stationary_exponent: f64) -> Result<()> {
        let (em, ev) = self.growth(stationary_exponent);
        let worst = em.max(ev);
        if worst == f64::NEG_INFINITY {
            return Ok(());
        }
        if worst > 0.0 {
            return Err(Error::Domain(format!(
                "initial condition too rough: μ_k² + σ_k² grows like k^{worst}, so Σ k^(-2γ/d)(μ_k² + σ_k²) diverges for γ close to d/2"
            )));
        }
        let decay = 2.0 * gamma / d as f64 + drift_decay;
        if decay - worst > 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "initial condition makes the functional infinite: Σ k^(-{decay}) (μ_k² + σ_k²) diverges"
            )))
        }
    }

    /// Verify `Σ_k k^{-g} μ_k² < ∞` for the deterministic-mean contribution
    /// with weights decaying like `k^{-g}`.
    pub fn check_mean_summable(&self, g: f64) -> Result<()> {
        let (em, _) = self.growth(f64::NEG_INFINITY);
        if em == f64::NEG_INFINITY || g - em > 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "Σ k^(-{g}) μ_k² diverges (mean growth exponent {em})"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_examples() {
        let interval = SpectrumModel::DirichletInterval {
            length: std::f64::consts::PI,
        };
        assert!((interval.eigenvalue(3).unwrap() - 9.0).abs() < 1e-12);
        assert_eq!(SpectrumModel::HarmonicOscillator.eigenvalue(5).unwrap(), 5.0);
        let weyl = SpectrumModel::WeylGeneric {
            d: 2,
            m: 1.0,
            s: 2.0,
            correction: 0.0,
        };
        assert_eq!(weyl.eigenvalue(4).unwrap(), 8.0);
        assert!(matches!(weyl.eigenvalue(0), Err(Error::Domain(_))));
    }

    #[test]
    fn weyl_constants() {
        let pi = std::f64::consts::PI;
        assert!((weyl_constant_dirichlet_laplacian(1, pi).unwrap() - 1.0).abs() < 1e-14);
        assert!((weyl_constant_dirichlet_laplacian(2, pi).unwrap() - 4.0).abs() < 1e-13);
        assert!((weyl_constant_dirichlet_laplacian(1, 2.0 * pi).unwrap() - 0.25).abs() < 1e-15);
        assert!(weyl_constant_dirichlet_laplacian(0, 1.0).is_err());
        assert!(weyl_constant_dirichlet_laplacian(1, 0.0).is_err());
    }

    #[test]
    fn sobolev_weight_examples() {
        let interval = SpectrumModel::DirichletInterval {
            length: std::f64::consts::PI,
        };
        assert!((interval.sobolev_weight(2.0, 3).unwrap() - 1.0 / 81.0).abs() < 1e-15);
        let ho = SpectrumModel::HarmonicOscillator;
        assert!((ho.sobolev_weight(2.0, 4).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        let eq = SpectrumModel::EquivalentNorm {
            base: Box::new(interval.clone()),
            norm: NormSequence::Linear { slope: 1.0 },
        };
        assert!((eq.sobolev_weight(1.0, 5).unwrap() - 1.0 / 25.0).abs() < 1e-15);
        assert_eq!(interval.sobolev_weight(0.0, 17).unwrap(), 1.0);
    }

    #[test]
    fn weyl_ratio_for_interval_is_exact() {
        let pi = std::f64::consts::PI;
        let interval = SpectrumModel::DirichletInterval { length: pi };
        let s = weyl_constant_dirichlet_laplacian(1, pi).unwrap();
        for k in [1u64, 7, 1000, 1_000_000] {
            let ratio = interval.eigenvalue(k).unwrap() / (s * (k as f64).powi(2));
            assert!((ratio - 1.0).abs() < 1e-13, "k={k}: {ratio}");
        }
    }

    #[test]
    fn weyl_correction_decays() {
        let m = SpectrumModel::WeylGeneric {
            d: 1,
            m: 1.0,
            s: 1.0,
            correction: 0.5,
        };
        for k in [1_000u64, 1_000_000] {
            let ratio = m.eigenvalue(k).unwrap() / (k as f64).powi(2);
            assert!((ratio - 1.0).abs() <= 0.5 / k as f64 + 1e-12);
        }
    }

    #[test]
    fn envelope_matches_weights() {
        let eq = SpectrumModel::EquivalentNorm {
            base: Box::new(SpectrumModel::DirichletInterval {
                length: std::f64::consts::PI,
            }),
            norm: NormSequence::Linear { slope: 2.0 },
        };
        let (k, g) = eq.weight_envelope(0.75).unwrap();
        let w = eq.sobolev_weight(0.75, 1000).unwrap();
        assert!((w / (k * 1000f64.powf(-2.0 * g)) - 1.0).abs() < 1e-12);
        let ho = SpectrumModel::HarmonicOscillator;
        let (k, g) = ho.weight_envelope(1.5).unwrap();
        assert_eq!((k, g), (1.0, 0.75));
    }

    #[test]
    fn validation_rejects_bad_models() {
        assert!(SpectrumModel::DirichletInterval { length: -1.0 }.validate().is_err());
        assert!(SpectrumModel::ExplicitSequence {
            values: vec![1.0, 0.5],
            tail_exponent: 2.0,
            tail_constant: 1.0,
            d: 1
        }
        .validate()
        .is_err());
        assert!(NoiseSpec::ExplicitQ {
            values: vec![0.0],
            tail_exponent: 0.0,
            tail_constant: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn regularity_check() {
        let ic = InitialConditionLaw {
            mean: MeanRule::SqrtLog,
            variance: VarianceRule::Zero,
        };
        assert!(ic.check_regularity(0.0, 1, 2.0, 0.0).is_ok());
        assert!(ic.check_regularity(0.5, 1, 0.0, 0.0).is_err());
        let rough = InitialConditionLaw {
            mean: MeanRule::Power {
                constant: 1.0,
                exponent: 1.0,
            },
            variance: VarianceRule::Zero,
        };
        assert!(rough.check_regularity(5.0, 1, 2.0, 0.0).is_err());
        let decaying = InitialConditionLaw {
            mean: MeanRule::Power {
                constant: 1.0,
                exponent: -0.5,
            },
            variance: VarianceRule::Constant { value: 0.0 },
        };
        assert!(decaying.check_regularity(0.1, 1, 0.0, 0.0).is_ok());
        assert!(decaying.check_regularity(-0.1, 1, 0.0, 0.0).is_err());
        assert!(InitialConditionLaw::zero().check_regularity(-3.0, 1, 0.0, 0.0).is_ok());
    }
}
