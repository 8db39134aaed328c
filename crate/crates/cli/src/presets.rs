use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use smallball::asymptotics::sqrt_log_mean_problem;
use smallball::laplace::ProblemSpec;
use smallball::spectrum::SpectrumModel;

use crate::config::TableConfig;

/// Named problems with known closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Heat equation and cylindrical noise on `[0, π]`, `T = 1`.
    ExamplePe,
    /// Solution driven by the Hermite operator, `T = 1`.
    HarmonicOscillator,
    /// Two independent standard Brownian motions, `T = 1`.
    FiniteBm,
    /// Heat equation in `L_2` started from means `√(ln k)`.
    SqrtLogMean,
}

fn interval() -> SpectrumModel {
    SpectrumModel::DirichletInterval { length: PI }
}

impl Preset {
    pub fn problems(self) -> Vec<ProblemSpec> {
        match self {
            Preset::ExamplePe => vec![
                ProblemSpec::noise(interval(), 1.0, 1.0),
                ProblemSpec::solution(interval(), 1.0, 1.0, 1.0),
            ],
            Preset::HarmonicOscillator => {
                vec![ProblemSpec::solution(SpectrumModel::HarmonicOscillator, 2.0, 1.0, 1.0)]
            }
            Preset::FiniteBm => vec![ProblemSpec::finite_dim(vec![0.0; 2], vec![1.0; 2], 1.0)],
            Preset::SqrtLogMean => vec![sqrt_log_mean_problem(1.0)],
        }
    }

    pub fn gammas(self) -> Vec<f64> {
        match self {
            Preset::ExamplePe => vec![0.0, 0.6, 1.0, 2.0],
            Preset::HarmonicOscillator => vec![1.5, 2.0, 3.0],
            Preset::FiniteBm | Preset::SqrtLogMean => Vec::new(),
        }
    }

    pub fn table(self) -> Option<TableConfig> {
        let grid = |lo: i32, hi: i32| (lo..=hi).map(|k| k as f64 / 20.0).collect();
        match self {
            Preset::ExamplePe | Preset::SqrtLogMean => Some(TableConfig {
                d: 1,
                m: 1.0,
                r: 1.0,
                gammas: grid(-10, 40),
            }),
            Preset::HarmonicOscillator => Some(TableConfig {
                d: 2,
                m: 1.0,
                r: 1.0,
                gammas: grid(-10, 60),
            }),
            Preset::FiniteBm => None,
        }
    }
}
