//! Benchmark targets: closed-form test functions and ODE quantities of
//! interest, each paired with its input measure and default experiment
//! settings.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::measures::{Law, Measure};
use crate::ode::{integrate_ode, DuffingModel, HarmonicModel, OdeOptions, SurfaceModel};
use crate::points::Points;

/// Names accepted by [`TargetFunction::from_name`] and listed by the CLI.
pub const REGISTERED_TARGETS: [&str; 11] = [
    "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "surface", "duffing", "harmonic",
];

/// Tolerances for ODE targets; tighter than the integrator defaults so the
/// QoI error sits well below any approximation error being measured.
pub const TARGET_ODE_OPTIONS: OdeOptions = OdeOptions {
    rel_tol: 1e-10,
    abs_tol: 1e-12,
    max_steps: 1_000_000,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    /// `sin(2 x₂)`, the f8 formula read literally.
    F8Literal,
    Surface,
    Duffing,
    Harmonic,
}

impl TargetKind {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "f1" => Self::F1,
            "f2" => Self::F2,
            "f3" => Self::F3,
            "f4" => Self::F4,
            "f5" => Self::F5,
            "f6" => Self::F6,
            "f7" => Self::F7,
            "f8" => Self::F8,
            "f8_literal" => Self::F8Literal,
            "surface" => Self::Surface,
            "duffing" => Self::Duffing,
            "harmonic" => Self::Harmonic,
            other => return Err(Error::UnknownTarget(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::F4 => "f4",
            Self::F5 => "f5",
            Self::F6 => "f6",
            Self::F7 => "f7",
            Self::F8 => "f8",
            Self::F8Literal => "f8_literal",
            Self::Surface => "surface",
            Self::Duffing => "duffing",
            Self::Harmonic => "harmonic",
        }
    }

    pub fn default_dim(&self) -> usize {
        match self {
            Self::F1 | Self::F7 => 1,
            Self::F8 | Self::F8Literal | Self::Surface => 2,
            Self::F2 | Self::F3 | Self::Duffing => 3,
            Self::F4 | Self::F5 => 4,
            Self::F6 => 5,
            Self::Harmonic => 6,
        }
    }

    /// Whether the input dimension may be changed from the default.
    pub fn variable_dim(&self) -> bool {
        matches!(self, Self::F3 | Self::F4 | Self::F5 | Self::F6)
    }

    pub fn description(&self) -> &'static str {
        match self {
            Self::F1 => "exp(x)",
            Self::F2 => "sin(x1) + 7 sin^2(x2) + 0.1 x3^4 x1",
            Self::F3 => "(1/10) sum_j exp(-x_j^2) / (1 + x_{j+1}^2), cyclic",
            Self::F4 => "sum_i 0.3 + sin(16 x_i/15 - 0.7) + sin^2(16 x_i/15 - 0.7)",
            Self::F5 => "sum_i exp(-|x_i|)",
            Self::F6 => "(sum_i x_i)^2",
            Self::F7 => "sin(x)",
            Self::F8 => "sin(x1 + x2)",
            Self::F8Literal => "sin(2 x2)",
            Self::Surface => "surface coverage rho(4)",
            Self::Duffing => "Duffing oscillator rho(4)",
            Self::Harmonic => "forced damped oscillator u(20)",
        }
    }
}

/// A target function with its input measure and experiment defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFunction {
    kind: TargetKind,
    dim: usize,
    measure: Measure,
    /// Drop the wrap-around term of f3 instead of indexing cyclically.
    pub f3_truncate: bool,
    pub ode_options: OdeOptions,
}

impl TargetFunction {
    pub fn from_name(name: &str) -> Result<Self> {
        Self::new(TargetKind::from_name(name)?)
    }

    pub fn new(kind: TargetKind) -> Result<Self> {
        Self::with_dim(kind, kind.default_dim())
    }

    pub fn with_dim(kind: TargetKind, dim: usize) -> Result<Self> {
        if dim != kind.default_dim() && !kind.variable_dim() {
            return Err(Error::InvalidArgument(format!(
                "target {} has fixed dimension {}",
                kind.name(),
                kind.default_dim()
            )));
        }
        if dim == 0 || (kind == TargetKind::F3 && dim < 2) {
            return Err(Error::InvalidArgument(format!("dimension {dim} too small for {}", kind.name())));
        }
        let measure = default_measure(kind, dim)?;
        Ok(Self {
            kind,
            dim,
            measure,
            f3_truncate: false,
            ode_options: TARGET_ODE_OPTIONS,
        })
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    /// Default feature-frequency standard deviations.
    pub fn default_sigma_w(&self) -> Vec<f64> {
        match self.kind {
            TargetKind::F8 | TargetKind::F8Literal => vec![1e-3; self.dim],
            TargetKind::Harmonic => vec![1.0, 1.0, 1e-3, 1e-3, 1e-3, 1.0],
            _ => vec![1.0; self.dim],
        }
    }

    pub fn default_n_features(&self) -> usize {
        match self.kind {
            TargetKind::F1 | TargetKind::F7 => 1000,
            TargetKind::Surface => 2000,
            TargetKind::F8 | TargetKind::F8Literal => 3000,
            TargetKind::F2 | TargetKind::Duffing => 4000,
            TargetKind::F3 | TargetKind::F4 | TargetKind::F5 => 5000,
            TargetKind::F6 => 6000,
            TargetKind::Harmonic => 8000,
        }
    }

    /// Default MH starting point: the origin for Gaussian inputs, ones for
    /// exponential inputs, with point-mass coordinates at their value.
    pub fn default_x0(&self) -> Vec<f64> {
        self.measure
            .laws()
            .iter()
            .map(|law| match law {
                Law::Gaussian { .. } => 0.0,
                Law::Exponential { .. } => 1.0,
                Law::Fixed { value } => *value,
            })
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let v = match self.kind {
            TargetKind::F1 => x[0].exp(),
            TargetKind::F2 => x[0].sin() + 7.0 * x[1].sin().powi(2) + 0.1 * x[2].powi(4) * x[0],
            TargetKind::F3 => {
                let d = x.len();
                let terms = if self.f3_truncate { d - 1 } else { d };
                (0..terms)
                    .map(|j| (-x[j] * x[j]).exp() / (1.0 + x[(j + 1) % d].powi(2)))
                    .sum::<f64>()
                    / 10.0
            }
            TargetKind::F4 => x
                .iter()
                .map(|&xi| {
                    let t = (16.0 * xi / 15.0 - 0.7).sin();
                    0.3 + t + t * t
                })
                .sum(),
            TargetKind::F5 => x.iter().map(|xi| (-xi.abs()).exp()).sum(),
            TargetKind::F6 => x.iter().sum::<f64>().powi(2),
            TargetKind::F7 => x[0].sin(),
            TargetKind::F8 => (x[0] + x[1]).sin(),
            TargetKind::F8Literal => (2.0 * x[1]).sin(),
            TargetKind::Surface => integrate_ode(&SurfaceModel::from_xi(x), &self.ode_options)?,
            TargetKind::Duffing => integrate_ode(&DuffingModel::from_xi(x), &self.ode_options)?,
            TargetKind::Harmonic => integrate_ode(&HarmonicModel::from_xi(x), &self.ode_options)?,
        };
        Ok(v)
    }

    pub fn eval_many(&self, xs: &Points) -> Result<Vec<f64>> {
        check_dim(self.dim, xs.dim())?;
        xs.iter().map(|x| self.eval(x)).collect()
    }
}

fn default_measure(kind: TargetKind, dim: usize) -> Result<Measure> {
    match kind {
        TargetKind::F7 => Measure::exponential(1, 0.0, 1.0),
        TargetKind::F8 | TargetKind::F8Literal => Measure::exponential(2, 0.0, 1e-3),
        TargetKind::Harmonic => Measure::new(vec![
            Law::Fixed { value: 0.1 },
            Law::Fixed { value: 0.04 },
            Law::Exponential { shift: 0.08, rate: 1.0 },
            Law::Exponential { shift: 0.8, rate: 1.0 },
            Law::Exponential { shift: 0.45, rate: 1.0 },
            Law::Gaussian {
                mean: 0.0,
                sigma: 0.5f64.sqrt(),
            },
        ]),
        _ => Measure::isotropic_gaussian(dim, 1.0),
    }
}
