use clap::ValueEnum;
use lrl_core::radial_solver::{Grid, Scheme};
use lrl_core::SpinValue;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Algebra,
    Commutators,
    Casimir,
    Multipole,
    Reduction,
}

impl Suite {
    pub fn tag(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Commutators => "commutators",
            Suite::Casimir => "casimir",
            Suite::Multipole => "multipole",
            Suite::Reduction => "reduction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Central,
    Numerov,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Central => Scheme::Central,
            SchemeArg::Numerov => Scheme::Numerov,
        }
    }
}

/// Validated parameters shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spin: SpinValue,
    pub j: Option<f64>,
    pub alpha: f64,
    pub mass: f64,
    pub levels: usize,
    pub points: usize,
    pub r_max: Option<f64>,
    pub format: Format,
    pub seed: u64,
    pub suite: Option<Suite>,
    pub scheme: Scheme,
    pub n: u32,
}

impl RunConfig {
    pub fn validate(self) -> Result<Self, CliError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(CliError::invalid(format!("--mass must be positive, got {}", self.mass)));
        }
        if !self.alpha.is_finite() {
            return Err(CliError::invalid(format!("--alpha must be finite, got {}", self.alpha)));
        }
        if self.levels == 0 {
            return Err(CliError::invalid("--levels must be at least 1"));
        }
        if let Some(j) = self.j {
            let tj = 2.0 * j;
            if !(j >= 0.0 && tj.fract() == 0.0) {
                return Err(CliError::invalid(format!("j must be a non-negative multiple of 1/2, got {j}")));
            }
            if (tj as u32 + self.spin.twice_s) % 2 != 0 {
                return Err(CliError::invalid(format!(
                    "j = {j} is not admissible for s = {} (j - s must be an integer)",
                    self.spin
                )));
            }
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::invalid(format!("--r-max must be positive, got {r}")));
            }
        }
        Grid::new(1.0, self.points).map_err(CliError::from)?;
        Ok(self)
    }

    pub fn require_j(&self) -> Result<f64, CliError> {
        self.j.ok_or_else(|| CliError::invalid("this command needs --j (or --twice-j, or --l for spin 0)"))
    }
}

/// Parses `j` written as a decimal (`1.5`) or a fraction (`3/2`).
pub fn parse_j(text: &str) -> Result<f64, String> {
    let value = match text.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in {text:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in {text:?}"))?;
            if b == 0.0 {
                return Err(format!("zero denominator in {text:?}"));
            }
            a / b
        }
        None => text.trim().parse().map_err(|_| format!("cannot read {text:?} as a number"))?,
    };
    if (2.0 * value).fract() != 0.0 {
        return Err(format!("{text} is not a multiple of 1/2"));
    }
    Ok(value)
}
