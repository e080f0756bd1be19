//! Experiment configuration shared by the command-line flags and JSON
//! config files (whose keys are the flag names in kebab-case).

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::functions::FunctionSpec;
use crate::linalg::C64;
use crate::repr::IrrepLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Estimate,
    BiasScan,
    Rep,
    VerifyCircuit,
    Moments,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Estimate => "estimate",
            Self::BiasScan => "bias-scan",
            Self::Rep => "rep",
            Self::VerifyCircuit => "verify-circuit",
            Self::Moments => "moments",
        }
    }

    /// Option keys the command reads; anything else is a config error.
    fn accepts(self, key: &str) -> bool {
        const COMMON: &[&str] = &["seed", "output", "format", "timing"];
        const SPEC: &[&str] = &["family", "alpha", "coeffs", "lambda", "i", "j", "d"];
        let own: &[&str] = match self {
            Self::Estimate => &["m", "epsilon", "delta", "haar-samples", "shot-cap"],
            Self::BiasScan => &["m", "haar-samples"],
            Self::Rep => &["epsilon", "delta"],
            Self::VerifyCircuit => &["m", "haar-samples", "samples"],
            Self::Moments => &["samples"],
        };
        COMMON.contains(&key) || SPEC.contains(&key) || own.contains(&key)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Monomial,
    Poly,
    Trace,
    Det,
    Irrep,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Every tunable, all optional; defaults are resolved per command.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// Function family.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    /// Exponent of g₁₁ (monomial family).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<u32>,
    /// Coefficients a₀,a₁,… of a polynomial in g₁₁, e.g. "1,0,0.5-2i".
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<String>,
    /// Irrep signature "λ1,λ2" (U(2) only), e.g. "1,-1".
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    /// Row index of the irrep entry.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i: Option<usize>,
    /// Column index of the irrep entry.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    /// Dimension of the unitary.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Degree truncation (estimate, bias-scan) or tensor power (verify-circuit).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Number of Haar-random unitaries.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub haar_samples: Option<usize>,
    /// Monte-Carlo sample count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Largest shot count estimate will run before giving up.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shot_cap: Option<u64>,
    /// Master seed; every random draw derives from it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Report path (stdout when absent).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Record wall-clock time per row (makes reports non-reproducible).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timing: bool,
}

impl Options {
    /// Kebab-case names of the keys that are set.
    fn present_keys(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(map)) => map.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// The options that determine the report contents (everything but where
    /// and how it is written).
    pub fn echo(&self) -> Self {
        Self {
            output: None,
            format: None,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub options: Options,
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug)]
pub struct Settings {
    pub command: Command,
    pub spec: Option<FunctionSpec>,
    pub d: usize,
    pub m: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub haar_samples: usize,
    pub samples: usize,
    pub shot_cap: u64,
    pub seed: u64,
    pub timing: bool,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_D: usize = 2;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_DELTA: f64 = 0.05;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses a config object: `{"command": "...", <option keys>}`.
    pub fn from_json_value(value: serde_json::Value) -> Result<Self, CliError> {
        let serde_json::Value::Object(mut map) = value else {
            return Err(config_err("config entry must be a JSON object"));
        };
        let command = map
            .remove("command")
            .ok_or_else(|| config_err("config entry is missing \"command\""))?;
        let command: Command =
            serde_json::from_value(command).map_err(|e| config_err(format!("bad \"command\": {e}")))?;
        let options: Options = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| config_err(format!("bad config: {e}")))?;
        Ok(Self { command, options })
    }

    /// Validates the options and fills in per-command defaults.
    pub fn resolve(&self) -> Result<Settings, CliError> {
        let o = &self.options;
        let cmd = self.command;
        for key in o.present_keys() {
            if !cmd.accepts(&key) {
                return Err(config_err(format!("option \"{key}\" does not apply to {}", cmd.name())));
            }
        }

        let family = match (o.family, cmd) {
            (Some(f), _) => Some(f),
            (None, Command::Moments) => Some(Family::Monomial),
            (None, Command::VerifyCircuit) => None,
            (None, _) => return Err(config_err(format!("{} needs --family", cmd.name()))),
        };
        let d = o.d.unwrap_or(DEFAULT_D);
        if d == 0 {
            return Err(config_err("d must be positive"));
        }
        let spec = family.map(|f| build_spec(f, d, o)).transpose()?;
        if let Some(spec) = &spec {
            spec.validate().map_err(|e| config_err(e.to_string()))?;
        }

        let epsilon = o.epsilon.unwrap_or(DEFAULT_EPSILON);
        let delta = o.delta.unwrap_or(DEFAULT_DELTA);
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(config_err(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(config_err(format!("delta must lie in (0, 1), got {delta}")));
        }
        if cmd == Command::Estimate && epsilon >= 1.0 {
            return Err(config_err(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }

        let haar_samples = o.haar_samples.unwrap_or(match cmd {
            Command::BiasScan => 10_000,
            Command::VerifyCircuit => 50,
            _ => 1,
        });
        let samples = o.samples.unwrap_or(match cmd {
            Command::VerifyCircuit => 10,
            _ => 100_000,
        });
        let min_haar = if cmd == Command::BiasScan { 2 } else { 1 };
        if haar_samples < min_haar {
            return Err(config_err(format!("haar-samples must be at least {min_haar}")));
        }
        let min_samples = if cmd == Command::Moments { 2 } else { 1 };
        if samples < min_samples {
            return Err(config_err(format!("samples must be at least {min_samples}")));
        }
        if cmd == Command::VerifyCircuit && o.m == Some(0) {
            return Err(config_err("verify-circuit needs m >= 1"));
        }
        if cmd == Command::VerifyCircuit && o.m.is_some() != o.d.is_some() {
            return Err(config_err("verify-circuit takes both --d and --m, or neither for the default suite"));
        }

        Ok(Settings {
            command: cmd,
            spec,
            d,
            m: o.m,
            epsilon,
            delta,
            haar_samples,
            samples,
            shot_cap: o.shot_cap.unwrap_or(crate::estimator::DEFAULT_SHOT_CAP),
            seed: o.seed.unwrap_or(DEFAULT_SEED),
            timing: o.timing,
        })
    }
}

fn build_spec(family: Family, d: usize, o: &Options) -> Result<FunctionSpec, CliError> {
    let reject = |keys: &[(&str, bool)]| -> Result<(), CliError> {
        match keys.iter().find(|(_, set)| *set) {
            Some((key, _)) => Err(config_err(format!("option \"{key}\" does not apply to family {family:?}"))),
            None => Ok(()),
        }
    };
    let alpha = ("alpha", o.alpha.is_some());
    let coeffs = ("coeffs", o.coeffs.is_some());
    let irrep = [("lambda", o.lambda.is_some()), ("i", o.i.is_some()), ("j", o.j.is_some())];
    Ok(match family {
        Family::Monomial => {
            reject(&[coeffs, irrep[0], irrep[1], irrep[2]])?;
            FunctionSpec::Monomial {
                d,
                alpha: o.alpha.ok_or_else(|| config_err("monomial family needs --alpha"))?,
            }
        }
        Family::Poly => {
            reject(&[alpha, irrep[0], irrep[1], irrep[2]])?;
            let text = o.coeffs.as_deref().ok_or_else(|| config_err("poly family needs --coeffs"))?;
            FunctionSpec::UnivariatePoly {
                d,
                coeffs: parse_complex_list(text)?,
            }
        }
        Family::Trace => {
            reject(&[alpha, coeffs, irrep[0], irrep[1], irrep[2]])?;
            FunctionSpec::NormalizedTrace { d }
        }
        Family::Det => {
            reject(&[alpha, coeffs, irrep[0], irrep[1], irrep[2]])?;
            FunctionSpec::Determinant { d }
        }
        Family::Irrep => {
            reject(&[alpha, coeffs])?;
            let text = o.lambda.as_deref().ok_or_else(|| config_err("irrep family needs --lambda"))?;
            let label: IrrepLabel = text
                .parse()
                .map_err(|e| config_err(format!("bad --lambda {text:?}: {e}")))?;
            FunctionSpec::IrrepEntry {
                d,
                label,
                i: o.i.unwrap_or(0),
                j: o.j.unwrap_or(0),
            }
        }
    })
}

/// Parses `"1,-0.5,2i,1.5e-3-2i"` into complex numbers.
pub fn parse_complex_list(text: &str) -> Result<Vec<C64>, CliError> {
    text.split(',').map(|t| parse_complex(t.trim())).collect()
}

/// Parses `re`, `imi`, or `re±imi` (`i` alone means `1i`).
pub fn parse_complex(text: &str) -> Result<C64, CliError> {
    let bad = || config_err(format!("cannot parse complex number {text:?}"));
    let num = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s.parse().map_err(|_| bad())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad())
        }
    };
    let imag = |s: &str| -> Result<f64, CliError> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => num(s),
        }
    };
    if text.is_empty() {
        return Err(bad());
    }
    let Some(body) = text.strip_suffix('i') else {
        return Ok(C64::new(num(text)?, 0.0));
    };
    // The split point is the last sign that does not belong to an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Ok(C64::new(num(&body[..k])?, imag(&body[k..])?)),
        None => Ok(C64::new(0.0, imag(body)?)),
    }
}
