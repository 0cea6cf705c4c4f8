//! Run configuration: an optional TOML file, overridden field by field by
//! command-line flags.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qad_core::protocol::{ProblemConfig, SymmetryBreaking};

use crate::CliError;

/// A number in the config file: either a TOML float/integer or a string such
/// as `"1+0.5i"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Text(String),
}

impl Scalar {
    fn to_complex(&self, field: &str) -> Result<Complex64, CliError> {
        match self {
            Scalar::Real(x) => Ok(Complex64::new(*x, 0.0)),
            Scalar::Text(s) => parse_complex(s, field),
        }
    }
}

pub fn parse_complex(s: &str, field: &str) -> Result<Complex64, CliError> {
    s.trim()
        .replace(' ', "")
        .parse::<Complex64>()
        .map_err(|_| CliError::Input(format!("{field}: cannot read '{s}' as a complex number")))
}

/// `"1, 0.5+0.5i"` into amplitudes.
pub fn parse_complex_list(s: &str, field: &str) -> Result<Vec<Complex64>, CliError> {
    s.split(',')
        .enumerate()
        .map(|(i, part)| parse_complex(part, &format!("{field}[{i}]")))
        .collect()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub equation: Option<String>,
    pub alpha: Option<Vec<Scalar>>,
    pub cutoff: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub gamma: GammaSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub steps: StepsSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub twolevel: TwoLevelSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    pub value: Option<Scalar>,
    /// 1-based variable index.
    pub mode: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub t0: Option<f64>,
    pub doublings: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepsSection {
    pub per_time: Option<f64>,
    pub min: Option<usize>,
    pub max: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub margin: Option<f64>,
    pub extrapolation: Option<f64>,
    pub truncation: Option<f64>,
    pub coherent: Option<f64>,
    pub truncation_cutoffs: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// Evolution time of the sampled state; defaults to the decide run's.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelSection {
    pub preset: Option<String>,
    pub eps: Option<[f64; 2]>,
    pub ups: Option<[f64; 2]>,
    pub mixing: Option<f64>,
    pub points: Option<usize>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub flow_time: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }
}

/// Flags shared by every command that builds a problem instance.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ProblemFlags {
    /// Polynomial D, e.g. "(x1+1)^2 - 2*(x2+1)^2".
    #[arg(long)]
    pub equation: Option<String>,
    /// Comma-separated coherent amplitudes, one per variable, e.g. "1,0.5+0.5i".
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Per-mode occupation cutoff N.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Symmetry-breaking strength, real or complex, added on --gamma-mode.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    /// 1-based variable carrying the symmetry-breaking term.
    #[arg(long)]
    pub gamma_mode: Option<usize>,
    /// First evolution time of the doubling schedule.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Number of times T is doubled before giving up.
    #[arg(long)]
    pub doublings: Option<usize>,
    /// Halt once a state's probability exceeds 1/2 + margin.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Seed for simulated measurements.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest coherent weight allowed outside the truncated box.
    #[arg(long)]
    pub coherent_tolerance: Option<f64>,
}

/// Fully resolved problem: equation text plus core configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub equation: String,
    pub problem: ProblemConfig,
}

pub fn resolve(file: &FileConfig, flags: &ProblemFlags) -> Result<(qad_core::diophantine::Polynomial, Resolved), CliError> {
    let text = flags
        .equation
        .clone()
        .or_else(|| file.equation.clone())
        .ok_or_else(|| CliError::Input("equation: required (flag --equation or config key 'equation')".into()))?;
    let poly = qad_core::diophantine::parse(&text).map_err(|e| CliError::Input(format!("equation: {e}")))?;
    let k = poly.arity();

    let alphas = match (&flags.alpha, &file.alpha) {
        (Some(s), _) => parse_complex_list(s, "alpha")?,
        (None, Some(list)) => list
            .iter()
            .enumerate()
            .map(|(i, x)| x.to_complex(&format!("alpha[{i}]")))
            .collect::<Result<_, _>>()?,
        (None, None) => vec![Complex64::new(1.0, 0.0); k],
    };
    // A single amplitude is shared by every mode.
    let alphas = if alphas.len() == 1 && k > 1 { vec![alphas[0]; k] } else { alphas };

    let mut cfg = ProblemConfig::with_alphas(alphas);
    if let Some(n) = flags.cutoff.or(file.cutoff) {
        cfg = cfg.with_cutoff(n);
    }
    let gamma = match (&flags.gamma, &file.gamma.value) {
        (Some(s), _) => Some(parse_complex(s, "gamma")?),
        (None, Some(v)) => Some(v.to_complex("gamma.value")?),
        (None, None) => None,
    };
    if let Some(g) = gamma {
        let mode = flags.gamma_mode.or(file.gamma.mode).unwrap_or(1);
        if mode == 0 {
            return Err(CliError::Input("gamma.mode: variables are numbered from 1".into()));
        }
        if g.norm() > 0.0 {
            cfg.gamma = Some(SymmetryBreaking { gamma: g, mode: mode - 1 });
        }
    }
    if let Some(v) = flags.t0.or(file.schedule.t0) {
        cfg.t0 = v;
    }
    if let Some(v) = flags.doublings.or(file.schedule.doublings) {
        cfg.doublings = v;
    }
    if let Some(v) = flags.margin.or(file.tolerances.margin) {
        cfg.margin = v;
    }
    if let Some(v) = flags.seed.or(file.seed) {
        cfg.seed = v;
    }
    if let Some(v) = flags.coherent_tolerance.or(file.tolerances.coherent) {
        cfg.coherent_tolerance = v;
    }
    if let Some(v) = file.tolerances.extrapolation {
        cfg.extrapolation_tolerance = v;
    }
    if let Some(v) = file.tolerances.truncation {
        cfg.truncation_tolerance = v;
    }
    if let Some(v) = &file.tolerances.truncation_cutoffs {
        cfg.truncation_cutoffs = v.clone();
    }
    if let Some(v) = file.steps.per_time {
        cfg.steps_per_time = v;
    }
    if let Some(v) = file.steps.min {
        cfg.min_steps = v;
    }
    if let Some(v) = file.steps.max {
        cfg.max_steps = v;
    }
    cfg.validate(k).map_err(CliError::from)?;
    Ok((
        poly.clone(),
        Resolved {
            equation: poly.to_string(),
            problem: cfg,
        },
    ))
}
