mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use qad_core::evolve::{evolve, EvolutionConfig};
use qad_core::protocol::{decide, plan_repetitions, simulate_measurements, Problem};
use qad_core::spectral::{default_grid, gap_profile, spectral_flow, write_flow_csv};
use qad_core::twolevel::{
    check_condition, figure1_presets, flow_integral, log_grid, sweep_t, write_sweep_csv,
    TwoLevelProblem, DEFAULT_FLOW_POINTS, DEFAULT_SWEEP_POINTS, DEFAULT_SWEEP_RANGE,
};

use config::{FileConfig, ProblemFlags, Resolved};

/// Exit status for bad input: config, flags or equation text.
const EXIT_INPUT: u8 = 3;
/// Exit status for numerical or I/O failures after the input was accepted.
const EXIT_RUNTIME: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Runtime(String),
}

impl From<qad_core::Error> for CliError {
    fn from(e: qad_core::Error) -> Self {
        use qad_core::Error as E;
        match e {
            // Rejected from the configuration alone, before any evolution runs.
            E::Parse(_)
            | E::ArityMismatch { .. }
            | E::ModeOutOfRange { .. }
            | E::InvalidConfig { .. }
            | E::TruncationWeight { .. }
            | E::ZeroCoherentAmplitude { .. } => {
                CliError::Input(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "qad", version, about = "Adiabatic decision procedure for Diophantine equations on a truncated Fock space")]
struct Cli {
    /// TOML file with run settings; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV outputs, the verdict and the run manifest.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the doubling schedule and print a verdict as JSON.
    Decide {
        #[command(flatten)]
        problem: ProblemFlags,
    },
    /// Spectrum of H(s) on 101 points of [0, 0.99] plus s = 1.
    Spectral {
        #[command(flatten)]
        problem: ProblemFlags,
        /// Eigenvalue columns written to the CSV (all by default).
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Two-level model: final excited probability against T.
    Twolevel {
        /// Named parameter set; "fig1" runs mixing 0.75 and 0.5.
        #[arg(long)]
        preset: Option<String>,
        /// Diagonal of H_I as "eps_g,eps_e".
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<String>,
        /// Diagonal of H_P as "ups_g,ups_e".
        #[arg(long, allow_hyphen_values = true)]
        ups: Option<String>,
        /// Overlap |<e_T|g_0>|^2 between the initial ground and final excited states.
        #[arg(long)]
        mixing: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        /// Also trace the rotation angle at this T.
        #[arg(long)]
        flow_time: Option<f64>,
    },
    /// Simulated repeated measurement of the evolved state.
    Sample {
        #[command(flatten)]
        problem: ProblemFlags,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Evolution time; by default the time at which `decide` stopped.
        #[arg(long)]
        time: Option<f64>,
    },
    /// Exhaustive classical search of the box [0, bound]^k.
    Oracle {
        #[arg(long)]
        equation: Option<String>,
        #[arg(long)]
        bound: Option<u64>,
    },
}

#[derive(Serialize)]
struct Timestamps {
    started_unix: f64,
    finished_unix: f64,
}

/// Everything needed to reproduce a run. Wall-clock times live only in
/// `timestamps` so the rest of the document is deterministic.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    instance_hash: Option<String>,
    seed: Option<u64>,
    config: Value,
    outputs: Vec<String>,
    timestamps: Timestamps,
}

struct Output {
    dir: Option<PathBuf>,
    written: Vec<String>,
}

impl Output {
    fn new(dir: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Output { dir, written: Vec::new() })
    }

    /// Opens `name` under the output directory, if there is one.
    fn create(&mut self, name: &str) -> Result<Option<BufWriter<File>>, CliError> {
        let Some(dir) = &self.dir else { return Ok(None) };
        let f = File::create(dir.join(name))?;
        self.written.push(name.to_string());
        Ok(Some(BufWriter::new(f)))
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(mut w) = self.create(name)? {
            w.write_all(bytes)?;
            w.flush()?;
        }
        Ok(())
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn instance_hash(resolved: &Resolved) -> Result<String, CliError> {
    let mut h = Sha256::new();
    h.update(resolved.equation.as_bytes());
    h.update(b"\n");
    h.update(serde_json::to_vec(&resolved.problem)?);
    Ok(format!("{:x}", h.finalize()))
}

fn pretty(v: &impl Serialize) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn parse_pair(s: &str, field: &str) -> Result<[f64; 2], CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::Input(format!("{field}: expected two comma-separated numbers, got '{s}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    Ok([parts[0].parse().map_err(|_| bad())?, parts[1].parse().map_err(|_| bad())?])
}

/// The JSON printed on stdout plus the exit status it implies.
struct Outcome {
    stdout: String,
    exit: u8,
    command: &'static str,
    resolved: Option<Resolved>,
    config: Value,
}

fn run_decide(file: &FileConfig, flags: &ProblemFlags, out: &mut Output) -> Result<Outcome, CliError> {
    let (poly, resolved) = config::resolve(file, flags)?;
    let cfg = &resolved.problem;
    let verdict = decide(&poly, cfg)?;
    let text = pretty(&verdict.report(&poly, cfg))?;
    out.write_bytes("verdict.json", text.as_bytes())?;
    if let (Some(t), true) = (verdict.total_time, out.dir.is_some()) {
        // Probability traces at the stopping time, on the finer step level.
        let problem = Problem::build(&poly, cfg, cfg.cutoff)?;
        let rec = evolve(&problem.hi, &problem.hp, &problem.psi0, &EvolutionConfig::new(t, 2 * cfg.steps_for(t))?)?;
        if let Some(w) = out.create("evolution.csv")? {
            rec.write_csv(5, w)?;
        }
    }
    Ok(Outcome {
        stdout: text,
        exit: verdict.decision.exit_code() as u8,
        command: "decide",
        config: serde_json::to_value(&resolved)?,
        resolved: Some(resolved),
    })
}

fn run_spectral(
    file: &FileConfig,
    flags: &ProblemFlags,
    levels: Option<usize>,
    out: &mut Output,
) -> Result<Outcome, CliError> {
    let (poly, resolved) = config::resolve(file, flags)?;
    let problem = Problem::build(&poly, &resolved.problem, resolved.problem.cutoff)?;
    let samples = spectral_flow(&problem.hi, &problem.hp, &default_grid())?;
    let profile = gap_profile(&samples)?;
    if let Some(w) = out.create("spectral_flow.csv")? {
        write_flow_csv(&samples, levels, w)?;
    }
    let degenerate: Vec<f64> = samples.iter().filter(|x| x.degenerate).map(|x| x.s).collect();
    let summary = json!({
        "equation": resolved.equation,
        "dimension": problem.indexer.dim(),
        "grid_points": samples.len(),
        "gap_min": profile,
        "degenerate_s": degenerate,
    });
    Ok(Outcome {
        stdout: pretty(&summary)?,
        exit: 0,
        command: "spectral",
        config: serde_json::to_value(&resolved)?,
        resolved: Some(resolved),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_twolevel(
    file: &FileConfig,
    preset: Option<String>,
    eps: Option<String>,
    ups: Option<String>,
    mixing: Option<f64>,
    points: Option<usize>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    flow_time: Option<f64>,
    out: &mut Output,
) -> Result<Outcome, CliError> {
    let sec = &file.twolevel;
    let preset = preset.or_else(|| sec.preset.clone());
    let problems: Vec<(String, TwoLevelProblem)> = match preset.as_deref() {
        Some("fig1") => figure1_presets().into_iter().map(|(l, p)| (l.to_string(), p)).collect(),
        Some(other) => return Err(CliError::Input(format!("twolevel.preset: unknown preset '{other}' (known: fig1)"))),
        None => {
            let eps = match eps {
                Some(s) => parse_pair(&s, "twolevel.eps")?,
                None => sec.eps.unwrap_or([0.0, 1.0]),
            };
            let ups = match ups {
                Some(s) => parse_pair(&s, "twolevel.ups")?,
                None => sec.ups.unwrap_or([0.0, 1.0]),
            };
            let m = mixing
                .or(sec.mixing)
                .ok_or_else(|| CliError::Input("twolevel.mixing: required without a preset".into()))?;
            vec![("custom".into(), TwoLevelProblem::new((eps[0], eps[1]), (ups[0], ups[1]), m)?)]
        }
    };
    let n = points.or(sec.points).unwrap_or(DEFAULT_SWEEP_POINTS);
    let lo = t_min.or(sec.t_min).unwrap_or(DEFAULT_SWEEP_RANGE.0);
    let hi = t_max.or(sec.t_max).unwrap_or(DEFAULT_SWEEP_RANGE.1);
    let grid = log_grid(lo, hi, n)?;
    let flow_time = flow_time.or(sec.flow_time);

    let mut curves = Vec::new();
    for (label, problem) in &problems {
        let sweep = sweep_t(problem, &grid)?;
        if let Some(w) = out.create(&format!("twolevel_{label}.csv"))? {
            write_sweep_csv(&sweep, w)?;
        }
        let max_excited = sweep.iter().map(|p| p.excited_probability).fold(0.0, f64::max);
        let last = sweep.last().expect("grid is non-empty");
        let flow = match flow_time {
            Some(t) => {
                let f = flow_integral(problem, t, DEFAULT_FLOW_POINTS)?;
                if let Some(mut w) = out.create(&format!("twolevel_flow_{label}.csv"))? {
                    writeln!(w, "t,integrand,omega,omega_overlap,excited_weight,bound")?;
                    for k in 0..f.t.len() {
                        writeln!(
                            w,
                            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                            f.t[k],
                            f.integrand[k],
                            f.omega[k],
                            f.omega_overlap[k],
                            f.phi[k],
                            (0.5 * f.omega[k]).sin().powi(2)
                        )?;
                    }
                }
                Some(json!({
                    "T": f.total_time,
                    "omega_T": f.omega.last(),
                    "max_omega": f.max_omega,
                    "sign_constant": f.sign_constant,
                    "first_quadrant": f.first_quadrant,
                    "chain_violation": f.chain_violation,
                    "final_bound": f.final_bound,
                    "final_excited": f.final_excited,
                }))
            }
            None => None,
        };
        curves.push(json!({
            "label": label,
            "problem": problem,
            "condition_holds": check_condition(problem),
            "max_excited_probability": max_excited,
            "excited_probability_at_t_max": last.excited_probability,
            "exceeds_half": max_excited > 0.5,
            "flow": flow,
        }));
    }
    let config = json!({ "preset": preset, "points": n, "t_min": lo, "t_max": hi, "flow_time": flow_time });
    Ok(Outcome {
        stdout: pretty(&json!({ "curves": curves }))?,
        exit: 0,
        command: "twolevel",
        resolved: None,
        config,
    })
}

fn run_sample(
    file: &FileConfig,
    flags: &ProblemFlags,
    epsilon: Option<f64>,
    delta: Option<f64>,
    time: Option<f64>,
    out: &mut Output,
) -> Result<Outcome, CliError> {
    let (poly, resolved) = config::resolve(file, flags)?;
    let cfg = &resolved.problem;
    let eps = epsilon.or(file.sampling.epsilon).unwrap_or(0.1);
    let delta = delta.or(file.sampling.delta).unwrap_or(0.05);
    let plan = plan_repetitions(eps, delta)?;
    let t = match time.or(file.sampling.time) {
        Some(t) => t,
        None => {
            let v = decide(&poly, cfg)?;
            v.total_time
                .ok_or_else(|| CliError::Runtime("decide visited no evolution time to sample at".into()))?
        }
    };
    let problem = Problem::build(&poly, cfg, cfg.cutoff)?;
    let rec = evolve(&problem.hi, &problem.hp, &problem.psi0, &EvolutionConfig::new(t, 2 * cfg.steps_for(t))?)?;
    let outcome = simulate_measurements(&rec.final_state, &plan, cfg.seed)?;
    if let Some(mut w) = out.create("histogram.csv")? {
        writeln!(w, "state,count,frequency")?;
        for (tuple, count) in &outcome.counts {
            let label = qad_core::evolve::tuple_label(tuple);
            writeln!(w, "\"{label}\",{count},{:.17e}", *count as f64 / plan.repetitions as f64)?;
        }
    }
    let summary = json!({
        "equation": resolved.equation,
        "T": t,
        "outcome": outcome,
    });
    Ok(Outcome {
        stdout: pretty(&summary)?,
        exit: 0,
        command: "sample",
        config: json!({ "problem": &resolved, "epsilon": eps, "delta": delta, "T": t }),
        resolved: Some(resolved),
    })
}

fn run_oracle(file: &FileConfig, equation: Option<String>, bound: Option<u64>) -> Result<Outcome, CliError> {
    let text = equation
        .or_else(|| file.equation.clone())
        .ok_or_else(|| CliError::Input("equation: required".into()))?;
    let poly = qad_core::diophantine::parse(&text).map_err(|e| CliError::Input(format!("equation: {e}")))?;
    let bound = bound.or(file.cutoff.map(|c| c as u64)).unwrap_or(16);
    let witness = poly.search_box(bound)?;
    let exit = if witness.is_some() { 0 } else { 1 };
    let summary = json!({ "equation": poly.to_string(), "bound": bound, "witness": witness });
    Ok(Outcome {
        stdout: pretty(&summary)?,
        exit,
        command: "oracle",
        resolved: None,
        config: json!({ "equation": poly.to_string(), "bound": bound }),
    })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let started = unix_now();
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut out = Output::new(cli.out_dir.clone().or_else(|| file.output.dir.clone()))?;
    let outcome = match cli.command {
        Command::Decide { problem } => run_decide(&file, &problem, &mut out)?,
        Command::Spectral { problem, levels } => run_spectral(&file, &problem, levels, &mut out)?,
        Command::Twolevel { preset, eps, ups, mixing, points, t_min, t_max, flow_time } => {
            run_twolevel(&file, preset, eps, ups, mixing, points, t_min, t_max, flow_time, &mut out)?
        }
        Command::Sample { problem, epsilon, delta, time } => {
            run_sample(&file, &problem, epsilon, delta, time, &mut out)?
        }
        Command::Oracle { equation, bound } => run_oracle(&file, equation, bound)?,
    };
    print!("{}", outcome.stdout);
    if out.dir.is_some() {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: outcome.command,
            instance_hash: outcome.resolved.as_ref().map(instance_hash).transpose()?,
            seed: outcome.resolved.as_ref().map(|r| r.problem.seed),
            config: outcome.config,
            outputs: out.written.clone(),
            timestamps: Timestamps { started_unix: started, finished_unix: unix_now() },
        };
        let text = pretty(&manifest)?;
        out.write_bytes("manifest.json", text.as_bytes())?;
    }
    Ok(outcome.exit)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
