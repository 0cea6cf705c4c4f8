//! The outer decision loop: grow `T` until one occupation-number state holds
//! more than half the probability, then read the verdict off that state.
//! Also the finite-sample layer (repetition bound, seeded measurement
//! simulation) and the degeneracy guard.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diophantine::Polynomial;
use crate::error::{invalid, Error, Result};
use crate::evolve::{
    default_steps, step_extrapolate, truncation_check, ExtrapolationReport, Instance,
    TruncationReport,
};
use crate::fock::{
    add_symmetry_breaking, build_hi, build_hp, coherent_state, BasisIndexer, CoherentParams,
    Operator, StateVector, C64,
};
use crate::spectral::{default_grid, gap_profile, spectral_flow, GapProfile};

/// Relative width under which two probabilities count as tied.
pub const TIE_RTOL: f64 = 1e-12;

/// Occupation-number tuple holding the largest probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominantState {
    pub tuple: Vec<usize>,
    pub probability: f64,
    /// Another tuple lies within [`TIE_RTOL`] of the maximum.
    pub tie: bool,
}

/// Argmax of the basis probabilities. The flat index is lexicographic in the
/// tuple, so the first maximum is the lexicographically smallest one.
pub fn max_probability(psi: &StateVector) -> DominantState {
    let probs = psi.probabilities();
    let (mut best, mut best_p) = (0, f64::NEG_INFINITY);
    for (i, &p) in probs.iter().enumerate() {
        if p > best_p {
            best = i;
            best_p = p;
        }
    }
    let width = TIE_RTOL * best_p.abs().max(f64::MIN_POSITIVE);
    let tie = probs
        .iter()
        .enumerate()
        .any(|(i, &p)| i != best && (best_p - p).abs() <= width);
    DominantState {
        tuple: psi.indexer().tuple(best),
        probability: best_p,
        tie,
    }
}

/// `γ a_i† + γ* a_i` added to `H_P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryBreaking {
    pub gamma: C64,
    pub mode: usize,
}

/// Everything `decide` needs besides the polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    /// One coherent amplitude per variable.
    pub alphas: Vec<C64>,
    /// Uniform per-mode cutoff `N`.
    pub cutoff: usize,
    pub gamma: Option<SymmetryBreaking>,
    pub t0: f64,
    pub doublings: usize,
    /// Terminate once the extrapolated probability exceeds `1/2 + margin`.
    pub margin: f64,
    pub steps_per_time: f64,
    pub min_steps: usize,
    pub max_steps: usize,
    /// Maximum spread between the two step-count levels.
    pub extrapolation_tolerance: f64,
    /// Cutoffs for the truncation sweep at the terminating `T`; fewer than two
    /// disables it.
    pub truncation_cutoffs: Vec<usize>,
    pub truncation_tolerance: f64,
    /// Largest coherent weight allowed outside the box.
    pub coherent_tolerance: f64,
    /// Echoed in reports; consumed only by the sampling layer.
    pub seed: u64,
}

pub const DEFAULT_T0: f64 = 1.0;
pub const DEFAULT_DOUBLINGS: usize = 12;
pub const DEFAULT_MARGIN: f64 = 0.02;
pub const DEFAULT_STEPS_PER_TIME: f64 = 16.0;
pub const DEFAULT_MIN_STEPS: usize = 32;
pub const DEFAULT_MAX_STEPS: usize = 1 << 16;
pub const DEFAULT_EXTRAPOLATION_TOLERANCE: f64 = 5e-3;
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_COHERENT_TOLERANCE: f64 = 1e-8;
/// Smallest solution magnitude the default cutoff is meant to reach.
pub const DEFAULT_WITNESS_HINT: usize = 4;

/// `4 * max(ceil(max |alpha|^2), hint)`: the coherent tail is negligible and
/// witnesses up to `hint` sit well inside the box.
pub fn default_cutoff(alphas: &[C64], witness_hint: usize) -> usize {
    let mean = alphas.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max).ceil() as usize;
    4 * mean.max(witness_hint).max(1)
}

impl ProblemConfig {
    /// Defaults for a `modes`-variable problem with every `alpha = 1`.
    pub fn new(modes: usize) -> Self {
        Self::with_alphas(vec![C64::new(1.0, 0.0); modes])
    }

    pub fn with_alphas(alphas: Vec<C64>) -> Self {
        let cutoff = default_cutoff(&alphas, DEFAULT_WITNESS_HINT);
        ProblemConfig {
            alphas,
            cutoff,
            gamma: None,
            t0: DEFAULT_T0,
            doublings: DEFAULT_DOUBLINGS,
            margin: DEFAULT_MARGIN,
            steps_per_time: DEFAULT_STEPS_PER_TIME,
            min_steps: DEFAULT_MIN_STEPS,
            max_steps: DEFAULT_MAX_STEPS,
            extrapolation_tolerance: DEFAULT_EXTRAPOLATION_TOLERANCE,
            truncation_cutoffs: vec![cutoff, cutoff + 2],
            truncation_tolerance: DEFAULT_TRUNCATION_TOLERANCE,
            coherent_tolerance: DEFAULT_COHERENT_TOLERANCE,
            seed: 0,
        }
    }

    /// Sets the cutoff and moves the truncation sweep along with it.
    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self.truncation_cutoffs = vec![cutoff, cutoff + 2];
        self
    }

    pub fn validate(&self, arity: usize) -> Result<()> {
        if self.alphas.len() != arity {
            return Err(Error::ArityMismatch {
                expected: arity,
                got: self.alphas.len(),
            });
        }
        if self.cutoff == 0 {
            return Err(invalid("cutoff", "must be at least 1"));
        }
        if let Some(g) = self.gamma {
            if g.mode >= arity {
                return Err(Error::ModeOutOfRange {
                    mode: g.mode,
                    modes: arity,
                });
            }
            if !(g.gamma.re.is_finite() && g.gamma.im.is_finite()) {
                return Err(invalid("gamma", "must be finite"));
            }
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(invalid("t0", "must be positive and finite"));
        }
        if !(self.margin >= 0.0 && self.margin < 0.5) {
            return Err(invalid("margin", "must lie in [0, 0.5)"));
        }
        if !(self.steps_per_time > 0.0 && self.steps_per_time.is_finite()) {
            return Err(invalid("steps_per_time", "must be positive and finite"));
        }
        if self.min_steps == 0 || self.max_steps < self.min_steps {
            return Err(invalid("min_steps", "need 1 <= min_steps <= max_steps"));
        }
        if !(self.extrapolation_tolerance > 0.0) {
            return Err(invalid("extrapolation_tolerance", "must be positive"));
        }
        if !(self.truncation_tolerance > 0.0) {
            return Err(invalid("truncation_tolerance", "must be positive"));
        }
        if self.truncation_cutoffs.contains(&0) {
            return Err(invalid("truncation_cutoffs", "cutoffs must be at least 1"));
        }
        if !(self.coherent_tolerance > 0.0) {
            return Err(invalid("coherent_tolerance", "must be positive"));
        }
        Ok(())
    }

    /// Evolution times visited: `t0 * 2^j` for `j = 0..=doublings`.
    pub fn schedule(&self) -> Vec<f64> {
        (0..=self.doublings)
            .map(|j| self.t0 * 2f64.powi(j as i32))
            .collect()
    }

    pub fn steps_for(&self, total_time: f64) -> usize {
        default_steps(total_time, self.steps_per_time, self.min_steps, self.max_steps)
    }
}

/// Operators and initial state of one instance at one cutoff.
#[derive(Debug, Clone)]
pub struct Problem {
    pub indexer: BasisIndexer,
    pub params: CoherentParams,
    pub hi: Operator,
    /// `H_P`, including the symmetry-breaking term when configured.
    pub hp: Operator,
    pub psi0: StateVector,
    pub discarded_weight: f64,
    /// `D^2` on the box, flat-index order, exact.
    pub d_squared: Vec<BigInt>,
}

impl Problem {
    pub fn build(poly: &Polynomial, cfg: &ProblemConfig, cutoff: usize) -> Result<Self> {
        cfg.validate(poly.arity())?;
        let indexer = BasisIndexer::uniform(poly.arity(), cutoff)?;
        let params = CoherentParams::new(cfg.alphas.clone())?;
        let coherent = coherent_state(&indexer, &params, cfg.coherent_tolerance)?;
        let hi = build_hi(&indexer, &params)?;
        let mut hp = build_hp(&indexer, poly)?;
        if let Some(g) = cfg.gamma {
            hp = add_symmetry_breaking(&hp, g.gamma, g.mode)?;
        }
        let d_squared = indexer
            .tuples()
            .map(|t| {
                let v = poly.evaluate(&to_point(&t))?;
                Ok(&v * &v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Problem {
            indexer,
            params,
            hi,
            hp,
            psi0: coherent.state,
            discarded_weight: coherent.discarded_weight,
            d_squared,
        })
    }

    pub fn instance(&self) -> Instance {
        (self.hi.clone(), self.hp.clone(), self.psi0.clone())
    }

    /// Flat indices of the box minimizers of `D^2`.
    pub fn minimizers(&self) -> Vec<usize> {
        let min = self.d_squared.iter().min().expect("box is never empty");
        (0..self.d_squared.len())
            .filter(|&i| &self.d_squared[i] == min)
            .collect()
    }

    pub fn minimum(&self) -> &BigInt {
        self.d_squared.iter().min().expect("box is never empty")
    }
}

fn to_point(tuple: &[usize]) -> Vec<u64> {
    tuple.iter().map(|&x| x as u64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    SolutionExists,
    NoSolution,
    Inconclusive,
}

impl Decision {
    /// 0 = solution exists, 1 = no solution, 2 = inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Decision::SolutionExists => 0,
            Decision::NoSolution => 1,
            Decision::Inconclusive => 2,
        }
    }
}

/// One visited evolution time.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    #[serde(rename = "T")]
    pub total_time: f64,
    pub levels: Vec<usize>,
    pub dominant: Vec<usize>,
    pub estimates: Vec<f64>,
    pub extrapolated: f64,
    pub spread: f64,
    pub dominant_is_minimizer: bool,
    /// Largest probability held by any tuple outside the `D^2` minimizer set
    /// at the finest level.
    pub max_non_minimizer: f64,
    pub max_norm_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub gap_min: GapProfile,
    pub truncation: Option<TruncationReport>,
    pub extrapolation: Option<ExtrapolationReport>,
    pub discarded_weight: f64,
    /// Exact minimum of `D^2` over the box, as a decimal string.
    pub box_minimum: String,
    pub minimizers: Vec<Vec<usize>>,
    pub trace: Vec<TraceEntry>,
    /// Why the run is inconclusive, if it is.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub decision: Decision,
    pub witness: Option<Vec<u64>>,
    /// Extrapolated probability of the dominant tuple at the last visited `T`.
    pub probability: f64,
    #[serde(rename = "T")]
    pub total_time: Option<f64>,
    pub dominant: Option<Vec<usize>>,
    /// `D` at the dominant tuple, as a decimal string.
    pub d_value: Option<String>,
    pub diagnostics: Diagnostics,
}

/// The serialized form: verdict plus config echo and seed.
#[derive(Debug, Clone, Serialize)]
pub struct Report<'a> {
    pub equation: String,
    #[serde(flatten)]
    pub verdict: &'a Verdict,
    pub config: &'a ProblemConfig,
    pub seed: u64,
}

impl Verdict {
    pub fn report<'a>(&'a self, poly: &Polynomial, cfg: &'a ProblemConfig) -> Report<'a> {
        Report {
            equation: poly.to_string(),
            verdict: self,
            config: cfg,
            seed: cfg.seed,
        }
    }
}

/// Decides whether `D = 0` has a solution in the box by growing `T` until one
/// basis state's extrapolated probability exceeds `1/2 + margin`.
pub fn decide(poly: &Polynomial, cfg: &ProblemConfig) -> Result<Verdict> {
    let problem = Problem::build(poly, cfg, cfg.cutoff)?;
    let minimizers = problem.minimizers();
    let samples = spectral_flow(&problem.hi, &problem.hp, &default_grid())?;
    let mut diagnostics = Diagnostics {
        gap_min: gap_profile(&samples)?,
        truncation: None,
        extrapolation: None,
        discarded_weight: problem.discarded_weight,
        box_minimum: problem.minimum().to_string(),
        minimizers: minimizers.iter().map(|&i| problem.indexer.tuple(i)).collect(),
        trace: Vec::new(),
        reason: None,
    };
    let mut last_probability = 0.0;
    let mut last_time = None;

    for total_time in cfg.schedule() {
        let steps = cfg.steps_for(total_time);
        let levels = [steps, 2 * steps];
        let rep = step_extrapolate(
            &problem.hi,
            &problem.hp,
            &problem.psi0,
            total_time,
            &levels,
            cfg.extrapolation_tolerance,
        )?;
        let finest = rep
            .final_state
            .as_ref()
            .expect("step_extrapolate keeps the final state")
            .probabilities();
        let max_non_minimizer = finest
            .iter()
            .enumerate()
            .filter(|(i, _)| !minimizers.contains(i))
            .map(|(_, &p)| p)
            .fold(0.0, f64::max);
        diagnostics.trace.push(TraceEntry {
            total_time,
            levels: levels.to_vec(),
            dominant: problem.indexer.tuple(rep.dominant),
            estimates: rep.estimates.clone(),
            extrapolated: rep.extrapolated,
            spread: rep.spread,
            dominant_is_minimizer: minimizers.contains(&rep.dominant),
            max_non_minimizer,
            max_norm_drift: rep.max_norm_drift,
        });
        last_probability = rep.extrapolated;
        last_time = Some(total_time);
        let fired = rep.extrapolated > 0.5 + cfg.margin;
        let converged = rep.converged;
        let dominant = rep.dominant;
        diagnostics.extrapolation = Some(rep);
        if !fired {
            continue;
        }

        let tuple = problem.indexer.tuple(dominant);
        let d_value = poly.evaluate(&to_point(&tuple))?;
        let mut verdict = Verdict {
            decision: Decision::Inconclusive,
            witness: None,
            probability: last_probability,
            total_time: last_time,
            dominant: Some(tuple.clone()),
            d_value: Some(d_value.to_string()),
            diagnostics,
        };
        if !converged {
            verdict.diagnostics.reason = Some("step extrapolation did not converge".into());
            return Ok(verdict);
        }
        if cfg.truncation_cutoffs.len() >= 2 {
            let report = truncation_check(
                |n| Ok(Problem::build(poly, cfg, n)?.instance()),
                total_time,
                steps,
                &cfg.truncation_cutoffs,
                cfg.truncation_tolerance,
            )?;
            let ok = report.converged;
            verdict.diagnostics.truncation = Some(report);
            if !ok {
                verdict.diagnostics.reason = Some("truncation sweep did not converge".into());
                return Ok(verdict);
            }
        }
        if d_value.is_zero() {
            verdict.decision = Decision::SolutionExists;
            verdict.witness = Some(to_point(&tuple));
        } else {
            verdict.decision = Decision::NoSolution;
        }
        return Ok(verdict);
    }

    diagnostics.reason = Some("evolution-time budget exhausted".into());
    Ok(Verdict {
        decision: Decision::Inconclusive,
        witness: None,
        probability: last_probability,
        total_time: last_time,
        dominant: None,
        d_value: None,
        diagnostics,
    })
}

/// Repetition count for estimating a probability to within `epsilon` with
/// failure probability at most `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub epsilon: f64,
    pub delta: f64,
    pub repetitions: u64,
}

fn check_unit_interval(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(field, "must lie strictly between 0 and 1"))
    }
}

/// `1 / (4 eps^2 delta)`, snapped to an integer when it is one up to
/// rounding, so that e.g. `eps = 0.1, delta = 0.05` gives exactly 500.
fn weak_law_bound(epsilon: f64, delta: f64) -> f64 {
    let bound = 1.0 / (4.0 * epsilon * epsilon * delta);
    let nearest = bound.round();
    if (bound - nearest).abs() <= 1e-9 * bound.max(1.0) {
        nearest
    } else {
        bound
    }
}

impl SamplingPlan {
    /// Validates a caller-chosen `repetitions`.
    pub fn new(epsilon: f64, delta: f64, repetitions: u64) -> Result<Self> {
        check_unit_interval("epsilon", epsilon)?;
        check_unit_interval("delta", delta)?;
        if (repetitions as f64) <= weak_law_bound(epsilon, delta) {
            return Err(invalid("repetitions", "must exceed 1/(4 eps^2 delta)"));
        }
        Ok(SamplingPlan {
            epsilon,
            delta,
            repetitions,
        })
    }
}

/// Smallest integer `L` with `L > 1/(4 eps^2 delta)`.
pub fn plan_repetitions(epsilon: f64, delta: f64) -> Result<SamplingPlan> {
    check_unit_interval("epsilon", epsilon)?;
    check_unit_interval("delta", delta)?;
    let bound = weak_law_bound(epsilon, delta);
    if bound >= u64::MAX as f64 {
        return Err(Error::Overflow(format!("repetition count {bound:e}")));
    }
    Ok(SamplingPlan {
        epsilon,
        delta,
        repetitions: bound.floor() as u64 + 1,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasurementOutcome {
    pub plan: SamplingPlan,
    pub seed: u64,
    /// Observed tuples with their counts, in tuple order.
    pub counts: Vec<(Vec<usize>, u64)>,
    /// Most frequent tuple; ties go to the lexicographically smallest.
    pub dominant: Vec<usize>,
    pub frequency: f64,
    /// `frequency > 1/2`.
    pub exceeds_half: bool,
}

impl MeasurementOutcome {
    pub fn frequencies(&self) -> Vec<(Vec<usize>, f64)> {
        let l = self.plan.repetitions as f64;
        self.counts
            .iter()
            .map(|(t, c)| (t.clone(), *c as f64 / l))
            .collect()
    }

    pub fn frequency_of(&self, tuple: &[usize]) -> f64 {
        self.counts
            .iter()
            .find(|(t, _)| t == tuple)
            .map_or(0.0, |(_, c)| *c as f64 / self.plan.repetitions as f64)
    }
}

/// Draws `L` basis outcomes from `|amplitudes|^2` with a ChaCha generator
/// seeded by `seed`.
pub fn simulate_measurements(
    psi: &StateVector,
    plan: &SamplingPlan,
    seed: u64,
) -> Result<MeasurementOutcome> {
    let probs = psi.probabilities();
    let dist = WeightedIndex::new(&probs)
        .map_err(|e| invalid("state", format!("cannot sample: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = vec![0u64; probs.len()];
    for _ in 0..plan.repetitions {
        tally[dist.sample(&mut rng)] += 1;
    }
    let indexer = psi.indexer();
    let counts: Vec<(Vec<usize>, u64)> = tally
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (indexer.tuple(i), c))
        .collect();
    let (best, best_count) = tally
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
    let frequency = best_count as f64 / plan.repetitions as f64;
    Ok(MeasurementOutcome {
        plan: *plan,
        seed,
        counts,
        dominant: indexer.tuple(best),
        frequency,
        exceeds_half: frequency > 0.5,
    })
}

/// Default symmetry-breaking strengths tried by [`degeneracy_guard`].
pub const DEFAULT_GAMMA_SWEEP: [f64; 3] = [0.1, 0.03, 0.01];

#[derive(Debug, Clone, Serialize)]
pub struct GammaTrial {
    pub gamma: C64,
    pub mode: usize,
    pub decision: Decision,
    pub witness: Option<Vec<u64>>,
    pub probability: f64,
    /// `D(witness) = 0` exactly, when a witness exists.
    pub witness_valid: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyReport {
    pub box_minimum: String,
    pub minimizers: Vec<Vec<usize>>,
    pub degenerate: bool,
    pub trials: Vec<GammaTrial>,
    /// All trials agree on the decision and every witness is valid.
    pub stable: bool,
}

/// Counts the box minimizers of `D^2`. When there are several, re-runs
/// [`decide`] with `H_P + γ a† + γ* a` on mode 0 for each `γ` in `sweep`.
pub fn degeneracy_guard(
    poly: &Polynomial,
    cfg: &ProblemConfig,
    sweep: &[C64],
) -> Result<DegeneracyReport> {
    cfg.validate(poly.arity())?;
    let indexer = BasisIndexer::uniform(poly.arity(), cfg.cutoff)?;
    let mut min: Option<BigInt> = None;
    let mut minimizers = Vec::new();
    for tuple in indexer.tuples() {
        let v = poly.evaluate(&to_point(&tuple))?.abs();
        match &min {
            Some(m) if &v > m => {}
            Some(m) if &v == m => minimizers.push(tuple),
            _ => {
                min = Some(v);
                minimizers = vec![tuple];
            }
        }
    }
    let min = min.expect("box is never empty");
    let degenerate = minimizers.len() > 1;
    let mut trials = Vec::new();
    if degenerate {
        for &gamma in sweep {
            let mut perturbed = cfg.clone();
            perturbed.gamma = Some(SymmetryBreaking { gamma, mode: 0 });
            let v = decide(poly, &perturbed)?;
            let witness_valid = match &v.witness {
                Some(w) => Some(poly.evaluate(w)?.is_zero()),
                None => None,
            };
            trials.push(GammaTrial {
                gamma,
                mode: 0,
                decision: v.decision,
                witness: v.witness,
                probability: v.probability,
                witness_valid,
            });
        }
    }
    let stable = trials.windows(2).all(|w| w[0].decision == w[1].decision)
        && trials.iter().all(|t| t.witness_valid != Some(false));
    Ok(DegeneracyReport {
        box_minimum: (&min * &min).to_string(),
        minimizers,
        degenerate,
        trials,
        stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::parse;
    use nalgebra::DVector;

    fn single_mode(cutoff: usize) -> BasisIndexer {
        BasisIndexer::uniform(1, cutoff).unwrap()
    }

    #[test]
    fn max_probability_of_basis_state() {
        let psi = StateVector::basis(&single_mode(5), &[3]).unwrap();
        let d = max_probability(&psi);
        assert_eq!(d.tuple, vec![3]);
        assert_eq!(d.probability, 1.0);
        assert!(!d.tie);
    }

    #[test]
    fn max_probability_flags_symmetric_tie() {
        let ix = single_mode(3);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = DVector::from_vec(vec![
            C64::new(h, 0.0),
            C64::new(h, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]);
        let d = max_probability(&StateVector::new(amps, ix).unwrap());
        assert_eq!(d.tuple, vec![0]);
        assert!((d.probability - 0.5).abs() < 1e-15);
        assert!(d.tie);
    }

    #[test]
    fn coherent_state_of_unit_amplitude_ties_zero_and_one() {
        let ix = single_mode(30);
        let params = CoherentParams::real(&[1.0]).unwrap();
        let psi = coherent_state(&ix, &params, 1e-12).unwrap().state;
        let d = max_probability(&psi);
        assert_eq!(d.tuple, vec![0]);
        assert!((d.probability - (-1f64).exp()).abs() < 1e-12);
        assert!(d.tie);
    }

    #[test]
    fn repetition_counts() {
        assert_eq!(plan_repetitions(0.1, 0.05).unwrap().repetitions, 501);
        assert_eq!(plan_repetitions(0.5, 0.5).unwrap().repetitions, 3);
        assert_eq!(plan_repetitions(0.01, 0.01).unwrap().repetitions, 250_001);
        assert_eq!(plan_repetitions(0.3, 0.1).unwrap().repetitions, 28);
        assert!(plan_repetitions(0.0, 0.5).is_err());
        assert!(plan_repetitions(0.5, 1.0).is_err());
        assert!(SamplingPlan::new(0.1, 0.05, 500).is_err());
        assert!(SamplingPlan::new(0.1, 0.05, 501).is_ok());
    }

    #[test]
    fn measuring_basis_state_is_deterministic() {
        let psi = StateVector::basis(&single_mode(5), &[3]).unwrap();
        let plan = plan_repetitions(0.1, 0.05).unwrap();
        let out = simulate_measurements(&psi, &plan, 7).unwrap();
        assert_eq!(out.counts, vec![(vec![3], 501)]);
        assert_eq!(out.frequency_of(&[3]), 1.0);
        assert!(out.exceeds_half);
    }

    #[test]
    fn sampling_is_seeded_and_counts_sum_to_l() {
        let ix = single_mode(8);
        let params = CoherentParams::real(&[1.2]).unwrap();
        let psi = coherent_state(&ix, &params, 1e-2).unwrap().state;
        let plan = plan_repetitions(0.05, 0.1).unwrap();
        let a = simulate_measurements(&psi, &plan, 42).unwrap();
        let b = simulate_measurements(&psi, &plan, 42).unwrap();
        assert_eq!(a.counts, b.counts);
        let total: u64 = a.counts.iter().map(|(_, c)| c).sum();
        assert_eq!(total, plan.repetitions);
        let fsum: f64 = a.frequencies().iter().map(|(_, f)| f).sum();
        assert!((fsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let cfg = ProblemConfig::new(1);
        assert_eq!(cfg.cutoff, 16);
        assert!(cfg.validate(1).is_ok());
        assert!(matches!(cfg.validate(2), Err(Error::ArityMismatch { .. })));
        let mut bad = cfg.clone();
        bad.margin = 0.6;
        assert!(bad.validate(1).is_err());
        let mut bad = cfg.clone();
        bad.gamma = Some(SymmetryBreaking {
            gamma: C64::new(0.1, 0.0),
            mode: 3,
        });
        assert!(matches!(bad.validate(1), Err(Error::ModeOutOfRange { .. })));
        assert_eq!(cfg.schedule().len(), 13);
        assert_eq!(cfg.schedule()[12], 4096.0);
    }

    #[test]
    fn dominance_violation_is_rejected() {
        // alpha = 0.2 puts more than half the weight on the vacuum.
        let p = parse("x1 - 1").unwrap();
        let cfg = ProblemConfig::with_alphas(vec![C64::new(0.2, 0.0)]);
        assert!(decide(&p, &cfg).is_err());
    }

    #[test]
    fn guard_is_silent_on_unique_minimum() {
        let p = parse("x1 - 3").unwrap();
        let cfg = ProblemConfig::new(1).with_cutoff(8);
        let r = degeneracy_guard(&p, &cfg, &[C64::new(0.1, 0.0)]).unwrap();
        assert!(!r.degenerate);
        assert!(r.trials.is_empty());
        assert_eq!(r.minimizers, vec![vec![3]]);
        assert_eq!(r.box_minimum, "0");
    }

    #[test]
    fn decides_small_solvable_instance() {
        let p = parse("x1 - 2").unwrap();
        let cfg = ProblemConfig::new(1).with_cutoff(12);
        let v = decide(&p, &cfg).unwrap();
        assert_eq!(v.decision, Decision::SolutionExists);
        assert_eq!(v.witness, Some(vec![2]));
        assert!(v.probability > 0.52);
        assert!(v.diagnostics.truncation.as_ref().unwrap().converged);
        assert!(v.diagnostics.extrapolation.as_ref().unwrap().converged);
    }
}
