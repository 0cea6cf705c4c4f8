//! Time-dependent Schrödinger integration under `H(t) = (1 - t/T) H_I + (t/T) H_P`.
//!
//! Each step applies the exact propagator `exp(-i H(t_mid) dt)` of the
//! midpoint Hamiltonian, obtained from its eigendecomposition. The scheme is
//! unitary per step and second order in `dt`.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock::{build_h, BasisIndexer, Operator, StateVector, C64};
use crate::linalg::hermitian_eigen;

pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_CHECKPOINTS: usize = 64;
/// Default bound on the last successive disagreement of a truncation sweep.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-4;

/// Per-step settings of one evolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionConfig {
    pub total_time: f64,
    pub steps: usize,
    pub checkpoints: usize,
    pub norm_tolerance: f64,
}

impl EvolutionConfig {
    pub fn new(total_time: f64, steps: usize) -> Result<Self> {
        let cfg = EvolutionConfig {
            total_time,
            steps,
            checkpoints: DEFAULT_CHECKPOINTS,
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_time >= 0.0 && self.total_time.is_finite()) {
            return Err(invalid("total_time", "must be finite and non-negative"));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        if !(self.norm_tolerance > 0.0) {
            return Err(invalid("norm_tolerance", "must be positive"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.steps as f64
    }
}

/// Step count for evolution time `total_time`: `steps_per_time * T`, clamped
/// to `[min_steps, max_steps]`.
pub fn default_steps(total_time: f64, steps_per_time: f64, min_steps: usize, max_steps: usize) -> usize {
    let raw = (steps_per_time * total_time).ceil();
    (raw as usize).clamp(min_steps, max_steps.max(min_steps))
}

#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub t: f64,
    pub norm: f64,
    /// Probability of every basis state, in flat-index order.
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub final_state: StateVector,
    pub checkpoints: Vec<Checkpoint>,
    /// `max |norm - 1|` over checkpoints and the final state.
    pub norm_drift: f64,
    pub config: EvolutionConfig,
}

impl EvolutionRecord {
    /// Writes `t,norm` followed by the `top` most probable basis states of
    /// each checkpoint as `state_k,p_k` column pairs.
    pub fn write_csv<W: Write>(&self, top: usize, mut out: W) -> io::Result<()> {
        let indexer = self.final_state.indexer();
        let top = top.min(indexer.dim());
        let mut header = vec!["t".to_string(), "norm".to_string()];
        for k in 1..=top {
            header.push(format!("state_{k}"));
            header.push(format!("p_{k}"));
        }
        writeln!(out, "{}", header.join(","))?;
        for cp in &self.checkpoints {
            let mut order: Vec<usize> = (0..cp.probabilities.len()).collect();
            order.sort_by(|&a, &b| cp.probabilities[b].total_cmp(&cp.probabilities[a]).then(a.cmp(&b)));
            let mut row = vec![format!("{}", cp.t), format!("{:.17e}", cp.norm)];
            for &i in order.iter().take(top) {
                row.push(tuple_label(&indexer.tuple(i)));
                row.push(format!("{:.17e}", cp.probabilities[i]));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `(n1 n2 ...)`, free of CSV separators.
pub fn tuple_label(tuple: &[usize]) -> String {
    let inner: Vec<String> = tuple.iter().map(|n| n.to_string()).collect();
    format!("({})", inner.join(" "))
}

fn check_inputs(hi: &Operator, hp: &Operator, psi0: &StateVector, tolerance: f64) -> Result<()> {
    if hi.indexer() != hp.indexer() || hi.indexer() != psi0.indexer() {
        return Err(Error::DimensionMismatch(
            "Hamiltonians and initial state act on different bases".into(),
        ));
    }
    let drift = (psi0.norm() - 1.0).abs();
    if drift > tolerance {
        return Err(Error::NormDrift { drift, tolerance });
    }
    Ok(())
}

/// Evolves `psi0` from `t = 0` to `t = T`.
pub fn evolve(
    hi: &Operator,
    hp: &Operator,
    psi0: &StateVector,
    cfg: &EvolutionConfig,
) -> Result<EvolutionRecord> {
    cfg.validate()?;
    check_inputs(hi, hp, psi0, cfg.norm_tolerance)?;
    let indexer: BasisIndexer = psi0.indexer().clone();
    let total = cfg.total_time;
    let dt = cfg.dt();
    let marks = checkpoint_steps(cfg.steps, cfg.checkpoints);

    let mut psi = psi0.amplitudes().clone();
    let mut checkpoints = Vec::with_capacity(marks.len());
    let mut norm_drift: f64 = 0.0;
    let mut record = |step: usize, psi: &nalgebra::DVector<C64>| {
        let norm = psi.norm();
        norm_drift = norm_drift.max((norm - 1.0).abs());
        checkpoints.push(Checkpoint {
            t: total * step as f64 / cfg.steps as f64,
            norm,
            probabilities: psi.iter().map(|z| z.norm_sqr()).collect(),
        });
    };
    record(0, &psi);
    let mut next_mark = 1;
    if total > 0.0 {
        for step in 0..cfg.steps {
            let s = (step as f64 + 0.5) / cfg.steps as f64;
            let h = build_h(s, hi, hp)?;
            let eig = hermitian_eigen(h.matrix())?;
            psi = eig.apply_spectrum(&psi, |l| C64::from_polar(1.0, -l * dt));
            if next_mark < marks.len() && marks[next_mark] == step + 1 {
                record(step + 1, &psi);
                next_mark += 1;
            }
        }
    } else {
        for &m in &marks[1..] {
            record(m, &psi);
        }
    }
    let final_state = StateVector::new(psi, indexer)?;
    norm_drift = norm_drift.max((final_state.norm() - 1.0).abs());
    if norm_drift > cfg.norm_tolerance {
        return Err(Error::NormDrift {
            drift: norm_drift,
            tolerance: cfg.norm_tolerance,
        });
    }
    Ok(EvolutionRecord {
        final_state,
        checkpoints,
        norm_drift,
        config: cfg.clone(),
    })
}

/// Step indices `round(j * steps / count)` for `j = 0..=count`, deduplicated.
fn checkpoint_steps(steps: usize, count: usize) -> Vec<usize> {
    let count = count.max(1);
    let mut marks: Vec<usize> = (0..=count)
        .map(|j| ((j as f64) * steps as f64 / count as f64).round() as usize)
        .collect();
    marks.dedup();
    marks
}

/// Index and probability of the most probable basis state; ties go to the
/// lowest index.
pub fn dominant_index(probabilities: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &p) in probabilities.iter().enumerate() {
        if p > best.1 {
            best = (i, p);
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtrapolationReport {
    pub levels: Vec<usize>,
    /// Probability of the finest level's dominant basis state, per level.
    pub estimates: Vec<f64>,
    /// Intercept of the least-squares line through `(dt^2, estimate)`.
    pub extrapolated: f64,
    /// `max - min` of the per-level estimates.
    pub spread: f64,
    pub tolerance: f64,
    pub converged: bool,
    /// Flat index of the finest level's dominant basis state.
    pub dominant: usize,
    pub max_norm_drift: f64,
    #[serde(skip)]
    pub final_state: Option<StateVector>,
}

/// Runs [`evolve`] at each step count and extrapolates the dominant
/// probability to `dt -> 0`.
pub fn step_extrapolate(
    hi: &Operator,
    hp: &Operator,
    psi0: &StateVector,
    total_time: f64,
    levels: &[usize],
    tolerance: f64,
) -> Result<ExtrapolationReport> {
    if levels.len() < 2 {
        return Err(invalid("levels", "at least two step counts are required"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("levels", "step counts must be strictly increasing"));
    }
    let records = levels
        .iter()
        .map(|&steps| evolve(hi, hp, psi0, &EvolutionConfig::new(total_time, steps)?))
        .collect::<Result<Vec<_>>>()?;
    let finest = records.last().expect("at least two levels");
    let final_probs = finest.final_state.probabilities();
    let (dominant, _) = dominant_index(&final_probs);
    let estimates: Vec<f64> = records
        .iter()
        .map(|r| r.final_state.amplitudes()[dominant].norm_sqr())
        .collect();
    let dt2: Vec<f64> = levels
        .iter()
        .map(|&n| (total_time / n as f64).powi(2))
        .collect();
    let extrapolated = linear_intercept(&dt2, &estimates);
    let spread = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - estimates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExtrapolationReport {
        levels: levels.to_vec(),
        estimates,
        extrapolated,
        spread,
        tolerance,
        converged: spread <= tolerance,
        dominant,
        max_norm_drift: records.iter().map(|r| r.norm_drift).fold(0.0, f64::max),
        final_state: Some(finest.final_state.clone()),
    })
}

/// Intercept of the least-squares line through `(x, y)`.
fn linear_intercept(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx == 0.0 {
        return my;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    my - (sxy / sxx) * mx
}

/// One cutoff's inputs for [`truncation_check`]: `(H_I, H_P, psi0)`.
pub type Instance = (Operator, Operator, StateVector);

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub cutoffs: Vec<usize>,
    /// Dominant probability `P(T)` at each cutoff.
    pub probabilities: Vec<f64>,
    /// Dominant basis tuple at each cutoff.
    pub dominant: Vec<Vec<usize>>,
    /// `|P(N_{k+1}) - P(N_k)|`.
    pub disagreements: Vec<f64>,
    pub tolerance: f64,
    pub converged: bool,
}

impl TruncationReport {
    pub fn max_disagreement(&self) -> f64 {
        self.disagreements.iter().copied().fold(0.0, f64::max)
    }
}

/// Re-runs one physical instance at several cutoffs. `build` produces the
/// instance for a given uniform cutoff; its errors (e.g. a coherent state
/// losing too much weight to truncation) abort the sweep.
pub fn truncation_check<F>(
    build: F,
    total_time: f64,
    steps: usize,
    cutoffs: &[usize],
    tolerance: f64,
) -> Result<TruncationReport>
where
    F: Fn(usize) -> Result<Instance>,
{
    if cutoffs.len() < 2 {
        return Err(invalid("cutoffs", "at least two cutoffs are required"));
    }
    let cfg = EvolutionConfig::new(total_time, steps)?;
    let mut probabilities = Vec::with_capacity(cutoffs.len());
    let mut dominant = Vec::with_capacity(cutoffs.len());
    for &n in cutoffs {
        let (hi, hp, psi0) = build(n)?;
        let rec = evolve(&hi, &hp, &psi0, &cfg)?;
        let (idx, p) = dominant_index(&rec.final_state.probabilities());
        probabilities.push(p);
        dominant.push(psi0.indexer().tuple(idx));
    }
    let disagreements: Vec<f64> = probabilities.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let consistent = dominant.windows(2).all(|w| w[0] == w[1]);
    let converged = consistent && disagreements.last().is_some_and(|&d| d < tolerance);
    Ok(TruncationReport {
        cutoffs: cutoffs.to_vec(),
        probabilities,
        dominant,
        disagreements,
        tolerance,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::parse;
    use crate::fock::{build_hi, build_hp, coherent_state, CoherentParams};

    fn instance(eq: &str, cutoff: usize) -> Instance {
        let ix = BasisIndexer::uniform(1, cutoff).unwrap();
        let params = CoherentParams::real(&[1.0]).unwrap();
        let hi = build_hi(&ix, &params).unwrap();
        let hp = build_hp(&ix, &parse(eq).unwrap()).unwrap();
        let psi0 = coherent_state(&ix, &params, 1e-3).unwrap().state;
        (hi, hp, psi0)
    }

    #[test]
    fn zero_time_is_identity() {
        let (hi, hp, psi0) = instance("x1 - 1", 8);
        let rec = evolve(&hi, &hp, &psi0, &EvolutionConfig::new(0.0, 10).unwrap()).unwrap();
        assert_eq!(rec.final_state.amplitudes(), psi0.amplitudes());
        assert_eq!(rec.checkpoints.len(), 11);
    }

    #[test]
    fn stationary_state_keeps_probabilities() {
        let (hi, _, _) = instance("x1 - 1", 8);
        let eig = hermitian_eigen(hi.matrix()).unwrap();
        let ground = StateVector::new(eig.vectors.column(2).into_owned(), hi.indexer().clone()).unwrap();
        let rec = evolve(&hi, &hi, &ground, &EvolutionConfig::new(5.0, 50).unwrap()).unwrap();
        let p0 = ground.probabilities();
        for cp in &rec.checkpoints {
            for (a, b) in cp.probabilities.iter().zip(&p0) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn norm_is_preserved() {
        let (hi, hp, psi0) = instance("x1 - 2", 12);
        let rec = evolve(&hi, &hp, &psi0, &EvolutionConfig::new(8.0, 200).unwrap()).unwrap();
        assert!(rec.norm_drift < 1e-9);
        assert!(rec.checkpoints.len() == 65);
        for cp in &rec.checkpoints {
            assert!((cp.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(EvolutionConfig::new(1.0, 0).is_err());
        assert!(EvolutionConfig::new(-1.0, 4).is_err());
        let (hi, hp, psi0) = instance("x1 - 1", 6);
        assert!(step_extrapolate(&hi, &hp, &psi0, 1.0, &[100], 1e-3).is_err());
        assert!(step_extrapolate(&hi, &hp, &psi0, 1.0, &[100, 100], 1e-3).is_err());
        let unnormalized = StateVector::new(psi0.amplitudes() * C64::new(2.0, 0.0), psi0.indexer().clone()).unwrap();
        assert!(matches!(
            evolve(&hi, &hp, &unnormalized, &EvolutionConfig::new(1.0, 4).unwrap()),
            Err(Error::NormDrift { .. })
        ));
    }

    #[test]
    fn stationary_extrapolation_has_no_spread() {
        let (hi, _, psi0) = instance("x1 - 1", 8);
        let eig = hermitian_eigen(hi.matrix()).unwrap();
        let ground = StateVector::new(eig.vectors.column(0).into_owned(), psi0.indexer().clone()).unwrap();
        let r = step_extrapolate(&hi, &hi, &ground, 3.0, &[10, 20, 40], 1e-6).unwrap();
        assert!(r.spread < 1e-10);
        assert!(r.converged);
    }

    #[test]
    fn intercept_of_exact_line() {
        assert!((linear_intercept(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]) - 1.0).abs() < 1e-12);
        assert!((linear_intercept(&[0.25, 1.0], &[0.9, 0.6]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_check_needs_two_cutoffs() {
        assert!(truncation_check(|n| Ok(instance("x1 - 2", n)), 1.0, 10, &[8], 1e-4).is_err());
    }

    #[test]
    fn truncation_check_propagates_coherent_weight_error() {
        let build = |n: usize| -> Result<Instance> {
            let ix = BasisIndexer::uniform(1, n)?;
            let params = CoherentParams::real(&[3.0])?;
            let psi0 = coherent_state(&ix, &params, 1e-8)?.state;
            let hi = build_hi(&ix, &params)?;
            let hp = build_hp(&ix, &parse("x1 - 2")?)?;
            Ok((hi, hp, psi0))
        };
        assert!(matches!(
            truncation_check(build, 1.0, 10, &[8, 12], 1e-4),
            Err(Error::TruncationWeight { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let (hi, hp, psi0) = instance("x1 - 2", 6);
        let rec = evolve(&hi, &hp, &psi0, &EvolutionConfig::new(1.0, 8).unwrap()).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,norm,state_1,p_1,state_2,p_2,state_3,p_3");
        assert_eq!(lines.len(), 1 + 9);
        assert!(lines.iter().all(|l| l.split(',').count() == 8));
    }
}
