//! Spectral flow of `H(s) = (1 - s) H_I + s H_P`: eigenvalues and gaps along
//! `s`, entrywise positivity of `exp(-a H)`, the Lie-Trotter product for
//! `exp(-H(s))` and the closed-form matrix element of `exp(beta a^dagger) exp(conj(beta) a)`.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock::{build_h, ladder_operators, BasisIndexer, CoherentParams, Operator, C64};
use crate::linalg::{expm_hermitian, expm_nilpotent, expm_shifted_series, hermitian_eigenvalues};

/// Gaps below this fraction of the spectral diameter count as degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-8;

/// Entries below this magnitude are reported as underflow-suspect.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Largest imaginary part tolerated in a positive semigroup.
pub const IMAG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSample {
    pub s: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `E1 - E0`.
    pub gap: f64,
    /// Smallest spacing between consecutive eigenvalues.
    pub min_spacing: f64,
    pub degenerate: bool,
}

impl SpectralSample {
    pub fn diameter(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    fn from_eigenvalues(s: f64, eigenvalues: Vec<f64>) -> Self {
        let spacings: Vec<f64> = eigenvalues.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
        let gap = spacings.first().copied().unwrap_or(f64::INFINITY);
        let min_spacing = spacings.iter().copied().fold(f64::INFINITY, f64::min);
        let mut sample = SpectralSample {
            s,
            eigenvalues,
            gap,
            min_spacing,
            degenerate: false,
        };
        sample.degenerate = sample.gap < DEGENERACY_RTOL * sample.diameter().max(1.0);
        sample
    }
}

/// 101 uniform points on `[0, 0.99]` followed by `s = 1`.
pub fn default_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=100).map(|k| 0.99 * k as f64 / 100.0).collect();
    grid.push(1.0);
    grid
}

/// Full spectrum of `H(s)` at every grid point, in grid order.
pub fn spectral_flow(hi: &Operator, hp: &Operator, grid: &[f64]) -> Result<Vec<SpectralSample>> {
    if let Some(&s) = grid.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::ReducedTimeOutOfRange(s));
    }
    grid.par_iter()
        .map(|&s| {
            let h = build_h(s, hi, hp)?;
            Ok(SpectralSample::from_eigenvalues(s, hermitian_eigenvalues(h.matrix())?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapProfile {
    pub min_gap: f64,
    pub argmin_s: f64,
    /// Smallest consecutive-level spacing over the same samples.
    pub min_spacing: f64,
    /// Largest spectral diameter over the same samples.
    pub max_diameter: f64,
}

/// Minimum gap over the samples with `s < 1`.
pub fn gap_profile(samples: &[SpectralSample]) -> Result<GapProfile> {
    let interior: Vec<&SpectralSample> = samples.iter().filter(|x| x.s < 1.0).collect();
    let first = interior
        .first()
        .ok_or_else(|| invalid("grid", "no samples with s < 1"))?;
    let mut profile = GapProfile {
        min_gap: first.gap,
        argmin_s: first.s,
        min_spacing: f64::INFINITY,
        max_diameter: 0.0,
    };
    for x in &interior {
        if x.gap < profile.min_gap {
            profile.min_gap = x.gap;
            profile.argmin_s = x.s;
        }
        profile.min_spacing = profile.min_spacing.min(x.min_spacing);
        profile.max_diameter = profile.max_diameter.max(x.diameter());
    }
    Ok(profile)
}

/// Writes `s,E0,...,E{k-1},gap` rows. `levels` caps the number of eigenvalue
/// columns (all by default).
pub fn write_flow_csv<W: Write>(
    samples: &[SpectralSample],
    levels: Option<usize>,
    mut out: W,
) -> io::Result<()> {
    let width = samples.iter().map(|x| x.eigenvalues.len()).min().unwrap_or(0);
    let k = levels.map_or(width, |l| l.min(width));
    let mut header = vec!["s".to_string()];
    header.extend((0..k).map(|i| format!("E{i}")));
    header.push("gap".into());
    writeln!(out, "{}", header.join(","))?;
    for x in samples {
        let mut row = vec![format!("{}", x.s)];
        row.extend(x.eigenvalues[..k].iter().map(|e| format!("{e:.17e}")));
        row.push(format!("{:.17e}", x.gap));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub a: f64,
    pub min_real: f64,
    pub max_imag: f64,
    /// Smallest entry counted as strictly positive.
    pub min_positive: f64,
    /// Entries with magnitude below [`UNDERFLOW_FLOOR`] that the connectivity
    /// of the operator says should be positive.
    pub underflow_suspect: usize,
    /// Entries between basis states the operator never connects; these are
    /// exactly zero for every `a`.
    pub structural_zeros: usize,
    pub negative_entries: usize,
    /// `max |series route - eigendecomposition route|` over all entries.
    pub route_deviation: f64,
    pub positive: bool,
}

/// Checks whether `exp(-a H)` has strictly positive entries in the occupation
/// basis.
///
/// The exponential is computed with [`expm_shifted_series`], which keeps tiny
/// entries at full relative precision for operators with non-negative real
/// off-diagonal part in `-H`; the eigendecomposition route is evaluated too
/// and their maximum deviation reported.
pub fn semigroup_positivity(h: &Operator, a: f64) -> Result<PositivityReport> {
    if !(a > 0.0) {
        return Err(invalid("a", "must be positive"));
    }
    let n = h.dim();
    let scaled = h.matrix().map(|z| z * -a);
    let by_eigen = expm_hermitian(h.matrix(), C64::new(-a, 0.0))?;
    let e = if h.is_diagonal() {
        by_eigen.clone()
    } else {
        expm_shifted_series(&scaled)
    };
    if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Overflow("semigroup exponential is not finite".into()));
    }
    let component = connected_components(h.matrix());
    let mut report = PositivityReport {
        a,
        min_real: f64::INFINITY,
        max_imag: 0.0,
        min_positive: f64::INFINITY,
        underflow_suspect: 0,
        structural_zeros: 0,
        negative_entries: 0,
        route_deviation: (&e - &by_eigen).iter().map(|z| z.norm()).fold(0.0, f64::max),
        positive: false,
    };
    for c in 0..n {
        for r in 0..n {
            let z = e[(r, c)];
            report.min_real = report.min_real.min(z.re);
            report.max_imag = report.max_imag.max(z.im.abs());
            if component[r] != component[c] {
                report.structural_zeros += 1;
            } else if z.re.abs() < UNDERFLOW_FLOOR {
                report.underflow_suspect += 1;
            } else if z.re < 0.0 {
                report.negative_entries += 1;
            } else {
                report.min_positive = report.min_positive.min(z.re);
            }
        }
    }
    report.positive = report.structural_zeros == 0
        && report.negative_entries == 0
        && report.max_imag < IMAG_TOLERANCE;
    Ok(report)
}

/// Connected components of the graph with an edge wherever `m` is non-zero.
fn connected_components(m: &DMatrix<C64>) -> Vec<usize> {
    let n = m.nrows();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let linked = m[(i, j)].re != 0.0
                    || m[(i, j)].im != 0.0
                    || m[(j, i)].re != 0.0
                    || m[(j, i)].im != 0.0;
                if linked && label[j] == usize::MAX {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

/// Slice count `M` and reduced time `s` of a Lie-Trotter product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterConfig {
    slices: usize,
    s: f64,
}

impl TrotterConfig {
    pub fn new(slices: usize, s: f64) -> Result<Self> {
        if slices == 0 {
            return Err(invalid("slices", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&s) {
            return Err(invalid("s", "must lie in [0, 1)"));
        }
        Ok(TrotterConfig { slices, s })
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `beta_i = (1 - s) alpha_i / M`.
    pub fn betas(&self, params: &CoherentParams) -> Vec<C64> {
        params
            .alphas()
            .iter()
            .map(|&a| a * ((1.0 - self.s) / self.slices as f64))
            .collect()
    }
}

/// One slice of the product: the diagonal factor
/// `exp(-(s/M) H_P - ((1-s)/M) sum_i (n_i + |alpha_i|^2))` times the bracket
/// `exp((1-s)/M sum_i alpha_i a_i^dagger) exp((1-s)/M sum_i conj(alpha_i) a_i)`.
pub fn trotter_factor(
    params: &CoherentParams,
    hp: &Operator,
    cfg: &TrotterConfig,
) -> Result<DMatrix<C64>> {
    let (diag, bracket) = trotter_parts(params, hp, cfg)?;
    let mut f = bracket;
    for (r, mut row) in f.row_iter_mut().enumerate() {
        row *= C64::new(diag[r], 0.0);
    }
    Ok(f)
}

/// The bracketed pair of ladder exponentials alone.
pub fn trotter_bracket(
    params: &CoherentParams,
    hp: &Operator,
    cfg: &TrotterConfig,
) -> Result<DMatrix<C64>> {
    Ok(trotter_parts(params, hp, cfg)?.1)
}

fn trotter_parts(
    params: &CoherentParams,
    hp: &Operator,
    cfg: &TrotterConfig,
) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let indexer: &BasisIndexer = hp.indexer();
    if params.modes() != indexer.modes() {
        return Err(Error::ArityMismatch {
            expected: indexer.modes(),
            got: params.modes(),
        });
    }
    if !hp.is_diagonal() {
        return Err(invalid("hp", "the product formula needs a diagonal H_P"));
    }
    let m = cfg.slices as f64;
    let s = cfg.s;
    let betas = cfg.betas(params);
    let offset: f64 = params.alphas().iter().map(|a| a.norm_sqr()).sum();
    let diag: Vec<f64> = (0..indexer.dim())
        .map(|i| {
            let occ: f64 = (0..indexer.modes()).map(|k| indexer.occupation(i, k) as f64).sum();
            (-(s / m) * hp.matrix()[(i, i)].re - ((1.0 - s) / m) * (occ + offset)).exp()
        })
        .collect();
    let n = indexer.dim();
    let mut raise = DMatrix::<C64>::zeros(n, n);
    let mut lower = DMatrix::<C64>::zeros(n, n);
    for (mode, beta) in betas.iter().enumerate() {
        let (a, adag) = ladder_operators(indexer, mode)?;
        raise += adag.matrix().map(|z| z * beta);
        lower += a.matrix().map(|z| z * beta.conj());
    }
    let bracket = expm_nilpotent(&raise)? * expm_nilpotent(&lower)?;
    Ok((diag, bracket))
}

/// `(diagonal factor * bracket)^M`, the Lie-Trotter approximant of `exp(-H(s))`.
pub fn trotter_product(
    params: &CoherentParams,
    hp: &Operator,
    cfg: &TrotterConfig,
) -> Result<Operator> {
    let factor = trotter_factor(params, hp, cfg)?;
    let mut acc = factor.clone();
    for _ in 1..cfg.slices {
        acc = &acc * &factor;
    }
    Operator::general(acc, hp.indexer().clone())
}

/// Closed form of `<m| exp(beta a^dagger) exp(conj(beta) a) |n>`:
/// `sqrt(m! n!) sum_k beta^(m-k) conj(beta)^(n-k) / (k! (m-k)! (n-k)!)`.
pub fn displacement_matrix_element(m: usize, n: usize, beta: C64) -> Result<C64> {
    let ln_fact = |k: usize| -> f64 { (2..=k).map(|i| (i as f64).ln()).sum() };
    let half = 0.5 * (ln_fact(m) + ln_fact(n));
    let mut total = C64::new(0.0, 0.0);
    for k in 0..=m.min(n) {
        let weight = (half - ln_fact(k) - ln_fact(m - k) - ln_fact(n - k)).exp();
        let powers = beta.powu((m - k) as u32) * beta.conj().powu((n - k) as u32);
        total += powers * weight;
    }
    if !total.re.is_finite() || !total.im.is_finite() {
        return Err(Error::Overflow(format!(
            "matrix element <{m}|..|{n}> at beta = {beta}"
        )));
    }
    Ok(total)
}
