//! Truncated occupation-number spaces and the operators built on them.
//!
//! Every mode `i` keeps the states `|0>..|N_i>`; the product basis is flattened
//! in lexicographic order of the occupation tuple (first mode most significant),
//! so flat-index order and tuple order coincide.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};

use crate::diophantine::Polynomial;
use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Largest product-basis dimension accepted by [`BasisIndexer::new`].
pub const MAX_DIMENSION: usize = 4096;

/// Default bound on the coherent-state weight discarded by truncation.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-8;

const HERMITIAN_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisIndexer {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl BasisIndexer {
    pub fn new(cutoffs: Vec<usize>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(invalid("cutoff", "at least one mode is required"));
        }
        let mut strides = vec![1; cutoffs.len()];
        let mut dim: usize = 1;
        for i in (0..cutoffs.len()).rev() {
            strides[i] = dim;
            dim = dim
                .checked_mul(cutoffs[i] + 1)
                .filter(|&d| d <= MAX_DIMENSION)
                .ok_or_else(|| {
                    invalid(
                        "cutoff",
                        format!("basis dimension exceeds {MAX_DIMENSION}"),
                    )
                })?;
        }
        Ok(BasisIndexer {
            cutoffs,
            strides,
            dim,
        })
    }

    pub fn uniform(modes: usize, cutoff: usize) -> Result<Self> {
        BasisIndexer::new(vec![cutoff; modes])
    }

    pub fn modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self, tuple: &[usize]) -> Result<usize> {
        if tuple.len() != self.modes() {
            return Err(Error::ArityMismatch {
                expected: self.modes(),
                got: tuple.len(),
            });
        }
        let mut idx = 0;
        for ((&n, &cut), &stride) in tuple.iter().zip(&self.cutoffs).zip(&self.strides) {
            if n > cut {
                return Err(invalid(
                    "tuple",
                    format!("occupation {n} exceeds cutoff {cut}"),
                ));
            }
            idx += n * stride;
        }
        Ok(idx)
    }

    pub fn tuple(&self, index: usize) -> Vec<usize> {
        assert!(index < self.dim, "basis index {index} out of range");
        self.strides
            .iter()
            .zip(&self.cutoffs)
            .map(|(&stride, &cut)| (index / stride) % (cut + 1))
            .collect()
    }

    /// Occupation of `mode` in the basis state with flat index `index`.
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % (self.cutoffs[mode] + 1)
    }

    pub fn tuples(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.dim).map(move |i| self.tuple(i))
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes() {
            return Err(Error::ModeOutOfRange {
                mode,
                modes: self.modes(),
            });
        }
        Ok(())
    }
}

/// A dense operator on the product basis of an indexer.
#[derive(Debug, Clone)]
pub struct Operator {
    matrix: DMatrix<C64>,
    indexer: BasisIndexer,
    hermitian: bool,
}

impl Operator {
    /// Wraps a matrix without any Hermiticity claim.
    pub fn general(matrix: DMatrix<C64>, indexer: BasisIndexer) -> Result<Self> {
        if matrix.nrows() != indexer.dim() || matrix.ncols() != indexer.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a basis of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                indexer.dim()
            )));
        }
        Ok(Operator {
            matrix,
            indexer,
            hermitian: false,
        })
    }

    /// Wraps a matrix and verifies it is Hermitian to relative tolerance 1e-12.
    pub fn hermitian(matrix: DMatrix<C64>, indexer: BasisIndexer) -> Result<Self> {
        let mut op = Operator::general(matrix, indexer)?;
        let defect = op.hermiticity_defect();
        if defect > HERMITIAN_RTOL * op.max_abs().max(f64::MIN_POSITIVE) {
            return Err(invalid(
                "operator",
                format!("not Hermitian: max |A - A^dagger| = {defect:e}"),
            ));
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn identity(indexer: &BasisIndexer) -> Self {
        Operator {
            matrix: DMatrix::identity(indexer.dim(), indexer.dim()),
            indexer: indexer.clone(),
            hermitian: true,
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn indexer(&self) -> &BasisIndexer {
        &self.indexer
    }

    pub fn dim(&self) -> usize {
        self.indexer.dim()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise `max |A - A^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in j..n {
                let d = self.matrix[(i, j)] - self.matrix[(j, i)].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.matrix[(i, j)].is_zero()))
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// True when every entry has exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    /// `self * other - other * self`.
    pub fn commutator(&self, other: &Operator) -> DMatrix<C64> {
        &self.matrix * &other.matrix - &other.matrix * &self.matrix
    }

    pub fn apply(&self, state: &StateVector) -> DVector<C64> {
        &self.matrix * state.amplitudes()
    }

    /// `a * self + b * other`; Hermitian when both are and the weights are real.
    pub fn combine(&self, a: f64, other: &Operator, b: f64) -> Result<Operator> {
        if self.indexer != other.indexer {
            return Err(Error::DimensionMismatch(
                "operators act on different bases".into(),
            ));
        }
        let matrix = self.matrix.map(|z| z * a) + other.matrix.map(|z| z * b);
        Ok(Operator {
            matrix,
            indexer: self.indexer.clone(),
            hermitian: self.hermitian && other.hermitian,
        })
    }

    /// Writes the non-zero entries as `row col re im` lines (1-based) under a
    /// Matrix Market coordinate header.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.dim();
        let entries: Vec<(usize, usize, C64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, self.matrix[(i, j)]))
            .filter(|(_, _, z)| !z.is_zero())
            .collect();
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{n} {n} {}", entries.len())?;
        for (i, j, z) in entries {
            writeln!(out, "{} {} {:e} {:e}", i + 1, j + 1, z.re, z.im)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StateVector {
    amps: DVector<C64>,
    indexer: BasisIndexer,
}

impl StateVector {
    pub fn new(amps: DVector<C64>, indexer: BasisIndexer) -> Result<Self> {
        if amps.len() != indexer.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes on a basis of dimension {}",
                amps.len(),
                indexer.dim()
            )));
        }
        Ok(StateVector { amps, indexer })
    }

    pub fn basis(indexer: &BasisIndexer, tuple: &[usize]) -> Result<Self> {
        let mut amps = DVector::zeros(indexer.dim());
        amps[indexer.index(tuple)?] = C64::new(1.0, 0.0);
        Ok(StateVector {
            amps,
            indexer: indexer.clone(),
        })
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn indexer(&self) -> &BasisIndexer {
        &self.indexer
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        StateVector {
            amps: self.amps.map(|z| z / n),
            indexer: self.indexer.clone(),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn probability(&self, tuple: &[usize]) -> Result<f64> {
        Ok(self.amps[self.indexer.index(tuple)?].norm_sqr())
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }
}

/// Coherent amplitudes `alpha_i`, one per mode, all non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentParams {
    alphas: Vec<C64>,
}

impl CoherentParams {
    pub fn new(alphas: Vec<C64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(invalid("alpha", "at least one mode is required"));
        }
        if let Some(mode) = alphas.iter().position(|a| a.is_zero()) {
            return Err(Error::ZeroCoherentAmplitude { mode });
        }
        if alphas.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(invalid("alpha", "amplitudes must be finite"));
        }
        Ok(CoherentParams { alphas })
    }

    pub fn uniform(modes: usize, alpha: C64) -> Result<Self> {
        CoherentParams::new(vec![alpha; modes])
    }

    pub fn real(alphas: &[f64]) -> Result<Self> {
        CoherentParams::new(alphas.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn alphas(&self) -> &[C64] {
        &self.alphas
    }

    pub fn modes(&self) -> usize {
        self.alphas.len()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| a.norm()).collect()
    }

    /// Phases `theta_i` with `alpha_i = exp(-i theta_i) |alpha_i|`.
    pub fn thetas(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| -a.arg()).collect()
    }

    /// Same moduli, all phases removed.
    pub fn to_moduli(&self) -> CoherentParams {
        CoherentParams {
            alphas: self.moduli().into_iter().map(|r| C64::new(r, 0.0)).collect(),
        }
    }

    /// Angles for [`phase_transform`] that carry an operator built from these
    /// amplitudes onto the one built from their moduli.
    pub fn realigning_angles(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| a.arg()).collect()
    }

    /// `max` over truncated basis tuples of the product Poisson weight.
    pub fn max_product_weight(&self, indexer: &BasisIndexer) -> f64 {
        self.alphas
            .iter()
            .zip(indexer.cutoffs())
            .map(|(a, &cut)| {
                poisson_weights(a.norm_sqr(), cut)
                    .into_iter()
                    .fold(0.0, f64::max)
            })
            .product()
    }

    /// Rejects parameters whose coherent state has a component above 1/2.
    pub fn validate(&self, indexer: &BasisIndexer) -> Result<()> {
        if self.modes() != indexer.modes() {
            return Err(Error::ArityMismatch {
                expected: indexer.modes(),
                got: self.modes(),
            });
        }
        let max_weight = self.max_product_weight(indexer);
        if max_weight > 0.5 {
            return Err(Error::DominantComponent { max_weight });
        }
        Ok(())
    }

    /// Total coherent weight outside the truncated box.
    pub fn discarded_weight(&self, indexer: &BasisIndexer) -> f64 {
        let kept: f64 = self
            .alphas
            .iter()
            .zip(indexer.cutoffs())
            .map(|(a, &cut)| 1.0 - poisson_tail(a.norm_sqr(), cut))
            .product();
        1.0 - kept
    }
}

/// `exp(-x) x^n / n!` for `n = 0..=cutoff`.
fn poisson_weights(x: f64, cutoff: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(cutoff + 1);
    let mut p = (-x).exp();
    w.push(p);
    for n in 1..=cutoff {
        p *= x / n as f64;
        w.push(p);
    }
    w
}

/// `sum_{n > cutoff} exp(-x) x^n / n!`, summed directly to avoid cancellation.
fn poisson_tail(x: f64, cutoff: usize) -> f64 {
    let mut p = (-x).exp();
    for n in 1..=cutoff + 1 {
        p *= x / n as f64;
    }
    let mut tail = 0.0;
    let mut n = cutoff + 1;
    loop {
        tail += p;
        n += 1;
        p *= x / n as f64;
        if (n as f64) > x && p <= tail * 1e-18 {
            break;
        }
        if p == 0.0 {
            break;
        }
    }
    tail.min(1.0)
}

#[derive(Debug, Clone)]
pub struct CoherentState {
    pub state: StateVector,
    /// Weight of the untruncated product state lying outside the box.
    pub discarded_weight: f64,
}

/// Product of truncated coherent states, renormalized to unit norm.
pub fn coherent_state(
    indexer: &BasisIndexer,
    params: &CoherentParams,
    tolerance: f64,
) -> Result<CoherentState> {
    params.validate(indexer)?;
    let discarded = params.discarded_weight(indexer);
    if discarded > tolerance {
        return Err(Error::TruncationWeight {
            discarded,
            tolerance,
        });
    }
    let per_mode: Vec<Vec<C64>> = params
        .alphas()
        .iter()
        .zip(indexer.cutoffs())
        .map(|(&alpha, &cut)| {
            let mut amps = Vec::with_capacity(cut + 1);
            let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
            amps.push(c);
            for n in 1..=cut {
                c = c * alpha / (n as f64).sqrt();
                amps.push(c);
            }
            amps
        })
        .collect();
    let amps = DVector::from_iterator(
        indexer.dim(),
        (0..indexer.dim()).map(|idx| {
            per_mode
                .iter()
                .enumerate()
                .map(|(mode, amps)| amps[indexer.occupation(idx, mode)])
                .product::<C64>()
        }),
    );
    let state = StateVector::new(amps, indexer.clone())?.normalized();
    Ok(CoherentState {
        state,
        discarded_weight: discarded,
    })
}

/// Truncated annihilation and creation operators `(a_i, a_i^dagger)` for `mode`
/// (0-based; mode `i` corresponds to variable `x{i+1}`).
pub fn ladder_operators(indexer: &BasisIndexer, mode: usize) -> Result<(Operator, Operator)> {
    indexer.check_mode(mode)?;
    let n = indexer.dim();
    let stride = indexer.strides[mode];
    let mut a = DMatrix::<C64>::zeros(n, n);
    for col in 0..n {
        let occ = indexer.occupation(col, mode);
        if occ > 0 {
            a[(col - stride, col)] = C64::new((occ as f64).sqrt(), 0.0);
        }
    }
    let adag = a.transpose();
    Ok((
        Operator::general(a, indexer.clone())?,
        Operator::general(adag, indexer.clone())?,
    ))
}

/// `a_i^dagger a_i`, i.e. `diag(n_i)`.
pub fn number_operator(indexer: &BasisIndexer, mode: usize) -> Result<Operator> {
    indexer.check_mode(mode)?;
    let diag = DVector::from_iterator(
        indexer.dim(),
        (0..indexer.dim()).map(|i| C64::new(indexer.occupation(i, mode) as f64, 0.0)),
    );
    Operator::hermitian(DMatrix::from_diagonal(&diag), indexer.clone())
}

/// Initial Hamiltonian `sum_i (a_i^dagger - conj(alpha_i)) (a_i - alpha_i)`.
///
/// Built entrywise as `n_i - alpha_i a_i^dagger - conj(alpha_i) a_i + |alpha_i|^2`,
/// which equals the truncated product `B^dagger B` with `B = a_i - alpha_i`.
pub fn build_hi(indexer: &BasisIndexer, params: &CoherentParams) -> Result<Operator> {
    if params.modes() != indexer.modes() {
        return Err(Error::ArityMismatch {
            expected: indexer.modes(),
            got: params.modes(),
        });
    }
    let n = indexer.dim();
    let mut h = DMatrix::<C64>::zeros(n, n);
    for (mode, &alpha) in params.alphas().iter().enumerate() {
        let stride = indexer.strides[mode];
        for col in 0..n {
            let occ = indexer.occupation(col, mode);
            h[(col, col)] += C64::new(occ as f64 + alpha.norm_sqr(), 0.0);
            if occ > 0 {
                let row = col - stride;
                let s = (occ as f64).sqrt();
                // <n-1| a |n> = sqrt(n)  and  <n| a^dagger |n-1> = sqrt(n)
                h[(row, col)] -= alpha.conj() * s;
                h[(col, row)] -= alpha * s;
            }
        }
    }
    Operator::hermitian(h, indexer.clone())
}

/// Problem Hamiltonian: diagonal with `D(n)^2` at each basis tuple.
pub fn build_hp(indexer: &BasisIndexer, poly: &Polynomial) -> Result<Operator> {
    if poly.arity() != indexer.modes() {
        return Err(Error::ArityMismatch {
            expected: indexer.modes(),
            got: poly.arity(),
        });
    }
    let mut diag = Vec::with_capacity(indexer.dim());
    for tuple in indexer.tuples() {
        let point: Vec<u64> = tuple.iter().map(|&x| x as u64).collect();
        let v = poly.evaluate(&point)?;
        let sq = &v * &v;
        let f = sq
            .to_f64()
            .filter(|f| f.is_finite())
            .ok_or_else(|| Error::FloatOverflow {
                value: sq.to_string(),
            })?;
        diag.push(C64::new(f, 0.0));
    }
    Operator::hermitian(
        DMatrix::from_diagonal(&DVector::from_vec(diag)),
        indexer.clone(),
    )
}

/// `(1 - s) H_I + s H_P` for reduced time `s` in `[0, 1]`.
pub fn build_h(s: f64, hi: &Operator, hp: &Operator) -> Result<Operator> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::ReducedTimeOutOfRange(s));
    }
    hi.combine(1.0 - s, hp, s)
}

/// `H_P + gamma a_i^dagger + conj(gamma) a_i`. A zero `gamma` returns `H_P` unchanged.
pub fn add_symmetry_breaking(hp: &Operator, gamma: C64, mode: usize) -> Result<Operator> {
    if gamma.is_zero() {
        return Ok(hp.clone());
    }
    let (a, adag) = ladder_operators(hp.indexer(), mode)?;
    let m = hp.matrix() + adag.matrix().map(|z| z * gamma) + a.matrix().map(|z| z * gamma.conj());
    Operator::hermitian(m, hp.indexer().clone())
}

/// `U^dagger op U` with `U = prod_i exp(i theta_i n_i)`, realizing
/// `a_i -> exp(i theta_i) a_i`.
pub fn phase_transform(op: &Operator, thetas: &[f64]) -> Result<Operator> {
    let indexer = op.indexer();
    if thetas.len() != indexer.modes() {
        return Err(Error::ArityMismatch {
            expected: indexer.modes(),
            got: thetas.len(),
        });
    }
    let angles: Vec<f64> = (0..indexer.dim())
        .map(|i| {
            thetas
                .iter()
                .enumerate()
                .map(|(mode, &t)| t * indexer.occupation(i, mode) as f64)
                .sum()
        })
        .collect();
    let m = DMatrix::from_fn(op.dim(), op.dim(), |r, c| {
        let z = op.matrix()[(r, c)];
        if r == c {
            z
        } else {
            z * C64::from_polar(1.0, angles[c] - angles[r])
        }
    });
    Ok(Operator {
        matrix: m,
        indexer: indexer.clone(),
        hermitian: op.is_hermitian(),
    })
}
