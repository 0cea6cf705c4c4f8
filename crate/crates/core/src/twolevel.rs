//! The two-state model: `H(t) = (1 - t/T) H_I + (t/T) H_P` on a qubit, with
//! `H_I = diag(eps_g, eps_e)` and `H_P` diagonal in a basis rotated by `chi`,
//! where `sin^2 chi` is the mixing `|<g(0)|e(T)>|^2`.
//!
//! Along the flow the instantaneous ground state rotates by `omega / 2`, where
//! `omega` accumulates `2 <e|dH/dt|g> / (E_e - E_g)`. The state's angle to the
//! instantaneous ground state can grow no faster than that rotation, which
//! bounds the excited probability by `sin^2(omega / 2)`; since
//! `omega(T) = 2 chi`, the final bound is the mixing itself.

use std::f64::consts::FRAC_PI_2;
use std::io::{self, Write};

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

type C64 = Complex64;

/// Instantaneous splittings below this count as a level crossing.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_FLOW_POINTS: usize = 10_000;
pub const DEFAULT_SWEEP_POINTS: usize = 200;
pub const DEFAULT_SWEEP_RANGE: (f64, f64) = (1e-2, 1e3);
/// Slack allowed on the `1/2` bound and on the `sin^2` chain.
pub const BOUND_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelProblem {
    pub eps_g: f64,
    pub eps_e: f64,
    pub ups_g: f64,
    pub ups_e: f64,
    /// `|<g(0)|e(T)>|^2`.
    pub mixing: f64,
}

impl TwoLevelProblem {
    pub fn new(eps: (f64, f64), ups: (f64, f64), mixing: f64) -> Result<Self> {
        let p = TwoLevelProblem {
            eps_g: eps.0,
            eps_e: eps.1,
            ups_g: ups.0,
            ups_e: ups.1,
            mixing,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eps_g, self.eps_e, self.ups_g, self.ups_e, self.mixing];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("two-level problem", "all parameters must be finite"));
        }
        if !(self.eps_g < self.eps_e) {
            return Err(invalid("eps", "need eps_g < eps_e"));
        }
        if !(self.ups_g < self.ups_e) {
            return Err(invalid("ups", "need ups_g < ups_e"));
        }
        if !(self.mixing > 0.0 && self.mixing < 1.0) {
            return Err(invalid(
                "mixing",
                "must lie strictly between 0 and 1, otherwise H_I and H_P commute",
            ));
        }
        Ok(())
    }

    /// Rotation angle `chi` in `(0, pi/2)` with `sin^2 chi = mixing`.
    pub fn chi(&self) -> f64 {
        self.mixing.sqrt().asin()
    }

    pub fn h_initial(&self) -> Matrix2<f64> {
        Matrix2::new(self.eps_g, 0.0, 0.0, self.eps_e)
    }

    /// `ups_g |g_T><g_T| + ups_e |e_T><e_T|` with `|g_T> = (cos chi, -sin chi)`
    /// and `|e_T> = (sin chi, cos chi)`.
    pub fn h_problem(&self) -> Matrix2<f64> {
        let (s, c) = self.chi().sin_cos();
        let off = (self.ups_e - self.ups_g) * s * c;
        Matrix2::new(
            self.ups_g * c * c + self.ups_e * s * s,
            off,
            off,
            self.ups_g * s * s + self.ups_e * c * c,
        )
    }

    /// Final ground and excited eigenvectors.
    pub fn final_basis(&self) -> (Vector2<f64>, Vector2<f64>) {
        let (s, c) = self.chi().sin_cos();
        (Vector2::new(c, -s), Vector2::new(s, c))
    }
}

/// True iff the mixing is at most 1/2, the regime where the excited
/// probability can never exceed 1/2.
pub fn check_condition(problem: &TwoLevelProblem) -> bool {
    problem.mixing <= 0.5
}

/// The interpolated Hamiltonian for one total time.
#[derive(Debug, Clone, Copy)]
pub struct TwoLevelHamiltonian {
    pub problem: TwoLevelProblem,
    pub total_time: f64,
    hi: Matrix2<f64>,
    hp: Matrix2<f64>,
}

pub fn build_two_level(problem: &TwoLevelProblem, total_time: f64) -> Result<TwoLevelHamiltonian> {
    problem.validate()?;
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(invalid("T", "must be positive and finite"));
    }
    Ok(TwoLevelHamiltonian {
        problem: *problem,
        total_time,
        hi: problem.h_initial(),
        hp: problem.h_problem(),
    })
}

impl TwoLevelHamiltonian {
    pub fn at(&self, t: f64) -> Matrix2<f64> {
        let s = (t / self.total_time).clamp(0.0, 1.0);
        self.hi * (1.0 - s) + self.hp * s
    }

    /// `dH/dt`, constant in `t`.
    pub fn derivative(&self) -> Matrix2<f64> {
        (self.hp - self.hi) / self.total_time
    }

    /// Largest `|E_e - E_g|` along the path, bounding the phase rate.
    pub fn max_splitting(&self) -> f64 {
        splitting(&self.hi).max(splitting(&self.hp))
    }
}

fn splitting(h: &Matrix2<f64>) -> f64 {
    let a = 0.5 * (h[(0, 0)] - h[(1, 1)]);
    2.0 * a.hypot(h[(0, 1)])
}

/// Instantaneous eigenpairs, phase-fixed so that each eigenvector has a
/// non-negative first component: `(E_g, E_e, |g>, |e>)`.
pub fn eigenpairs(h: &Matrix2<f64>) -> (f64, f64, Vector2<f64>, Vector2<f64>) {
    let m = 0.5 * (h[(0, 0)] + h[(1, 1)]);
    let a = 0.5 * (h[(0, 0)] - h[(1, 1)]);
    let b = h[(0, 1)];
    let r = a.hypot(b);
    // Ground state (cos v, -sin v) with a = -r cos 2v, b = r sin 2v.
    let v = 0.5 * b.atan2(-a);
    let (s, c) = v.sin_cos();
    let mut g = Vector2::new(c, -s);
    let mut e = Vector2::new(s, c);
    if g[0] < 0.0 {
        g = -g;
    }
    if e[0] < 0.0 || (e[0] == 0.0 && e[1] < 0.0) {
        e = -e;
    }
    (m - r, m + r, g, e)
}

/// `exp(-i H dt)` for real symmetric `H`.
fn propagator(h: &Matrix2<f64>, dt: f64) -> Matrix2<C64> {
    let m = 0.5 * (h[(0, 0)] + h[(1, 1)]);
    let a = 0.5 * (h[(0, 0)] - h[(1, 1)]);
    let b = h[(0, 1)];
    let r = a.hypot(b);
    let phase = C64::from_polar(1.0, -m * dt);
    let (sn, cs) = (r * dt).sin_cos();
    let (na, nb) = if r > 0.0 { (a / r, b / r) } else { (0.0, 0.0) };
    let i = C64::new(0.0, 1.0);
    let u = Matrix2::new(
        C64::new(cs, 0.0) - i * sn * na,
        -i * sn * nb,
        -i * sn * nb,
        C64::new(cs, 0.0) + i * sn * na,
    );
    u * phase
}

/// Midpoint steps used for total time `T`: enough to keep `dt * splitting`
/// below `0.01`, and never fewer than 2000.
pub fn default_steps(ham: &TwoLevelHamiltonian) -> usize {
    let rate = ham.max_splitting().max(1e-12);
    ((100.0 * ham.total_time * rate).ceil() as usize).max(2000)
}

fn to_complex(v: &Vector2<f64>) -> Vector2<C64> {
    v.map(|x| C64::new(x, 0.0))
}

/// Evolves `|g(0)>` to `t = T` with `steps` exact midpoint steps, invoking
/// `visit(k, psi)` after step `k` (and for `k = 0`).
fn integrate<F>(ham: &TwoLevelHamiltonian, steps: usize, mut visit: F) -> Vector2<C64>
where
    F: FnMut(usize, &Vector2<C64>),
{
    let dt = ham.total_time / steps as f64;
    let mut psi = Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    visit(0, &psi);
    for k in 0..steps {
        let h = ham.at((k as f64 + 0.5) * dt);
        psi = propagator(&h, dt) * psi;
        visit(k + 1, &psi);
    }
    psi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "T")]
    pub total_time: f64,
    pub ground_probability: f64,
    pub excited_probability: f64,
}

/// `n` log-spaced points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        return Err(invalid("T grid", "need 0 < lo <= hi and at least one point"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

pub fn default_sweep_grid() -> Vec<f64> {
    let (lo, hi) = DEFAULT_SWEEP_RANGE;
    log_grid(lo, hi, DEFAULT_SWEEP_POINTS).expect("constant grid is valid")
}

/// Final ground/excited probabilities for each `T`, starting from `|g(0)>`.
pub fn sweep_t(problem: &TwoLevelProblem, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    problem.validate()?;
    if grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(invalid("T grid", "every T must be positive and finite"));
    }
    let (g_t, e_t) = problem.final_basis();
    let (g_t, e_t) = (to_complex(&g_t), to_complex(&e_t));
    grid.par_iter()
        .map(|&total_time| {
            let ham = build_two_level(problem, total_time)?;
            let psi = integrate(&ham, default_steps(&ham), |_, _| {});
            Ok(SweepPoint {
                total_time,
                ground_probability: g_t.dot(&psi).norm_sqr(),
                excited_probability: e_t.dot(&psi).norm_sqr(),
            })
        })
        .collect()
}

/// Writes `T,ground_probability,excited_probability` rows.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "T,ground_probability,excited_probability")?;
    for p in points {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e}",
            p.total_time, p.ground_probability, p.excited_probability
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoLevelFlow {
    #[serde(rename = "T")]
    pub total_time: f64,
    pub t: Vec<f64>,
    /// `2 <e|dH/dt|g> / (E_e - E_g)` at each grid point.
    pub integrand: Vec<f64>,
    /// Trapezoid accumulation of `integrand`.
    pub omega: Vec<f64>,
    /// Same angle from overlaps of neighbouring ground states.
    pub omega_overlap: Vec<f64>,
    /// `sin^2 phi = |<e(t)|psi(t)>|^2`.
    pub phi: Vec<f64>,
    /// Relative phase `arg <e|psi> - arg <g|psi>`.
    pub theta: Vec<f64>,
    pub min_abs_integrand: f64,
    pub sign_constant: bool,
    pub max_omega: f64,
    /// `omega <= pi/2` everywhere (within [`BOUND_SLACK`]).
    pub first_quadrant: bool,
    /// `max (sin^2 phi - sin^2(omega/2))` over the grid.
    pub chain_violation: f64,
    /// `sin^2(omega(T)/2)`.
    pub final_bound: f64,
    pub final_excited: f64,
}

impl TwoLevelFlow {
    /// `sin^2 phi <= sin^2(omega/2)` pointwise within `tolerance`.
    pub fn chain_holds(&self, tolerance: f64) -> bool {
        self.chain_violation <= tolerance
    }
}

/// Accumulates the rotation angle of the instantaneous eigenbasis on
/// `points` uniform grid points and tracks the evolved state against it.
pub fn flow_integral(problem: &TwoLevelProblem, total_time: f64, points: usize) -> Result<TwoLevelFlow> {
    if points < 2 {
        return Err(invalid("points", "need at least two grid points"));
    }
    let ham = build_two_level(problem, total_time)?;
    let dh = ham.derivative();
    let intervals = points - 1;
    let substeps = default_steps(&ham).div_ceil(intervals).max(1);
    let t: Vec<f64> = (0..points)
        .map(|k| total_time * k as f64 / intervals as f64)
        .collect();

    let mut integrand = Vec::with_capacity(points);
    let mut grounds = Vec::with_capacity(points);
    let mut excited = Vec::with_capacity(points);
    for &tk in &t {
        let (eg, ee, g, e) = eigenpairs(&ham.at(tk));
        let gap = ee - eg;
        if gap < DEGENERACY_TOLERANCE {
            return Err(Error::Degeneracy { t: tk, spacing: gap });
        }
        integrand.push(2.0 * e.dot(&(dh * g)) / gap);
        grounds.push(g);
        excited.push(e);
    }

    let mut omega = vec![0.0; points];
    let mut omega_overlap = vec![0.0; points];
    for k in 1..points {
        let dt = t[k] - t[k - 1];
        omega[k] = omega[k - 1] + 0.5 * dt * (integrand[k] + integrand[k - 1]);
        // Ground state rotates by v: the overlap is cos v and the sign follows
        // the component along the previous excited state.
        let cos_v = grounds[k].dot(&grounds[k - 1]).clamp(-1.0, 1.0);
        let sign = if grounds[k].dot(&excited[k - 1]) <= 0.0 { 1.0 } else { -1.0 };
        omega_overlap[k] = omega_overlap[k - 1] + 2.0 * sign * cos_v.acos();
    }

    let mut phi = vec![0.0; points];
    let mut theta = vec![0.0; points];
    let mut fill = |k: usize, psi: &Vector2<C64>| {
        let ag = to_complex(&grounds[k]).dot(psi);
        let ae = to_complex(&excited[k]).dot(psi);
        phi[k] = ae.norm_sqr();
        theta[k] = if ae.norm() > 0.0 && ag.norm() > 0.0 {
            ae.arg() - ag.arg()
        } else {
            0.0
        };
    };
    integrate(&ham, intervals * substeps, |step, psi| {
        if step % substeps == 0 {
            fill(step / substeps, psi);
        }
    });

    let min_abs_integrand = integrand.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let sign_constant = integrand.iter().all(|&x| x > 0.0) || integrand.iter().all(|&x| x < 0.0);
    let max_omega = omega.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let chain_violation = phi
        .iter()
        .zip(&omega)
        .map(|(&p, &w)| p - (0.5 * w).sin().powi(2))
        .fold(f64::NEG_INFINITY, f64::max);
    let last = points - 1;
    Ok(TwoLevelFlow {
        total_time,
        min_abs_integrand,
        sign_constant,
        max_omega,
        first_quadrant: omega.iter().all(|&w| w <= FRAC_PI_2 + BOUND_SLACK),
        chain_violation,
        final_bound: (0.5 * omega[last]).sin().powi(2),
        final_excited: phi[last],
        t,
        integrand,
        omega,
        omega_overlap,
        phi,
        theta,
    })
}

/// The two curves of the reference figure: endpoint gaps of 1 with mixing
/// 3/4 (label `"A"`) and 1/2 (label `"B"`).
pub fn figure1_presets() -> [(&'static str, TwoLevelProblem); 2] {
    let make = |m| TwoLevelProblem {
        eps_g: 0.0,
        eps_e: 1.0,
        ups_g: 0.0,
        ups_e: 1.0,
        mixing: m,
    };
    [("A", make(0.75)), ("B", make(0.5))]
}
