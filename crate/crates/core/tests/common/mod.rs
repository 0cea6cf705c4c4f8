//! Independent reference implementations used as oracles by the
//! integration tests. Nothing here calls into the propagators under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use qad_core::diophantine::Polynomial;

/// Classical fourth-order Runge-Kutta for `i psi' = ((1 - t/T) A + (t/T) B) psi`.
pub fn rk4_evolve(
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
    psi0: &DVector<C64>,
    total_time: f64,
    steps: usize,
) -> DVector<C64> {
    let minus_i = C64::new(0.0, -1.0);
    let rhs = |t: f64, psi: &DVector<C64>| -> DVector<C64> {
        let s = t / total_time;
        let h = a * C64::new(1.0 - s, 0.0) + b * C64::new(s, 0.0);
        (h * psi) * minus_i
    };
    let dt = total_time / steps as f64;
    let mut psi = psi0.clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = rhs(t, &psi);
        let k2 = rhs(t + 0.5 * dt, &(&psi + &k1 * C64::new(0.5 * dt, 0.0)));
        let k3 = rhs(t + 0.5 * dt, &(&psi + &k2 * C64::new(0.5 * dt, 0.0)));
        let k4 = rhs(t + dt, &(&psi + &k3 * C64::new(dt, 0.0)));
        psi += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
    }
    psi
}

/// Truncated single-mode annihilation operator on `0..=cutoff`.
pub fn annihilation(cutoff: usize) -> DMatrix<C64> {
    let n = cutoff + 1;
    DMatrix::from_fn(n, n, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Single-mode `(a^dagger - conj(alpha)) (a - alpha)` as a literal matrix product.
pub fn product_hi(cutoff: usize, alpha: C64) -> DMatrix<C64> {
    let a = annihilation(cutoff);
    let id = DMatrix::<C64>::identity(cutoff + 1, cutoff + 1);
    let b = &a - &id * alpha;
    b.adjoint() * b
}

/// Single-mode `diag(D(n)^2)` evaluated with plain `i128` Horner-free sums.
pub fn diag_hp(poly_at: impl Fn(i128) -> i128, cutoff: usize) -> DMatrix<C64> {
    let d = DVector::from_iterator(
        cutoff + 1,
        (0..=cutoff).map(|n| {
            let v = poly_at(n as i128);
            C64::new((v * v) as f64, 0.0)
        }),
    );
    DMatrix::from_diagonal(&d)
}

/// Truncated, renormalized single-mode coherent state from the Poisson weights.
pub fn coherent(cutoff: usize, alpha: f64) -> DVector<C64> {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut fact = 1.0;
    for n in 0..=cutoff {
        if n > 0 {
            fact *= n as f64;
        }
        amps.push(C64::new(alpha.powi(n as i32) / fact.sqrt(), 0.0));
    }
    let v = DVector::from_vec(amps);
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

/// All tuples of `0..=bound` in `arity` variables where `poly` vanishes.
pub fn brute_force_zeros(poly: &Polynomial, bound: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let arity = poly.arity();
    let mut t = vec![0u64; arity];
    loop {
        if poly.evaluate(&t).unwrap() == 0.into() {
            out.push(t.clone());
        }
        let mut k = arity;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if t[k] < bound {
                t[k] += 1;
                break;
            }
            t[k] = 0;
        }
    }
}

fn binomial_pmf(n: u64, p: f64, j: u64) -> f64 {
    let ln_choose: f64 = (1..=j).map(|i| ((n - j + i) as f64).ln() - (i as f64).ln()).sum();
    (ln_choose + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp()
}

/// `P[X >= k]` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_tail(n: u64, p: f64, k: u64) -> f64 {
    (k..=n).map(|j| binomial_pmf(n, p, j)).sum()
}

/// `P[X <= k]` for `X ~ Binomial(n, p)`.
pub fn binomial_lower_tail(n: u64, p: f64, k: u64) -> f64 {
    (0..=k.min(n)).map(|j| binomial_pmf(n, p, j)).sum()
}
