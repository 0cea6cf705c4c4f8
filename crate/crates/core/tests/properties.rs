mod common;

use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qad_core::diophantine::{parse, parse_with_arity, Polynomial};
use qad_core::evolve::{evolve, EvolutionConfig};
use qad_core::fock::{
    build_h, build_hi, build_hp, coherent_state, ladder_operators, phase_transform, BasisIndexer,
    CoherentParams,
};
use qad_core::linalg::hermitian_eigenvalues;
use qad_core::protocol::plan_repetitions;
use qad_core::twolevel::{check_condition, flow_integral, sweep_t, TwoLevelProblem};

/// Direct evaluation of the source text at a point, following the same
/// grammar with plain `i128` arithmetic and no polynomial normal form.
struct Eval<'a> {
    s: &'a [u8],
    i: usize,
    point: &'a [i128],
}

impl Eval<'_> {
    fn skip(&mut self) {
        while self.i < self.s.len() && self.s[self.i] == b' ' {
            self.i += 1;
        }
    }
    fn peek(&mut self) -> Option<u8> {
        self.skip();
        self.s.get(self.i).copied()
    }
    fn number(&mut self) -> i128 {
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        std::str::from_utf8(&self.s[start..self.i]).unwrap().parse().unwrap()
    }
    fn expr(&mut self) -> i128 {
        let mut v = self.term();
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.i += 1;
                    v += self.term();
                }
                Some(b'-') => {
                    self.i += 1;
                    v -= self.term();
                }
                _ => return v,
            }
        }
    }
    fn term(&mut self) -> i128 {
        let mut v = self.unary();
        while self.peek() == Some(b'*') {
            self.i += 1;
            v *= self.unary();
        }
        v
    }
    fn unary(&mut self) -> i128 {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                -self.unary()
            }
            _ => self.power(),
        }
    }
    fn power(&mut self) -> i128 {
        let base = self.atom();
        if self.peek() == Some(b'^') {
            self.i += 1;
            self.skip();
            let e = self.number() as u32;
            base.pow(e)
        } else {
            base
        }
    }
    fn atom(&mut self) -> i128 {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let v = self.expr();
                assert_eq!(self.peek(), Some(b')'));
                self.i += 1;
                v
            }
            Some(b'x') => {
                self.i += 1;
                self.point[self.number() as usize - 1]
            }
            _ => self.number(),
        }
    }
}

fn direct_eval(src: &str, point: &[i128]) -> i128 {
    let mut e = Eval {
        s: src.as_bytes(),
        i: 0,
        point,
    };
    let v = e.expr();
    assert_eq!(e.peek(), None);
    v
}

/// Random expressions over `x1..x3`, mixing bare and parenthesized forms so
/// that operator precedence is exercised.
fn expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..20).prop_map(|n| n.to_string()),
        (1usize..=3).prop_map(|k| format!("x{k}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} + {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} - {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) * ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}*{b}")),
            (inner.clone(), 0u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.prop_map(|a| format!("({a})")),
        ]
    })
}

fn polynomial() -> impl Strategy<Value = Polynomial> {
    (1usize..=3).prop_flat_map(|arity| {
        prop::collection::vec(
            (prop::collection::vec(0u32..4, arity), -40i64..=40),
            0..8,
        )
        .prop_map(move |terms| {
            Polynomial::from_terms(arity, terms.into_iter().map(|(e, c)| (e, BigInt::from(c)))).unwrap()
        })
    })
}

fn mixing() -> impl Strategy<Value = f64> {
    0.02f64..0.98
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_then_parse_is_identity(p in polynomial()) {
        let text = p.to_string();
        let back = parse_with_arity(&text, Some(p.arity())).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn evaluate_matches_direct_source_evaluation(
        src in expression(),
        point in prop::collection::vec(0u64..6, 3),
    ) {
        let p = parse_with_arity(&src, Some(3)).unwrap();
        let ipoint: Vec<i128> = point.iter().map(|&x| x as i128).collect();
        prop_assert_eq!(p.evaluate(&point).unwrap(), BigInt::from(direct_eval(&src, &ipoint)));
    }

    #[test]
    fn search_box_agrees_with_exhaustive_scan(p in polynomial(), bound in 0u64..6) {
        let zeros = common::brute_force_zeros(&p, bound);
        match p.search_box(bound).unwrap() {
            Some(w) => {
                prop_assert!(p.evaluate(&w).unwrap() == BigInt::from(0));
                prop_assert_eq!(Some(&w), zeros.first());
            }
            None => prop_assert!(zeros.is_empty()),
        }
    }

    #[test]
    fn indexer_is_a_bijection(cutoffs in prop::collection::vec(0usize..5, 1..4)) {
        let ix = BasisIndexer::new(cutoffs.clone()).unwrap();
        let mut previous: Option<Vec<usize>> = None;
        for i in 0..ix.dim() {
            let t = ix.tuple(i);
            prop_assert_eq!(ix.index(&t).unwrap(), i);
            prop_assert!(t.iter().zip(&cutoffs).all(|(n, c)| n <= c));
            if let Some(prev) = previous {
                prop_assert!(prev < t);
            }
            previous = Some(t);
        }
    }

    #[test]
    fn ladder_commutator_is_identity_below_the_cutoff(cutoff in 1usize..8, modes in 1usize..3) {
        let ix = BasisIndexer::uniform(modes, cutoff).unwrap();
        for mode in 0..modes {
            let (a, adag) = ladder_operators(&ix, mode).unwrap();
            let c = a.commutator(&adag);
            for i in 0..ix.dim() {
                if ix.occupation(i, mode) < cutoff {
                    prop_assert!((c[(i, i)] - C64::new(1.0, 0.0)).norm() < 1e-12);
                }
                for j in 0..ix.dim() {
                    if i != j {
                        prop_assert!(c[(i, j)].norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn initial_hamiltonian_is_positive_semidefinite(
        re in -1.5f64..1.5,
        im in -1.5f64..1.5,
        cutoff in 1usize..12,
    ) {
        let ix = BasisIndexer::uniform(1, cutoff).unwrap();
        let hi = build_hi(&ix, &CoherentParams::new(vec![C64::new(re, im)]).unwrap()).unwrap();
        prop_assert!(hi.hermiticity_defect() < 1e-12);
        prop_assert!(hermitian_eigenvalues(hi.matrix()).unwrap()[0] > -1e-9);
    }

    #[test]
    fn spectrum_is_phase_invariant(
        r in 0.5f64..1.5,
        phase in -3.1f64..3.1,
        s in 0.0f64..1.0,
    ) {
        let ix = BasisIndexer::uniform(1, 10).unwrap();
        let hp = build_hp(&ix, &parse("x1^2 - 3*x1 + 1").unwrap()).unwrap();
        let complex = CoherentParams::new(vec![C64::from_polar(r, phase)]).unwrap();
        let real = complex.to_moduli();
        let hc = build_h(s, &build_hi(&ix, &complex).unwrap(), &hp).unwrap();
        let hr = build_h(s, &build_hi(&ix, &real).unwrap(), &hp).unwrap();
        let rotated = phase_transform(&hc, &complex.realigning_angles()).unwrap();
        prop_assert!((rotated.matrix() - hr.matrix()).norm() < 1e-10);
        let ec = hermitian_eigenvalues(hc.matrix()).unwrap();
        let er = hermitian_eigenvalues(hr.matrix()).unwrap();
        for (a, b) in ec.iter().zip(&er) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn repetition_count_is_minimal(eps in 0.01f64..0.99, delta in 0.01f64..0.99) {
        let plan = plan_repetitions(eps, delta).unwrap();
        let bound = 1.0 / (4.0 * eps * eps * delta);
        prop_assert!(plan.repetitions as f64 > bound * (1.0 - 1e-12));
        prop_assert!(((plan.repetitions - 1) as f64) <= bound * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolution_preserves_norm(
        alpha in 1.0f64..1.4,
        shift in 0i64..4,
        t in 0.5f64..6.0,
    ) {
        let ix = BasisIndexer::uniform(1, 10).unwrap();
        let params = CoherentParams::real(&[alpha]).unwrap();
        let hi = build_hi(&ix, &params).unwrap();
        let hp = build_hp(&ix, &parse(&format!("x1 - {shift}")).unwrap()).unwrap();
        let psi0 = coherent_state(&ix, &params, 1e-4).unwrap().state;
        let rec = evolve(&hi, &hp, &psi0, &EvolutionConfig::new(t, 60).unwrap()).unwrap();
        prop_assert!(rec.norm_drift < 1e-9);
        for cp in &rec.checkpoints {
            prop_assert!((cp.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn excited_probability_bound(
        gap_i in 0.3f64..3.0,
        gap_p in 0.3f64..3.0,
        offset in -1.0f64..1.0,
        m in mixing(),
    ) {
        let problem = TwoLevelProblem::new((0.0, gap_i), (offset, offset + gap_p), m).unwrap();
        let grid = qad_core::twolevel::log_grid(1e-2, 1e2, 40).unwrap();
        let sweep = sweep_t(&problem, &grid).unwrap();
        let max = sweep.iter().map(|p| p.excited_probability).fold(0.0, f64::max);
        if check_condition(&problem) {
            prop_assert!(max <= 0.5 + 1e-3, "mixing {m}: {max}");
        } else {
            prop_assert!(max > 0.5, "mixing {m}: {max}");
        }
        // Never more than the final rotation allows.
        prop_assert!(max <= m + 1e-3);
    }

    #[test]
    fn excited_weight_stays_under_the_rotation_angle(
        m in mixing(),
        t in 0.05f64..20.0,
    ) {
        let problem = TwoLevelProblem::new((0.0, 1.0), (0.0, 1.0), m).unwrap();
        let flow = flow_integral(&problem, t, 2000).unwrap();
        prop_assert!(flow.sign_constant);
        prop_assert!(flow.chain_holds(1e-6), "violation {}", flow.chain_violation);
        prop_assert!((flow.final_bound - m).abs() < 1e-5);
        for w in flow.omega.windows(2) {
            prop_assert!((w[1] - w[0]).abs() < 1e-2);
        }
    }
}
