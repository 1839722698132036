use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qshare_core::linalg::{row_vec_mul, vandermonde};
use qshare_core::{CoeffVector, EvalPoints, PrimeField, RegisterId, RegisterLayout, SparseState};

fn points_and_row(max_q: u64) -> impl Strategy<Value = (u64, Vec<u64>, Vec<u64>)> {
    prop::sample::select(vec![3u64, 5, 7].into_iter().filter(|&q| q <= max_q).collect::<Vec<_>>())
        .prop_flat_map(|q| {
            let max_len = q.min(5) as usize;
            (Just(q), Just((0..q).collect::<Vec<_>>()).prop_shuffle(), 1..=max_len)
        })
        .prop_flat_map(|(q, perm, l)| {
            let points = perm[..l].to_vec();
            (Just(q), Just(points), prop::collection::vec(0..q, l))
        })
}

fn regs(count: usize) -> Vec<RegisterId> {
    (0..count).map(RegisterId::Local).collect()
}

fn random_state() -> impl Strategy<Value = SparseState> {
    (prop::sample::select(vec![3u64, 5]), 1usize..=3).prop_flat_map(|(q, width)| {
        let term = (prop::collection::vec(0..q, width), -1.0f64..1.0, -1.0f64..1.0);
        prop::collection::vec(term, 1..12).prop_filter_map("zero vector", move |raw| {
            let mut merged = std::collections::BTreeMap::<Vec<u64>, Complex64>::new();
            for (key, re, im) in raw {
                *merged.entry(key).or_default() += Complex64::new(re, im);
            }
            let norm: f64 = merged.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-3 {
                return None;
            }
            let layout = RegisterLayout::new(PrimeField::new(q).unwrap(), regs(width)).unwrap();
            SparseState::from_terms(layout, merged.into_iter().map(|(k, a)| (k, a / norm))).ok()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn vandermonde_inverse_round_trips_rows((q, points, y) in points_and_row(7)) {
        let field = PrimeField::new(q).unwrap();
        let v = vandermonde(&EvalPoints::new(field, &points).unwrap());
        let y = CoeffVector::from_values(field, &y).unwrap();
        let there = row_vec_mul(&y, &v).unwrap();
        let back = row_vec_mul(&there, &v.invert().unwrap()).unwrap();
        prop_assert_eq!(back.values(), y.values());
        // evaluations really are the polynomial at each point
        for (j, &x) in points.iter().enumerate() {
            prop_assert_eq!(there.values()[j], y.eval(field.element(x)).unwrap().value());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matrix_then_inverse_is_identity((q, points, _) in points_and_row(5), seed in any::<u64>()) {
        let field = PrimeField::new(q).unwrap();
        let l = points.len();
        let layout = RegisterLayout::new(field, regs(l)).unwrap();
        let key: Vec<u64> = (0..l).map(|i| (seed >> (4 * i)) % q).collect();
        let other: Vec<u64> = key.iter().map(|d| (d + 1) % q).collect();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let terms = if key == other { vec![(key, Complex64::new(1.0, 0.0))] } else {
            vec![(key, Complex64::new(h, 0.0)), (other, Complex64::new(0.0, h))]
        };
        let st = SparseState::from_terms(layout, terms).unwrap();
        let v = vandermonde(&EvalPoints::new(field, &points).unwrap());
        let out = st.apply_matrix(&regs(l), &v).unwrap().apply_matrix(&regs(l), &v.invert().unwrap()).unwrap();
        prop_assert!(out.distance_up_to_phase(&st).unwrap() < 1e-12);
    }

    #[test]
    fn unitary_ops_preserve_norm(st in random_state(), scalar in 1u64..3) {
        let width = st.layout().len();
        let field = st.field();
        let mut out = st.shift_right(&regs(width)).unwrap();
        if width >= 2 {
            out = out.controlled_add(RegisterId::Local(0), RegisterId::Local(1), field.element(scalar)).unwrap();
            out = out.reorder_front(&[RegisterId::Local(1)]).unwrap();
        }
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
        prop_assert_eq!(out.len(), st.len());
    }

    #[test]
    fn reduced_states_are_valid(st in random_state()) {
        let rho = st.reduced_density(&[RegisterId::Local(0)]).unwrap();
        prop_assert!(rho.is_valid_state(1e-9));
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-9);
        prop_assert!(rho.purity() <= 1.0 + 1e-9);

        // eigenvalues against a general Hermitian eigensolver
        let d = rho.dim();
        let m = DMatrix::from_fn(d, d, |r, c| rho.get(r, c));
        let mut expected: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut got = rho.eigenvalues();
        expected.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        prop_assert_eq!(got.len(), expected.len());
        for (a, b) in got.iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-9, "{:?} vs {:?}", got, expected);
        }
    }
}
