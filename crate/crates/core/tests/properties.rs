use handsoff::control_law::{argmax_hamiltonian_bruteforce, bang_off_bang, switching_function};
use handsoff::fixtures;
use handsoff::model::{l0_cost, off_time, DEFAULT_ZERO_TOL};
use handsoff::sim::{endpoint_exact, propagate_rk4, NonlinearDynamics};
use handsoff::{AdjointParams, AdmissibleSet, Eta, Matrix, PiecewiseConstantControl, Problem};
use proptest::prelude::*;

fn control_strategy() -> impl Strategy<Value = PiecewiseConstantControl> {
    (
        -5.0f64..5.0,
        0.1f64..10.0,
        prop::collection::vec((0.01f64..1.0, prop_oneof![Just(0.0), -1.0f64..1.0]), 1..12),
    )
        .prop_map(|(a, len, pieces)| {
            let total: f64 = pieces.iter().map(|(w, _)| w).sum();
            let mut bp = vec![a];
            let mut t = a;
            for (w, _) in &pieces {
                t += len * w / total;
                bp.push(t);
            }
            *bp.last_mut().unwrap() = a + len;
            let values = pieces.into_iter().map(|(_, v)| vec![v]).collect();
            PiecewiseConstantControl::new(bp, values).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn support_and_off_time_fill_the_horizon(u in control_strategy()) {
        let span = u.end() - u.start();
        prop_assert!((l0_cost(&u, DEFAULT_ZERO_TOL) + off_time(&u, DEFAULT_ZERO_TOL) - span).abs() <= 1e-12);
    }

    #[test]
    fn control_csv_round_trip(u in control_strategy()) {
        let back = PiecewiseConstantControl::from_csv(&u.to_csv()).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn analytic_law_inside_bruteforce_argmax(
        p1 in -2.0f64..2.0,
        p2 in -2.0f64..2.0,
        t in 0.0f64..5.0,
        normal in any::<bool>(),
    ) {
        let problem = fixtures::example2();
        let eta = if normal { Eta::Normal } else { Eta::Abnormal };
        let ap = AdjointParams::new(eta, vec![p1, p2]);
        let s = switching_function(&problem, &ap, t).unwrap();
        let cands = bang_off_bang(problem.admissible(), &s, ap.eta(), 1e-9);
        let brute = argmax_hamiltonian_bruteforce(&problem, &ap, &[0.0, 0.0], t, 2001, 1e-9).unwrap();
        for v in cands.representatives(1) {
            prop_assert!(brute.iter().any(|w| (w[0] - v[0]).abs() <= 1e-3 + 1e-12), "{:?} not in brute argmax", v);
        }
    }
}

#[test]
fn problem_json_round_trip() {
    for p in [fixtures::example1(), fixtures::example2()] {
        let back = Problem::from_json(&p.to_json()).unwrap();
        assert_eq!(back.to_json(), p.to_json());
    }
}

#[test]
fn exact_and_rk4_agree_on_a_rotation() {
    let problem = Problem::new(
        Matrix::from_row_major(2, 2, vec![0.0, 1.0, -1.0, 0.0]),
        Matrix::column(&[0.0, 1.0]),
        0.0,
        6.0,
        vec![1.0, 0.0],
        vec![0.0, 0.0],
        AdmissibleSet::symmetric_box(1, 1.0),
    )
    .unwrap();
    let u = PiecewiseConstantControl::new(vec![0.0, 1.5, 4.0, 6.0], vec![vec![1.0], vec![0.0], vec![-0.5]]).unwrap();
    let exact = endpoint_exact(&problem, &u).unwrap();
    let rk = propagate_rk4(&NonlinearDynamics::from_problem(&problem), &u, problem.initial(), 4000).unwrap();
    for (a, b) in exact.iter().zip(rk.final_state()) {
        assert!((a - b).abs() < 1e-10, "{exact:?} vs {:?}", rk.final_state());
    }
}
