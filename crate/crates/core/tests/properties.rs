use fermi::format::num;
use fermi::impact::{divided_difference, gs_step, step_backward, step_forward, ImpactState, SolverConfig};
use fermi::linear::{cycle_matrix_at, cycle_matrix_reversed, family_trace_formula, impact_matrix, scan_family};
use fermi::{build_n2_schedule, derivative_bound, family_coefficients, true_max_derivative, FamilyParams, TrigPoly2};
use proptest::prelude::*;

fn family(s: f64, g: f64) -> TrigPoly2<f64> {
    family_coefficients(&FamilyParams::new(s, g).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coefficients_scale_with_gravity(s in -0.05f64..0.05, g in 0.1f64..10.0) {
        let one = family(s, g).coefficients();
        let two = family(s, 2.0 * g).coefficients();
        for (a, b) in one.iter().zip(&two) {
            prop_assert!((b - 2.0 * a).abs() <= 1e-14 * g);
        }
    }

    #[test]
    fn coefficients_affine_in_s(s in -0.05f64..0.05) {
        let (c0, c1, cs) = (family(0.0, 1.0).coefficients(), family(1.0, 1.0).coefficients(), family(s, 1.0).coefficients());
        for i in 0..4 {
            prop_assert!((cs[i] - (c0[i] + s * (c1[i] - c0[i]))).abs() <= 1e-14);
        }
    }

    #[test]
    fn bound_is_gravity_free_and_dominates(s in -0.05f64..0.05, g in 0.1f64..10.0) {
        let b1 = derivative_bound(&FamilyParams::new(s, 1.0).unwrap()).unwrap();
        let bg = derivative_bound(&FamilyParams::new(s, g).unwrap()).unwrap();
        prop_assert!((b1 - bg).abs() <= 1e-14);
        prop_assert!(true_max_derivative(&family(s, g)) <= g * b1 * (1.0 + 1e-12));
    }

    #[test]
    fn impact_matrices_are_unimodular(s in -0.05f64..0.05, t in -3.0f64..3.0, g in 0.1f64..10.0) {
        let a = impact_matrix(&family(s, g), &t, &g);
        prop_assert!((a.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_trace_is_cyclic_and_closed_form(s in -0.05f64..0.05, k in 1u64..200) {
        let g = 1.0;
        let f = family(s, g);
        let sched = build_n2_schedule(&g, k).unwrap();
        let a = cycle_matrix_at(&f, &sched, &g);
        let b = cycle_matrix_reversed(&f, &sched, &g);
        prop_assert!((a.det() - 1.0).abs() < 1e-10);
        prop_assert!((a.trace() - b.trace()).abs() < 1e-10 * a.trace().abs().max(1.0));
        let formula = family_trace_formula(f.second(&sched.t_star[0]) / g, f.second(&sched.t_star[1]) / g);
        prop_assert!((a.trace() - formula).abs() < 1e-9 * formula.abs().max(1.0));
    }

    #[test]
    fn hyperbolicity_does_not_depend_on_gravity(s in -0.05f64..0.05, g in 0.1f64..10.0) {
        let r1 = scan_family(&[s], 1.0, 20).unwrap();
        let rg = scan_family(&[s], g, 20).unwrap();
        prop_assert_eq!(r1[0].hyperbolic, rg[0].hyperbolic);
        prop_assert!((r1[0].trace - rg[0].trace).abs() < 1e-9 * r1[0].trace.abs().max(1.0));
    }

    #[test]
    fn forward_step_solves_the_impact_equations(s in -0.05f64..0.05, t in 0.0f64..1.0, v in 2.0f64..60.0) {
        let g = 1.0;
        let f = family(s, g);
        let cfg = SolverConfig::for_racket(&f, &g);
        let x = ImpactState::new(t, v);
        let y = step_forward(&f, &x, &cfg, &g).unwrap();
        let dd = divided_difference(&f, &y.t, &x.t);
        prop_assert!((y.t - t - 2.0 * v / g + 2.0 * dd / g).abs() < 1e-9 * y.t.abs().max(1.0));
        prop_assert!((y.v - v - 2.0 * f.first(&y.t) + 2.0 * dd).abs() < 1e-9 * v);
        let z = step_backward(&f, &y, &cfg, &g).unwrap();
        prop_assert!((z.t - t).abs() < 1e-8 && (z.v - v).abs() < 1e-8 * v);
    }

    #[test]
    fn standard_map_approximates_the_full_map(s in -0.05f64..0.05, t in 0.0f64..1.0, v in 2.0f64..60.0) {
        let g = 1.0;
        let f = family(s, g);
        let cfg = SolverConfig::for_racket(&f, &g);
        let x = ImpactState::new(t, v);
        let full = step_forward(&f, &x, &cfg, &g).unwrap();
        let gs = gs_step(&f, &x, &g);
        let amp = f.coefficients().iter().map(|c| c.abs()).sum::<f64>();
        prop_assert!((full.t - gs.t).abs() <= 2.0 * 2.0 * amp / (g * (2.0 * v / g - 4.0 * amp / g)) + 1e-12);
    }

    #[test]
    fn below_threshold_near_the_optimum(ds in -0.002f64..0.002, g in 0.1f64..10.0) {
        let f = family(fermi::OPTIMAL_S + ds, g);
        prop_assert!(true_max_derivative(&f) < g / 4.0);
    }

    #[test]
    fn printed_numbers_keep_fifteen_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = num(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-15 * x.abs());
    }
}
