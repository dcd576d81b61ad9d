use magsplit::advection::{compute_departure_points, evaluate_direct, evaluate_local_interp, evaluate_nfft, DeparturePoints};
use magsplit::diagnostics::{fit_order, mass};
use magsplit::gauge::PotentialSet;
use magsplit::nfft::{NfftConfig, NfftPlan};
use magsplit::potential::{potential_step, PotentialStepConfig};
use magsplit::spectral::{kinetic_step, to_physical, to_spectral, WaveField};
use magsplit::{Domain, Grid};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (1usize..=3, -3.0f64..3.0, 0.5f64..6.0)
        .prop_flat_map(|(d, lo, len)| {
            (proptest::collection::vec(1usize..=4, d).prop_map(|e| e.iter().map(|k| 2 * k).collect::<Vec<_>>()), Just(lo), Just(len))
        })
        .prop_map(|(sizes, lo, len)| Grid::new(Domain::cube(sizes.len(), lo, lo + len).unwrap(), sizes).unwrap())
}

fn field_strategy() -> impl Strategy<Value = WaveField> {
    grid_strategy().prop_flat_map(|g| {
        let n = g.len();
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(move |v| {
            WaveField::new(g.clone(), v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()).unwrap()
        })
    })
}

fn max_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn smooth_potentials(dim: usize, amp: f64, shift: f64) -> PotentialSet {
    PotentialSet::time_independent(
        dim,
        move |x| amp * x.iter().map(|c| (c + shift).sin()).sum::<f64>(),
        move |x, out| {
            for (o, c) in out.iter_mut().zip(x) {
                *o = amp * (c - shift).cos();
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn transform_round_trip_and_parseval(u in field_strategy()) {
        let spec = to_spectral(&u);
        let back = to_physical(&spec);
        let m = mass(&u);
        let coeff_mass: f64 = spec.coeffs().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((coeff_mass - m).abs() <= 1e-12 * (1.0 + m));
        prop_assert!(max_gap(u.values(), back.values()) <= 1e-12);
    }

    #[test]
    fn kinetic_flow_is_unitary_and_a_semigroup(u in field_strategy(), t1 in 0.0f64..5.0, t2 in 0.0f64..5.0, eps in 0.01f64..=1.0) {
        let s = to_spectral(&u);
        let one = kinetic_step(&kinetic_step(&s, t1, eps).unwrap(), t2, eps).unwrap();
        let both = kinetic_step(&s, t1 + t2, eps).unwrap();
        let m = mass(&u);
        prop_assert!((mass(&to_physical(&one)) - m).abs() <= 1e-12 * (1.0 + m));
        prop_assert!(max_gap(one.coeffs(), both.coeffs()) <= 1e-9);
    }

    #[test]
    fn potential_flow_is_unitary_and_a_semigroup(u in field_strategy(), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0, amp in -3.0f64..3.0) {
        let pot = smooth_potentials(u.grid().dim(), amp, 0.3);
        let cfg = PotentialStepConfig::divergence_free(0.5);
        let once = potential_step(&potential_step(&u, t1, 0.0, &pot, &cfg).unwrap(), t2, t1, &pot, &cfg).unwrap();
        let both = potential_step(&u, t1 + t2, 0.0, &pot, &cfg).unwrap();
        let m = mass(&u);
        prop_assert!((mass(&once) - m).abs() <= 1e-12 * (1.0 + m));
        prop_assert!(max_gap(once.values(), both.values()) <= 1e-10);
    }

    #[test]
    fn zero_step_flows_are_identities(u in field_strategy()) {
        let pot = smooth_potentials(u.grid().dim(), 1.0, 0.0);
        let v = potential_step(&u, 0.0, 0.0, &pot, &PotentialStepConfig::divergence_free(1.0)).unwrap();
        prop_assert_eq!(v.values(), u.values());
        let s = to_spectral(&u);
        let k = kinetic_step(&s, 0.0, 1.0).unwrap();
        prop_assert_eq!(k.coeffs(), s.coeffs());
        let at = DeparturePoints::at_grid(u.grid());
        prop_assert!(max_gap(&evaluate_direct(&s, &at).unwrap(), u.values()) <= 1e-12);
        prop_assert!(max_gap(&evaluate_local_interp(&u, &at, 2).unwrap(), u.values()) <= 1e-12);
    }

    #[test]
    fn interpolation_reproduces_low_degree_polynomials(
        half in 1usize..=4,
        coeffs in proptest::collection::vec(-1.0f64..1.0, 8),
        feet in proptest::collection::vec(-12.0f64..12.0, 64),
    ) {
        let p = 2 * half;
        let grid = Grid::uniform(Domain::cube(1, -20.0, 20.0).unwrap(), 64).unwrap();
        let poly = |x: f64| coeffs[..p].iter().rev().fold(0.0, |acc, c| acc * (x / 10.0) + c);
        let u = WaveField::from_fn(grid.clone(), |x| Complex64::new(poly(x[0]), -poly(x[0]))).unwrap();
        let pts = DeparturePoints::from_feet(&grid, feet.clone(), 0.1).unwrap();
        let out = evaluate_local_interp(&u, &pts, p).unwrap();
        for (v, x) in out.iter().zip(&feet) {
            let want = poly(*x);
            prop_assert!((v.re - want).abs() <= 1e-11 * (1.0 + want.abs()));
            prop_assert!((v.im + want).abs() <= 1e-11 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn constant_field_feet_are_shifted_grid_points(g in grid_strategy(), c in proptest::collection::vec(-3.0f64..3.0, 3), tau in 1e-4f64..2.0) {
        let d = g.dim();
        let cc = c[..d].to_vec();
        let cv = cc.clone();
        let a = PotentialSet::time_independent(d, |_| 0.0, move |_, out| out.copy_from_slice(&cv));
        let pts = compute_departure_points(&g, &a, 0.0, tau, 16).unwrap();
        for (x, raw) in g.points().chunks_exact(d).zip(pts.raw_feet().chunks_exact(d)) {
            for i in 0..d {
                prop_assert!((raw[i] - (x[i] + tau * cc[i])).abs() <= 1e-12 * (1.0 + x[i].abs() + tau));
            }
        }
    }

    #[test]
    fn wrap_lands_in_box_and_is_idempotent(g in grid_strategy(), shifts in proptest::collection::vec(-50.0f64..50.0, 3)) {
        let dom = g.domain();
        let d = g.dim();
        let w = dom.wrap(&shifts[..d]).unwrap();
        prop_assert_eq!(dom.wrap(&w).unwrap(), w.clone());
        for i in 0..d {
            prop_assert!(w[i] >= dom.lo()[i] && w[i] < dom.hi()[i]);
            let periods = (shifts[i] - w[i]) / dom.length(i);
            prop_assert!((periods - periods.round()).abs() <= 1e-9);
        }
    }

    #[test]
    fn fit_order_ignores_constants_and_recovers_slopes(
        order in 0.5f64..4.0,
        scale in 1e-6f64..1e6,
        tau0 in 1e-3f64..1.0,
        n in 3usize..7,
    ) {
        let base: Vec<(f64, f64)> = (0..n).map(|i| {
            let t = tau0 / 2f64.powi(i as i32);
            (t, t.powf(order))
        }).collect();
        let scaled: Vec<(f64, f64)> = base.iter().map(|&(t, e)| (t, scale * e)).collect();
        let a = fit_order(&base).unwrap();
        let b = fit_order(&scaled).unwrap();
        prop_assert!((a - order).abs() <= 1e-9);
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn nfft_agrees_with_direct_summation(u in field_strategy(), raw in proptest::collection::vec(-10.0f64..10.0, 3 * 512)) {
        let g = u.grid().clone();
        let d = g.dim();
        let feet: Vec<f64> = raw[..g.len() * d].to_vec();
        let pts = DeparturePoints::from_feet(&g, feet, 0.1).unwrap();
        let spec = to_spectral(&u);
        let plan = NfftPlan::for_grid(&g, pts.feet(), &NfftConfig::default()).unwrap();
        let fast = evaluate_nfft(&spec, &pts, &plan).unwrap();
        let slow = evaluate_direct(&spec, &pts).unwrap();
        let scale = spec.coeffs().iter().map(|c| c.norm()).sum::<f64>() / g.domain().volume().sqrt();
        prop_assert!(max_gap(&fast, &slow) <= 1e-9 * (1.0 + scale));
    }

    #[test]
    fn nyquist_removal_is_idempotent_and_keeps_paired_modes(u in field_strategy()) {
        let s = to_spectral(&u);
        let mut once = s.clone();
        once.remove_nyquist();
        let mut twice = once.clone();
        twice.remove_nyquist();
        prop_assert_eq!(once.coeffs(), twice.coeffs());
        let sizes = u.grid().sizes().to_vec();
        for j in 0..s.coeffs().len() {
            let k = s.wavenumber_at(j);
            let unpaired = k.0.iter().zip(&sizes).any(|(&ki, &n)| ki == -((n / 2) as i64));
            let want = if unpaired { Complex64::new(0.0, 0.0) } else { s.coeffs()[j] };
            prop_assert_eq!(once.coeffs()[j], want);
        }
    }
}
