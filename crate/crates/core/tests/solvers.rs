use std::sync::Arc;

use proptest::prelude::*;
use rcm_lab::calculus::{apply_generator, VertexField};
use rcm_lab::environment::{trap_environment, ConductanceField, EnvironmentLaw};
use rcm_lab::lattice::{interior_boundary, LatticeBox, Point};
use rcm_lab::solvers::*;

fn pareto(seed: u64, b: LatticeBox) -> ConductanceField {
    EnvironmentLaw::ParetoMixture { a: 2.0, b: 3.0 }.generate(seed, b).unwrap()
}

/// Independent Bessel value: direct series in ordinary arithmetic (fine for small t).
fn bessel_series(k: u32, t: f64) -> f64 {
    let mut term = (-2.0 * t).exp() * t.powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
    let mut sum = term;
    for m in 0..200u32 {
        term *= t * t / ((m + 1) as f64 * (m + k + 1) as f64);
        sum += term;
    }
    sum
}

#[test]
fn one_dimensional_kernel_matches_bessel() {
    let b = LatticeBox::centered(1, 40);
    let w = ConductanceField::constant(b, 1.0).unwrap();
    let col = heat_kernel(&w, Point::origin(1), 1.0, &SolverConfig::default()).unwrap();
    assert!((col.value(&Point::origin(1)) - 0.308_508_3).abs() < 1e-7);
    for k in 0..10 {
        let exact = bessel_series(k, 1.0);
        assert!((col.value(&Point::new(&[k as i64])) - exact).abs() < 1e-8);
        assert!((bessel_reference(1.0, &Point::new(&[-(k as i64)])) - exact).abs() < 1e-14);
    }
}

#[test]
fn planar_kernel_matches_bessel_product() {
    let b = LatticeBox::centered(2, 45);
    let w = ConductanceField::constant(b, 1.0).unwrap();
    for &t in &[1.0, 7.5] {
        let col = heat_kernel(&w, Point::origin(2), t, &SolverConfig::default()).unwrap();
        assert!(col.leak <= 1e-12);
        for y in LatticeBox::centered(2, 5).points() {
            let exact = bessel_series(y.get(0).unsigned_abs() as u32, t) * bessel_series(y.get(1).unsigned_abs() as u32, t);
            assert!((col.value(&y) - exact).abs() < 1e-8, "t={t} y={y:?}");
        }
    }
    let col = heat_kernel(&w, Point::origin(2), 1.0, &SolverConfig::default()).unwrap();
    assert!((col.value(&Point::origin(2)) - 0.095_177_4).abs() < 1e-7);
}

#[test]
fn trap_kernel_respects_the_holding_time_bound() {
    let (n, qprime, t) = (10u32, 0.8, 100.0);
    let b = LatticeBox::centered(2, 120);
    let w = trap_environment(n, qprime, b).unwrap();
    let col = heat_kernel(&w, Point::origin(2), t, &SolverConfig::default()).unwrap();
    let bound = (-4.0 * (n as f64).powf(-2.0 / qprime) * t).exp();
    assert!((bound - 0.28226).abs() < 1e-5);
    assert!(col.value(&Point::origin(2)) >= bound);
}

#[test]
fn kernel_is_symmetric_and_conserves_mass() {
    let b = LatticeBox::centered(2, 10);
    let w = pareto(5, b);
    let cfg = SolverConfig { max_leak: 0.5, ..SolverConfig::default() };
    let sources = [Point::new(&[0, 0]), Point::new(&[2, -1]), Point::new(&[-3, 3])];
    let cols = heat_kernels(&w, &sources, 1.3, &cfg).unwrap();
    for col in &cols {
        assert!((col.mass() + col.leak - 1.0).abs() <= 1e-10);
        assert!(col.values.values().iter().all(|&v| v >= 0.0));
    }
    for (i, a) in cols.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            let gap = a.value(&sources[j]) - c.value(&sources[i]);
            assert!(gap.abs() <= 1e-10);
        }
    }
}

#[test]
fn chapman_kolmogorov() {
    let b = LatticeBox::centered(2, 10);
    let w = pareto(11, b);
    let cfg = SolverConfig { max_leak: 0.5, ..SolverConfig::default() };
    let x = Point::new(&[1, 0]);
    let half = heat_kernel(&w, x, 0.5, &cfg).unwrap();
    let full = heat_kernel(&w, x, 1.0, &cfg).unwrap();
    // sum_z p_.5(x,z) p_.5(z,.) is the evolution of p_.5(x,.) for another half unit.
    let composed = evolve(&w, &half.values, 0.5, &cfg).unwrap();
    for (a, c) in full.values.values().iter().zip(composed.field.values()) {
        assert!((a - c).abs() <= 1e-8);
    }
}

/// Classical RK4 for du/dt = L u using the pointwise generator.
fn rk4(w: &ConductanceField, u0: &VertexField, t: f64, h: f64) -> Vec<f64> {
    let b = *w.ambient();
    let set = u0.domain().clone();
    let deriv = |u: &[f64]| -> Vec<f64> {
        let f = VertexField::new(set.clone(), u.to_vec()).unwrap();
        b.points()
            .map(|x| if b.is_interior(&x) { apply_generator(w, &f, &x).unwrap() } else { 0.0 })
            .collect()
    };
    let steps = (t / h).ceil() as usize;
    let h = t / steps as f64;
    let mut u = u0.values().to_vec();
    for _ in 0..steps {
        let k1 = deriv(&u);
        let k2 = deriv(&u.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect::<Vec<_>>());
        let k3 = deriv(&u.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect::<Vec<_>>());
        let k4 = deriv(&u.iter().zip(&k3).map(|(a, k)| a + h * k).collect::<Vec<_>>());
        for i in 0..u.len() {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    u
}

#[test]
fn evolve_agrees_with_runge_kutta() {
    let b = LatticeBox::centered(2, 5);
    let w = pareto(2, b);
    let rate = BoxOperator::new(&w).unwrap().rate();
    let set = Arc::new(b.to_set());
    let u0 = VertexField::from_fn(set, |p| {
        if b.is_interior(p) {
            ((p.get(0) * 3 + p.get(1)) as f64).sin()
        } else {
            0.0
        }
    });
    let cfg = SolverConfig { max_leak: 0.9, ..SolverConfig::default() };
    let t = 0.8;
    let ev = evolve(&w, &u0, t, &cfg).unwrap();
    let reference = rk4(&w, &u0, t, 1.0 / (8.0 * rate));
    for (a, c) in ev.field.values().iter().zip(&reference) {
        assert!((a - c).abs() <= 1e-7);
    }
}

#[test]
fn leak_is_enforced_and_grown_boxes_meet_it() {
    let law = EnvironmentLaw::ParetoMixture { a: 2.0, b: 2.0 };
    let cfg = SolverConfig { radius: 4, ..SolverConfig::default() };
    let (cols, w) = heat_kernel_in_law(&law, 1, 2, Point::origin(2), &[2.0], &cfg).unwrap();
    assert!(w.ambient().radius() > 4);
    assert!(cols[0].leak <= 1e-12);
}

fn boundary_indices(region: &LatticeBox) -> Vec<usize> {
    let bd = interior_boundary(&region.to_set());
    bd.points().iter().map(|p| region.index_of(p).unwrap()).collect()
}

#[test]
fn caloric_constant_data_stays_constant() {
    let region = LatticeBox::centered(2, 6);
    let w = pareto(8, LatticeBox::centered(2, 8));
    let m = boundary_indices(&region).len();
    let lateral = LateralData::constant(0.0, 4.0, vec![2.5; m]);
    let sol = solve_caloric_ibvp(&w, &region, &[0.0, 1.0, 2.0, 4.0], &lateral, &vec![2.5; region.len()], &SolverConfig::default()).unwrap();
    assert!(sol.field.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
    assert!(sol.residual <= 1e-10);
}

#[test]
fn harmonic_constant_data() {
    let region = LatticeBox::centered(3, 3);
    let w = pareto(1, region);
    let m = boundary_indices(&region).len();
    let sol = solve_harmonic(&w, &region, &vec![-1.25; m]).unwrap();
    assert!(sol.field.values().iter().all(|v| (v + 1.25).abs() < 1e-10));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn caloric_solutions_obey_the_maximum_principle(seed in 0u64..10_000, radius in 2u32..6, knots in 2usize..5) {
        let region = LatticeBox::centered(2, radius);
        let w = pareto(seed, region);
        let bidx = boundary_indices(&region);
        let mut rng = rcm_lab::rng::stream(seed, 7);
        use rand::Rng;
        let times: Vec<f64> = (0..=knots).map(|k| k as f64 * 0.75).collect();
        let values: Vec<Vec<f64>> = times.iter().map(|_| bidx.iter().map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let initial: Vec<f64> = (0..region.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lateral = LateralData { knots: times.clone(), values: values.clone() };
        let stored: Vec<f64> = (0..=4 * knots).map(|k| k as f64 * 0.1875).collect();
        let sol = solve_caloric_ibvp(&w, &region, &stored, &lateral, &initial, &SolverConfig::default()).unwrap();
        prop_assert!(sol.residual <= 1e-10);
        let mut hi = values.iter().flatten().copied().fold(f64::MIN, f64::max);
        let mut lo = values.iter().flatten().copied().fold(f64::MAX, f64::min);
        for (i, v) in initial.iter().enumerate() {
            if !bidx.contains(&i) {
                hi = hi.max(*v);
                lo = lo.min(*v);
            }
        }
        for v in sol.field.values() {
            prop_assert!(*v <= hi + 1e-12 && *v >= lo - 1e-12);
        }
    }

    #[test]
    fn harmonic_residual_on_random_data(seed in 0u64..10_000, radius in 2u32..7) {
        let region = LatticeBox::new(Point::new(&[1, 2]), radius);
        let w = pareto(seed, LatticeBox::new(Point::new(&[1, 2]), radius + 1));
        let m = boundary_indices(&region).len();
        let data: Vec<f64> = (0..m).map(|k| rcm_lab::rng::unit_open(rcm_lab::rng::hash_words(seed, &[k as u64])) * 10.0 - 5.0).collect();
        let sol = solve_harmonic(&w, &region, &data).unwrap();
        prop_assert!(sol.residual <= 1e-10);
    }
}
