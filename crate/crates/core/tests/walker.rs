use proptest::prelude::*;
use rcm_lab::environment::{ConductanceField, EnvironmentLaw};
use rcm_lab::lattice::{LatticeBox, Point};
use rcm_lab::solvers::{heat_kernel, SolverConfig};
use rcm_lab::walker::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_are_nearest_neighbour_and_reproducible(seed in any::<u64>(), index in 0u64..1000, horizon in 0.0f64..50.0) {
        let w = EnvironmentLaw::ParetoMixture { a: 2.0, b: 1.0 }.generate(seed, LatticeBox::centered(2, 6)).unwrap();
        let path = sample_path(&w, Point::origin(2), horizon, seed, index).unwrap();
        prop_assert!(path.is_valid());
        prop_assert!(path.jump_times.windows(2).all(|t| t[0] < t[1]));
        prop_assert!(path.jump_times.iter().all(|&t| t <= horizon));
        let again = sample_path(&w, Point::origin(2), horizon, seed, index).unwrap();
        prop_assert_eq!(path.jump_times, again.jump_times);
        prop_assert_eq!(path.vertices, again.vertices);
    }
}

#[test]
fn histogram_is_close_to_the_solver_kernel() {
    let b = LatticeBox::centered(2, walk_radius(2.0, 1.0));
    let w = ConductanceField::constant(b, 1.0).unwrap();
    let emp = empirical_kernel(&w, Point::origin(2), 2.0, 100_000, 7).unwrap();
    let col = heat_kernel(&w, Point::origin(2), 2.0, &SolverConfig::default()).unwrap();
    assert_eq!(emp.truncated, 0);
    assert!(!emp.warning);
    let mass: f64 = emp.probabilities.values().iter().sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(emp.total_variation(&col) < 0.03, "{}", emp.total_variation(&col));
    // Entries lie within a few binomial standard errors of the exact kernel.
    for y in LatticeBox::centered(2, 2).points() {
        let se = emp.standard_error(&y).max(1e-4);
        assert!((emp.probabilities.get(&y).unwrap() - col.value(&y)).abs() < 6.0 * se, "{y:?}");
        assert!(emp.standard_error(&y) <= (emp.probabilities.get(&y).unwrap() / 1e5).sqrt() + 1e-18);
    }
}

#[test]
fn small_boxes_truncate_and_warn() {
    let w = ConductanceField::constant(LatticeBox::centered(1, 2), 1.0).unwrap();
    let emp = empirical_kernel(&w, Point::origin(1), 20.0, 1000, 1).unwrap();
    assert!(emp.warning && emp.truncated > 10);
    let kept: f64 = emp.probabilities.values().iter().sum();
    assert!((kept - (1.0 - emp.truncated_fraction())).abs() < 1e-12);
}

#[test]
fn zero_time_histogram_is_a_delta() {
    let w = ConductanceField::constant(LatticeBox::centered(2, 3), 1.0).unwrap();
    let x0 = Point::new(&[1, -2]);
    let emp = empirical_kernel(&w, x0, 0.0, 50, 3).unwrap();
    assert_eq!(emp.probabilities.get(&x0), Some(1.0));
}
