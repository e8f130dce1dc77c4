use ising_lab::currents::{switching_check, ursell4, CurrentModel, TotalCurrent};
use ising_lab::exact::Enumerator;
use ising_lab::{BoundaryCondition, Couplings, Lattice, Topology};
use proptest::prelude::*;

fn exact_correlation(lat: &Lattice, beta: f64, set: &[usize]) -> f64 {
    let coup = Couplings::uniform(lat, beta, 0.0).unwrap();
    Enumerator::new(lat, &coup, &BoundaryCondition::Free).unwrap().correlations(&[set.to_vec()]).unwrap()[0]
}

#[test]
fn current_ratio_reproduces_spin_correlations() {
    let lat = Lattice::build(&[2, 3], Topology::FreeBox).unwrap();
    let model = CurrentModel::uniform(&lat, 0.4).unwrap();
    for set in [vec![0, 5], vec![1, 2], vec![0, 1, 2, 3]] {
        let c = model.correlation(&set, 14).unwrap();
        let exact = exact_correlation(&lat, 0.4, &set);
        assert!((c.value - exact).abs() <= c.tail_bound + 1e-12, "{set:?}: {c:?} vs {exact}");
    }
}

#[test]
fn odd_source_sets_carry_no_current() {
    let lat = Lattice::build(&[2, 2], Topology::FreeBox).unwrap();
    let model = CurrentModel::uniform(&lat, 0.7).unwrap();
    assert_eq!(model.current_sum(&[0], 10).unwrap().value, 0.0);
}

#[test]
fn switching_holds_on_a_triangle() {
    let lat = Lattice::from_edges(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
    let model = CurrentModel::uniform(&lat, 0.5).unwrap();
    let r = switching_check(&model, &[0, 1], &[1, 2], TotalCurrent::Any, 10).unwrap();
    assert!(r.within_bound(), "{r:?}");
}

#[test]
fn ursell_function_is_non_positive() {
    let lat = Lattice::from_edges(4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
    for beta in [0.0, 0.3, 0.8] {
        let model = CurrentModel::uniform(&lat, beta).unwrap();
        let u = ursell4(&model, [0, 1, 2, 3], 12).unwrap();
        assert!(u.value <= 1e-14, "beta {beta}: {u:?}");
        assert!(u.residual <= u.bound, "beta {beta}: {u:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn truncated_sums_increase_towards_the_limit(beta in 0.05f64..0.9) {
        let lat = Lattice::build(&[2, 2], Topology::FreeBox).unwrap();
        let model = CurrentModel::uniform(&lat, beta).unwrap();
        let exact = exact_correlation(&lat, beta, &[0, 3]);
        let mut last = f64::NEG_INFINITY;
        for nmax in [4, 8, 16] {
            let s = model.current_sum(&[0, 3], nmax).unwrap().value;
            prop_assert!(s >= last);
            last = s;
        }
        let c = model.correlation(&[0, 3], 16).unwrap();
        prop_assert!((c.value - exact).abs() <= c.tail_bound + 1e-12);
    }
}
