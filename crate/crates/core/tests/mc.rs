use ising_lab::exact::Enumerator;
use ising_lab::mc::{run_estimate, Algorithm, McConfig, Observable};
use ising_lab::{BoundaryCondition, Couplings, Lattice, Topology};

fn brute_force_mean(lat: &Lattice, beta: f64, f: impl Fn(&[i8]) -> f64) -> f64 {
    let n = lat.num_vertices();
    let (mut z, mut acc) = (0.0, 0.0);
    for mask in 0u64..(1 << n) {
        let s: Vec<i8> = (0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect();
        let e: f64 = lat.edges().iter().map(|&(a, b)| (s[a] * s[b]) as f64).sum();
        let w = (beta * e).exp();
        z += w;
        acc += w * f(&s);
    }
    acc / z
}

#[test]
fn samplers_reproduce_exact_energy_on_a_small_torus() {
    let lat = Lattice::build(&[3, 3], Topology::Torus).unwrap();
    let beta = 0.35;
    let coup = Couplings::uniform(&lat, beta, 0.0).unwrap();
    let exact = brute_force_mean(&lat, beta, |s| {
        -lat.edges().iter().map(|&(a, b)| (s[a] * s[b]) as f64).sum::<f64>() / lat.num_edges() as f64
    });
    for algo in [Algorithm::Glauber, Algorithm::SwendsenWang] {
        let cfg = McConfig::new(algo, 2, 6000, 500, 11);
        let est = run_estimate(&Observable::Energy, &lat, &coup, &BoundaryCondition::Free, &cfg).unwrap();
        assert!(est[0].z_score(exact) < 4.0, "{algo:?}: {:?} vs {exact}", est[0]);
    }
}

#[test]
fn two_point_cluster_estimator_matches_enumeration() {
    let lat = Lattice::build(&[4, 3], Topology::FreeBox).unwrap();
    let coup = Couplings::uniform(&lat, 0.5, 0.0).unwrap();
    let targets = vec![1, 5, 11];
    let exact = Enumerator::new(&lat, &coup, &BoundaryCondition::Free)
        .unwrap()
        .correlations(&targets.iter().map(|&t| vec![0, t]).collect::<Vec<_>>())
        .unwrap();
    let cfg = McConfig::new(Algorithm::SwendsenWang, 2, 5000, 200, 3);
    let est = run_estimate(&Observable::TwoPoint { origin: 0, targets }, &lat, &coup, &BoundaryCondition::Free, &cfg).unwrap();
    for (e, x) in est.iter().zip(&exact) {
        assert!(e.z_score(*x) < 4.0, "{e:?} vs {x}");
    }
}

#[test]
fn estimates_are_deterministic_given_the_seed() {
    let lat = Lattice::build(&[6, 6], Topology::Torus).unwrap();
    let coup = Couplings::uniform(&lat, 0.4, 0.0).unwrap();
    let cfg = McConfig::new(Algorithm::SwendsenWang, 3, 300, 50, 99);
    let run = || run_estimate(&Observable::AbsMagnetization, &lat, &coup, &BoundaryCondition::Free, &cfg).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn invalid_configurations_are_rejected() {
    let lat = Lattice::build(&[3, 3], Topology::Torus).unwrap();
    let coup = Couplings::uniform(&lat, 0.4, 0.0).unwrap();
    let bad_vertex = Observable::TwoPoint { origin: 0, targets: vec![9] };
    let cfg = McConfig::new(Algorithm::Glauber, 1, 100, 10, 1);
    assert!(run_estimate(&bad_vertex, &lat, &coup, &BoundaryCondition::Free, &cfg).is_err());
    let short = McConfig::new(Algorithm::Glauber, 1, 12, 10, 1);
    assert!(run_estimate(&Observable::Energy, &lat, &coup, &BoundaryCondition::Free, &short).unwrap_err().is_numerical());
}
