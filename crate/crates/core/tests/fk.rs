use ising_lab::exact::Enumerator;
use ising_lab::fk::{crossing_rectangle, es_coupling_check, fk_densities, griffiths_via_fk, FkEnumerator, FkParams};
use ising_lab::mc::{Algorithm, McConfig};
use ising_lab::{BoundaryCondition, Couplings, Lattice, Topology};

fn clusters(n: usize, edges: &[(usize, usize)], mask: u64) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], x: usize) -> usize {
        if p[x] == x { x } else { let r = root(p, p[x]); p[x] = r; r }
    }
    let mut k = n;
    for (e, &(a, b)) in edges.iter().enumerate() {
        if mask >> e & 1 == 1 {
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                k -= 1;
            }
        }
    }
    k
}

#[test]
fn probabilities_match_the_random_cluster_weight() {
    let lat = Lattice::build(&[2, 3], Topology::FreeBox).unwrap();
    let (p, q) = (0.4, 1.7);
    let en = FkEnumerator::new(&lat, &FkParams::new(p, q).unwrap()).unwrap();
    let m = lat.num_edges();
    let weight = |mask: u64| {
        let o = mask.count_ones() as i32;
        p.powi(o) * (1.0 - p).powi(m as i32 - o) * q.powi(clusters(6, lat.edges(), mask) as i32)
    };
    let z: f64 = (0..1u64 << m).map(weight).sum();
    for mask in 0..1u64 << m {
        assert!((en.probability(mask) - weight(mask) / z).abs() < 1e-14);
    }
}

#[test]
fn edwards_sokal_marginals_agree() {
    let lat = Lattice::build(&[3, 3], Topology::FreeBox).unwrap();
    assert!(es_coupling_check(&lat, 0.6).unwrap() < 1e-12);
}

#[test]
fn spin_correlations_are_even_cluster_events() {
    let lat = Lattice::build(&[3, 3], Topology::FreeBox).unwrap();
    let beta = 0.45;
    let coup = Couplings::uniform(&lat, beta, 0.0).unwrap();
    let en = Enumerator::new(&lat, &coup, &BoundaryCondition::Free).unwrap();
    let (a, b) = ([0, 1], [7, 8]);
    let exact = en.correlations(&[vec![0, 1, 7, 8], a.to_vec(), b.to_vec()]).unwrap();
    let (joint, product) = griffiths_via_fk(&lat, beta, &a, &b).unwrap();
    assert!((joint - exact[0]).abs() < 1e-12);
    assert!((product - exact[1] * exact[2]).abs() < 1e-12);
    let (_, odd) = griffiths_via_fk(&lat, beta, &[0], &[8]).unwrap();
    assert_eq!(odd, 0.0);
}

#[test]
fn sampled_edge_density_matches_enumeration() {
    let lat = Lattice::build(&[3, 3], Topology::Torus).unwrap();
    let params = FkParams::new(0.5, 2.0).unwrap();
    let en = FkEnumerator::new(&lat, &params).unwrap();
    let m = lat.num_edges() as f64;
    let exact = en.expect(&|mask| mask.count_ones() as f64 / m);
    let cfg = McConfig::new(Algorithm::SwendsenWang, 2, 4000, 200, 5);
    let (density, _) = fk_densities(&lat, &params, &cfg).unwrap();
    assert!(density.z_score(exact) < 4.0, "{density:?} vs {exact}");
}

#[test]
fn ising_parametrisation_inverts() {
    for beta in [0.0, 0.2, 0.44, 1.3] {
        let params = FkParams::ising(beta).unwrap();
        assert!((params.ising_beta() - beta).abs() < 1e-14);
    }
    assert!(FkParams::new(1.2, 2.0).is_err());
    assert!(FkParams::new(0.5, 0.0).is_err());
    assert!(crossing_rectangle(0, 1.0).is_err());
}
