//! Spatial Markov property by double enumeration.

use super::enumerate::Enumerator;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::model::{effective_field, BoundaryCondition, Couplings, SpinConfig};

/// Largest graph accepted by [`spatial_markov_check`].
pub const MAX_MARKOV_VERTICES: usize = 20;

/// Total-variation distance between `μ_G[· | σ = τ off W]` (obtained by
/// filtering the full enumeration of `G`) and the measure on the induced
/// graph `W` with boundary condition `τ` (obtained by enumerating `W` with
/// the outside spins folded into the field).
pub fn spatial_markov_check(
    lat: &Lattice,
    coup: &Couplings,
    bc: &BoundaryCondition,
    window: &[usize],
    tau: &SpinConfig,
) -> Result<f64> {
    let n = lat.num_vertices();
    if n > MAX_MARKOV_VERTICES {
        return Err(Error::SizeCap(format!("spatial Markov check needs at most {MAX_MARKOV_VERTICES} vertices")));
    }
    if tau.len() != n {
        return Err(Error::DimensionMismatch("τ must assign every vertex".into()));
    }
    if window.is_empty() {
        return Err(Error::InvalidParameter("window must be non-empty".into()));
    }
    let mut inside = vec![false; n];
    for &w in window {
        if w >= n {
            return Err(Error::InvalidVertex(w));
        }
        if inside[w] {
            return Err(Error::InvalidParameter(format!("vertex {w} repeated in window")));
        }
        inside[w] = true;
    }

    // conditional law from the full graph
    let full = Enumerator::new(lat, coup, bc)?;
    let window_mask: u64 = window.iter().fold(0, |m, &w| m | 1 << w);
    let tau_mask = tau.to_mask();
    let outside_tau = tau_mask & !window_mask;
    let local_index = |mask: u64| -> usize {
        window.iter().enumerate().fold(0, |acc, (i, &w)| acc | (((mask >> w) & 1) as usize) << i)
    };
    let dist = full.distribution();
    let mut conditional = vec![0.0; 1 << window.len()];
    for (mask, &p) in dist.iter().enumerate() {
        let mask = mask as u64;
        if mask & !window_mask == outside_tau {
            conditional[local_index(mask)] += p;
        }
    }
    let mass: f64 = conditional.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Precondition("conditioning event has zero probability".into()));
    }
    conditional.iter_mut().for_each(|p| *p /= mass);

    // measure on the window with τ as boundary condition
    let (sub, origin) = lat.induced(window);
    let base_field = effective_field(lat, coup, bc)?;
    let mut field: Vec<f64> = window.iter().map(|&w| base_field[w]).collect();
    for (&(u, v), &j) in lat.edges().iter().zip(coup.coupling()) {
        match (inside[u], inside[v]) {
            (true, false) => field[window.iter().position(|&w| w == u).unwrap()] += j * tau.get(v) as f64,
            (false, true) => field[window.iter().position(|&w| w == v).unwrap()] += j * tau.get(u) as f64,
            _ => {}
        }
    }
    let sub_coupling: Vec<f64> = origin.iter().map(|&e| coup.coupling()[e]).collect();
    let local = Enumerator::from_raw(&sub, coup.beta(), &sub_coupling, &field)?.distribution();

    Ok(0.5 * conditional.iter().zip(&local).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Topology;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn whole_graph_window() {
        let lat = Lattice::build(&[3, 3], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 0.6, 0.1).unwrap();
        let all: Vec<usize> = (0..9).collect();
        let d = spatial_markov_check(&lat, &coup, &BoundaryCondition::Plus, &all, &SpinConfig::all_minus(9)).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn centre_vertex_any_tau() {
        let lat = Lattice::build(&[3, 3], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 0.8, 0.0).unwrap();
        for mask in (0u64..512).step_by(37) {
            let tau = SpinConfig::from_mask(9, mask);
            let d = spatial_markov_check(&lat, &coup, &BoundaryCondition::Free, &[4], &tau).unwrap();
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn column_random_tau() {
        let lat = Lattice::build(&[2, 3], Topology::FreeBox).unwrap();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let beta = rng.gen_range(0.1..1.5);
            let h: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let coup = Couplings::new(beta, h, vec![1.0; lat.num_edges()]).unwrap();
            let tau = SpinConfig::from_mask(6, rng.gen::<u64>() & 63);
            // column x = 1 is vertices 3, 4, 5
            let d = spatial_markov_check(&lat, &coup, &BoundaryCondition::Minus, &[3, 4, 5], &tau).unwrap();
            assert!(d < 1e-12, "seed {seed}: {d}");
        }
    }

    #[test]
    fn path_middle_and_bad_windows() {
        let lat = Lattice::build(&[3], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 1.0, 0.0).unwrap();
        let tau = SpinConfig::all_plus(3);
        let d = spatial_markov_check(&lat, &coup, &BoundaryCondition::Free, &[1], &tau).unwrap();
        assert!(d < 1e-12);
        assert!(spatial_markov_check(&lat, &coup, &BoundaryCondition::Free, &[], &tau).is_err());
        assert!(spatial_markov_check(&lat, &coup, &BoundaryCondition::Free, &[5], &tau).is_err());
    }
}
