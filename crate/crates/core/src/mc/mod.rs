//! Markov-chain Monte Carlo: Glauber and Swendsen–Wang dynamics, binned
//! error analysis and observable estimation.
//!
//! Every chain draws from its own counter-based stream keyed by
//! `(seed, chain, sweep)`, and chain results are merged in chain order, so
//! estimates are bit-identical for any number of worker threads.

pub mod correlations;
pub mod dynamics;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::model::{effective_field, BoundaryCondition, Couplings, SpinConfig};

pub use correlations::{
    correlation_length_fit, gaussianity_diagnostic, torus_correlations, DecayFit, TorusCorrelationConfig,
    TorusCorrelations,
};
pub use dynamics::{
    bond_probability, glauber_flip_probability, glauber_sweep, glauber_transition_matrix, stationarity_defect,
    sw_transition_matrix, swendsen_wang_sweep, sweep_rng, ChainState, Glauber, SwendsenWang,
};
pub use stats::{jackknife, Estimate, EstimatorAccumulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Glauber,
    SwendsenWang,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Glauber => "glauber",
            Algorithm::SwendsenWang => "sw",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glauber" => Ok(Algorithm::Glauber),
            "sw" | "swendsen-wang" => Ok(Algorithm::SwendsenWang),
            _ => Err(Error::Parse(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Run length and seeding of a set of independent chains. `sweeps` counts
/// all sweeps including the first `burnin`, which are discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub algorithm: Algorithm,
    pub chains: usize,
    pub sweeps: usize,
    pub burnin: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(algorithm: Algorithm, chains: usize, sweeps: usize, burnin: usize, seed: u64) -> Self {
        McConfig { algorithm, chains, sweeps, burnin, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidParameter("at least one chain is required".into()));
        }
        if self.sweeps <= self.burnin {
            return Err(Error::InvalidParameter(format!(
                "sweeps ({}) must exceed burn-in ({})",
                self.sweeps, self.burnin
            )));
        }
        Ok(())
    }

    pub fn samples_per_chain(&self) -> usize {
        self.sweeps - self.burnin
    }
}

/// What a sampler exposes to a measurement after each sweep.
pub struct Sample<'a> {
    pub spins: &'a SpinConfig,
    /// Cluster labels of the Swendsen–Wang bond configuration that produced
    /// `spins`, when that algorithm is used.
    pub clusters: Option<&'a [u32]>,
}

enum Kernel {
    Glauber(Glauber),
    Sw(SwendsenWang),
}

/// Runs every chain of `cfg` and hands each post-burn-in sample to
/// `measure`. Per-chain accumulators are returned in chain order.
pub fn run_chains<T, I, M>(
    lat: &Lattice,
    coup: &Couplings,
    bc: &BoundaryCondition,
    cfg: &McConfig,
    init: I,
    measure: M,
) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> T + Sync,
    M: Fn(&mut T, &Sample<'_>) + Sync,
{
    cfg.validate()?;
    let kernel = match cfg.algorithm {
        Algorithm::Glauber => Kernel::Glauber(Glauber::new(lat, coup, bc)?),
        Algorithm::SwendsenWang => {
            if effective_field(lat, coup, bc)?.iter().any(|&h| h != 0.0) {
                return Err(Error::Precondition(
                    "Swendsen–Wang needs zero field and free boundary".into(),
                ));
            }
            Kernel::Sw(SwendsenWang::new(lat, coup)?)
        }
    };
    let n = lat.num_vertices();
    let chains = (0..cfg.chains as u64)
        .into_par_iter()
        .map(|chain| {
            let mut state = ChainState::random(n, cfg.seed, chain);
            let mut acc = init();
            match &kernel {
                Kernel::Glauber(g) => {
                    for s in 0..cfg.sweeps {
                        g.sweep(&mut state);
                        if s >= cfg.burnin {
                            measure(&mut acc, &Sample { spins: state.spins(), clusters: None });
                        }
                    }
                }
                Kernel::Sw(sw) => {
                    let mut sw = sw.clone();
                    for s in 0..cfg.sweeps {
                        sw.sweep(&mut state);
                        if s >= cfg.burnin {
                            measure(&mut acc, &Sample { spins: state.spins(), clusters: Some(sw.cluster_labels()) });
                        }
                    }
                }
            }
            acc
        })
        .collect();
    Ok(chains)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    /// `Σσ / V`.
    Magnetization,
    /// `|Σσ| / V`.
    AbsMagnetization,
    /// `H / |E|`, boundary and field terms included.
    Energy,
    /// `β² (⟨H²⟩ - ⟨H⟩²) / V`.
    SpecificHeat,
    /// `(⟨M²⟩ - ⟨M⟩²) / V`.
    Susceptibility,
    /// `⟨σ_origin σ_t⟩` for each target.
    TwoPoint { origin: usize, targets: Vec<usize> },
    /// Connected `⟨ε_a ε_b⟩ - ⟨ε_a⟩⟨ε_b⟩` for each pair of edges, with
    /// `ε_e = σ_u σ_v`.
    EnergyCorrelation { pairs: Vec<(usize, usize)> },
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::Magnetization => "magnetization",
            Observable::AbsMagnetization => "abs-magnetization",
            Observable::Energy => "energy",
            Observable::SpecificHeat => "specific-heat",
            Observable::Susceptibility => "susceptibility",
            Observable::TwoPoint { .. } => "two-point",
            Observable::EnergyCorrelation { .. } => "energy-correlation",
        }
    }

    fn validate(&self, lat: &Lattice) -> Result<()> {
        let n = lat.num_vertices();
        match self {
            Observable::TwoPoint { origin, targets } => {
                if let Some(&bad) = std::iter::once(origin).chain(targets).find(|&&v| v >= n) {
                    return Err(Error::InvalidVertex(bad));
                }
            }
            Observable::EnergyCorrelation { pairs } => {
                if pairs.iter().any(|&(a, b)| a >= lat.num_edges() || b >= lat.num_edges()) {
                    return Err(Error::InvalidParameter("edge index out of range".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Estimates of `obs` (one entry per target or pair for the list
/// observables). Two-point functions use the cluster estimator
/// `1[x ↔ y]` under Swendsen–Wang.
pub fn run_estimate(
    obs: &Observable,
    lat: &Lattice,
    coup: &Couplings,
    bc: &BoundaryCondition,
    cfg: &McConfig,
) -> Result<Vec<Estimate>> {
    obs.validate(lat)?;
    coup.check_matches(lat)?;
    let field = effective_field(lat, coup, bc)?;
    let v = lat.num_vertices() as f64;
    let num_edges = lat.num_edges().max(1) as f64;
    let energy = |s: &SpinConfig| crate::model::energy_with_field(lat, coup.coupling(), &field, s);
    let eps = |s: &SpinConfig, e: usize| {
        let (a, b) = lat.edge(e);
        (s.get(a) * s.get(b)) as f64
    };

    // series layout per observable
    let width = match obs {
        Observable::Magnetization | Observable::AbsMagnetization | Observable::Energy => 1,
        Observable::SpecificHeat | Observable::Susceptibility => 2,
        Observable::TwoPoint { targets, .. } => targets.len(),
        Observable::EnergyCorrelation { pairs } => 3 * pairs.len(),
    };
    let per_chain = run_chains(
        lat,
        coup,
        bc,
        cfg,
        || vec![Vec::new(); width],
        |acc: &mut Vec<Vec<f64>>, sample| {
            let s = sample.spins;
            match obs {
                Observable::Magnetization => acc[0].push(s.magnetization() as f64 / v),
                Observable::AbsMagnetization => acc[0].push((s.magnetization() as f64).abs() / v),
                Observable::Energy => acc[0].push(energy(s) / num_edges),
                Observable::SpecificHeat => {
                    let h = energy(s);
                    acc[0].push(h);
                    acc[1].push(h * h);
                }
                Observable::Susceptibility => {
                    let m = s.magnetization() as f64;
                    acc[0].push(m);
                    acc[1].push(m * m);
                }
                Observable::TwoPoint { origin, targets } => {
                    for (k, &t) in targets.iter().enumerate() {
                        let x = match sample.clusters {
                            Some(labels) => f64::from(u8::from(labels[*origin] == labels[t])),
                            None => (s.get(*origin) * s.get(t)) as f64,
                        };
                        acc[k].push(x);
                    }
                }
                Observable::EnergyCorrelation { pairs } => {
                    for (k, &(a, b)) in pairs.iter().enumerate() {
                        let (ea, eb) = (eps(s, a), eps(s, b));
                        acc[3 * k].push(ea * eb);
                        acc[3 * k + 1].push(ea);
                        acc[3 * k + 2].push(eb);
                    }
                }
            }
        },
    )?;

    let mut series = vec![EstimatorAccumulator::new(); width];
    for chain in per_chain {
        for (acc, xs) in series.iter_mut().zip(chain) {
            acc.start_chain();
            xs.into_iter().for_each(|x| acc.push(x));
        }
    }
    let beta = coup.beta();
    match obs {
        Observable::SpecificHeat => {
            Ok(vec![jackknife(&[&series[0], &series[1]], |m| beta * beta * (m[1] - m[0] * m[0]) / v)?])
        }
        Observable::Susceptibility => Ok(vec![jackknife(&[&series[0], &series[1]], |m| (m[1] - m[0] * m[0]) / v)?]),
        Observable::EnergyCorrelation { pairs } => (0..pairs.len())
            .map(|k| jackknife(&[&series[3 * k], &series[3 * k + 1], &series[3 * k + 2]], |m| m[0] - m[1] * m[2]))
            .collect(),
        _ => series.iter().map(EstimatorAccumulator::estimate).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Enumerator;
    use crate::lattice::Topology;

    #[test]
    fn config_validation() {
        assert!(McConfig::new(Algorithm::Glauber, 0, 10, 1, 0).validate().is_err());
        assert!(McConfig::new(Algorithm::Glauber, 1, 10, 10, 0).validate().is_err());
        assert!(McConfig::new(Algorithm::Glauber, 1, 11, 10, 0).validate().is_ok());
        assert_eq!("sw".parse::<Algorithm>().unwrap(), Algorithm::SwendsenWang);
        assert!("heat-bath".parse::<Algorithm>().is_err());
    }

    #[test]
    fn infinite_temperature_magnetization() {
        let lat = Lattice::build(&[8, 8], Topology::Torus).unwrap();
        let coup = Couplings::uniform(&lat, 0.0, 0.0).unwrap();
        let cfg = McConfig::new(Algorithm::Glauber, 2, 2100, 100, 5);
        let m = run_estimate(&Observable::Magnetization, &lat, &coup, &BoundaryCondition::Free, &cfg).unwrap()[0];
        // 4000 samples of 64 independent spins
        let sd = 1.0 / (4000.0f64 * 64.0).sqrt();
        assert!(m.mean.abs() < 4.0 * sd);
        assert!((m.stderr / sd - 1.0).abs() < 0.5);
    }

    #[test]
    fn two_point_matches_enumeration_on_small_box() {
        let lat = Lattice::build(&[3, 3], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 0.4, 0.0).unwrap();
        let targets: Vec<usize> = (1..9).collect();
        let exact = Enumerator::new(&lat, &coup, &BoundaryCondition::Free)
            .unwrap()
            .correlations(&targets.iter().map(|&t| vec![0, t]).collect::<Vec<_>>())
            .unwrap();
        let obs = Observable::TwoPoint { origin: 0, targets };
        for algo in [Algorithm::Glauber, Algorithm::SwendsenWang] {
            let cfg = McConfig::new(algo, 4, 5000, 200, 17);
            let est = run_estimate(&obs, &lat, &coup, &BoundaryCondition::Free, &cfg).unwrap();
            for (e, x) in est.iter().zip(&exact) {
                assert!(e.z_score(*x) < 3.5, "{algo}: {e:?} vs {x}");
            }
        }
    }

    #[test]
    fn susceptibility_and_specific_heat_match_enumeration() {
        let lat = Lattice::build(&[3, 4], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 0.35, 0.0).unwrap();
        let en = Enumerator::new(&lat, &coup, &BoundaryCondition::Free).unwrap();
        let chi: f64 = en.two_point_matrix().iter().flatten().sum::<f64>() / 12.0;
        let h = |m: u64| en.energy(m);
        let h2 = |m: u64| en.energy(m).powi(2);
        let (_, moments) = en.expectations(&[&h, &h2]);
        let cv = 0.35f64.powi(2) * (moments[1] - moments[0].powi(2)) / 12.0;
        let cfg = McConfig::new(Algorithm::SwendsenWang, 4, 6000, 200, 3);
        let est = run_estimate(&Observable::Susceptibility, &lat, &coup, &BoundaryCondition::Free, &cfg).unwrap()[0];
        assert!(est.z_score(chi) < 3.5, "{est:?} vs {chi}");
        let est = run_estimate(&Observable::SpecificHeat, &lat, &coup, &BoundaryCondition::Free, &cfg).unwrap()[0];
        assert!(est.z_score(cv) < 3.5, "{est:?} vs {cv}");
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let lat = Lattice::build(&[6, 6], Topology::Torus).unwrap();
        let coup = Couplings::uniform(&lat, 0.4, 0.0).unwrap();
        let cfg = McConfig::new(Algorithm::SwendsenWang, 5, 300, 20, 42);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_estimate(&Observable::Energy, &lat, &coup, &BoundaryCondition::Free, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a[0].mean.to_bits(), b[0].mean.to_bits());
        assert_eq!(a[0].stderr.to_bits(), b[0].stderr.to_bits());
    }

    #[test]
    fn sw_rejects_field_and_boundary() {
        let lat = Lattice::build(&[3, 3], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 0.4, 0.0).unwrap();
        let cfg = McConfig::new(Algorithm::SwendsenWang, 1, 40, 0, 1);
        assert!(run_estimate(&Observable::Energy, &lat, &coup, &BoundaryCondition::Plus, &cfg).is_err());
        let obs = Observable::TwoPoint { origin: 0, targets: vec![99] };
        assert!(run_estimate(&obs, &lat, &coup, &BoundaryCondition::Free, &cfg).is_err());
    }
}
