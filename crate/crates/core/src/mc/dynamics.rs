//! Glauber (Metropolis single-site) and Swendsen–Wang dynamics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::UnionFind;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::model::{effective_field, BoundaryCondition, Couplings, SpinConfig};

fn mix(mut x: u64) -> u64 {
    // splitmix64 finaliser
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Random stream for one sweep of one chain. The ChaCha key depends on
/// `(seed, chain)` and the stream id is the sweep counter, so streams are
/// independent of scheduling.
pub fn sweep_rng(seed: u64, chain: u64, sweep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(chain)));
    rng.set_stream(sweep);
    rng
}

/// Spins of one Markov chain together with its position in the random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    spins: SpinConfig,
    seed: u64,
    chain: u64,
    sweep: u64,
}

impl ChainState {
    pub fn new(spins: SpinConfig, seed: u64, chain: u64) -> Self {
        ChainState { spins, seed, chain, sweep: 0 }
    }

    /// Independent uniform spins drawn from a stream reserved for
    /// initialisation.
    pub fn random(len: usize, seed: u64, chain: u64) -> Self {
        let mut rng = sweep_rng(seed, chain, u64::MAX);
        let spins = SpinConfig::from_fn(len, |_| if rng.gen::<bool>() { 1 } else { -1 });
        Self::new(spins, seed, chain)
    }

    pub fn spins(&self) -> &SpinConfig {
        &self.spins
    }

    pub fn spins_mut(&mut self) -> &mut SpinConfig {
        &mut self.spins
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chain(&self) -> u64 {
        self.chain
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweep
    }

    /// Stream for the next sweep; advances the counter.
    fn next_rng(&mut self) -> ChaCha8Rng {
        let rng = sweep_rng(self.seed, self.chain, self.sweep);
        self.sweep += 1;
        rng
    }
}

/// Metropolis flip probability: certain when `σL < 0`, else `exp(-2βσL)`.
#[inline]
pub fn glauber_flip_probability(beta: f64, spin: i8, local_field: f64) -> f64 {
    let x = spin as f64 * local_field;
    if x < 0.0 {
        1.0
    } else {
        (-2.0 * beta * x).exp()
    }
}

/// Precomputed neighbourhoods for single-site updates.
#[derive(Debug, Clone)]
pub struct Glauber {
    beta: f64,
    offsets: Vec<usize>,
    neighbours: Vec<(u32, f64)>,
    field: Vec<f64>,
}

impl Glauber {
    pub fn new(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> Result<Self> {
        let field = effective_field(lat, coup, bc)?;
        let mut offsets = Vec::with_capacity(lat.num_vertices() + 1);
        let mut neighbours = Vec::new();
        offsets.push(0);
        for v in 0..lat.num_vertices() {
            neighbours.extend(lat.incident(v).iter().map(|&(w, e)| (w as u32, coup.coupling()[e])));
            offsets.push(neighbours.len());
        }
        Ok(Glauber { beta: coup.beta(), offsets, neighbours, field })
    }

    pub fn num_vertices(&self) -> usize {
        self.field.len()
    }

    /// `Σ_y J_xy σ_y + h_x` including the boundary contribution.
    #[inline]
    pub fn local_field(&self, spins: &SpinConfig, x: usize) -> f64 {
        self.neighbours[self.offsets[x]..self.offsets[x + 1]]
            .iter()
            .map(|&(w, j)| j * spins.get(w as usize) as f64)
            .sum::<f64>()
            + self.field[x]
    }

    /// Probability that an update at `x` flips the spin.
    pub fn flip_probability(&self, spins: &SpinConfig, x: usize) -> f64 {
        glauber_flip_probability(self.beta, spins.get(x), self.local_field(spins, x))
    }

    /// `V` updates at uniformly chosen sites.
    pub fn sweep(&self, state: &mut ChainState) {
        let n = self.num_vertices();
        if n == 0 {
            return;
        }
        let mut rng = state.next_rng();
        for _ in 0..n {
            let x = rng.gen_range(0..n);
            let u: f64 = rng.gen();
            if u < self.flip_probability(&state.spins, x) {
                state.spins.flip(x);
            }
        }
    }
}

pub fn glauber_sweep(state: &mut ChainState, lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> Result<()> {
    if state.spins.len() != lat.num_vertices() {
        return Err(Error::DimensionMismatch("chain state does not match lattice".into()));
    }
    Glauber::new(lat, coup, bc)?.sweep(state);
    Ok(())
}

/// Bond probability `1 - e^{-2βJ}` of the Edwards–Sokal coupling.
#[inline]
pub fn bond_probability(beta: f64, coupling: f64) -> f64 {
    -(-2.0 * beta * coupling).exp_m1()
}

/// Swendsen–Wang sampler with reusable buffers. After each sweep the FK
/// configuration and cluster labels of that sweep are available.
#[derive(Debug, Clone)]
pub struct SwendsenWang {
    edges: Vec<(u32, u32)>,
    p_open: Vec<f64>,
    uf: UnionFind,
    open: Vec<bool>,
    labels: Vec<u32>,
    scratch: Vec<u32>,
    colours: Vec<i8>,
}

impl SwendsenWang {
    pub fn new(lat: &Lattice, coup: &Couplings) -> Result<Self> {
        coup.check_matches(lat)?;
        if !coup.has_zero_field() {
            return Err(Error::Precondition("Swendsen–Wang needs zero field".into()));
        }
        let n = lat.num_vertices();
        Ok(SwendsenWang {
            edges: lat.edges().iter().map(|&(u, v)| (u as u32, v as u32)).collect(),
            p_open: coup.coupling().iter().map(|&j| bond_probability(coup.beta(), j)).collect(),
            uf: UnionFind::new(n),
            open: vec![false; lat.num_edges()],
            labels: (0..n as u32).collect(),
            scratch: Vec::new(),
            colours: Vec::new(),
        })
    }

    pub fn sweep(&mut self, state: &mut ChainState) {
        let mut rng = state.next_rng();
        let n = state.spins.len();
        self.uf.reset(n);
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            let satisfied = state.spins.get(u as usize) == state.spins.get(v as usize);
            // a uniform is drawn only for satisfied edges
            let open = satisfied && rng.gen::<f64>() < self.p_open[e];
            self.open[e] = open;
            if open {
                self.uf.union(u as usize, v as usize);
            }
        }
        self.uf.labels_into(&mut self.labels, &mut self.scratch);
        let k = self.uf.num_sets();
        self.colours.clear();
        self.colours.extend((0..k).map(|_| if rng.gen::<bool>() { 1i8 } else { -1 }));
        for x in 0..n {
            state.spins.set(x, self.colours[self.labels[x] as usize]);
        }
    }

    pub fn open_edges(&self) -> &[bool] {
        &self.open
    }

    /// Cluster label per vertex, `0..num_clusters`, by first appearance.
    pub fn cluster_labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_clusters(&self) -> usize {
        self.uf.num_sets()
    }
}

pub fn swendsen_wang_sweep(state: &mut ChainState, lat: &Lattice, coup: &Couplings) -> Result<()> {
    if state.spins.len() != lat.num_vertices() {
        return Err(Error::DimensionMismatch("chain state does not match lattice".into()));
    }
    SwendsenWang::new(lat, coup)?.sweep(state);
    Ok(())
}

/// Row-stochastic matrix of one Glauber sweep (`V` random-site updates) on
/// the `2^V` configurations indexed by mask.
pub fn glauber_transition_matrix(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> Result<Vec<Vec<f64>>> {
    let n = lat.num_vertices();
    if n > 8 {
        return Err(Error::SizeCap("explicit transition matrices need V ≤ 8".into()));
    }
    let kernel = Glauber::new(lat, coup, bc)?;
    let states = 1usize << n;
    let mut single = vec![vec![0.0; states]; states];
    for (s, row) in single.iter_mut().enumerate() {
        let spins = SpinConfig::from_mask(n, s as u64);
        for x in 0..n {
            let p = kernel.flip_probability(&spins, x) / n as f64;
            row[s ^ (1 << x)] += p;
            row[s] += 1.0 / n as f64 - p;
        }
        if n == 0 {
            row[s] = 1.0;
        }
    }
    let mut sweep = identity(states);
    for _ in 0..n.max(1) {
        sweep = mat_mul(&sweep, &single);
    }
    Ok(sweep)
}

/// Row-stochastic matrix of one Swendsen–Wang sweep, built by summing over
/// every bond configuration on the satisfied edges and every colouring.
pub fn sw_transition_matrix(lat: &Lattice, coup: &Couplings) -> Result<Vec<Vec<f64>>> {
    let n = lat.num_vertices();
    if n > 8 || lat.num_edges() > 16 {
        return Err(Error::SizeCap("explicit transition matrices need V ≤ 8 and E ≤ 16".into()));
    }
    if !coup.has_zero_field() {
        return Err(Error::Precondition("Swendsen–Wang needs zero field".into()));
    }
    let states = 1usize << n;
    let p: Vec<f64> = coup.coupling().iter().map(|&j| bond_probability(coup.beta(), j)).collect();
    let mut matrix = vec![vec![0.0; states]; states];
    for (s, row) in matrix.iter_mut().enumerate() {
        let satisfied: Vec<usize> = lat
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, &(u, v))| (s >> u & 1) == (s >> v & 1))
            .map(|(e, _)| e)
            .collect();
        for bonds in 0u32..1 << satisfied.len() {
            let mut weight = 1.0;
            let mut uf = UnionFind::new(n);
            for (i, &e) in satisfied.iter().enumerate() {
                if bonds >> i & 1 == 1 {
                    weight *= p[e];
                    let (u, v) = lat.edge(e);
                    uf.union(u, v);
                } else {
                    weight *= 1.0 - p[e];
                }
            }
            if weight == 0.0 {
                continue;
            }
            let labels = uf.labels();
            let k = uf.num_sets();
            let share = weight / (1u64 << k) as f64;
            for colouring in 0u64..1 << k {
                let target = (0..n).fold(0usize, |m, x| m | ((colouring >> labels[x] & 1) as usize) << x);
                row[target] += share;
            }
        }
    }
    Ok(matrix)
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            let mut out = vec![0.0; n];
            for (k, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    out.iter_mut().zip(&b[k]).for_each(|(o, y)| *o += x * y);
                }
            }
            out
        })
        .collect()
}

/// `max_y |Σ_x μ(x) P(x, y) - μ(y)|`.
pub fn stationarity_defect(mu: &[f64], matrix: &[Vec<f64>]) -> f64 {
    (0..mu.len())
        .map(|y| {
            let pushed: f64 = mu.iter().zip(matrix).map(|(m, row)| m * row[y]).sum();
            (pushed - mu[y]).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Enumerator;
    use crate::lattice::Topology;

    fn all_graphs(n: usize) -> Vec<Lattice> {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        (0u32..1 << pairs.len())
            .map(|m| {
                let edges = pairs.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, &e)| e).collect();
                Lattice::from_edges(n, edges).unwrap()
            })
            .collect()
    }

    #[test]
    fn stationarity_on_every_small_graph() {
        for n in 1..=4 {
            for lat in all_graphs(n) {
                for beta in [0.3, 0.8] {
                    let coup = Couplings::uniform(&lat, beta, 0.0).unwrap();
                    let mu = Enumerator::new(&lat, &coup, &BoundaryCondition::Free).unwrap().distribution();
                    let g = glauber_transition_matrix(&lat, &coup, &BoundaryCondition::Free).unwrap();
                    let sw = sw_transition_matrix(&lat, &coup).unwrap();
                    assert!(stationarity_defect(&mu, &g) < 1e-12);
                    assert!(stationarity_defect(&mu, &sw) < 1e-12);
                    for row in g.iter().chain(&sw) {
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    }
                    // with a field, Glauber alone
                    let field = Couplings::uniform(&lat, beta, 0.3).unwrap();
                    let mu = Enumerator::new(&lat, &field, &BoundaryCondition::Free).unwrap().distribution();
                    let g = glauber_transition_matrix(&lat, &field, &BoundaryCondition::Free).unwrap();
                    assert!(stationarity_defect(&mu, &g) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_by_two_box_with_boundary() {
        let lat = Lattice::build(&[2, 2], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 0.5, 0.0).unwrap();
        for bc in [BoundaryCondition::Free, BoundaryCondition::Plus, BoundaryCondition::Dobrushin { axis: 1, level: 1, plus_above: true }] {
            let mu = Enumerator::new(&lat, &coup, &bc).unwrap().distribution();
            let g = glauber_transition_matrix(&lat, &coup, &bc).unwrap();
            assert!(stationarity_defect(&mu, &g) < 1e-12);
        }
        let mu = Enumerator::new(&lat, &coup, &BoundaryCondition::Free).unwrap().distribution();
        assert!(stationarity_defect(&mu, &sw_transition_matrix(&lat, &coup).unwrap()) < 1e-12);
    }

    #[test]
    fn the_printed_rule_without_the_spin_is_not_stationary() {
        // flipping with exp(-2β Σσ_y) regardless of σ_x (capped at 1)
        let lat = Lattice::build(&[3], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 0.7, 0.0).unwrap();
        let mu = Enumerator::new(&lat, &coup, &BoundaryCondition::Free).unwrap().distribution();
        let kernel = Glauber::new(&lat, &coup, &BoundaryCondition::Free).unwrap();
        let mut single = vec![vec![0.0; 8]; 8];
        for (s, row) in single.iter_mut().enumerate() {
            let spins = SpinConfig::from_mask(3, s as u64);
            for x in 0..3 {
                let l = kernel.local_field(&spins, x);
                let p = (-2.0 * 0.7 * l).exp().min(1.0) / 3.0;
                row[s ^ (1 << x)] += p;
                row[s] += 1.0 / 3.0 - p;
            }
        }
        assert!(stationarity_defect(&mu, &single) > 1e-3);
    }

    #[test]
    fn limiting_cases() {
        // isolated vertex always flips
        let lat = Lattice::from_edges(1, vec![]).unwrap();
        let coup = Couplings::uniform(&lat, 0.9, 0.0).unwrap();
        let kernel = Glauber::new(&lat, &coup, &BoundaryCondition::Free).unwrap();
        let mut state = ChainState::new(SpinConfig::all_plus(1), 1, 0);
        for k in 0..10 {
            kernel.sweep(&mut state);
            assert_eq!(state.spins().get(0), if k % 2 == 0 { -1 } else { 1 });
        }
        // β = 0 Swendsen–Wang opens nothing
        let lat = Lattice::build(&[4, 4], Topology::Torus).unwrap();
        let coup = Couplings::uniform(&lat, 0.0, 0.0).unwrap();
        let mut sw = SwendsenWang::new(&lat, &coup).unwrap();
        let mut state = ChainState::new(SpinConfig::all_plus(16), 3, 0);
        sw.sweep(&mut state);
        assert!(sw.open_edges().iter().all(|&o| !o));
        assert_eq!(sw.num_clusters(), 16);
        // very large β opens every satisfied edge
        let coup = Couplings::uniform(&lat, 50.0, 0.0).unwrap();
        let mut sw = SwendsenWang::new(&lat, &coup).unwrap();
        let mut state = ChainState::new(SpinConfig::all_plus(16), 3, 0);
        sw.sweep(&mut state);
        assert_eq!(sw.num_clusters(), 1);
        let s0 = state.spins().get(0);
        assert!(state.spins().iter().all(|s| s == s0));
        assert!(SwendsenWang::new(&lat, &Couplings::uniform(&lat, 0.3, 0.1).unwrap()).is_err());
    }

    #[test]
    fn spins_constant_on_clusters() {
        let lat = Lattice::build(&[6, 6], Topology::Torus).unwrap();
        let coup = Couplings::uniform(&lat, 0.44, 0.0).unwrap();
        let mut sw = SwendsenWang::new(&lat, &coup).unwrap();
        let mut state = ChainState::random(36, 11, 2);
        for _ in 0..20 {
            sw.sweep(&mut state);
            for (e, &(u, v)) in lat.edges().iter().enumerate() {
                if sw.open_edges()[e] {
                    assert_eq!(sw.cluster_labels()[u], sw.cluster_labels()[v]);
                    assert_eq!(state.spins().get(u), state.spins().get(v));
                }
            }
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let lat = Lattice::build(&[5, 5], Topology::Torus).unwrap();
        let coup = Couplings::uniform(&lat, 0.4, 0.0).unwrap();
        let run = || {
            let kernel = Glauber::new(&lat, &coup, &BoundaryCondition::Free).unwrap();
            let mut state = ChainState::random(25, 99, 4);
            for _ in 0..50 {
                kernel.sweep(&mut state);
            }
            state
        };
        assert_eq!(run(), run());
        assert_ne!(ChainState::random(25, 99, 4).spins(), ChainState::random(25, 99, 5).spins());
    }
}
