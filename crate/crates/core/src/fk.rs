//! FK (random-cluster) percolation, the Edwards–Sokal coupling to the
//! Ising model, order checks by enumeration and crossing probabilities.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cluster::UnionFind;
use crate::error::{Error, Result};
use crate::exact::Enumerator;
use crate::lattice::{Lattice, Topology};
use crate::mc::stats::{Estimate, EstimatorAccumulator};
use crate::mc::{run_chains, sweep_rng, ChainState, McConfig, SwendsenWang};
use crate::model::{BoundaryCondition, Couplings, SpinConfig};

/// Largest edge count for exhaustive sums over FK configurations.
pub const MAX_FK_EDGES: usize = 24;
/// Largest edge count for the exhaustive monotonicity scan of an event.
pub const MAX_MONOTONE_SCAN_EDGES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkParams {
    pub p: f64,
    pub q: f64,
}

impl FkParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p must lie in [0, 1], got {p}")));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
        }
        Ok(FkParams { p, q })
    }

    /// `p = 1 - e^{-2β}`, `q = 2`.
    pub fn ising(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        Self::new(-(-2.0 * beta).exp_m1(), 2.0)
    }

    /// Inverse temperature coupled to `p` at `q = 2`.
    pub fn ising_beta(&self) -> f64 {
        -0.5 * (-self.p).ln_1p()
    }
}

/// Open/closed edge labels with their cluster decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkConfig {
    open: Vec<bool>,
    labels: Vec<u32>,
    clusters: usize,
}

impl FkConfig {
    pub fn new(lat: &Lattice, open: Vec<bool>) -> Result<Self> {
        if open.len() != lat.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "{} edge labels for {} edges",
                open.len(),
                lat.num_edges()
            )));
        }
        let (labels, clusters) = label_clusters(lat, &open);
        Ok(FkConfig { open, labels, clusters })
    }

    /// Edge `e` is open when bit `e` of `mask` is set.
    pub fn from_mask(lat: &Lattice, mask: u64) -> Result<Self> {
        if lat.num_edges() > 64 {
            return Err(Error::SizeCap("masks hold at most 64 edges".into()));
        }
        Self::new(lat, (0..lat.num_edges()).map(|e| mask >> e & 1 == 1).collect())
    }

    pub fn open(&self) -> &[bool] {
        &self.open
    }

    pub fn num_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    /// Clusters including isolated vertices.
    pub fn num_clusters(&self) -> usize {
        self.clusters
    }

    /// Cluster label per vertex, `0..num_clusters` by first appearance.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn connected(&self, x: usize, y: usize) -> bool {
        self.labels[x] == self.labels[y]
    }

    /// Cluster count recomputed from scratch.
    pub fn recount(&self, lat: &Lattice) -> usize {
        label_clusters(lat, &self.open).1
    }
}

fn label_clusters(lat: &Lattice, open: &[bool]) -> (Vec<u32>, usize) {
    let mut uf = UnionFind::new(lat.num_vertices());
    for (&(u, v), _) in lat.edges().iter().zip(open).filter(|(_, &o)| o) {
        uf.union(u, v);
    }
    let mut labels = Vec::new();
    uf.labels_into(&mut labels, &mut Vec::new());
    (labels, uf.num_sets())
}

/// Every cluster contains an even number of the vertices of `set`
/// (repeated vertices cancel).
pub fn even_event(labels: &[u32], set: &[usize]) -> bool {
    let mut odd: Vec<u32> = Vec::with_capacity(set.len());
    for &v in set {
        let l = labels[v];
        match odd.iter().position(|&o| o == l) {
            Some(i) => {
                odd.swap_remove(i);
            }
            None => odd.push(l),
        }
    }
    odd.is_empty()
}

/// `|ω| ln p + (|E| - |ω|) ln(1 - p) + k(ω) ln q`; `-∞` for configurations
/// of zero weight at `p ∈ {0, 1}`.
pub fn fk_log_weight(omega: &FkConfig, params: &FkParams) -> f64 {
    let open = omega.num_open() as f64;
    let closed = (omega.open.len() - omega.num_open()) as f64;
    let term = |count: f64, prob: f64| if count == 0.0 { 0.0 } else { count * prob.ln() };
    term(open, params.p) + term(closed, 1.0 - params.p) + omega.num_clusters() as f64 * params.q.ln()
}

/// Exact FK measure on a small graph, configurations indexed by edge mask.
#[derive(Debug, Clone)]
pub struct FkEnumerator {
    edges: Vec<(usize, usize)>,
    num_vertices: usize,
    log_weights: Vec<f64>,
    log_norm: f64,
}

impl FkEnumerator {
    pub fn new(lat: &Lattice, params: &FkParams) -> Result<Self> {
        let m = lat.num_edges();
        if m > MAX_FK_EDGES {
            return Err(Error::SizeCap(format!("FK enumeration needs at most {MAX_FK_EDGES} edges, got {m}")));
        }
        let n = lat.num_vertices();
        let mut uf = UnionFind::new(n);
        let (lp, lq) = (params.p.ln(), (-params.p).ln_1p());
        let lnq = params.q.ln();
        let log_weights: Vec<f64> = (0u64..1 << m)
            .map(|mask| {
                uf.reset(n);
                for e in 0..m {
                    if mask >> e & 1 == 1 {
                        uf.union(lat.edge(e).0, lat.edge(e).1);
                    }
                }
                let open = mask.count_ones() as f64;
                let closed = m as f64 - open;
                let a = if open == 0.0 { 0.0 } else { open * lp };
                let b = if closed == 0.0 { 0.0 } else { closed * lq };
                a + b + uf.num_sets() as f64 * lnq
            })
            .collect();
        let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + log_weights.iter().map(|w| (w - max).exp()).sum::<f64>().ln();
        Ok(FkEnumerator { edges: lat.edges().to_vec(), num_vertices: n, log_weights, log_norm })
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn probability(&self, mask: u64) -> f64 {
        (self.log_weights[mask as usize] - self.log_norm).exp()
    }

    /// Cluster labels of a configuration.
    pub fn labels(&self, mask: u64) -> Vec<u32> {
        let mut uf = UnionFind::new(self.num_vertices);
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(u, v);
            }
        }
        let mut out = Vec::new();
        uf.labels_into(&mut out, &mut Vec::new());
        out
    }

    /// `φ[f]` for a function of the edge mask.
    pub fn expect(&self, f: &dyn Fn(u64) -> f64) -> f64 {
        (0u64..self.log_weights.len() as u64).map(|m| self.probability(m) * f(m)).sum()
    }

    /// `φ[f_k]` for functions of the cluster labels, one pass.
    pub fn expect_cluster(&self, fs: &[&dyn Fn(&[u32]) -> f64]) -> Vec<f64> {
        let mut out = vec![0.0; fs.len()];
        for m in 0u64..self.log_weights.len() as u64 {
            let p = self.probability(m);
            let labels = self.labels(m);
            for (o, f) in out.iter_mut().zip(fs) {
                *o += p * f(&labels);
            }
        }
        out
    }

    /// Law of the cluster count, indexed by `k`.
    pub fn cluster_count_distribution(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vertices + 1];
        for m in 0u64..self.log_weights.len() as u64 {
            let k = self.labels(m).iter().max().map_or(0, |&l| l as usize + 1);
            out[k] += self.probability(m);
        }
        out
    }
}

/// Maximum of `|⟨σ_A⟩ - φ[F_A]|` over all pairs and all four-point sets of
/// vertices, with `p = 1 - e^{-2β}`, `q = 2` and `F_A` the event that every
/// cluster holds an even number of points of `A`.
pub fn es_coupling_check(lat: &Lattice, beta: f64) -> Result<f64> {
    if lat.num_edges() > 20 {
        return Err(Error::SizeCap(format!("the coupling check needs at most 20 edges, got {}", lat.num_edges())));
    }
    let n = lat.num_vertices();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            sets.push(vec![a, b]);
            for c in b + 1..n {
                for d in c + 1..n {
                    sets.push(vec![a, b, c, d]);
                }
            }
        }
    }
    if sets.is_empty() {
        return Ok(0.0);
    }
    let coup = Couplings::uniform(lat, beta, 0.0)?;
    let spin = Enumerator::new(lat, &coup, &BoundaryCondition::Free)?.correlations(&sets)?;
    let fk = FkEnumerator::new(lat, &FkParams::ising(beta)?)?;
    let events: Vec<Box<dyn Fn(&[u32]) -> f64>> = sets
        .iter()
        .map(|s| {
            let s = s.clone();
            Box::new(move |l: &[u32]| f64::from(u8::from(even_event(l, &s)))) as Box<dyn Fn(&[u32]) -> f64>
        })
        .collect();
    let refs: Vec<&dyn Fn(&[u32]) -> f64> = events.iter().map(|b| b.as_ref()).collect();
    let graphical = fk.expect_cluster(&refs);
    Ok(spin.iter().zip(&graphical).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `(⟨σ_{AΔB}⟩, ⟨σ_A⟩⟨σ_B⟩)` computed through the FK events
/// `φ[F_{AΔB}]` and `φ[F_A]φ[F_B]`.
pub fn griffiths_via_fk(lat: &Lattice, beta: f64, a: &[usize], b: &[usize]) -> Result<(f64, f64)> {
    if let Some(&v) = a.iter().chain(b).find(|&&v| v >= lat.num_vertices()) {
        return Err(Error::InvalidVertex(v));
    }
    let fk = FkEnumerator::new(lat, &FkParams::ising(beta)?)?;
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let fa = |l: &[u32]| f64::from(u8::from(even_event(l, a)));
    let fb = |l: &[u32]| f64::from(u8::from(even_event(l, b)));
    let fab = |l: &[u32]| f64::from(u8::from(even_event(l, &ab)));
    let v = fk.expect_cluster(&[&fab, &fa, &fb]);
    Ok((v[0], v[1] * v[2]))
}

/// Edwards–Sokal colouring: one uniform sign per cluster, drawn in label
/// order.
pub fn edwards_sokal_spins<R: Rng + ?Sized>(omega: &FkConfig, rng: &mut R) -> SpinConfig {
    let colours: Vec<i8> = (0..omega.num_clusters()).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    SpinConfig::from_fn(omega.labels.len(), |x| colours[omega.labels[x] as usize])
}

fn check_q2(params: &FkParams) -> Result<()> {
    if params.q != 2.0 {
        return Err(Error::MethodInapplicable(format!(
            "FK sampling goes through the Ising coupling and needs q = 2, got {}",
            params.q
        )));
    }
    Ok(())
}

/// FK configuration after `sweeps` Swendsen–Wang sweeps of one chain: the
/// bond configuration drawn from the spins of the last sweep.
pub fn fk_sample(lat: &Lattice, params: &FkParams, sweeps: usize, seed: u64) -> Result<FkConfig> {
    check_q2(params)?;
    if sweeps == 0 {
        return Err(Error::InvalidParameter("at least one sweep is needed".into()));
    }
    if params.p == 1.0 {
        return FkConfig::new(lat, vec![true; lat.num_edges()]);
    }
    let coup = Couplings::uniform(lat, params.ising_beta(), 0.0)?;
    let mut sw = SwendsenWang::new(lat, &coup)?;
    let mut state = ChainState::random(lat.num_vertices(), seed, 0);
    for _ in 0..sweeps {
        sw.sweep(&mut state);
    }
    FkConfig::new(lat, sw.open_edges().to_vec())
}

/// Edwards–Sokal spins for an FK sample, reproducible from `seed`.
pub fn fk_sample_with_spins(lat: &Lattice, params: &FkParams, sweeps: usize, seed: u64) -> Result<(FkConfig, SpinConfig)> {
    let omega = fk_sample(lat, params, sweeps, seed)?;
    let spins = edwards_sokal_spins(&omega, &mut sweep_rng(seed, 1, sweeps as u64));
    Ok((omega, spins))
}

/// Runs `cfg` chains of the FK sampler and measures each sample's cluster
/// labels (the FK clusters coincide with the Swendsen–Wang clusters).
pub fn fk_run<T, I, M>(lat: &Lattice, params: &FkParams, cfg: &McConfig, init: I, measure: M) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> T + Sync,
    M: Fn(&mut T, &[u32]) + Sync,
{
    check_q2(params)?;
    cfg.validate()?;
    if params.p == 1.0 {
        let all = FkConfig::new(lat, vec![true; lat.num_edges()])?;
        return Ok((0..cfg.chains)
            .map(|_| {
                let mut acc = init();
                for _ in 0..cfg.samples_per_chain() {
                    measure(&mut acc, all.labels());
                }
                acc
            })
            .collect());
    }
    let coup = Couplings::uniform(lat, params.ising_beta(), 0.0)?;
    let mcfg = McConfig { algorithm: crate::mc::Algorithm::SwendsenWang, ..*cfg };
    run_chains(lat, &coup, &BoundaryCondition::Free, &mcfg, init, |acc, sample| {
        measure(acc, sample.clusters.expect("Swendsen–Wang exposes clusters"))
    })
}

fn series_estimate(per_chain: Vec<Vec<f64>>) -> Result<Estimate> {
    let mut acc = EstimatorAccumulator::new();
    for chain in per_chain {
        acc.start_chain();
        chain.into_iter().for_each(|x| acc.push(x));
    }
    acc.estimate()
}

/// Estimates of the open-edge density and the clusters per vertex. The
/// density uses the cluster estimator of `P[σ_u = σ_v]`.
pub fn fk_densities(lat: &Lattice, params: &FkParams, cfg: &McConfig) -> Result<(Estimate, Estimate)> {
    check_q2(params)?;
    let n = lat.num_vertices() as f64;
    let m = lat.num_edges().max(1) as f64;
    let edges = lat.edges().to_vec();
    let p = params.p;
    let per_chain = fk_run(lat, params, cfg, Vec::new, |acc: &mut Vec<(f64, f64)>, labels| {
        let k = labels.iter().max().map_or(0, |&l| l as usize + 1) as f64;
        let inside = edges.iter().filter(|&&(u, v)| labels[u] == labels[v]).count() as f64;
        acc.push((inside, k));
    })?;
    // E|ω| = p · E[#{σ_u = σ_v}] and P[σ_u = σ_v] = (1 + φ[u ↔ v]) / 2
    let open: Vec<Vec<f64>> = per_chain
        .iter()
        .map(|c| c.iter().map(|&(inside, _)| p * 0.5 * (m + inside) / m).collect())
        .collect();
    let clusters: Vec<Vec<f64>> = per_chain.iter().map(|c| c.iter().map(|&(_, k)| k / n).collect()).collect();
    Ok((series_estimate(open)?, series_estimate(clusters)?))
}

/// Chi-square goodness-of-fit p-value of observed counts against expected
/// probabilities. Cells with expected count below 5 are pooled.
pub fn chi_square_p_value(observed: &[u64], expected: &[f64]) -> Result<f64> {
    if observed.len() != expected.len() {
        return Err(Error::DimensionMismatch("histogram lengths differ".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientSamples("empty histogram".into()));
    }
    let norm: f64 = expected.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut po, mut pe) = (0.0, 0.0);
    let mut order: Vec<usize> = (0..observed.len()).collect();
    order.sort_by(|&a, &b| expected[b].total_cmp(&expected[a]));
    for i in order {
        let e = expected[i] / norm * total as f64;
        let o = observed[i] as f64;
        if e >= 5.0 {
            cells.push((o, e));
        } else {
            po += o;
            pe += e;
        }
    }
    if pe > 0.0 || po > 0.0 {
        if pe >= 5.0 || cells.is_empty() {
            cells.push((po, pe));
        } else {
            let last = cells.last_mut().expect("nonempty");
            last.0 += po;
            last.1 += pe;
        }
    }
    if cells.len() < 2 {
        return Ok(1.0);
    }
    let stat: f64 = cells.iter().map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else { 0.0 }).sum();
    let dist = ChiSquared::new((cells.len() - 1) as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(1.0 - dist.cdf(stat))
}

/// Which stochastic order is checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OrderCheck {
    /// `φ[fg] ≥ φ[f]φ[g]`.
    Fkg,
    /// `φ_{p'}[f] ≥ φ_p[f]` for `p' = p_higher ≥ p`.
    PMonotone { p_higher: f64 },
}

/// Verifies by exhaustive scan that `f` is increasing in the edge mask.
pub fn is_increasing(num_edges: usize, f: &dyn Fn(u64) -> f64) -> Result<bool> {
    if num_edges > MAX_MONOTONE_SCAN_EDGES {
        return Err(Error::SizeCap(format!(
            "monotonicity scan needs at most {MAX_MONOTONE_SCAN_EDGES} edges, got {num_edges}"
        )));
    }
    let values: Vec<f64> = (0u64..1 << num_edges).map(f).collect();
    Ok((0..1usize << num_edges)
        .all(|m| (0..num_edges).all(|e| m >> e & 1 == 1 || values[m | 1 << e] >= values[m])))
}

/// `max(0, RHS - LHS)` of the requested order inequality, both sides by
/// enumeration. `g` is unused for the p-monotonicity check.
pub fn fk_order_check(
    kind: OrderCheck,
    lat: &Lattice,
    params: &FkParams,
    f: &dyn Fn(u64) -> f64,
    g: &dyn Fn(u64) -> f64,
) -> Result<f64> {
    if params.q < 1.0 {
        return Err(Error::Precondition(format!("order inequalities need q >= 1, got {}", params.q)));
    }
    let m = lat.num_edges();
    if !is_increasing(m, f)? {
        return Err(Error::Precondition("f is not increasing".into()));
    }
    let fk = FkEnumerator::new(lat, params)?;
    match kind {
        OrderCheck::Fkg => {
            if !is_increasing(m, g)? {
                return Err(Error::Precondition("g is not increasing".into()));
            }
            let fg = fk.expect(&|w| f(w) * g(w));
            Ok((fk.expect(f) * fk.expect(g) - fg).max(0.0))
        }
        OrderCheck::PMonotone { p_higher } => {
            if p_higher < params.p {
                return Err(Error::InvalidParameter("p' must be at least p".into()));
            }
            let hi = FkEnumerator::new(lat, &FkParams::new(p_higher, params.q)?)?;
            Ok((fk.expect(f) - hi.expect(f)).max(0.0))
        }
    }
}

/// Self-dual point of the FK model at `q = 2`, `√2 / (1 + √2)`.
pub fn self_dual_p() -> f64 {
    std::f64::consts::SQRT_2 / (1.0 + std::f64::consts::SQRT_2)
}

/// Vertex columns and rows of the rectangle `[0, ρn] × [0, n]`.
pub fn crossing_rectangle(n: usize, rho: f64) -> Result<Lattice> {
    if n == 0 || !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter("crossing needs n >= 1 and ρ > 0".into()));
    }
    let width = (rho * n as f64).round() as usize;
    if width == 0 {
        return Err(Error::InvalidParameter("rectangle width rounds to zero".into()));
    }
    Lattice::build(&[width + 1, n + 1], Topology::FreeBox)
}

/// Some cluster touches both the left (`x = 0`) and right (`x = ρn`)
/// sides; the first coordinate is horizontal.
pub fn crosses(lat: &Lattice, labels: &[u32]) -> bool {
    let (w, h) = (lat.sides()[0], lat.sides()[1]);
    let mut left = vec![false; labels.len()];
    for y in 0..h {
        left[labels[lat.index(&[0, y])] as usize] = true;
    }
    (0..h).any(|y| left[labels[lat.index(&[w - 1, y])] as usize])
}

/// Left–right crossing probability of `[0, ρn] × [0, n]` under the free
/// FK measure at `q = 2`.
pub fn crossing_probability(n: usize, rho: f64, p: f64, mc: &McConfig) -> Result<Estimate> {
    let lat = crossing_rectangle(n, rho)?;
    let params = FkParams::new(p, 2.0)?;
    let per_chain = fk_run(&lat, &params, mc, Vec::new, |acc: &mut Vec<f64>, labels| {
        acc.push(f64::from(u8::from(crosses(&lat, labels))));
    })?;
    series_estimate(per_chain)
}

/// Crossing probabilities of the wide (`2n × n`) and tall (`n × 2n`)
/// rectangles and the smallest `C` with `P_wide ≥ P_tall^C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RswReport {
    pub wide: Estimate,
    pub tall: Estimate,
    pub exponent: f64,
}

pub fn rsw_report(n: usize, p: f64, mc: &McConfig) -> Result<RswReport> {
    let wide = crossing_probability(n, 2.0, p, mc)?;
    let tall = crossing_probability(n, 0.5, p, mc)?;
    let exponent = if tall.mean <= 0.0 || wide.mean <= 0.0 {
        f64::INFINITY
    } else if tall.mean >= 1.0 {
        0.0
    } else {
        wide.mean.ln() / tall.mean.ln()
    };
    Ok(RswReport { wide, tall, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::Algorithm;

    fn edge() -> Lattice {
        Lattice::from_edges(2, vec![(0, 1)]).unwrap()
    }

    #[test]
    fn log_weight_of_extremes() {
        let lat = Lattice::build(&[2, 2], Topology::FreeBox).unwrap();
        let params = FkParams::new(0.3, 1.7).unwrap();
        let empty = FkConfig::from_mask(&lat, 0).unwrap();
        assert_eq!(empty.num_clusters(), 4);
        let want = 4.0 * 0.7f64.ln() + 4.0 * 1.7f64.ln();
        assert!((fk_log_weight(&empty, &params) - want).abs() < 1e-14);
        let full = FkConfig::from_mask(&lat, 0b1111).unwrap();
        assert_eq!(full.num_clusters(), 1);
        assert_eq!(full.recount(&lat), 1);
        assert_eq!(fk_log_weight(&empty, &FkParams::new(1.0, 2.0).unwrap()), f64::NEG_INFINITY);
    }

    #[test]
    fn bernoulli_at_unit_cluster_weight() {
        let lat = Lattice::build(&[2, 3], Topology::FreeBox).unwrap();
        let fk = FkEnumerator::new(&lat, &FkParams::new(0.3, 1.0).unwrap()).unwrap();
        for mask in [0u64, 5, 17, 127] {
            let k = mask.count_ones() as i32;
            let want = 0.3f64.powi(k) * 0.7f64.powi(7 - k);
            assert!((fk.probability(mask) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn single_edge_connection_is_tanh() {
        for beta in [0.1, 0.5, 1.3] {
            let params = FkParams::ising(beta).unwrap();
            let p = params.p;
            let fk = FkEnumerator::new(&edge(), &params).unwrap();
            let conn = fk.expect(&|m| (m & 1) as f64);
            assert!((conn - p / (p + 2.0 * (1.0 - p))).abs() < 1e-15);
            assert!((conn - f64::tanh(beta)).abs() < 1e-14);
            assert!((params.ising_beta() - beta).abs() < 1e-14);
        }
    }

    #[test]
    fn even_events() {
        let labels = [0, 0, 1, 1, 2];
        assert!(even_event(&labels, &[]));
        assert!(even_event(&labels, &[0, 1]));
        assert!(!even_event(&labels, &[0, 2]));
        assert!(even_event(&labels, &[0, 1, 2, 3]));
        assert!(even_event(&labels, &[4, 4]));
    }

    #[test]
    fn es_colouring_is_constant_on_clusters() {
        let lat = Lattice::build(&[4, 4], Topology::FreeBox).unwrap();
        let mut rng = sweep_rng(3, 0, 0);
        for mask in [0u64, 0xff, 0x5a5a5, (1 << 24) - 1] {
            let omega = FkConfig::from_mask(&lat, mask).unwrap();
            let s = edwards_sokal_spins(&omega, &mut rng);
            for (e, &(u, v)) in lat.edges().iter().enumerate() {
                if omega.open()[e] {
                    assert_eq!(s.get(u), s.get(v));
                }
            }
        }
    }

    #[test]
    fn sampler_limits() {
        let lat = Lattice::build(&[3, 3], Topology::FreeBox).unwrap();
        assert_eq!(fk_sample(&lat, &FkParams::new(0.0, 2.0).unwrap(), 3, 1).unwrap().num_open(), 0);
        assert_eq!(fk_sample(&lat, &FkParams::new(1.0, 2.0).unwrap(), 3, 1).unwrap().num_clusters(), 1);
        assert!(fk_sample(&lat, &FkParams::new(0.5, 3.0).unwrap(), 3, 1).is_err());
    }

    #[test]
    fn crossing_limits() {
        let mc = McConfig::new(Algorithm::SwendsenWang, 1, 40, 8, 1);
        assert_eq!(crossing_probability(4, 1.0, 1.0, &mc).unwrap().mean, 1.0);
        assert_eq!(crossing_probability(4, 1.0, 0.0, &mc).unwrap().mean, 0.0);
    }

    #[test]
    fn chi_square_sanity() {
        assert!(chi_square_p_value(&[50, 50], &[0.5, 0.5]).unwrap() > 0.99);
        assert!(chi_square_p_value(&[90, 10], &[0.5, 0.5]).unwrap() < 1e-6);
        assert!(chi_square_p_value(&[1, 2], &[0.5]).is_err());
    }

    #[test]
    fn monotonicity_scan() {
        assert!(is_increasing(3, &|m| m.count_ones() as f64).unwrap());
        assert!(!is_increasing(3, &|m| f64::from(u8::from(m == 0))).unwrap());
        let lat = edge();
        let params = FkParams::new(0.4, 2.0).unwrap();
        let f = |m: u64| (m & 1) as f64;
        let bad = |m: u64| 1.0 - (m & 1) as f64;
        assert!(fk_order_check(OrderCheck::Fkg, &lat, &params, &bad, &f).is_err());
        assert_eq!(fk_order_check(OrderCheck::Fkg, &lat, &params, &f, &|_| 1.0).unwrap(), 0.0);
    }
}
