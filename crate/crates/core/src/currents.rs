//! The random-current representation: truncated current sums with
//! certified tails, exact trace sampling, the switching lemma, the Ursell
//! function and differential inequalities.
//!
//! A current assigns `n_e ∈ {0, 1, …}` to each edge, with weight
//! `Π_e b_e^{n_e} / n_e!` where `b_e = β J_e`. Sums are truncated at
//! `n_e ≤ n_max`. Grouping currents by the parity of each `n_e` (and, for
//! pairs of currents, by whether `n_1 + n_2` vanishes on an edge) turns
//! every sum into a sum over subgraphs with prescribed odd vertices, which
//! is exact for the truncated sums.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::UnionFind;
use crate::error::{Error, Result};
use crate::exact::Enumerator;
use crate::fk::even_event;
use crate::lattice::{subgraphs_with_odd_set, Lattice, Topology};
use crate::mc::sweep_rng;
use crate::model::{BoundaryCondition, Couplings};

/// Largest edge count for the literal current enumeration.
pub const MAX_LITERAL_EDGES: usize = 8;
/// Largest number of currents visited by the literal enumeration.
pub const MAX_LITERAL_CURRENTS: u64 = 1 << 27;
/// Largest edge count for sums over pairs of currents.
pub const MAX_DOUBLE_EDGES: usize = 12;
/// Largest edge count for the trace sampler.
pub const MAX_TRACE_EDGES: usize = 20;

/// Nonnegative integer label per edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Current {
    pub n: Vec<u32>,
}

impl Current {
    /// Vertices where the incident current is odd, in increasing order.
    pub fn sources(&self, lat: &Lattice) -> Vec<usize> {
        let mut odd = vec![false; lat.num_vertices()];
        for (&(u, v), &n) in lat.edges().iter().zip(&self.n) {
            if n % 2 == 1 {
                odd[u] ^= true;
                odd[v] ^= true;
            }
        }
        (0..odd.len()).filter(|&v| odd[v]).collect()
    }

    /// `Π_e b_e^{n_e} / n_e!`.
    pub fn weight(&self, b: &[f64]) -> f64 {
        self.n.iter().zip(b).map(|(&n, &be)| power_over_factorial(be, n)).product()
    }
}

/// Per-edge state of a current's trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TraceState {
    Zero,
    Odd,
    EvenPositive,
}

impl TraceState {
    pub fn of(n: u32) -> Self {
        match n {
            0 => TraceState::Zero,
            n if n % 2 == 1 => TraceState::Odd,
            _ => TraceState::EvenPositive,
        }
    }
}

/// Parity and positivity pattern of a current.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TracedCurrent {
    pub states: Vec<TraceState>,
}

impl TracedCurrent {
    /// Edges carrying an odd current, as a mask.
    pub fn odd_mask(&self) -> u64 {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == TraceState::Odd)
            .fold(0, |m, (e, _)| m | 1 << e)
    }

    /// Index in base 3 (`Zero = 0`, `Odd = 1`, `EvenPositive = 2`).
    pub fn code(&self) -> usize {
        self.states.iter().rev().fold(0, |c, &s| 3 * c + s as usize)
    }
}

/// A truncated sum and a certified bound on its distance to the full sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncated {
    pub value: f64,
    pub tail_bound: f64,
}

fn power_over_factorial(b: f64, n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * b / k as f64)
}

/// Which function of the total current `Σ_e (n_1 + n_2)_e` weights a sum
/// over pairs of currents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TotalCurrent {
    /// `F ≡ 1`.
    Any,
    /// `F = 1[Σ_e m_e ≤ k]`.
    AtMost(u32),
}

/// Current weights of a zero-field model.
#[derive(Debug, Clone)]
pub struct CurrentModel {
    lat: Lattice,
    b: Vec<f64>,
}

impl CurrentModel {
    pub fn new(lat: &Lattice, coup: &Couplings) -> Result<Self> {
        coup.check_matches(lat)?;
        if !coup.has_zero_field() {
            return Err(Error::Precondition("the current expansion here needs zero field".into()));
        }
        Ok(CurrentModel { lat: lat.clone(), b: coup.coupling().iter().map(|j| coup.beta() * j).collect() })
    }

    /// Unit couplings at inverse temperature `beta`.
    pub fn uniform(lat: &Lattice, beta: f64) -> Result<Self> {
        Self::new(lat, &Couplings::uniform(lat, beta, 0.0)?)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.b
    }

    fn check_nmax(nmax: u32) -> Result<()> {
        if nmax < 4 {
            return Err(Error::InvalidParameter(format!("n_max must be at least 4, got {nmax}")));
        }
        Ok(())
    }

    fn check_vertices(&self, set: &[usize]) -> Result<()> {
        match set.iter().find(|&&v| v >= self.lat.num_vertices()) {
            Some(&v) => Err(Error::InvalidVertex(v)),
            None => Ok(()),
        }
    }

    /// Truncated even and odd series per edge: `(Σ_{k even ≤ n} b^k/k!, Σ_{k odd ≤ n} b^k/k!)`.
    fn parity_series(&self, nmax: u32) -> Vec<(f64, f64)> {
        self.b
            .iter()
            .map(|&b| {
                (0..=nmax).fold((0.0, 0.0), |(ev, od), k| {
                    let t = power_over_factorial(b, k);
                    if k % 2 == 0 {
                        (ev + t, od)
                    } else {
                        (ev, od + t)
                    }
                })
            })
            .collect()
    }

    /// `(Π_e c_e, Π_e (c_e + t_e))` with `c_e` the truncated exponential
    /// series and `t_e = b^{n+1}/(n+1)! · e^b` its tail bound.
    fn tail_products(&self, nmax: u32) -> (f64, f64) {
        self.parity_series(nmax).iter().zip(&self.b).fold((1.0, 1.0), |(lo, hi), (&(ev, od), &b)| {
            let c = ev + od;
            let t = power_over_factorial(b, nmax + 1) * b.exp();
            (lo * c, hi * (c + t))
        })
    }

    /// Certified bound for one truncated current sum.
    pub fn single_tail(&self, nmax: u32) -> f64 {
        let (lo, hi) = self.tail_products(nmax);
        hi - lo
    }

    /// Certified bound for one truncated sum over pairs of currents.
    pub fn double_tail(&self, nmax: u32) -> f64 {
        let (lo, hi) = self.tail_products(nmax);
        hi * hi - lo * lo
    }

    /// `Σ_{∂n = A, n ≤ n_max} w(n)` with its tail bound. Returns zero when
    /// no current has source set `A` (for instance `|A|` odd).
    pub fn current_sum(&self, sources: &[usize], nmax: u32) -> Result<Truncated> {
        Self::check_nmax(nmax)?;
        self.check_vertices(sources)?;
        let series = self.parity_series(nmax);
        let value = match subgraphs_with_odd_set(&self.lat, sources)? {
            None => 0.0,
            Some(odd_sets) => odd_sets
                .map(|f| {
                    series
                        .iter()
                        .enumerate()
                        .map(|(e, &(ev, od))| if f >> e & 1 == 1 { od } else { ev })
                        .product::<f64>()
                })
                .sum(),
        };
        Ok(Truncated { value, tail_bound: self.single_tail(nmax) })
    }

    /// `⟨σ_A⟩ = Σ_{∂n=A} w / Σ_{∂n=∅} w`, with a certified bound that
    /// covers both truncations.
    pub fn correlation(&self, sources: &[usize], nmax: u32) -> Result<Truncated> {
        let a = self.current_sum(sources, nmax)?;
        let z = self.current_sum(&[], nmax)?;
        let value = a.value / z.value;
        // the full sums lie in [a, a + τ] and [z, z + τ]
        let bound = (a.value + a.tail_bound) / z.value - value;
        let bound = bound.max(value - a.value / (z.value + z.tail_bound));
        Ok(Truncated { value, tail_bound: bound + 4.0 * f64::EPSILON * value.abs() })
    }

    /// Visits every current with `n_e ≤ n_max` in odometer order. This is
    /// the brute-force oracle for the factorised sums.
    pub fn for_each_current(&self, nmax: u32, mut visit: impl FnMut(&Current, f64)) -> Result<()> {
        let m = self.lat.num_edges();
        if m > MAX_LITERAL_EDGES {
            return Err(Error::SizeCap(format!("literal enumeration needs at most {MAX_LITERAL_EDGES} edges")));
        }
        let count = (nmax as u64 + 1).checked_pow(m as u32).filter(|&c| c <= MAX_LITERAL_CURRENTS);
        if count.is_none() {
            return Err(Error::SizeCap(format!("(n_max + 1)^|E| exceeds {MAX_LITERAL_CURRENTS}")));
        }
        let table: Vec<Vec<f64>> =
            self.b.iter().map(|&b| (0..=nmax).map(|k| power_over_factorial(b, k)).collect()).collect();
        let mut cur = Current { n: vec![0; m] };
        loop {
            let w = cur.n.iter().enumerate().map(|(e, &k)| table[e][k as usize]).product();
            visit(&cur, w);
            let mut e = 0;
            loop {
                if e == m {
                    return Ok(());
                }
                if cur.n[e] < nmax {
                    cur.n[e] += 1;
                    break;
                }
                cur.n[e] = 0;
                e += 1;
            }
        }
    }

    /// `Σ_{∂n=A, n ≤ n_max} w(n)` by literal enumeration.
    pub fn current_sum_literal(&self, sources: &[usize], nmax: u32) -> Result<f64> {
        self.check_vertices(sources)?;
        let mut want = sources.to_vec();
        want.sort_unstable();
        want.dedup();
        let mut total = 0.0;
        self.for_each_current(nmax, |c, w| {
            if c.sources(&self.lat) == want {
                total += w;
            }
        })?;
        Ok(total)
    }

    /// Per-edge polynomials in the total current for a pair of currents:
    /// `table[e][p1][p2][m] = Σ b^m / (n_1! n_2!)` over `n_1 + n_2 = m`
    /// with parities `p1`, `p2` and `n_i ≤ n_max`.
    fn pair_tables(&self, nmax: u32) -> Vec<[[Vec<f64>; 2]; 2]> {
        let len = 2 * nmax as usize + 1;
        self.b
            .iter()
            .map(|&b| {
                let mut t: [[Vec<f64>; 2]; 2] = Default::default();
                for row in t.iter_mut() {
                    for cell in row.iter_mut() {
                        *cell = vec![0.0; len];
                    }
                }
                for n1 in 0..=nmax {
                    for n2 in 0..=nmax {
                        t[(n1 % 2) as usize][(n2 % 2) as usize][(n1 + n2) as usize] +=
                            power_over_factorial(b, n1) * power_over_factorial(b, n2);
                    }
                }
                t
            })
            .collect()
    }

    /// `Σ_{∂n_1 = A, ∂n_2 = B} w(n_1) w(n_2) F(n_1 + n_2) 1[event(trace)]`
    /// over truncated currents, where `trace` is the mask of edges with
    /// `n_1 + n_2 > 0` and `F` depends on the total current only.
    pub fn double_sum(
        &self,
        a: &[usize],
        b: &[usize],
        nmax: u32,
        total: TotalCurrent,
        event: &dyn Fn(u64) -> bool,
    ) -> Result<f64> {
        Self::check_nmax(nmax)?;
        self.check_vertices(a)?;
        self.check_vertices(b)?;
        let m = self.lat.num_edges();
        if m > MAX_DOUBLE_EDGES {
            return Err(Error::SizeCap(format!("pair sums need at most {MAX_DOUBLE_EDGES} edges, got {m}")));
        }
        let (Some(odd_a), Some(odd_b)) = (subgraphs_with_odd_set(&self.lat, a)?, subgraphs_with_odd_set(&self.lat, b)?)
        else {
            return Ok(0.0);
        };
        let odd_b: Vec<u64> = odd_b.collect();
        let tables = self.pair_tables(nmax);
        let sums: Vec<[[f64; 2]; 2]> = tables
            .iter()
            .map(|t| {
                let mut s = [[0.0; 2]; 2];
                for p1 in 0..2 {
                    for p2 in 0..2 {
                        s[p1][p2] = t[p1][p2].iter().sum();
                    }
                }
                s
            })
            .collect();
        let mut value = 0.0;
        for f1 in odd_a {
            for &f2 in &odd_b {
                let both_even: Vec<usize> = (0..m).filter(|&e| (f1 | f2) >> e & 1 == 0).collect();
                for z in 0u64..1 << both_even.len() {
                    // z selects the both-even edges whose total current is zero
                    let zero_mask = both_even
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| z >> i & 1 == 1)
                        .fold(0u64, |acc, (_, &e)| acc | 1 << e);
                    let trace = !zero_mask & ((1u64 << m) - 1);
                    if !event(trace) {
                        continue;
                    }
                    let part = |e: usize| ((f1 >> e & 1) as usize, (f2 >> e & 1) as usize);
                    value += match total {
                        TotalCurrent::Any => (0..m)
                            .map(|e| {
                                if zero_mask >> e & 1 == 1 {
                                    1.0
                                } else {
                                    let (p1, p2) = part(e);
                                    // the m = 0 term only exists for two even parities
                                    sums[e][p1][p2] - if (p1, p2) == (0, 0) { 1.0 } else { 0.0 }
                                }
                            })
                            .product::<f64>(),
                        TotalCurrent::AtMost(k) => {
                            let mut poly = vec![1.0];
                            for e in 0..m {
                                if zero_mask >> e & 1 == 1 {
                                    continue;
                                }
                                let (p1, p2) = part(e);
                                let mut factor = tables[e][p1][p2].clone();
                                factor[0] = 0.0;
                                poly = convolve(&poly, &factor, k as usize + 1);
                            }
                            poly.iter().sum::<f64>()
                        }
                    };
                }
            }
        }
        Ok(value)
    }

    /// The same sum by literal enumeration of both currents.
    pub fn double_sum_literal(
        &self,
        a: &[usize],
        b: &[usize],
        nmax: u32,
        total: TotalCurrent,
        event: &dyn Fn(u64) -> bool,
    ) -> Result<f64> {
        self.check_vertices(a)?;
        self.check_vertices(b)?;
        let sorted = |s: &[usize]| {
            let mut odd = vec![false; self.lat.num_vertices()];
            s.iter().for_each(|&v| odd[v] ^= true);
            (0..odd.len()).filter(|&v| odd[v]).collect::<Vec<_>>()
        };
        let (wa, wb) = (sorted(a), sorted(b));
        let mut first = Vec::new();
        let mut second = Vec::new();
        self.for_each_current(nmax, |c, w| {
            let s = c.sources(&self.lat);
            if s == wa {
                first.push((c.clone(), w));
            }
            if s == wb {
                second.push((c.clone(), w));
            }
        })?;
        let mut value = 0.0;
        for (c1, w1) in &first {
            for (c2, w2) in &second {
                let sum: Vec<u32> = c1.n.iter().zip(&c2.n).map(|(x, y)| x + y).collect();
                let ok = match total {
                    TotalCurrent::Any => true,
                    TotalCurrent::AtMost(k) => sum.iter().sum::<u32>() <= k,
                };
                let trace = sum.iter().enumerate().filter(|(_, &x)| x > 0).fold(0u64, |m, (e, _)| m | 1 << e);
                if ok && event(trace) {
                    value += w1 * w2;
                }
            }
        }
        Ok(value)
    }

    /// Cluster labels of the subgraph given by an edge mask.
    pub fn trace_labels(&self, mask: u64) -> Vec<u32> {
        let mut uf = UnionFind::new(self.lat.num_vertices());
        for (e, &(u, v)) in self.lat.edges().iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(u, v);
            }
        }
        let mut labels = Vec::new();
        uf.labels_into(&mut labels, &mut Vec::new());
        labels
    }

    /// Law of the trace of a truncated current with sources `A`, summed
    /// over parity patterns; keyed by [`TracedCurrent::code`].
    pub fn trace_law(&self, sources: &[usize], nmax: u32) -> Result<Vec<(TracedCurrent, f64)>> {
        Self::check_nmax(nmax)?;
        self.check_vertices(sources)?;
        let m = self.lat.num_edges();
        if m > MAX_DOUBLE_EDGES {
            return Err(Error::SizeCap(format!("trace laws need at most {MAX_DOUBLE_EDGES} edges")));
        }
        let series = self.parity_series(nmax);
        let Some(odd_sets) = subgraphs_with_odd_set(&self.lat, sources)? else {
            return Err(Error::Precondition("no current has this source set".into()));
        };
        let mut out = Vec::new();
        for f in odd_sets {
            let free: Vec<usize> = (0..m).filter(|&e| f >> e & 1 == 0).collect();
            for z in 0u64..1 << free.len() {
                let mut states = vec![TraceState::Odd; m];
                let mut w: f64 = (0..m).filter(|&e| f >> e & 1 == 1).map(|e| series[e].1).product();
                for (i, &e) in free.iter().enumerate() {
                    if z >> i & 1 == 1 {
                        states[e] = TraceState::EvenPositive;
                        w *= series[e].0 - 1.0;
                    } else {
                        states[e] = TraceState::Zero;
                    }
                }
                out.push((TracedCurrent { states }, w));
            }
        }
        let total: f64 = out.iter().map(|(_, w)| w).sum();
        out.iter_mut().for_each(|(_, w)| *w /= total);
        out.sort_by(|a, b| a.0.code().cmp(&b.0.code()));
        Ok(out)
    }
}

fn convolve(a: &[f64], b: &[f64], cap: usize) -> Vec<f64> {
    let len = (a.len() + b.len() - 1).min(cap);
    let mut out = vec![0.0; len];
    for (i, &x) in a.iter().enumerate().filter(|(i, _)| *i < len) {
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Exact sampler for the trace of an untruncated current with sources `A`.
/// The odd edges form a subgraph `F` with odd set `A`, drawn with weight
/// `Π_{e∈F} tanh b_e`; every other edge independently carries a positive
/// even current with probability `(cosh b_e - 1) / cosh b_e`.
#[derive(Debug, Clone)]
pub struct TraceSampler {
    odd_sets: Vec<u64>,
    cumulative: Vec<f64>,
    sprinkle: Vec<f64>,
    num_edges: usize,
}

impl TraceSampler {
    pub fn new(model: &CurrentModel, sources: &[usize]) -> Result<Self> {
        model.check_vertices(sources)?;
        let m = model.lat.num_edges();
        if m > MAX_TRACE_EDGES {
            return Err(Error::SizeCap(format!("trace sampling needs at most {MAX_TRACE_EDGES} edges, got {m}")));
        }
        let Some(odd) = subgraphs_with_odd_set(&model.lat, sources)? else {
            return Err(Error::Precondition("no current has this source set".into()));
        };
        let tanh: Vec<f64> = model.b.iter().map(|b| b.tanh()).collect();
        let odd_sets: Vec<u64> = odd.collect();
        let mut acc = 0.0;
        let cumulative: Vec<f64> = odd_sets
            .iter()
            .map(|&f| {
                acc += (0..m).filter(|&e| f >> e & 1 == 1).map(|e| tanh[e]).product::<f64>();
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::Precondition("every current with these sources has zero weight".into()));
        }
        let sprinkle = model.b.iter().map(|&b| (b.cosh() - 1.0) / b.cosh()).collect();
        Ok(TraceSampler { odd_sets, cumulative, sprinkle, num_edges: m })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TracedCurrent {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.odd_sets.len() - 1);
        let f = self.odd_sets[idx];
        let states = (0..self.num_edges)
            .map(|e| {
                if f >> e & 1 == 1 {
                    TraceState::Odd
                } else if rng.gen::<f64>() < self.sprinkle[e] {
                    TraceState::EvenPositive
                } else {
                    TraceState::Zero
                }
            })
            .collect();
        TracedCurrent { states }
    }
}

/// One trace sample, reproducible from `seed`.
pub fn sample_current_trace(model: &CurrentModel, sources: &[usize], seed: u64) -> Result<TracedCurrent> {
    Ok(TraceSampler::new(model, sources)?.sample(&mut sweep_rng(seed, 0, 0)))
}

/// Both sides of the switching lemma with the certified bound on their
/// difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub bound: f64,
}

impl SwitchingResidual {
    pub fn within_bound(&self) -> bool {
        self.residual <= self.bound
    }
}

/// `Σ_{∂n_1=A, ∂n_2=B} w w F(n_1+n_2)` against
/// `Σ_{∂n_1=AΔB, ∂n_2=∅} w w F(n_1+n_2) 1[n_1+n_2 ∈ F_B]`, where `F_B`
/// asks every cluster of the trace to hold an even number of points of `B`.
pub fn switching_check(
    model: &CurrentModel,
    a: &[usize],
    b: &[usize],
    total: TotalCurrent,
    nmax: u32,
) -> Result<SwitchingResidual> {
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let lhs = model.double_sum(a, b, nmax, total, &|_| true)?;
    let rhs = model.double_sum(&ab, &[], nmax, total, &|trace| even_event(&model.trace_labels(trace), b))?;
    let residual = (lhs - rhs).abs();
    let slack = 16.0 * f64::EPSILON * lhs.abs().max(rhs.abs());
    Ok(SwitchingResidual { lhs, rhs, residual, bound: model.double_tail(nmax) + slack })
}

/// `⟨σ_A⟩²` by spin enumeration against `P^∅ ⊗ P^∅[n_1 + n_2 ∈ F_A]` from
/// truncated currents.
pub fn squared_correlation_check(model: &CurrentModel, set: &[usize], nmax: u32) -> Result<SwitchingResidual> {
    let lat = &model.lat;
    let en = Enumerator::from_raw(lat, 1.0, &model.b, &vec![0.0; lat.num_vertices()])?;
    let lhs = en.correlations(&[set.to_vec()])?[0].powi(2);
    let d = model.double_sum(&[], &[], nmax, TotalCurrent::Any, &|trace| {
        even_event(&model.trace_labels(trace), set)
    })?;
    let z = model.current_sum(&[], nmax)?;
    let rhs = d / (z.value * z.value);
    let hi = (d + model.double_tail(nmax)) / (z.value * z.value);
    let lo = d / (z.value + z.tail_bound).powi(2);
    let bound = (hi - rhs).max(rhs - lo) + 1e-14 * lhs.abs().max(1e-300);
    Ok(SwitchingResidual { lhs, rhs, residual: (lhs - rhs).abs(), bound })
}

/// Fourth Ursell function and its random-current identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrsellResult {
    /// `U_4` by spin enumeration.
    pub value: f64,
    /// `-2 ⟨σ_1σ_2⟩⟨σ_3σ_4⟩ P^{12} ⊗ P^{34}[all four connected]`.
    pub current_form: f64,
    pub residual: f64,
    pub bound: f64,
}

/// Largest vertex count for the spin part of [`ursell4`].
pub const MAX_URSELL_VERTICES: usize = 16;

/// `U_4 = ⟨σ_1σ_2σ_3σ_4⟩ - ⟨σ_1σ_2⟩⟨σ_3σ_4⟩ - ⟨σ_1σ_3⟩⟨σ_2σ_4⟩ - ⟨σ_1σ_4⟩⟨σ_2σ_3⟩`.
/// The current identity is evaluated when the graph is small enough for
/// pair sums; otherwise `current_form` is NaN.
pub fn ursell4(model: &CurrentModel, x: [usize; 4], nmax: u32) -> Result<UrsellResult> {
    model.check_vertices(&x)?;
    for i in 0..4 {
        if x[i + 1..].contains(&x[i]) {
            return Err(Error::InvalidParameter("the four points must be distinct".into()));
        }
    }
    let lat = &model.lat;
    if lat.num_vertices() > MAX_URSELL_VERTICES {
        return Err(Error::SizeCap(format!("U_4 needs at most {MAX_URSELL_VERTICES} vertices")));
    }
    let en = Enumerator::from_raw(lat, 1.0, &model.b, &vec![0.0; lat.num_vertices()])?;
    let c = en.correlations(&[
        x.to_vec(),
        vec![x[0], x[1]],
        vec![x[2], x[3]],
        vec![x[0], x[2]],
        vec![x[1], x[3]],
        vec![x[0], x[3]],
        vec![x[1], x[2]],
    ])?;
    let value = c[0] - c[1] * c[2] - c[3] * c[4] - c[5] * c[6];
    if lat.num_edges() > MAX_DOUBLE_EDGES {
        return Ok(UrsellResult { value, current_form: f64::NAN, residual: f64::NAN, bound: f64::NAN });
    }
    let pref = 2.0 * c[1] * c[2];
    if pref == 0.0 {
        // no current with these sources has positive weight
        return Ok(UrsellResult { value, current_form: 0.0, residual: value.abs(), bound: 1e-14 });
    }
    let d = model.double_sum(&[x[0], x[1]], &[x[2], x[3]], nmax, TotalCurrent::Any, &|trace| {
        let l = model.trace_labels(trace);
        l[x[0]] == l[x[2]] && l[x[1]] == l[x[2]] && l[x[3]] == l[x[2]]
    })?;
    let s12 = model.current_sum(&[x[0], x[1]], nmax)?;
    let s34 = model.current_sum(&[x[2], x[3]], nmax)?;
    let ratio = d / (s12.value * s34.value);
    let hi = (d + model.double_tail(nmax)) / (s12.value * s34.value);
    let lo = d / ((s12.value + s12.tail_bound) * (s34.value + s34.tail_bound));
    let current_form = -pref * ratio;
    let bound = pref.abs() * (hi - ratio).max(ratio - lo) + 1e-14;
    Ok(UrsellResult { value, current_form, residual: (value - current_form).abs(), bound })
}

/// Which differential inequality is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffIneqKind {
    /// `(1 - B/χ) 2dχ²/(1 + B) ≤ ∂_β χ ≤ 2dχ²`.
    ChiBubble,
    /// `m ≤ tanh(βh) ∂m/∂(βh) + m²(β ∂_β m + m)`, `∂_β` at fixed `βh`.
    Magnetization,
}

/// Sides of a differential inequality on a finite torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffIneqResult {
    pub kind: DiffIneqKind,
    /// Lower side(s), the middle quantity and the upper side; for the
    /// magnetisation inequality `lower = m` and `upper` is the right side.
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
    /// Finite-difference error estimate.
    pub fd_error: f64,
    /// `max(0, violation - fd_error)`.
    pub violation: f64,
}

/// Finite-difference step for derivatives in β and βh.
pub const FD_STEP: f64 = 1e-4;

fn central_difference(f: &dyn Fn(f64) -> Result<f64>, x: f64, step: f64) -> Result<(f64, f64)> {
    let d1 = (f(x + step)? - f(x - step)?) / (2.0 * step);
    let d2 = (f(x + 2.0 * step)? - f(x - 2.0 * step)?) / (4.0 * step);
    let scale = f(x)?.abs().max(1.0);
    Ok((d1, (d1 - d2).abs() + 64.0 * f64::EPSILON * scale / step))
}

/// Evaluates the requested inequality on the torus `lat` at `(β, h)` by
/// enumeration, with central differences for the derivatives. The torus
/// stands in for `Z^d`, so sums over `x` run over the torus.
pub fn diffineq_check(kind: DiffIneqKind, lat: &Lattice, beta: f64, h: f64) -> Result<DiffIneqResult> {
    if lat.topology() != Topology::Torus {
        return Err(Error::Precondition("the torus surrogate needs a periodic lattice".into()));
    }
    if beta < 2.0 * FD_STEP {
        return Err(Error::InvalidParameter(format!("beta must be at least {} for the differences", 2.0 * FD_STEP)));
    }
    let degree = lat.degree(0) as f64;
    match kind {
        DiffIneqKind::ChiBubble => {
            let chi_bubble = |b: f64| -> Result<(f64, f64)> {
                let coup = Couplings::uniform(lat, b, h)?;
                let en = Enumerator::new(lat, &coup, &BoundaryCondition::Free)?;
                let sets: Vec<Vec<usize>> = (0..lat.num_vertices()).map(|x| vec![0, x]).collect();
                let g = en.correlations(&sets)?;
                Ok((g.iter().sum(), g.iter().map(|v| v * v).sum()))
            };
            let (chi, bubble) = chi_bubble(beta)?;
            let (dchi, err) = central_difference(&|b| Ok(chi_bubble(b)?.0), beta, FD_STEP)?;
            let lower = (1.0 - bubble / chi) * degree * chi * chi / (1.0 + bubble);
            let upper = degree * chi * chi;
            let violation = ((lower - dchi).max(dchi - upper) - err).max(0.0);
            Ok(DiffIneqResult { kind, lower, middle: dchi, upper, fd_error: err, violation })
        }
        DiffIneqKind::Magnetization => {
            if h < 0.0 {
                return Err(Error::Precondition("the magnetisation inequality needs h >= 0".into()));
            }
            let big_h = beta * h;
            let mag = |b: f64, bh: f64| -> Result<f64> {
                let coup = Couplings::uniform(lat, b, bh / b)?;
                Ok(Enumerator::new(lat, &coup, &BoundaryCondition::Free)?.correlations(&[vec![0]])?[0])
            };
            let m = mag(beta, big_h)?;
            let (dm_dh, e1) = central_difference(&|x| mag(beta, x), big_h, FD_STEP)?;
            let (dm_db, e2) = central_difference(&|b| mag(b, big_h), beta, FD_STEP)?;
            let upper = big_h.tanh() * dm_dh + m * m * (beta * dm_db + m);
            // roundoff of the enumerated m enters through the m term itself
            let err = big_h.tanh() * e1 + m * m * beta * e2 + 1e-13;
            let violation = (m - upper - err).max(0.0);
            Ok(DiffIneqResult { kind, lower: m, middle: m, upper, fd_error: err, violation })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge() -> Lattice {
        Lattice::from_edges(2, vec![(0, 1)]).unwrap()
    }

    #[test]
    fn single_edge_series() {
        let beta = 0.7f64;
        let model = CurrentModel::uniform(&edge(), beta).unwrap();
        let even = model.current_sum(&[], 20).unwrap();
        assert!((even.value - beta.cosh()).abs() <= even.tail_bound + 1e-15);
        let odd = model.current_sum(&[0, 1], 20).unwrap();
        assert!((odd.value - beta.sinh()).abs() <= odd.tail_bound + 1e-15);
        assert_eq!(model.current_sum(&[0], 20).unwrap().value, 0.0);
        let c = model.correlation(&[0, 1], 20).unwrap();
        assert!((c.value - beta.tanh()).abs() <= c.tail_bound);
        assert_eq!(model.correlation(&[], 6).unwrap().value, 1.0);
    }

    #[test]
    fn tail_bound_covers_the_truncation() {
        let lat = Lattice::from_edges(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let model = CurrentModel::uniform(&lat, 1.5).unwrap();
        let coarse = model.current_sum(&[0, 1], 4).unwrap();
        let fine = model.current_sum(&[0, 1], 30).unwrap();
        assert!(fine.value - coarse.value <= coarse.tail_bound);
        assert!(fine.value > coarse.value);
    }

    #[test]
    fn factorised_sums_match_literal_enumeration() {
        let lat = Lattice::build(&[2, 2], Topology::FreeBox).unwrap();
        let model = CurrentModel::new(&lat, &Couplings::new(0.6, vec![0.0; 4], vec![1.0, 0.5, 2.0, 1.2]).unwrap()).unwrap();
        for sources in [vec![], vec![0, 3], vec![0, 1, 2, 3], vec![1]] {
            let f = model.current_sum(&sources, 5).unwrap().value;
            let l = model.current_sum_literal(&sources, 5).unwrap();
            assert!((f - l).abs() < 1e-13 * l.max(1.0), "{sources:?}: {f} vs {l}");
        }
    }

    #[test]
    fn pair_sums_match_literal_enumeration() {
        let lat = Lattice::from_edges(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let model = CurrentModel::uniform(&lat, 0.8).unwrap();
        let connected = |t: u64| {
            let l = model.trace_labels(t);
            l[0] == l[2]
        };
        for total in [TotalCurrent::Any, TotalCurrent::AtMost(3), TotalCurrent::AtMost(6)] {
            for (a, b) in [(vec![], vec![]), (vec![0, 1], vec![1, 2]), (vec![0, 2], vec![])] {
                let f = model.double_sum(&a, &b, 4, total, &connected).unwrap();
                let l = model.double_sum_literal(&a, &b, 4, total, &connected).unwrap();
                assert!((f - l).abs() < 1e-12 * l.max(1.0), "{total:?} {a:?} {b:?}: {f} vs {l}");
            }
        }
    }

    #[test]
    fn single_edge_switching() {
        let model = CurrentModel::uniform(&edge(), 0.9).unwrap();
        let r = switching_check(&model, &[0, 1], &[0, 1], TotalCurrent::Any, 10).unwrap();
        assert!((r.lhs - 0.9f64.sinh().powi(2)).abs() <= model.double_tail(10) + 1e-14);
        assert!(r.within_bound(), "{r:?}");
    }

    #[test]
    fn trace_law_matches_literal_enumeration() {
        let lat = Lattice::from_edges(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let model = CurrentModel::uniform(&lat, 0.8).unwrap();
        let law = model.trace_law(&[0, 1], 8).unwrap();
        let mut literal = vec![0.0; 27];
        let mut total = 0.0;
        model
            .for_each_current(8, |c, w| {
                if c.sources(&lat) == vec![0, 1] {
                    let t = TracedCurrent { states: c.n.iter().map(|&n| TraceState::of(n)).collect() };
                    literal[t.code()] += w;
                    total += w;
                }
            })
            .unwrap();
        for (t, p) in &law {
            assert!((p - literal[t.code()] / total).abs() < 1e-13);
        }
    }

    #[test]
    fn forced_and_empty_traces() {
        let model = CurrentModel::uniform(&edge(), 0.5).unwrap();
        for seed in 0..10 {
            assert_eq!(sample_current_trace(&model, &[0, 1], seed).unwrap().states, vec![TraceState::Odd]);
        }
        let cold = CurrentModel::uniform(&edge(), 0.0).unwrap();
        assert_eq!(sample_current_trace(&cold, &[], 1).unwrap().states, vec![TraceState::Zero]);
        assert!(sample_current_trace(&model, &[0], 1).is_err());
    }

    #[test]
    fn ursell_vanishes_at_infinite_temperature() {
        let lat = Lattice::build(&[2, 2], Topology::FreeBox).unwrap();
        let model = CurrentModel::uniform(&lat, 0.0).unwrap();
        let u = ursell4(&model, [0, 1, 2, 3], 6).unwrap();
        assert_eq!(u.value, 0.0);
        assert!(ursell4(&model, [0, 1, 1, 3], 6).is_err());
    }

    #[test]
    fn chi_bubble_at_small_beta() {
        let lat = Lattice::build(&[4, 4], Topology::Torus).unwrap();
        let r = diffineq_check(DiffIneqKind::ChiBubble, &lat, 0.001, 0.0).unwrap();
        // ∂_β χ → 2d = 4 as β → 0
        assert!((r.middle - 4.0).abs() < 0.05, "{r:?}");
        assert_eq!(r.violation, 0.0);
        let m = diffineq_check(DiffIneqKind::Magnetization, &lat, 0.3, 0.0).unwrap();
        assert!(m.lower.abs() < 1e-12 && m.upper.abs() < 1e-12);
    }
}
