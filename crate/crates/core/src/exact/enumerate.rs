//! Brute-force summation over all `2^V` spin configurations.
//!
//! Configurations are visited in Gray-code order inside fixed-size chunks so
//! the energy is updated in `O(degree)` per step. Chunks are reduced in index
//! order, which makes every result independent of the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::model::{effective_field, BoundaryCondition, Couplings};

/// Largest vertex count accepted by the enumerator.
pub const MAX_ENUMERATION_VERTICES: usize = 24;

const CHUNK_BITS: u32 = 12;

/// Exact Gibbs expectations on a small graph. Spin `i` of a configuration
/// mask is `+1` when bit `i` is set.
#[derive(Debug, Clone)]
pub struct Enumerator {
    n: usize,
    beta: f64,
    field: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    neighbours: Vec<Vec<(usize, f64)>>,
    energy_floor: f64,
}

impl Enumerator {
    pub fn new(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> Result<Self> {
        let field = effective_field(lat, coup, bc)?;
        Self::from_raw(lat, coup.beta(), coup.coupling(), &field)
    }

    /// Arbitrary real couplings (used for antiferromagnetic controls).
    pub fn from_raw(lat: &Lattice, beta: f64, coupling: &[f64], field: &[f64]) -> Result<Self> {
        let n = lat.num_vertices();
        if n > MAX_ENUMERATION_VERTICES {
            return Err(Error::SizeCap(format!(
                "enumeration needs at most {MAX_ENUMERATION_VERTICES} vertices, got {n}"
            )));
        }
        if coupling.len() != lat.num_edges() || field.len() != n {
            return Err(Error::DimensionMismatch("coupling/field length".into()));
        }
        let mut neighbours = vec![Vec::new(); n];
        let mut edges = Vec::with_capacity(lat.num_edges());
        for (&(u, v), &j) in lat.edges().iter().zip(coupling) {
            edges.push((u, v, j));
            neighbours[u].push((v, j));
            neighbours[v].push((u, j));
        }
        let energy_floor = -coupling.iter().map(|j| j.abs()).sum::<f64>() - field.iter().map(|h| h.abs()).sum::<f64>();
        Ok(Enumerator { n, beta, field: field.to_vec(), edges, neighbours, energy_floor })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn energy(&self, mask: u64) -> f64 {
        let s = |i: usize| if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
        let bonds: f64 = self.edges.iter().map(|&(u, v, j)| j * s(u) * s(v)).sum();
        let site: f64 = self.field.iter().enumerate().map(|(i, h)| h * s(i)).sum();
        -bonds - site
    }

    /// Folds `visit(acc, mask, weight)` over all configurations, where
    /// `weight = exp(-β (H - floor))`. Returns the per-chunk accumulators
    /// merged in chunk order.
    pub fn fold<T, I, V, M>(&self, init: I, visit: V, merge: M) -> T
    where
        T: Send,
        I: Fn() -> T + Sync,
        V: Fn(&mut T, u64, f64) + Sync,
        M: Fn(T, T) -> T,
    {
        let bits = (self.n as u32).min(CHUNK_BITS);
        let chunks = 1u64 << (self.n as u32 - bits);
        let chunk_len = 1u64 << bits;
        let parts: Vec<T> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let start = c * chunk_len;
                let mut mask = start ^ (start >> 1);
                let mut energy = self.energy(mask);
                for i in start..start + chunk_len {
                    if i != start {
                        let bit = i.trailing_zeros() as usize;
                        let s = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                        let local: f64 = self.neighbours[bit]
                            .iter()
                            .map(|&(w, j)| if mask >> w & 1 == 1 { j } else { -j })
                            .sum::<f64>()
                            + self.field[bit];
                        energy += 2.0 * s * local;
                        mask ^= 1 << bit;
                    }
                    let w = (-self.beta * (energy - self.energy_floor)).exp();
                    visit(&mut acc, mask, w);
                }
                acc
            })
            .collect();
        let mut iter = parts.into_iter();
        let first = iter.next().expect("at least one chunk");
        iter.fold(first, merge)
    }

    /// `ln Z` and `⟨f_k⟩` for each observable.
    pub fn expectations(&self, observables: &[&(dyn Fn(u64) -> f64 + Sync)]) -> (f64, Vec<f64>) {
        let k = observables.len();
        let sums = self.fold(
            || vec![0.0; k + 1],
            |acc, mask, w| {
                acc[0] += w;
                for (a, f) in acc[1..].iter_mut().zip(observables) {
                    *a += w * f(mask);
                }
            },
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
        let z = sums[0];
        let log_z = z.ln() - self.beta * self.energy_floor;
        (log_z, sums[1..].iter().map(|s| s / z).collect())
    }

    pub fn log_partition(&self) -> f64 {
        self.expectations(&[]).0
    }

    /// `⟨σ_A⟩` for each vertex set.
    pub fn correlations(&self, sets: &[Vec<usize>]) -> Result<Vec<f64>> {
        let masks = sets
            .iter()
            .map(|set| self.set_mask(set))
            .collect::<Result<Vec<u64>>>()?;
        let k = masks.len();
        let sums = self.fold(
            || vec![0.0; k + 1],
            |acc, mask, w| {
                acc[0] += w;
                for (a, &m) in acc[1..].iter_mut().zip(&masks) {
                    // σ_A = (-1)^{number of minus spins in A}
                    if (!mask & m).count_ones() & 1 == 0 {
                        *a += w;
                    } else {
                        *a -= w;
                    }
                }
            },
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
        Ok(sums[1..].iter().map(|s| s / sums[0]).collect())
    }

    /// Mask of a vertex set; repeated vertices cancel (σ_x² = 1).
    pub fn set_mask(&self, set: &[usize]) -> Result<u64> {
        set.iter().try_fold(0u64, |m, &v| {
            if v >= self.n {
                Err(Error::InvalidVertex(v))
            } else {
                Ok(m ^ (1 << v))
            }
        })
    }

    /// All two-point functions `⟨σ_x σ_y⟩` as a dense `V × V` matrix.
    pub fn two_point_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let sets: Vec<Vec<usize>> = (0..n)
            .flat_map(|x| (x + 1..n).map(move |y| vec![x, y]))
            .collect();
        let vals = self.correlations(&sets).expect("valid vertices");
        let mut out = vec![vec![1.0; n]; n];
        for (set, v) in sets.iter().zip(vals) {
            out[set[0]][set[1]] = v;
            out[set[1]][set[0]] = v;
        }
        out
    }

    /// Probability of every configuration, indexed by mask.
    pub fn distribution(&self) -> Vec<f64> {
        let n = self.n;
        let weights: Vec<f64> = (0u64..1 << n)
            .map(|m| (-self.beta * (self.energy(m) - self.energy_floor)).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / z).collect()
    }
}

/// `⟨σ_A⟩` by enumeration.
pub fn correlation_exact(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition, set: &[usize]) -> Result<f64> {
    let en = Enumerator::new(lat, coup, bc)?;
    Ok(en.correlations(&[set.to_vec()])?[0])
}
