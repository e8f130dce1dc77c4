//! Spin configurations, couplings, boundary conditions and the Hamiltonian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Topology};

/// A ±1 spin per vertex, bit-packed (bit set means `+1`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    words: Vec<u64>,
    len: usize,
}

impl SpinConfig {
    pub fn all_plus(len: usize) -> Self {
        let mut words = vec![u64::MAX; len.div_ceil(64)];
        if len % 64 != 0 {
            if let Some(last) = words.last_mut() {
                *last = (1u64 << (len % 64)) - 1;
            }
        }
        SpinConfig { words, len }
    }

    pub fn all_minus(len: usize) -> Self {
        SpinConfig { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> i8) -> Self {
        let mut s = Self::all_minus(len);
        for i in 0..len {
            if f(i) > 0 {
                s.words[i / 64] |= 1 << (i % 64);
            }
        }
        s
    }

    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter(format!("spin value {bad} is not ±1")));
        }
        Ok(Self::from_fn(spins.len(), |i| spins[i]))
    }

    /// Configuration of at most 64 spins from a bitmask.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= 64);
        let keep = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        SpinConfig { words: vec![mask & keep; len.div_ceil(64)], len }
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.len <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        debug_assert!(i < self.len);
        if self.words[i / 64] >> (i % 64) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, s: i8) {
        debug_assert!(i < self.len);
        if s > 0 {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn flip_all(&mut self) {
        let len = self.len;
        for w in &mut self.words {
            *w = !*w;
        }
        if len % 64 != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = i8> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn magnetization(&self) -> i64 {
        let plus: u32 = self.words.iter().map(|w| w.count_ones()).sum();
        2 * plus as i64 - self.len as i64
    }

    /// Product of spins over `vertices`.
    pub fn product(&self, vertices: &[usize]) -> i8 {
        vertices.iter().fold(1, |acc, &v| acc * self.get(v))
    }
}

/// Inverse temperature, per-vertex field and per-edge ferromagnetic couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    beta: f64,
    field: Vec<f64>,
    coupling: Vec<f64>,
}

impl Couplings {
    /// Uniform field `h` and unit couplings.
    pub fn uniform(lat: &Lattice, beta: f64, h: f64) -> Result<Self> {
        Self::new(beta, vec![h; lat.num_vertices()], vec![1.0; lat.num_edges()])
    }

    pub fn new(beta: f64, field: Vec<f64>, coupling: Vec<f64>) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        if let Some(j) = coupling.iter().find(|j| !(j.is_finite() && **j >= 0.0)) {
            return Err(Error::InvalidParameter(format!("coupling {j} is not a finite nonnegative value")));
        }
        if let Some(h) = field.iter().find(|h| !h.is_finite()) {
            return Err(Error::InvalidParameter(format!("field {h} is not finite")));
        }
        Ok(Couplings { beta, field, coupling })
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(beta, self.field.clone(), self.coupling.clone())
    }

    pub fn with_uniform_field(&self, h: f64) -> Result<Self> {
        Self::new(self.beta, vec![h; self.field.len()], self.coupling.clone())
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn has_zero_field(&self) -> bool {
        self.field.iter().all(|&h| h == 0.0)
    }

    pub fn has_uniform_coupling(&self) -> bool {
        self.coupling.windows(2).all(|w| w[0] == w[1])
    }

    pub fn check_matches(&self, lat: &Lattice) -> Result<()> {
        if self.field.len() != lat.num_vertices() || self.coupling.len() != lat.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "couplings sized for {} vertices / {} edges, lattice has {} / {}",
                self.field.len(),
                self.coupling.len(),
                lat.num_vertices(),
                lat.num_edges()
            )));
        }
        Ok(())
    }
}

/// Exterior spin prescription for a free box. Exterior sites are the
/// vertices of `Z^d` adjacent to the box; they are never materialised, each
/// exterior edge contributes `-τ σ_x` with unit coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    Free,
    Plus,
    Minus,
    /// One value per entry of [`Lattice::exterior_edges`].
    Fixed(Vec<i8>),
    /// `+1` on exterior sites with coordinate `>= level` along `axis`,
    /// `-1` below; reversed when `plus_above` is false.
    Dobrushin { axis: usize, level: i64, plus_above: bool },
}

impl BoundaryCondition {
    pub fn is_free(&self) -> bool {
        matches!(self, BoundaryCondition::Free)
    }

    /// Exterior spin for each exterior edge of `lat`.
    pub fn exterior_spins(&self, lat: &Lattice) -> Result<Vec<i8>> {
        let ext = lat.exterior_edges();
        if !self.is_free() && lat.topology() != Topology::FreeBox {
            return Err(Error::InvalidParameter(
                "non-free boundary conditions apply to free boxes only".into(),
            ));
        }
        Ok(match self {
            BoundaryCondition::Free => Vec::new(),
            BoundaryCondition::Plus => vec![1; ext.len()],
            BoundaryCondition::Minus => vec![-1; ext.len()],
            BoundaryCondition::Fixed(tau) => {
                if tau.len() != ext.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "fixed boundary needs {} exterior spins, got {}",
                        ext.len(),
                        tau.len()
                    )));
                }
                if tau.iter().any(|&t| t != 1 && t != -1) {
                    return Err(Error::InvalidParameter("exterior spins must be ±1".into()));
                }
                tau.clone()
            }
            BoundaryCondition::Dobrushin { axis, level, plus_above } => {
                if *axis >= lat.dimension() {
                    return Err(Error::InvalidParameter(format!("no axis {axis}")));
                }
                ext.iter()
                    .map(|&(v, a, dir)| {
                        let mut c = lat.coords(v)[*axis] as i64;
                        if a == *axis {
                            c += dir as i64;
                        }
                        if (c >= *level) == *plus_above {
                            1
                        } else {
                            -1
                        }
                    })
                    .collect()
            }
        })
    }

    /// Per-vertex field induced by the exterior spins.
    pub fn boundary_field(&self, lat: &Lattice) -> Result<Vec<f64>> {
        let mut out = vec![0.0; lat.num_vertices()];
        if self.is_free() {
            return Ok(out);
        }
        let tau = self.exterior_spins(lat)?;
        for (&(v, _, _), &t) in lat.exterior_edges().iter().zip(&tau) {
            out[v] += t as f64;
        }
        Ok(out)
    }
}

/// Field felt by each vertex: external field plus boundary contribution.
pub fn effective_field(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> Result<Vec<f64>> {
    coup.check_matches(lat)?;
    let mut h = bc.boundary_field(lat)?;
    for (hv, &f) in h.iter_mut().zip(coup.field()) {
        *hv += f;
    }
    Ok(h)
}

/// `H(σ) = -Σ_E J σ_x σ_y - Σ_V h σ_x - Σ_{exterior} σ_x τ_y`.
pub fn hamiltonian(lat: &Lattice, coup: &Couplings, spins: &SpinConfig, bc: &BoundaryCondition) -> Result<f64> {
    if spins.len() != lat.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "{} spins for {} vertices",
            spins.len(),
            lat.num_vertices()
        )));
    }
    let h = effective_field(lat, coup, bc)?;
    Ok(energy_with_field(lat, coup.coupling(), &h, spins))
}

pub(crate) fn energy_with_field(lat: &Lattice, coupling: &[f64], field: &[f64], spins: &SpinConfig) -> f64 {
    let bonds: f64 = lat
        .edges()
        .iter()
        .zip(coupling)
        .map(|(&(u, v), &j)| j * (spins.get(u) * spins.get(v)) as f64)
        .sum();
    let site: f64 = field.iter().enumerate().map(|(v, &h)| h * spins.get(v) as f64).sum();
    -bonds - site
}
