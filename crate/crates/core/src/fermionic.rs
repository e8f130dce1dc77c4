//! Discrete complex analysis on 2D boxes: the Isaacs residual of lattice
//! functions and order–disorder correlators with disorder lines along
//! dual cuts.
//!
//! Points of a `w × h` box are `z = x + iy`; face `(x, y)` has corners
//! `(x, y)`, `(x+1, y)`, `(x, y+1)`, `(x+1, y+1)` and index `x(h-1) + y`,
//! matching the dual lattice, whose last vertex is the unbounded face.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Enumerator;
use crate::lattice::{dual_lattice, Lattice, Topology};

/// Largest domain for enumerated correlators.
pub const MAX_CORRELATOR_VERTICES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub width: usize,
    pub height: usize,
}

impl Domain {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidLattice(format!("domain {width}×{height} has no faces")));
        }
        Ok(Domain { width, height })
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::build(&[self.width, self.height], Topology::FreeBox).expect("validated sides")
    }

    pub fn num_vertices(&self) -> usize {
        self.width * self.height
    }

    pub fn vertex(&self, x: usize, y: usize) -> usize {
        x * self.height + y
    }

    pub fn point(&self, v: usize) -> Complex64 {
        Complex64::new((v / self.height) as f64, (v % self.height) as f64)
    }

    pub fn num_faces(&self) -> usize {
        (self.width - 1) * (self.height - 1)
    }

    /// Index of the unbounded face in the dual.
    pub fn outer_face(&self) -> usize {
        self.num_faces()
    }

    pub fn face(&self, x: usize, y: usize) -> Result<usize> {
        if x + 1 >= self.width || y + 1 >= self.height {
            return Err(Error::InvalidParameter(format!("face ({x}, {y}) has corners outside the domain")));
        }
        Ok(x * (self.height - 1) + y)
    }

    /// `[NW, NE, SE, SW]` corners of an interior face.
    pub fn corners(&self, face: usize) -> Result<[usize; 4]> {
        if face >= self.num_faces() {
            return Err(Error::InvalidParameter(format!("face {face} is not an interior face")));
        }
        let (x, y) = (face / (self.height - 1), face % (self.height - 1));
        Ok([self.vertex(x, y + 1), self.vertex(x + 1, y + 1), self.vertex(x + 1, y), self.vertex(x, y)])
    }
}

/// Complex value on every vertex of a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexLatticeFunction {
    domain: Domain,
    values: Vec<Complex64>,
}

impl ComplexLatticeFunction {
    pub fn new(domain: Domain, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.num_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} vertices",
                values.len(),
                domain.num_vertices()
            )));
        }
        Ok(ComplexLatticeFunction { domain, values })
    }

    pub fn from_fn(domain: Domain, f: impl Fn(Complex64) -> Complex64) -> Self {
        let values = (0..domain.num_vertices()).map(|v| f(domain.point(v))).collect();
        ComplexLatticeFunction { domain, values }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `a·F + b·G` on a common domain.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::DimensionMismatch("functions live on different domains".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(f, g)| a * f + b * g).collect();
        Ok(ComplexLatticeFunction { domain: self.domain, values })
    }
}

/// `F(NW) - F(SE) - i[F(NE) - F(SW)]` on an interior face.
pub fn isaacs_residual(f: &ComplexLatticeFunction, face: usize) -> Result<Complex64> {
    let [nw, ne, se, sw] = f.domain.corners(face)?;
    let v = &f.values;
    Ok(v[nw] - v[se] - Complex64::i() * (v[ne] - v[sw]))
}

/// Largest residual modulus over all faces.
pub fn preholomorphic_check(f: &ComplexLatticeFunction) -> f64 {
    (0..f.domain.num_faces())
        .map(|face| isaacs_residual(f, face).expect("interior face").norm())
        .fold(0.0, f64::max)
}

/// Dual edges, named by the primal edge they cross, forming a
/// self-avoiding dual path from the unbounded face to `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    pub edges: Vec<usize>,
    pub target: usize,
}

impl Cut {
    /// Checks the path structure against the dual of `domain`.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let dual = dual_lattice(&domain.lattice())?;
        let mut at = domain.outer_face();
        let mut visited = vec![false; dual.num_vertices()];
        visited[at] = true;
        for &e in &self.edges {
            if e >= dual.num_edges() {
                return Err(Error::InvalidParameter(format!("cut uses missing edge {e}")));
            }
            let (a, b) = dual.edge(e);
            at = if a == at {
                b
            } else if b == at {
                a
            } else {
                return Err(Error::InvalidParameter(format!("cut edge {e} does not continue the path")));
            };
            if visited[at] {
                return Err(Error::InvalidParameter(format!("cut revisits face {at}")));
            }
            visited[at] = true;
        }
        if at != self.target {
            return Err(Error::InvalidParameter(format!("cut ends at face {at}, not {}", self.target)));
        }
        Ok(())
    }

    /// Cut entering through the bottom side and running up column `x`.
    pub fn from_below(domain: &Domain, face: usize) -> Result<Self> {
        let [_, _, _, sw] = domain.corners(face)?;
        let (x, y) = (sw / domain.height, sw % domain.height);
        let lat = domain.lattice();
        let edges = (0..=y)
            .map(|k| edge_between(&lat, domain.vertex(x, k), domain.vertex(x + 1, k)))
            .collect::<Result<_>>()?;
        Ok(Cut { edges, target: face })
    }

    /// Cut entering through the left side and running along row `y`.
    pub fn from_left(domain: &Domain, face: usize) -> Result<Self> {
        let [_, _, _, sw] = domain.corners(face)?;
        let (x, y) = (sw / domain.height, sw % domain.height);
        let lat = domain.lattice();
        let edges = (0..=x)
            .map(|k| edge_between(&lat, domain.vertex(k, y), domain.vertex(k, y + 1)))
            .collect::<Result<_>>()?;
        Ok(Cut { edges, target: face })
    }
}

fn edge_between(lat: &Lattice, u: usize, v: usize) -> Result<usize> {
    lat.incident(u)
        .iter()
        .find(|&&(w, _)| w == v)
        .map(|&(_, e)| e)
        .ok_or_else(|| Error::InvalidParameter(format!("vertices {u} and {v} are not adjacent")))
}

/// Disorder line ending at `face`, optionally paired with the spin at a
/// corner of that face. `face` equal to the unbounded face means no
/// disorder line (its cut is empty) and leaves the spin unrestricted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    pub vertex: Option<usize>,
    pub face: usize,
}

fn validate_insertions(domain: &Domain, pairs: &[Insertion], cuts: &[Cut]) -> Result<Vec<bool>> {
    if domain.num_vertices() > MAX_CORRELATOR_VERTICES {
        return Err(Error::SizeCap(format!(
            "correlators are enumerated up to {MAX_CORRELATOR_VERTICES} vertices"
        )));
    }
    if pairs.len() != cuts.len() {
        return Err(Error::DimensionMismatch("one cut per insertion".into()));
    }
    let num_edges = domain.lattice().num_edges();
    let mut on_cut = vec![false; num_edges];
    for (p, cut) in pairs.iter().zip(cuts) {
        if let Some(v) = p.vertex.filter(|&v| v >= domain.num_vertices()) {
            return Err(Error::InvalidVertex(v));
        }
        if p.face != domain.outer_face() {
            let corners = domain.corners(p.face)?;
            if let Some(v) = p.vertex.filter(|v| !corners.contains(v)) {
                return Err(Error::Precondition(format!("face {} is not bordered by vertex {v}", p.face)));
            }
        }
        if cut.target != p.face {
            return Err(Error::Precondition(format!("cut ends at face {}, insertion at {}", cut.target, p.face)));
        }
        cut.validate(domain)?;
        for &e in &cut.edges {
            if on_cut[e] {
                return Err(Error::Precondition(format!("cuts overlap on edge {e}")));
            }
            on_cut[e] = true;
        }
    }
    Ok(on_cut)
}

/// `⟨Π σ_{x_i} Π_{e ∈ cuts} exp(-2β σ_u σ_v)⟩` on the free domain with unit
/// couplings, computed by inserting the disorder weights into the sum.
pub fn order_disorder_correlator(domain: &Domain, beta: f64, pairs: &[Insertion], cuts: &[Cut]) -> Result<f64> {
    let on_cut = validate_insertions(domain, pairs, cuts)?;
    let lat = domain.lattice();
    let n = lat.num_vertices();
    let en = Enumerator::from_raw(&lat, beta, &vec![1.0; lat.num_edges()], &vec![0.0; n])?;
    let spins: u64 = pairs.iter().filter_map(|p| p.vertex).fold(0, |m, v| m ^ 1 << v);
    let cut_edges: Vec<(usize, usize)> =
        lat.edges().iter().zip(&on_cut).filter(|(_, &c)| c).map(|(&e, _)| e).collect();
    let observable = |mask: u64| {
        let sign = if (!mask & spins).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let aligned = cut_edges.iter().filter(|&&(u, v)| (mask >> u ^ mask >> v) & 1 == 0).count() as f64;
        let disorder = (-2.0 * beta * (2.0 * aligned - cut_edges.len() as f64)).exp();
        sign * disorder
    };
    Ok(en.expectations(&[&observable]).1[0])
}

/// The same correlator with the couplings negated on cut edges:
/// `⟨Π σ_{x_i}⟩' Z'/Z`.
pub fn order_disorder_negated(domain: &Domain, beta: f64, pairs: &[Insertion], cuts: &[Cut]) -> Result<f64> {
    let on_cut = validate_insertions(domain, pairs, cuts)?;
    let lat = domain.lattice();
    let n = lat.num_vertices();
    let field = vec![0.0; n];
    let plain = Enumerator::from_raw(&lat, beta, &vec![1.0; lat.num_edges()], &field)?;
    let coupling: Vec<f64> = on_cut.iter().map(|&c| if c { -1.0 } else { 1.0 }).collect();
    let flipped = Enumerator::from_raw(&lat, beta, &coupling, &field)?;
    let mut counted = std::collections::BTreeMap::<usize, usize>::new();
    pairs.iter().filter_map(|p| p.vertex).for_each(|v| *counted.entry(v).or_default() += 1);
    let odd: Vec<usize> = counted.into_iter().filter(|&(_, c)| c % 2 == 1).map(|(v, _)| v).collect();
    let corr = flipped.correlations(&[odd])?[0];
    Ok(corr * (flipped.log_partition() - plain.log_partition()).exp())
}

/// `|F(cuts_a) - F(cuts_b)|` for two cut systems with the same targets.
pub fn cut_deformation_check(
    domain: &Domain,
    beta: f64,
    pairs: &[Insertion],
    cuts_a: &[Cut],
    cuts_b: &[Cut],
) -> Result<f64> {
    if cuts_a.len() != cuts_b.len() || cuts_a.iter().zip(cuts_b).any(|(a, b)| a.target != b.target) {
        return Err(Error::Precondition("cut systems end at different faces".into()));
    }
    let a = order_disorder_correlator(domain, beta, pairs, cuts_a)?;
    let b = order_disorder_correlator(domain, beta, pairs, cuts_b)?;
    Ok((a - b).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_face_residuals() {
        let d = Domain::new(2, 2).unwrap();
        let z = ComplexLatticeFunction::from_fn(d, |z| z);
        assert_eq!(isaacs_residual(&z, 0).unwrap(), Complex64::new(0.0, 0.0));
        let c = ComplexLatticeFunction::from_fn(d, |z| z.conj());
        assert_eq!(isaacs_residual(&c, 0).unwrap(), Complex64::new(-2.0, -2.0));
        assert!(isaacs_residual(&z, 1).is_err());
    }

    #[test]
    fn straight_cuts_are_valid_paths() {
        let d = Domain::new(4, 3).unwrap();
        for face in 0..d.num_faces() {
            Cut::from_below(&d, face).unwrap().validate(&d).unwrap();
            Cut::from_left(&d, face).unwrap().validate(&d).unwrap();
        }
        let mut bad = Cut::from_below(&d, 5).unwrap();
        bad.edges.reverse();
        assert!(bad.validate(&d).is_err());
    }
}
