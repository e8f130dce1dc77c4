//! Exhaustive checks of the correlation inequalities on small instances,
//! Lee–Yang zeros, Gaussian domination and the infrared bound.
//!
//! Every inequality is reported as `smaller ≤ larger` together with the
//! slack allowed for rounding (and finite differences for GHS).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Enumerator;
use crate::fk::{is_increasing, FkConfig, FkEnumerator, FkParams, MAX_MONOTONE_SCAN_EDGES};
use crate::lattice::{Lattice, Topology};
use crate::mc::{run_chains, EstimatorAccumulator, McConfig};
use crate::model::{effective_field, BoundaryCondition, Couplings};

/// Largest vertex count of a spin inequality instance.
pub const MAX_INEQUALITY_VERTICES: usize = 18;
/// Largest vertex count for Lee–Yang root finding.
pub const MAX_LEE_YANG_VERTICES: usize = 12;
/// Largest torus handled by exact Gaussian-domination and infrared checks.
pub const MAX_REFLECTION_VERTICES: usize = 20;
/// Field step of the GHS finite-difference stencil.
pub const GHS_STEP: f64 = 1e-3;
/// Rounding slack for exactly enumerated inequalities.
pub const EXACT_SLACK: f64 = 1e-10;
/// Allowed distance of a Lee–Yang zero from the unit circle.
pub const UNIT_CIRCLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityKind {
    Griffiths1,
    Griffiths2,
    Ghs,
    SimonLieb,
    Mms,
    FkgSpin,
    FkgFk,
    PMonotone,
    LeeYang,
    GaussianDomination,
}

impl InequalityKind {
    pub const ALL: [InequalityKind; 10] = [
        InequalityKind::Griffiths1,
        InequalityKind::Griffiths2,
        InequalityKind::Ghs,
        InequalityKind::SimonLieb,
        InequalityKind::Mms,
        InequalityKind::FkgSpin,
        InequalityKind::FkgFk,
        InequalityKind::PMonotone,
        InequalityKind::LeeYang,
        InequalityKind::GaussianDomination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InequalityKind::Griffiths1 => "griffiths1",
            InequalityKind::Griffiths2 => "griffiths2",
            InequalityKind::Ghs => "ghs",
            InequalityKind::SimonLieb => "simon-lieb",
            InequalityKind::Mms => "mms",
            InequalityKind::FkgSpin => "fkg-spin",
            InequalityKind::FkgFk => "fkg-fk",
            InequalityKind::PMonotone => "p-monotone",
            InequalityKind::LeeYang => "lee-yang",
            InequalityKind::GaussianDomination => "gaussian-domination",
        }
    }
}

impl fmt::Display for InequalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InequalityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InequalityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown inequality kind `{s}`")))
    }
}

/// Ferromagnetic spin model small enough to enumerate.
#[derive(Debug, Clone)]
pub struct SpinModel {
    pub lattice: Lattice,
    pub couplings: Couplings,
    pub bc: BoundaryCondition,
}

impl SpinModel {
    pub fn new(lattice: Lattice, couplings: Couplings, bc: BoundaryCondition) -> Result<Self> {
        effective_field(&lattice, &couplings, &bc)?;
        if lattice.num_vertices() > MAX_INEQUALITY_VERTICES {
            return Err(Error::SizeCap(format!(
                "inequality checks need at most {MAX_INEQUALITY_VERTICES} vertices, got {}",
                lattice.num_vertices()
            )));
        }
        Ok(SpinModel { lattice, couplings, bc })
    }

    fn field(&self) -> Vec<f64> {
        effective_field(&self.lattice, &self.couplings, &self.bc).expect("validated on construction")
    }

    fn enumerator(&self) -> Result<Enumerator> {
        Enumerator::new(&self.lattice, &self.couplings, &self.bc)
    }

    fn check_vertices(&self, vs: &[usize]) -> Result<()> {
        match vs.iter().find(|&&v| v >= self.lattice.num_vertices()) {
            Some(&v) => Err(Error::InvalidVertex(v)),
            None => Ok(()),
        }
    }
}

/// Real function of a bit mask, stored as a table of `2^bits` values.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFunction {
    bits: usize,
    values: Vec<f64>,
}

impl MaskFunction {
    pub fn from_fn(bits: usize, f: impl Fn(u64) -> f64) -> Result<Self> {
        if bits > 20 {
            return Err(Error::SizeCap(format!("mask functions need at most 20 bits, got {bits}")));
        }
        Ok(MaskFunction { bits, values: (0u64..1 << bits).map(f).collect() })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn eval(&self, mask: u64) -> f64 {
        self.values[mask as usize]
    }

    /// Whether setting any bit never decreases the value.
    pub fn is_increasing(&self) -> bool {
        (0..self.values.len())
            .all(|m| (0..self.bits).all(|b| m >> b & 1 == 1 || self.values[m | 1 << b] >= self.values[m]))
    }

    /// Nonnegative combination of up-set indicators and coordinates, which
    /// is increasing by construction.
    pub fn random_increasing<R: Rng + ?Sized>(bits: usize, rng: &mut R) -> Result<Self> {
        let terms: Vec<(u64, f64)> = (0..rng.gen_range(1..=4))
            .map(|_| {
                let gen = (0..bits).filter(|_| rng.gen_bool(0.3)).fold(0u64, |m, b| m | 1 << b);
                (gen, rng.gen::<f64>())
            })
            .collect();
        let linear: Vec<f64> = (0..bits).map(|_| if rng.gen_bool(0.5) { rng.gen() } else { 0.0 }).collect();
        let constant: f64 = rng.gen_range(-1.0..1.0);
        Self::from_fn(bits, |m| {
            constant
                + terms.iter().filter(|(g, _)| m & g == *g).map(|(_, c)| c).sum::<f64>()
                + linear.iter().enumerate().filter(|(b, _)| m >> b & 1 == 1).map(|(_, w)| w).sum::<f64>()
        })
    }
}

/// One inequality together with the data it is evaluated on. The MMS
/// origin is vertex 0, a corner of the box; `x` and `y` are distances
/// along `axis`.
#[derive(Debug, Clone)]
pub enum InequalityInstance {
    Griffiths1 { model: SpinModel, a: Vec<usize> },
    Griffiths2 { model: SpinModel, a: Vec<usize>, b: Vec<usize> },
    Ghs { model: SpinModel, x: usize, h: f64 },
    SimonLieb { model: SpinModel, origin: usize, target: usize, subdomain: Vec<usize> },
    Mms { model: SpinModel, axis: usize, x: usize, y: usize },
    FkgSpin { model: SpinModel, f: MaskFunction, g: MaskFunction },
    FkgFk { lattice: Lattice, params: FkParams, f: MaskFunction, g: MaskFunction },
    PMonotone { lattice: Lattice, params: FkParams, p_higher: f64, f: MaskFunction },
}

impl InequalityInstance {
    pub fn kind(&self) -> InequalityKind {
        match self {
            InequalityInstance::Griffiths1 { .. } => InequalityKind::Griffiths1,
            InequalityInstance::Griffiths2 { .. } => InequalityKind::Griffiths2,
            InequalityInstance::Ghs { .. } => InequalityKind::Ghs,
            InequalityInstance::SimonLieb { .. } => InequalityKind::SimonLieb,
            InequalityInstance::Mms { .. } => InequalityKind::Mms,
            InequalityInstance::FkgSpin { .. } => InequalityKind::FkgSpin,
            InequalityInstance::FkgFk { .. } => InequalityKind::FkgFk,
            InequalityInstance::PMonotone { .. } => InequalityKind::PMonotone,
        }
    }
}

/// Evaluated inequality `smaller ≤ larger`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub kind: InequalityKind,
    pub smaller: f64,
    pub larger: f64,
    pub slack: f64,
}

impl InequalityCheck {
    pub fn margin(&self) -> f64 {
        self.larger - self.smaller
    }

    /// Amount by which the inequality fails beyond the slack.
    pub fn violation(&self) -> f64 {
        (self.smaller - self.larger - self.slack).max(0.0)
    }

    fn exact(kind: InequalityKind, smaller: f64, larger: f64) -> Self {
        InequalityCheck { kind, smaller, larger, slack: EXACT_SLACK }
    }
}

fn require_nonnegative_field(model: &SpinModel) -> Result<()> {
    if model.field().iter().any(|&h| h < 0.0) {
        return Err(Error::Precondition("this inequality needs a nonnegative field".into()));
    }
    Ok(())
}

fn require_zero_field_free(model: &SpinModel) -> Result<()> {
    if !model.bc.is_free() || !model.couplings.has_zero_field() {
        return Err(Error::Precondition("this inequality needs free boundary and zero field".into()));
    }
    Ok(())
}

fn magnetization_at(model: &SpinModel, x: usize, shift: f64) -> Result<f64> {
    let field: Vec<f64> = model.field().iter().map(|h| h + shift).collect();
    let en = Enumerator::from_raw(&model.lattice, model.couplings.beta(), model.couplings.coupling(), &field)?;
    Ok(en.correlations(&[vec![x]])?[0])
}

fn second_difference(model: &SpinModel, x: usize, h: f64, step: f64) -> Result<f64> {
    let m = |k: f64| magnetization_at(model, x, h + k * step);
    Ok((-m(2.0)? + 16.0 * m(1.0)? - 30.0 * m(0.0)? + 16.0 * m(-1.0)? - m(-2.0)?) / (12.0 * step * step))
}

/// Vertices of `subdomain` with a neighbour outside it.
pub fn inner_boundary(lat: &Lattice, subdomain: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; lat.num_vertices()];
    subdomain.iter().for_each(|&v| inside[v] = true);
    subdomain.iter().copied().filter(|&v| lat.incident(v).iter().any(|&(w, _)| !inside[w])).collect()
}

/// Both sides of the inequality described by `instance`, by enumeration.
pub fn check_spin_inequality(instance: &InequalityInstance) -> Result<InequalityCheck> {
    let kind = instance.kind();
    match instance {
        InequalityInstance::Griffiths1 { model, a } => {
            model.check_vertices(a)?;
            require_nonnegative_field(model)?;
            let c = model.enumerator()?.correlations(&[a.clone()])?;
            Ok(InequalityCheck::exact(kind, 0.0, c[0]))
        }
        InequalityInstance::Griffiths2 { model, a, b } => {
            model.check_vertices(a)?;
            model.check_vertices(b)?;
            require_nonnegative_field(model)?;
            let ab: Vec<usize> = a.iter().chain(b).copied().collect();
            let c = model.enumerator()?.correlations(&[a.clone(), b.clone(), ab])?;
            Ok(InequalityCheck::exact(kind, c[0] * c[1], c[2]))
        }
        InequalityInstance::Ghs { model, x, h } => {
            model.check_vertices(&[*x])?;
            require_nonnegative_field(model)?;
            if !(h.is_finite() && *h >= 4.0 * GHS_STEP) {
                return Err(Error::Precondition(format!(
                    "GHS stencil needs a field shift of at least {}, got {h}",
                    4.0 * GHS_STEP
                )));
            }
            let d1 = second_difference(model, *x, *h, GHS_STEP)?;
            let d2 = second_difference(model, *x, *h, 2.0 * GHS_STEP)?;
            Ok(InequalityCheck { kind, smaller: d1, larger: 0.0, slack: (d1 - d2).abs() + EXACT_SLACK })
        }
        InequalityInstance::SimonLieb { model, origin, target, subdomain } => {
            model.check_vertices(&[*origin, *target])?;
            model.check_vertices(subdomain)?;
            require_zero_field_free(model)?;
            let mut sorted = subdomain.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != subdomain.len() {
                return Err(Error::Precondition("subdomain has repeated vertices".into()));
            }
            if !subdomain.contains(origin) || subdomain.contains(target) {
                return Err(Error::Precondition("subdomain must contain the origin and not the target".into()));
            }
            let full = model.enumerator()?.two_point_matrix();
            let (sub, edge_map) = model.lattice.induced(subdomain);
            let sub_coupling: Vec<f64> = edge_map.iter().map(|&e| model.couplings.coupling()[e]).collect();
            let sub_en =
                Enumerator::from_raw(&sub, model.couplings.beta(), &sub_coupling, &vec![0.0; subdomain.len()])?;
            let local = |v: usize| subdomain.iter().position(|&w| w == v).expect("vertex of the subdomain");
            let o = local(*origin);
            let sub_g = sub_en.two_point_matrix();
            let rhs = inner_boundary(&model.lattice, subdomain)
                .into_iter()
                .map(|y| sub_g[o][local(y)] * full[y][*target])
                .sum();
            Ok(InequalityCheck::exact(kind, full[*origin][*target], rhs))
        }
        InequalityInstance::Mms { model, axis, x, y } => {
            require_zero_field_free(model)?;
            let lat = &model.lattice;
            if lat.topology() != Topology::FreeBox || !model.couplings.has_uniform_coupling() {
                return Err(Error::Precondition("MMS is checked on free boxes with uniform couplings".into()));
            }
            if *axis >= lat.dimension() || x + y >= lat.sides()[*axis] {
                return Err(Error::Precondition("translations leave the box".into()));
            }
            let at = |t: usize| {
                let mut c = vec![0; lat.dimension()];
                c[*axis] = t;
                lat.index(&c)
            };
            let c = model.enumerator()?.correlations(&[vec![0, at(*x)], vec![0, at(x + y)]])?;
            Ok(InequalityCheck::exact(kind, c[1], c[0]))
        }
        InequalityInstance::FkgSpin { model, f, g } => {
            let n = model.lattice.num_vertices();
            if f.bits() != n || g.bits() != n {
                return Err(Error::DimensionMismatch("functions must take one bit per vertex".into()));
            }
            if !f.is_increasing() || !g.is_increasing() {
                return Err(Error::Precondition("f and g must be increasing".into()));
            }
            let ff = |m: u64| f.eval(m);
            let gg = |m: u64| g.eval(m);
            let fg = |m: u64| f.eval(m) * g.eval(m);
            let (_, e) = model.enumerator()?.expectations(&[&ff, &gg, &fg]);
            Ok(InequalityCheck::exact(kind, e[0] * e[1], e[2]))
        }
        InequalityInstance::FkgFk { lattice, params, f, g } => {
            let fk = fk_instance(lattice, params, &[f, g])?;
            let ef = fk.expect(&|m| f.eval(m));
            let eg = fk.expect(&|m| g.eval(m));
            let efg = fk.expect(&|m| f.eval(m) * g.eval(m));
            Ok(InequalityCheck::exact(kind, ef * eg, efg))
        }
        InequalityInstance::PMonotone { lattice, params, p_higher, f } => {
            if !(*p_higher >= params.p) {
                return Err(Error::InvalidParameter("p' must be at least p".into()));
            }
            let lo = fk_instance(lattice, params, &[f])?;
            let hi = FkEnumerator::new(lattice, &FkParams::new(*p_higher, params.q)?)?;
            Ok(InequalityCheck::exact(kind, lo.expect(&|m| f.eval(m)), hi.expect(&|m| f.eval(m))))
        }
    }
}

fn fk_instance(lattice: &Lattice, params: &FkParams, fs: &[&MaskFunction]) -> Result<FkEnumerator> {
    let m = lattice.num_edges();
    if m > MAX_MONOTONE_SCAN_EDGES {
        return Err(Error::SizeCap(format!("at most {MAX_MONOTONE_SCAN_EDGES} edges, got {m}")));
    }
    if params.q < 1.0 {
        return Err(Error::Precondition(format!("FK order inequalities need q >= 1, got {}", params.q)));
    }
    for f in fs {
        if f.bits() != m {
            return Err(Error::DimensionMismatch("functions must take one bit per edge".into()));
        }
        if !is_increasing(m, &|w| f.eval(w))? {
            return Err(Error::Precondition("functions must be increasing".into()));
        }
    }
    FkEnumerator::new(lattice, params)
}

/// Coefficients `c_k`, up to a common factor, of the partition function
/// as a polynomial in `z = e^(2βh)`: `Z = e^(-βhV) Σ_k c_k z^k`, where `k`
/// counts plus spins. Any real couplings are accepted.
pub fn partition_polynomial(lat: &Lattice, beta: f64, coupling: &[f64]) -> Result<Vec<f64>> {
    let n = lat.num_vertices();
    if n > MAX_LEE_YANG_VERTICES {
        return Err(Error::SizeCap(format!("at most {MAX_LEE_YANG_VERTICES} vertices, got {n}")));
    }
    let en = Enumerator::from_raw(lat, beta, coupling, &vec![0.0; n])?;
    Ok(en.fold(
        || vec![0.0; n + 1],
        |acc, mask, w| acc[mask.count_ones() as usize] += w,
        |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        },
    ))
}

fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Parlett–Reinsch diagonal balancing in powers of two.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c: f64 = (0..n).filter(|&j| j != i).map(|j| m[(j, i)].abs()).sum();
            let mut r: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c > r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if c + r < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// All complex roots of `Σ c_k z^k` from the eigenvalues of the balanced
/// companion matrix, each refined by Newton steps on the polynomial.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let deg = match coeffs.iter().rposition(|&c| c != 0.0) {
        Some(d) => d,
        None => return Err(Error::InvalidParameter("zero polynomial".into())),
    };
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite polynomial coefficient".into()));
    }
    let coeffs = &coeffs[..=deg];
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for j in 0..deg {
        companion[(0, j)] = -coeffs[deg - 1 - j] / lead;
    }
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    balance(&mut companion);
    let schur = Schur::try_new(companion, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical(format!("eigenvalue iteration did not converge for {coeffs:?}")))?;
    let mut roots: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    for z in roots.iter_mut() {
        for _ in 0..20 {
            let (p, dp) = horner(coeffs, *z);
            if dp.norm() == 0.0 {
                break;
            }
            let next = *z - p / dp;
            if !next.is_finite() || horner(coeffs, next).0.norm() >= p.norm() {
                break;
            }
            *z = next;
        }
    }
    if roots.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numerical(format!("non-finite root for {coeffs:?}")));
    }
    Ok(roots)
}

/// Zeros of the partition function in `z = e^(2βh)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeeYangZeros {
    pub roots: Vec<Complex64>,
}

impl LeeYangZeros {
    pub fn moduli(&self) -> Vec<f64> {
        self.roots.iter().map(|z| z.norm()).collect()
    }

    /// `max_i ||z_i| - 1|`.
    pub fn max_unit_deviation(&self) -> f64 {
        self.roots.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Partition-function zeros for arbitrary real couplings. The polynomial
/// factorises over the components of the edges with `βJ ≠ 0`, and an
/// isolated vertex contributes the exact root `-1`.
pub fn partition_zeros(lat: &Lattice, beta: f64, coupling: &[f64]) -> Result<LeeYangZeros> {
    if coupling.len() != lat.num_edges() {
        return Err(Error::DimensionMismatch("one coupling per edge".into()));
    }
    let n = lat.num_vertices();
    if n > MAX_LEE_YANG_VERTICES {
        return Err(Error::SizeCap(format!("at most {MAX_LEE_YANG_VERTICES} vertices, got {n}")));
    }
    let mut uf = crate::cluster::UnionFind::new(n);
    for (&(u, v), &j) in lat.edges().iter().zip(coupling) {
        if beta * j != 0.0 {
            uf.union(u, v);
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        let r = uf.find(v);
        members[r].push(v);
    }
    let mut roots = Vec::with_capacity(n);
    for comp in members.into_iter().filter(|c| !c.is_empty()) {
        if comp.len() == 1 {
            roots.push(Complex64::new(-1.0, 0.0));
            continue;
        }
        let (sub, edge_map) = lat.induced(&comp);
        let sub_coupling: Vec<f64> = edge_map.iter().map(|&e| coupling[e]).collect();
        roots.extend(polynomial_roots(&partition_polynomial(&sub, beta, &sub_coupling)?)?);
    }
    Ok(LeeYangZeros { roots })
}

/// Lee–Yang zeros of a ferromagnetic instance.
pub fn lee_yang_zeros(lat: &Lattice, beta: f64, coupling: &[f64]) -> Result<LeeYangZeros> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
    }
    if coupling.iter().any(|j| !(j.is_finite() && *j >= 0.0)) {
        return Err(Error::Precondition("Lee–Yang needs nonnegative couplings".into()));
    }
    partition_zeros(lat, beta, coupling)
}

/// Result of comparing `Z_L(h)` with `Z_L(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDomination {
    /// `ln Z_L(h) - ln Z_L(0)`.
    pub log_ratio: f64,
    /// `max(0, Z_L(h)/Z_L(0) - 1)`.
    pub violation: f64,
}

fn even_torus(side: usize, dim: usize) -> Result<Lattice> {
    if side % 2 != 0 {
        return Err(Error::Precondition(format!(
            "reflection positivity needs an even torus side, got {side}"
        )));
    }
    Lattice::build(&vec![side; dim], Topology::Torus)
}

/// `ln Σ_σ exp[-β Σ_E (σ_x - σ_y + h_x - h_y)²]`. Expanding the square
/// turns this into an Ising model with couplings `2` and field
/// `-2 (Lh)_x`, `L` the graph Laplacian.
pub fn gradient_log_partition(lat: &Lattice, beta: f64, h: &[f64]) -> Result<f64> {
    let n = lat.num_vertices();
    if h.len() != n {
        return Err(Error::DimensionMismatch(format!("field needs {n} entries, got {}", h.len())));
    }
    let mut lap = vec![0.0; n];
    let mut quad = 0.0;
    for &(x, y) in lat.edges() {
        let d = h[x] - h[y];
        lap[x] += d;
        lap[y] -= d;
        quad += d * d;
    }
    let field: Vec<f64> = lap.iter().map(|l| -2.0 * l).collect();
    let en = Enumerator::from_raw(lat, beta, &vec![2.0; lat.num_edges()], &field)?;
    Ok(en.log_partition() - beta * (2.0 * lat.num_edges() as f64 + quad))
}

pub fn gaussian_domination_check(side: usize, dim: usize, beta: f64, h: &[f64]) -> Result<GaussianDomination> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
    }
    let lat = even_torus(side, dim)?;
    if lat.num_vertices() > MAX_REFLECTION_VERTICES {
        return Err(Error::SizeCap(format!(
            "Gaussian domination is enumerated up to {MAX_REFLECTION_VERTICES} vertices"
        )));
    }
    let log_ratio = gradient_log_partition(&lat, beta, h)? - gradient_log_partition(&lat, beta, &vec![0.0; h.len()])?;
    Ok(GaussianDomination { log_ratio, violation: log_ratio.exp_m1().max(0.0) })
}

/// `ε(k) = 2 Σ_i (1 - cos k_i)` for `k = 2π m / L`.
pub fn lattice_laplacian_symbol(momentum: &[usize], side: usize) -> f64 {
    momentum.iter().map(|&m| 2.0 * (1.0 - (2.0 * std::f64::consts::PI * m as f64 / side as f64).cos())).sum()
}

/// Right-hand side `(2/β)/ε(k)` of the Fourier infrared bound.
pub fn infrared_rhs(momentum: &[usize], side: usize, beta: f64) -> Result<f64> {
    if momentum.iter().all(|&m| m % side == 0) {
        return Err(Error::InvalidParameter("the zero mode is excluded from the infrared bound".into()));
    }
    Ok(2.0 / beta / lattice_laplacian_symbol(momentum, side))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraredMode {
    /// Integer momentum `m`, with `k = 2π m / L`.
    pub momentum: Vec<usize>,
    /// `⟨|Σ_x e^(ik·x) σ_x|²⟩ / V`.
    pub lhs: f64,
    /// Present for Monte Carlo estimates.
    pub stderr: Option<f64>,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraredReport {
    pub side: usize,
    pub dimension: usize,
    pub beta: f64,
    /// The bound is a theorem for `d ≥ 3` only.
    pub in_theorem: bool,
    pub modes: Vec<InfraredMode>,
}

fn nonzero_momenta(side: usize, dim: usize) -> Vec<Vec<usize>> {
    let total = side.pow(dim as u32);
    (1..total)
        .map(|mut i| {
            let mut m = vec![0; dim];
            for slot in m.iter_mut().rev() {
                *slot = i % side;
                i /= side;
            }
            m
        })
        .collect()
}

/// Compares every nonzero Fourier mode of the spin field on the `L^d`
/// torus with `(2/β)/ε(k)`. Exact for at most
/// [`MAX_REFLECTION_VERTICES`] sites, otherwise estimated with `mc`.
pub fn infrared_bound_check(side: usize, dim: usize, beta: f64, mc: Option<&McConfig>) -> Result<InfraredReport> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be finite and > 0, got {beta}")));
    }
    let lat = even_torus(side, dim)?;
    let n = lat.num_vertices();
    let momenta = nonzero_momenta(side, dim);
    let phases: Vec<Vec<(f64, f64)>> = momenta
        .iter()
        .map(|m| {
            (0..n)
                .map(|v| {
                    let c = lat.coords(v);
                    let arg: f64 = c.iter().zip(m).map(|(&x, &k)| (x * k) as f64).sum::<f64>() * 2.0
                        * std::f64::consts::PI
                        / side as f64;
                    (arg.cos(), arg.sin())
                })
                .collect()
        })
        .collect();
    let coup = Couplings::uniform(&lat, beta, 0.0)?;
    let estimates: Vec<(f64, Option<f64>)> = if n <= MAX_REFLECTION_VERTICES {
        let g = Enumerator::new(&lat, &coup, &BoundaryCondition::Free)?.two_point_matrix();
        phases
            .iter()
            .map(|ph| {
                let mut s = 0.0;
                for x in 0..n {
                    for y in 0..n {
                        s += (ph[x].0 * ph[y].0 + ph[x].1 * ph[y].1) * g[x][y];
                    }
                }
                (s / n as f64, None)
            })
            .collect()
    } else {
        let cfg = mc.ok_or_else(|| {
            Error::Precondition(format!("tori above {MAX_REFLECTION_VERTICES} sites need a Monte Carlo budget"))
        })?;
        let per_chain = run_chains(
            &lat,
            &coup,
            &BoundaryCondition::Free,
            cfg,
            || {
                let mut accs = vec![EstimatorAccumulator::new(); phases.len()];
                accs.iter_mut().for_each(|a| a.start_chain());
                accs
            },
            |accs, sample| {
                for (acc, ph) in accs.iter_mut().zip(&phases) {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (v, &(c, s)) in ph.iter().enumerate() {
                        let sv = sample.spins.get(v) as f64;
                        re += c * sv;
                        im += s * sv;
                    }
                    acc.push((re * re + im * im) / n as f64);
                }
            },
        )?;
        let mut merged: Vec<EstimatorAccumulator> = vec![EstimatorAccumulator::new(); phases.len()];
        for chain in per_chain {
            merged = merged.into_iter().zip(chain).map(|(a, b)| a.merge(b)).collect();
        }
        merged
            .iter()
            .map(|a| a.estimate().map(|e| (e.mean, Some(e.stderr))))
            .collect::<Result<_>>()?
    };
    let modes = momenta
        .into_iter()
        .zip(estimates)
        .map(|(momentum, (lhs, stderr))| {
            let rhs = infrared_rhs(&momentum, side, beta)?;
            Ok(InfraredMode { momentum, lhs, stderr, rhs, margin: rhs - lhs })
        })
        .collect::<Result<_>>()?;
    Ok(InfraredReport { side, dimension: dim, beta, in_theorem: dim >= 3, modes })
}

/// Outcome of a randomized battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySummary {
    pub kind: InequalityKind,
    pub trials: usize,
    pub violations: usize,
    /// Smallest `larger - smaller` seen (for Lee–Yang, the tolerance minus
    /// the largest distance of a zero from the unit circle; for Gaussian
    /// domination, `1 - Z(h)/Z(0)`).
    pub worst_margin: f64,
}

/// Default vertex cap of random battery instances.
pub const DEFAULT_SIZE_CAP: usize = 10;

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Random connected simple graph: a random tree plus extra edges.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, max_vertices: usize, max_edges: usize) -> Result<Lattice> {
    let cap = max_vertices.min(max_edges + 1);
    if cap < 2 {
        return Err(Error::InvalidParameter("random graphs need room for two vertices".into()));
    }
    let n = rng.gen_range(2..=cap);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        if edges.len() >= max_edges.min(n * (n - 1) / 2) {
            break;
        }
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && !edges.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u)) {
            edges.push((u, v));
        }
    }
    Lattice::from_edges(n, edges)
}

#[derive(Clone, Copy, PartialEq)]
enum FieldLaw {
    Zero,
    NonNegative,
    Any,
}

fn random_box<R: Rng + ?Sized>(rng: &mut R, cap: usize, dims: &[usize]) -> Result<Lattice> {
    loop {
        let d = dims[rng.gen_range(0..dims.len())];
        let sides: Vec<usize> = (0..d).map(|_| rng.gen_range(2..=5)).collect();
        if sides.iter().product::<usize>() <= cap {
            return Lattice::build(&sides, Topology::FreeBox);
        }
    }
}

fn random_model<R: Rng + ?Sized>(rng: &mut R, cap: usize, law: FieldLaw) -> Result<SpinModel> {
    let use_box = law == FieldLaw::NonNegative && rng.gen_bool(0.25);
    let (lat, bc) = if use_box {
        (random_box(rng, cap, &[1, 2])?, BoundaryCondition::Plus)
    } else {
        (random_graph(rng, cap, 2 * cap)?, BoundaryCondition::Free)
    };
    let beta = rng.gen_range(0.05..=1.5);
    let coupling: Vec<f64> =
        (0..lat.num_edges()).map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..2.0) }).collect();
    let field: Vec<f64> = match law {
        FieldLaw::Zero => vec![0.0; lat.num_vertices()],
        _ if rng.gen_bool(0.3) => vec![0.0; lat.num_vertices()],
        FieldLaw::NonNegative => (0..lat.num_vertices()).map(|_| rng.gen_range(0.0..1.0)).collect(),
        FieldLaw::Any => (0..lat.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    SpinModel::new(lat, Couplings::new(beta, field, coupling)?, bc)
}

fn random_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, max_len: usize) -> Vec<usize> {
    let len = rng.gen_range(1..=max_len.min(n));
    rand::seq::index::sample(rng, n, len).into_vec()
}

fn bfs_distances(lat: &Lattice, origin: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; lat.num_vertices()];
    let mut queue = std::collections::VecDeque::from([origin]);
    dist[origin] = 0;
    while let Some(v) = queue.pop_front() {
        for &(w, _) in lat.incident(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

fn random_fk<R: Rng + ?Sized>(rng: &mut R, cap: usize, trial: usize) -> Result<(Lattice, FkParams)> {
    let lat = random_graph(rng, cap.min(7), 10)?;
    let params = FkParams::new(rng.gen_range(0.05..0.95), (trial % 3 + 1) as f64)?;
    Ok((lat, params))
}

fn random_edge_function<R: Rng + ?Sized>(rng: &mut R, lat: &Lattice) -> Result<MaskFunction> {
    if rng.gen_bool(0.4) {
        let n = lat.num_vertices();
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let lat = lat.clone();
        MaskFunction::from_fn(lat.num_edges(), move |m| {
            let omega = FkConfig::from_mask(&lat, m).expect("mask within the edge count");
            if omega.connected(x, y) {
                1.0
            } else {
                0.0
            }
        })
    } else {
        MaskFunction::random_increasing(lat.num_edges(), rng)
    }
}

/// Random instance of `kind` with at most `cap` vertices.
pub fn random_instance<R: Rng + ?Sized>(kind: InequalityKind, rng: &mut R, cap: usize, trial: usize) -> Result<InequalityInstance> {
    Ok(match kind {
        InequalityKind::Griffiths1 => {
            let model = random_model(rng, cap, FieldLaw::NonNegative)?;
            let a = random_subset(rng, model.lattice.num_vertices(), 4);
            InequalityInstance::Griffiths1 { model, a }
        }
        InequalityKind::Griffiths2 => {
            let model = random_model(rng, cap, FieldLaw::NonNegative)?;
            let n = model.lattice.num_vertices();
            let a = random_subset(rng, n, 4);
            let b = random_subset(rng, n, 4);
            InequalityInstance::Griffiths2 { model, a, b }
        }
        InequalityKind::Ghs => {
            let model = random_model(rng, cap, FieldLaw::NonNegative)?;
            let x = rng.gen_range(0..model.lattice.num_vertices());
            InequalityInstance::Ghs { model, x, h: rng.gen_range(0.05..=1.0) }
        }
        InequalityKind::SimonLieb => {
            let model = random_model(rng, cap, FieldLaw::Zero)?;
            let n = model.lattice.num_vertices();
            let origin = rng.gen_range(0..n);
            let dist = bfs_distances(&model.lattice, origin);
            let target = loop {
                let t = rng.gen_range(0..n);
                if t != origin {
                    break t;
                }
            };
            let subdomain: Vec<usize> = if rng.gen_bool(0.5) {
                let r = rng.gen_range(0..dist[target]);
                (0..n).filter(|&v| dist[v] <= r).collect()
            } else {
                (0..n).filter(|&v| v == origin || (v != target && rng.gen_bool(0.5))).collect()
            };
            InequalityInstance::SimonLieb { model, origin, target, subdomain }
        }
        InequalityKind::Mms => {
            let lat = random_box(rng, cap, &[1, 2, 3])?;
            let axis = loop {
                let a = rng.gen_range(0..lat.dimension());
                if lat.sides()[a] >= 2 {
                    break a;
                }
            };
            let side = lat.sides()[axis];
            let x = rng.gen_range(0..side);
            let y = rng.gen_range(0..side - x);
            let beta = rng.gen_range(0.05..=2.0);
            let coup = Couplings::uniform(&lat, beta, 0.0)?;
            InequalityInstance::Mms { model: SpinModel::new(lat, coup, BoundaryCondition::Free)?, axis, x, y }
        }
        InequalityKind::FkgSpin => {
            let model = random_model(rng, cap, FieldLaw::Any)?;
            let n = model.lattice.num_vertices();
            let f = MaskFunction::random_increasing(n, rng)?;
            let g = MaskFunction::random_increasing(n, rng)?;
            InequalityInstance::FkgSpin { model, f, g }
        }
        InequalityKind::FkgFk => {
            let (lattice, params) = random_fk(rng, cap, trial)?;
            let f = random_edge_function(rng, &lattice)?;
            let g = random_edge_function(rng, &lattice)?;
            InequalityInstance::FkgFk { lattice, params, f, g }
        }
        InequalityKind::PMonotone => {
            let (lattice, params) = random_fk(rng, cap, trial)?;
            let p_higher = params.p + rng.gen::<f64>() * (1.0 - params.p);
            let f = random_edge_function(rng, &lattice)?;
            InequalityInstance::PMonotone { lattice, params, p_higher, f }
        }
        InequalityKind::LeeYang | InequalityKind::GaussianDomination => {
            return Err(Error::InvalidParameter(format!("{kind} is not a two-sided inequality instance")))
        }
    })
}

/// Returns `(margin, violated)` for one random trial.
fn run_trial(kind: InequalityKind, seed: u64, trial: usize, cap: usize) -> Result<(f64, bool)> {
    let mut rng = trial_rng(seed, trial);
    match kind {
        InequalityKind::LeeYang => {
            let lat = random_graph(&mut rng, cap.min(8), 16)?;
            let beta = 2.0 * (1.0 - rng.gen::<f64>());
            let coupling: Vec<f64> = (0..lat.num_edges()).map(|_| rng.gen_range(0.0..2.0)).collect();
            let dev = lee_yang_zeros(&lat, beta, &coupling)?.max_unit_deviation();
            Ok((UNIT_CIRCLE_TOLERANCE - dev, dev > UNIT_CIRCLE_TOLERANCE))
        }
        InequalityKind::GaussianDomination => {
            let beta = if trial % 2 == 0 { 0.3 } else { 0.5 };
            let scale = rng.gen_range(0.1..2.0);
            let h: Vec<f64> = (0..16).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
            let r = gaussian_domination_check(4, 2, beta, &h)?;
            Ok((-r.log_ratio.exp_m1(), r.violation > EXACT_SLACK))
        }
        _ => {
            let check = check_spin_inequality(&random_instance(kind, &mut rng, cap, trial)?)?;
            Ok((check.margin(), check.violation() > 0.0))
        }
    }
}

/// Runs `trials` random instances of `kind`. Trials are independent and
/// seeded by `(seed, trial)`, so the summary does not depend on the
/// thread count.
pub fn run_battery(kind: InequalityKind, trials: usize, seed: u64, size_cap: usize) -> Result<BatterySummary> {
    if !(2..=MAX_INEQUALITY_VERTICES).contains(&size_cap) {
        return Err(Error::InvalidParameter(format!(
            "size cap must lie in 2..={MAX_INEQUALITY_VERTICES}, got {size_cap}"
        )));
    }
    let results: Vec<(f64, bool)> =
        (0..trials).into_par_iter().map(|t| run_trial(kind, seed, t, size_cap)).collect::<Result<_>>()?;
    Ok(BatterySummary {
        kind,
        trials,
        violations: results.iter().filter(|r| r.1).count(),
        worst_margin: results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip_through_names() {
        for k in InequalityKind::ALL {
            assert_eq!(k.name().parse::<InequalityKind>().unwrap(), k);
        }
        assert!("nope".parse::<InequalityKind>().is_err());
    }

    #[test]
    fn griffiths_one_on_a_single_edge_is_tanh() {
        let lat = Lattice::from_edges(2, vec![(0, 1)]).unwrap();
        let model = SpinModel::new(lat.clone(), Couplings::uniform(&lat, 0.7, 0.0).unwrap(), BoundaryCondition::Free)
            .unwrap();
        let c = check_spin_inequality(&InequalityInstance::Griffiths1 { model, a: vec![0, 1] }).unwrap();
        assert!((c.larger - 0.7f64.tanh()).abs() < 1e-14);
        assert_eq!(c.violation(), 0.0);
    }

    #[test]
    fn fkg_with_equal_functions_is_a_variance() {
        let lat = Lattice::build(&[3, 2], Topology::FreeBox).unwrap();
        let model =
            SpinModel::new(lat.clone(), Couplings::uniform(&lat, 0.4, 0.1).unwrap(), BoundaryCondition::Free).unwrap();
        let f = MaskFunction::from_fn(6, |m| m.count_ones() as f64).unwrap();
        let c = check_spin_inequality(&InequalityInstance::FkgSpin { model: model.clone(), f: f.clone(), g: f })
            .unwrap();
        assert!(c.margin() > 0.0);
        let k = MaskFunction::from_fn(6, |_| 2.5).unwrap();
        let c = check_spin_inequality(&InequalityInstance::FkgSpin { model, f: k.clone(), g: k }).unwrap();
        assert!(c.margin().abs() < 1e-12);
    }

    #[test]
    fn polynomial_roots_of_a_known_cubic() {
        let mut r = polynomial_roots(&[-6.0, 11.0, -6.0, 1.0]).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (z, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((z - want).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_domination_rejects_odd_sides() {
        assert!(gaussian_domination_check(3, 2, 0.3, &[0.0; 9]).is_err());
    }
}
