//! Transfer matrices.
//!
//! A lattice is cut into slices orthogonal to axis 0 (each slice is a
//! contiguous block of vertex indices). A slice state is a bitmask of the
//! cross-section spins. The slice weight is `exp(β(Σ_intra J ττ + Σ h τ))`
//! and consecutive slices are coupled by `exp(+β J τ_x τ'_x)` per site.
//! The positive sign in the exponent is the one that reproduces
//! `Σ exp(-βH)` for `H = -Σ J σσ`; it is checked against enumeration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Topology};
use crate::model::{effective_field, BoundaryCondition, Couplings};

/// Largest cross-section for open (box) transfer products.
pub const MAX_OPEN_CROSS_SECTION: usize = 16;
/// Largest cross-section for periodic (trace) transfer products.
pub const MAX_PERIODIC_CROSS_SECTION: usize = 10;
/// Largest cross-section for which a dense matrix is materialised.
pub const MAX_DENSE_CROSS_SECTION: usize = 10;

struct Slices {
    m: usize,
    n0: usize,
    // per slice: log weight of each state
    slice_log_weight: Vec<Vec<f64>>,
    // per slice k: couplings between slice k and k+1 (wrapping)
    inter: Vec<Vec<f64>>,
}

fn build_slices(lat: &Lattice, beta: f64, coupling: &[f64], field: &[f64]) -> Result<Slices> {
    let n0 = lat.sides()[0];
    let m = lat.num_vertices() / n0;
    let periodic = lat.topology() == Topology::Torus;
    let mut intra: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n0];
    let mut inter = vec![vec![0.0; m]; n0];
    for (&(u, v), &j) in lat.edges().iter().zip(coupling) {
        let (su, sv) = (u / m, v / m);
        if su == sv {
            intra[su].push((u % m, v % m, j));
        } else {
            debug_assert_eq!(u % m, v % m);
            let k = if (su + 1) % n0 == sv { su } else { sv };
            inter[k][u % m] += j;
        }
    }
    if !periodic {
        // the wrap slot is unused for boxes
        inter[n0 - 1].iter_mut().for_each(|j| *j = 0.0);
    }
    let slice_log_weight = (0..n0)
        .map(|k| {
            (0u32..1 << m)
                .map(|state| {
                    let s = |i: usize| if state >> i & 1 == 1 { 1.0 } else { -1.0 };
                    let bonds: f64 = intra[k].iter().map(|&(a, b, j)| j * s(a) * s(b)).sum();
                    let site: f64 = (0..m).map(|i| field[k * m + i] * s(i)).sum();
                    beta * (bonds + site)
                })
                .collect()
        })
        .collect();
    Ok(Slices { m, n0, slice_log_weight, inter })
}

/// Applies `Σ_{τ} Π_x exp(β J_x τ_x τ'_x) ψ(τ)` in place, one site at a time.
fn apply_inter(psi: &mut [f64], beta: f64, couplings: &[f64]) {
    for (x, &j) in couplings.iter().enumerate() {
        let (same, diff) = ((beta * j).exp(), (-beta * j).exp());
        let bit = 1usize << x;
        for s in 0..psi.len() {
            if s & bit == 0 {
                let (a, b) = (psi[s], psi[s | bit]);
                psi[s] = same * a + diff * b;
                psi[s | bit] = diff * a + same * b;
            }
        }
    }
}

fn rescale(psi: &mut [f64]) -> f64 {
    let max = psi.iter().cloned().fold(0.0, f64::max);
    psi.iter_mut().for_each(|x| *x /= max);
    max.ln()
}

/// `ln Z` of a box or torus by transfer products along axis 0. Boundary
/// conditions and fields enter through the slice weights.
pub fn log_partition_transfer(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> Result<f64> {
    if lat.ghost().is_some() || !matches!(lat.topology(), Topology::FreeBox | Topology::Torus) {
        return Err(Error::MethodInapplicable("transfer needs a plain box or torus".into()));
    }
    let field = effective_field(lat, coup, bc)?;
    let n0 = lat.sides()[0];
    let m = lat.num_vertices() / n0;
    let periodic = lat.topology() == Topology::Torus;
    let cap = if periodic { MAX_PERIODIC_CROSS_SECTION } else { MAX_OPEN_CROSS_SECTION };
    if m > cap {
        return Err(Error::SizeCap(format!("cross-section of {m} spins exceeds {cap}")));
    }
    let sl = build_slices(lat, coup.beta(), coup.coupling(), &field)?;
    let beta = coup.beta();
    let states = 1usize << sl.m;

    let offset = |k: usize| sl.slice_log_weight[k].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut log_scale: f64 = (0..sl.n0).map(offset).sum();

    if !periodic {
        let mut psi: Vec<f64> = sl.slice_log_weight[0].iter().map(|w| (w - offset(0)).exp()).collect();
        for k in 1..sl.n0 {
            apply_inter(&mut psi, beta, &sl.inter[k - 1]);
            let off = offset(k);
            for (p, w) in psi.iter_mut().zip(&sl.slice_log_weight[k]) {
                *p *= (w - off).exp();
            }
            log_scale += rescale(&mut psi);
        }
        return Ok(log_scale + psi.iter().sum::<f64>().ln());
    }

    // trace: one row per starting state, shared rescaling
    let mut rows: Vec<Vec<f64>> = (0..states)
        .map(|s0| {
            let mut r = vec![0.0; states];
            r[s0] = (sl.slice_log_weight[0][s0] - offset(0)).exp();
            r
        })
        .collect();
    for k in 1..=sl.n0 {
        for r in rows.iter_mut() {
            apply_inter(r, beta, &sl.inter[k - 1]);
        }
        if k < sl.n0 {
            let off = offset(k);
            let weights: Vec<f64> = sl.slice_log_weight[k].iter().map(|w| (w - off).exp()).collect();
            for r in rows.iter_mut() {
                r.iter_mut().zip(&weights).for_each(|(p, w)| *p *= w);
            }
        }
        let max = rows.iter().flat_map(|r| r.iter()).cloned().fold(0.0, f64::max);
        for r in rows.iter_mut() {
            r.iter_mut().for_each(|p| *p /= max);
        }
        log_scale += max.ln();
    }
    let trace: f64 = (0..states).map(|s| rows[s][s]).sum();
    Ok(log_scale + trace.ln())
}

/// Symmetric row-to-row transfer matrix of an infinite cylinder whose
/// cross-section is the torus `(Z/NZ)^{d-1}` at zero field and unit coupling:
/// `T(τ, τ') = exp(β(Σ_x τ_x τ'_x + ½ Σ_E τ τ + ½ Σ_E τ' τ'))`.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    width: usize,
    cross_dim: usize,
    beta: f64,
    matrix: DMatrix<f64>,
}

fn cross_section(width: usize, cross_dim: usize) -> Result<Lattice> {
    if cross_dim == 0 {
        return Lattice::build(&[1], Topology::FreeBox);
    }
    Lattice::build(&vec![width; cross_dim], Topology::Torus)
}

fn ring_energy(cross: &Lattice, state: usize) -> f64 {
    cross
        .edges()
        .iter()
        .map(|&(a, b)| if (state >> a ^ state >> b) & 1 == 0 { 1.0 } else { -1.0 })
        .sum()
}

impl TransferMatrix {
    pub fn new(width: usize, dimension: usize, beta: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let cross = cross_section(width, dimension - 1)?;
        let m = cross.num_vertices();
        if m > MAX_DENSE_CROSS_SECTION {
            return Err(Error::SizeCap(format!("dense transfer matrix with {m} spins per slice")));
        }
        let n = 1usize << m;
        let half: Vec<f64> = (0..n).map(|s| 0.5 * beta * ring_energy(&cross, s)).collect();
        let matrix = DMatrix::from_fn(n, n, |a, b| {
            let overlap = m as f64 - 2.0 * (a ^ b).count_ones() as f64;
            (beta * overlap + (half[a] + half[b])).exp()
        });
        Ok(TransferMatrix { width, cross_dim: dimension - 1, beta, matrix })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cross_section_dim(&self) -> usize {
        self.cross_dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.matrix.nrows();
        (0..n).all(|i| (0..i).all(|j| self.matrix[(i, j)] == self.matrix[(j, i)]))
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.matrix.iter().all(|&x| x > 0.0)
    }

    /// Eigenvalues in decreasing order.
    pub fn spectrum(&self) -> Vec<f64> {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        vals
    }
}

/// Leading eigenvalue (as `ln λ`) of the cylinder transfer matrix of width
/// `width` in 2D, by power iteration on the implicit symmetric operator.
pub fn strip_log_leading_eigenvalue(width: usize, beta: f64) -> Result<f64> {
    if !(3..=20).contains(&width) {
        return Err(Error::SizeCap(format!("strip width {width} outside 3..=20")));
    }
    let cross = cross_section(width, 1)?;
    let n = 1usize << width;
    let half: Vec<f64> = (0..n).map(|s| (0.5 * beta * ring_energy(&cross, s)).exp()).collect();
    let couplings = vec![1.0; width];
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for iter in 0..100_000 {
        let mut w: Vec<f64> = v.iter().zip(&half).map(|(x, d)| x * d).collect();
        apply_inter(&mut w, beta, &couplings);
        w.iter_mut().zip(&half).for_each(|(x, d)| *x *= d);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rayleigh: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        w.iter_mut().for_each(|x| *x /= norm);
        let delta = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if iter > 3 && (rayleigh - lambda).abs() <= 1e-15 * rayleigh && delta < 1e-10 {
            return Ok(rayleigh.ln());
        }
        lambda = rayleigh;
    }
    Err(Error::Numerical("power iteration did not converge".into()))
}

/// Free-energy density `-βf` of the width-`N` cylinder: `ln λ_max / N`.
pub fn strip_free_energy(width: usize, beta: f64) -> Result<f64> {
    Ok(strip_log_leading_eigenvalue(width, beta)? / width as f64)
}

/// Aitken-extrapolated `-βf` from strips of the given (increasing) widths.
/// With fewer than three widths the last strip value is returned.
pub fn strip_extrapolation(widths: &[usize], beta: f64) -> Result<f64> {
    let vals = widths
        .iter()
        .map(|&w| strip_free_energy(w, beta))
        .collect::<Result<Vec<f64>>>()?;
    let n = vals.len();
    if n < 3 {
        return vals.last().copied().ok_or_else(|| Error::InvalidParameter("no widths".into()));
    }
    let (a, b, c) = (vals[n - 3], vals[n - 2], vals[n - 1]);
    let denom = (c - b) - (b - a);
    if denom.abs() < 1e-15 || ((c - b) / (b - a)).abs() >= 1.0 {
        return Ok(c);
    }
    Ok(c - (c - b) * (c - b) / denom)
}

/// Exact `⟨σ_0 σ_r⟩` on a ring of `len` sites at zero field, from the
/// eigenvalues `2cosh β` and `2sinh β` of the 2×2 transfer matrix.
pub fn ring_two_point(beta: f64, len: usize, r: usize) -> f64 {
    let t = beta.tanh();
    let r = r % len;
    (t.powi(r as i32) + t.powi((len - r) as i32)) / (1.0 + t.powi(len as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::enumerate::Enumerator;

    fn enumerate(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> f64 {
        Enumerator::new(lat, coup, bc).unwrap().log_partition()
    }

    #[test]
    fn matches_enumeration_on_boxes_and_tori() {
        let cases = [
            (vec![3, 3], Topology::FreeBox),
            (vec![4, 4], Topology::FreeBox),
            (vec![2, 5], Topology::FreeBox),
            (vec![4, 4], Topology::Torus),
            (vec![3, 5], Topology::Torus),
            (vec![2, 2, 3], Topology::FreeBox),
            (vec![7], Topology::FreeBox),
        ];
        for (sides, topo) in cases {
            let lat = Lattice::build(&sides, topo).unwrap();
            for beta in [0.2, 0.44, 0.8] {
                let field: Vec<f64> = (0..lat.num_vertices()).map(|i| 0.03 * (i % 5) as f64).collect();
                let j: Vec<f64> = (0..lat.num_edges()).map(|e| 0.6 + 0.1 * (e % 4) as f64).collect();
                let coup = Couplings::new(beta, field, j).unwrap();
                let a = enumerate(&lat, &coup, &BoundaryCondition::Free);
                let b = log_partition_transfer(&lat, &coup, &BoundaryCondition::Free).unwrap();
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{sides:?} {topo:?} {beta}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn boundary_conditions_enter_transfer() {
        let lat = Lattice::build(&[3, 4], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 0.5, 0.0).unwrap();
        for bc in [
            BoundaryCondition::Plus,
            BoundaryCondition::Minus,
            BoundaryCondition::Dobrushin { axis: 0, level: 1, plus_above: true },
        ] {
            let a = enumerate(&lat, &coup, &bc);
            let b = log_partition_transfer(&lat, &coup, &bc).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn printed_negative_sign_disagrees_with_enumeration() {
        // flipping the sign of β in the inter-slice factor gives the
        // antiferromagnetic chain, which differs from the ferromagnet on an
        // odd ring
        let ring = Lattice::build(&[5], Topology::Torus).unwrap();
        let coup = Couplings::uniform(&ring, 0.7, 0.0).unwrap();
        let exact = enumerate(&ring, &coup, &BoundaryCondition::Free);
        let ours = log_partition_transfer(&ring, &coup, &BoundaryCondition::Free).unwrap();
        assert!((exact - ours).abs() < 1e-12);
        let (c, s) = ((0.7f64).cosh() * 2.0, (0.7f64).sinh() * 2.0);
        let flipped = (c.powi(5) - s.powi(5)).ln();
        assert!((exact - flipped).abs() > 1e-3);
        assert!((exact - (c.powi(5) + s.powi(5)).ln()).abs() < 1e-12);
    }

    #[test]
    fn dense_matrix_is_perron_frobenius() {
        for (width, beta) in [(3, 0.3), (4, 0.44), (6, 0.8)] {
            let t = TransferMatrix::new(width, 2, beta).unwrap();
            assert!(t.is_symmetric());
            assert!(t.is_strictly_positive());
            let spec = t.spectrum();
            assert!(spec[0] > 0.0);
            assert!(spec[0] > spec[1].abs() * (1.0 + 1e-9), "leading eigenvalue not simple");
            let power = strip_log_leading_eigenvalue(width, beta).unwrap();
            assert!((spec[0].ln() - power).abs() < 1e-10);
        }
    }

    #[test]
    fn trace_of_power_is_torus_partition_function() {
        let t = TransferMatrix::new(3, 2, 0.35).unwrap();
        let m = t.matrix();
        let p = m * m * m * m;
        let lat = Lattice::build(&[4, 3], Topology::Torus).unwrap();
        let z = enumerate(&lat, &Couplings::uniform(&lat, 0.35, 0.0).unwrap(), &BoundaryCondition::Free);
        assert!((p.trace().ln() - z).abs() < 1e-10);
    }

    #[test]
    fn ring_two_point_matches_enumeration() {
        let ring = Lattice::build(&[9], Topology::Torus).unwrap();
        let coup = Couplings::uniform(&ring, 0.6, 0.0).unwrap();
        let en = Enumerator::new(&ring, &coup, &BoundaryCondition::Free).unwrap();
        for r in 0..9 {
            let c = en.correlations(&[vec![0, r]]).unwrap()[0];
            assert!((c - ring_two_point(0.6, 9, r)).abs() < 1e-13);
        }
    }

    #[test]
    fn caps() {
        let wide = Lattice::build(&[3, 11], Topology::Torus).unwrap();
        let coup = Couplings::uniform(&wide, 0.1, 0.0).unwrap();
        assert!(matches!(log_partition_transfer(&wide, &coup, &BoundaryCondition::Free), Err(Error::SizeCap(_))));
        assert!(TransferMatrix::new(11, 2, 0.1).is_err());
        assert!(strip_free_energy(2, 0.1).is_err());
    }
}
