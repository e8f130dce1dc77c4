//! High- and low-temperature expansions of the zero-field partition function
//! as sums over even subgraphs.

use crate::error::{Error, Result};
use crate::lattice::{dual_lattice, even_subgraphs, Lattice, Topology};
use crate::model::{effective_field, BoundaryCondition, Couplings};

/// `ln Σ_F Π_{e∈F} w_e` over the edge masks of `subgraphs`, with `ln w_e`
/// given per edge. Terms are accumulated relative to the largest one.
fn log_sum_products(subgraphs: impl Iterator<Item = u64>, log_w: &[f64]) -> f64 {
    let uniform = log_w.windows(2).all(|p| p[0] == p[1]);
    let terms: Vec<f64> = subgraphs
        .map(|mask| {
            if mask == 0 {
                0.0
            } else if uniform {
                mask.count_ones() as f64 * log_w.first().copied().unwrap_or(0.0)
            } else {
                let mut s = 0.0;
                let mut m = mask;
                while m != 0 {
                    s += log_w[m.trailing_zeros() as usize];
                    m &= m - 1;
                }
                s
            }
        })
        .collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln Z = V ln 2 + Σ_e ln cosh(βJ_e) + ln Σ_{F even} Π_{e∈F} tanh(βJ_e)`.
/// Needs zero effective field.
pub fn log_partition_high_temp(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> Result<f64> {
    let field = effective_field(lat, coup, bc)?;
    if field.iter().any(|&h| h != 0.0) {
        return Err(Error::MethodInapplicable("high-temperature expansion needs zero field".into()));
    }
    let beta = coup.beta();
    let j = coup.coupling();
    let log_t: Vec<f64> = j.iter().map(|&x| (beta * x).tanh().ln()).collect();
    let sum = log_sum_products(even_subgraphs(lat)?, &log_t);
    let prefactor = lat.num_vertices() as f64 * 2f64.ln() + j.iter().map(|&x| (beta * x).cosh().ln()).sum::<f64>();
    Ok(prefactor + sum)
}

/// `ln Z = ln 2 + β Σ_e J_e + ln Σ_F exp(-2β Σ_{e∈F} J_e)` with free
/// boundary and zero field; the factor 2 accounts for the global spin flip.
/// On a 2D free box `F` runs over the even subgraphs of the planar dual. On
/// a 2D torus it runs over the even subgraphs of the dual torus that cross
/// both non-contractible primal cycles an even number of times, which are
/// exactly the domain-wall sets.
pub fn log_partition_low_temp(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> Result<f64> {
    let planar = lat.topology() == Topology::FreeBox;
    if !(planar || lat.topology() == Topology::Torus) || lat.dimension() != 2 || lat.ghost().is_some() {
        return Err(Error::MethodInapplicable("low-temperature expansion needs a 2D free box or torus".into()));
    }
    if !bc.is_free() || !coup.has_zero_field() {
        return Err(Error::MethodInapplicable(
            "low-temperature expansion needs free boundary and zero field".into(),
        ));
    }
    let beta = coup.beta();
    let log_w: Vec<f64> = coup.coupling().iter().map(|&x| -2.0 * beta * x).collect();
    let sum = if planar {
        let dual = dual_lattice(lat).map_err(|e| Error::MethodInapplicable(e.to_string()))?;
        log_sum_products(even_subgraphs(&dual)?, &log_w)
    } else {
        let (dual, row, column) = torus_dual(lat)?;
        let walls = even_subgraphs(&dual)?.filter(|&f| (f & row).count_ones() % 2 == 0 && (f & column).count_ones() % 2 == 0);
        log_sum_products(walls, &log_w)
    };
    Ok(2f64.ln() + beta * coup.coupling().iter().sum::<f64>() + sum)
}

/// Dual of a 2D torus with `e*` indexed like `e`, face `(x, y)` having
/// lower-left corner `(x, y)`; also the edge masks of the primal cycles
/// along row `y = 0` and column `x = 0`.
fn torus_dual(lat: &Lattice) -> Result<(Lattice, u64, u64)> {
    let (n0, n1) = (lat.sides()[0], lat.sides()[1]);
    if lat.num_edges() > 64 {
        return Err(Error::SizeCap(format!("torus dual needs at most 64 edges, got {}", lat.num_edges())));
    }
    let face = |x: usize, y: usize| (x % n0) * n1 + y % n1;
    let (mut row, mut column) = (0u64, 0u64);
    let edges = lat
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(u, v))| {
            let (cu, cv) = (lat.coords(u), lat.coords(v));
            // orient so that v = u + 1 along the edge's axis
            let axis = usize::from(cu[0] == cv[0]);
            let (x, y) = if (cu[axis] + 1) % lat.sides()[axis] == cv[axis] { (cu[0], cu[1]) } else { (cv[0], cv[1]) };
            if axis == 0 {
                if y == 0 {
                    row |= 1 << e;
                }
                (face(x, y + n1 - 1), face(x, y))
            } else {
                if x == 0 {
                    column |= 1 << e;
                }
                (face(x + n0 - 1, y), face(x, y))
            }
        })
        .collect();
    Ok((Lattice::from_edges(n0 * n1, edges)?, row, column))
}
