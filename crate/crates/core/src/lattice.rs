//! Finite hypercubic lattices, planar duals, ghost augmentation and the
//! plain-text edge-list format.
//!
//! Vertices are indexed row-major over their coordinates: for sides
//! `(n_0, .., n_{d-1})` the vertex at `(c_0, .., c_{d-1})` has index
//! `((c_0 * n_1 + c_1) * n_2 + c_2) ...`, so the last axis varies fastest.
//! Edges are emitted by scanning vertices in index order and, for each
//! vertex, the axes in increasing order, joining `c` to `c + e_axis`
//! (wrapping on a torus). Two implementations following these rules
//! produce identical edge orderings.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Largest cycle-space dimension accepted by [`even_subgraphs`].
pub const MAX_CYCLE_SPACE_DIM: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    FreeBox,
    Torus,
    /// Read from an edge list; no coordinates.
    Custom,
    /// Planar dual of a 2D free box. Faces are indexed row-major by their
    /// lower-left corner, the exterior face comes last.
    PlanarDual { outer_face: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    sides: Vec<usize>,
    topology: Topology,
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    // (neighbour, edge index)
    incidence: Vec<(usize, usize)>,
    ghost: Option<usize>,
}

impl Lattice {
    /// Builds a `d`-dimensional free box or torus with the given side lengths.
    pub fn build(sides: &[usize], topology: Topology) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        if sides.iter().any(|&n| n == 0) {
            return Err(Error::InvalidLattice("side lengths must be positive".into()));
        }
        match topology {
            Topology::FreeBox => {}
            Topology::Torus => {
                if sides.iter().any(|&n| n < 3) {
                    return Err(Error::InvalidLattice(
                        "torus side lengths must be at least 3".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::InvalidLattice(
                    "only free-box and torus lattices can be generated".into(),
                ))
            }
        }
        let num_vertices = sides
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&v| v <= u32::MAX as usize)
            .ok_or_else(|| Error::InvalidLattice("vertex count overflows index space".into()))?;

        let d = sides.len();
        let mut strides = vec![1usize; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * sides[a + 1];
        }
        let mut edges = Vec::with_capacity(num_vertices * d);
        let mut coord = vec![0usize; d];
        for v in 0..num_vertices {
            for a in 0..d {
                let c = coord[a];
                if c + 1 < sides[a] {
                    edges.push((v, v + strides[a]));
                } else if topology == Topology::Torus {
                    edges.push((v, v - c * strides[a]));
                }
            }
            // advance the row-major odometer
            for a in (0..d).rev() {
                coord[a] += 1;
                if coord[a] < sides[a] {
                    break;
                }
                coord[a] = 0;
            }
        }
        Ok(Self::from_parts(sides.to_vec(), topology, num_vertices, edges, None))
    }

    /// Builds a custom simple graph from an explicit edge list.
    pub fn from_edges(num_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if num_vertices > u32::MAX as usize {
            return Err(Error::InvalidLattice("vertex count overflows index space".into()));
        }
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &(u, v) in &edges {
            if u >= num_vertices || v >= num_vertices {
                return Err(Error::InvalidLattice(format!("edge ({u},{v}) uses a missing vertex")));
            }
            if u == v {
                return Err(Error::InvalidLattice(format!("self-loop at vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidLattice(format!("duplicate edge ({u},{v})")));
            }
        }
        Ok(Self::from_parts(Vec::new(), Topology::Custom, num_vertices, edges, None))
    }

    fn from_parts(
        sides: Vec<usize>,
        topology: Topology,
        num_vertices: usize,
        edges: Vec<(usize, usize)>,
        ghost: Option<usize>,
    ) -> Self {
        let mut degree = vec![0usize; num_vertices];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_vertices + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_vertices].to_vec();
        let mut incidence = vec![(0, 0); offsets[num_vertices]];
        for (e, &(u, v)) in edges.iter().enumerate() {
            incidence[fill[u]] = (v, e);
            fill[u] += 1;
            incidence[fill[v]] = (u, e);
            fill[v] += 1;
        }
        Lattice { sides, topology, num_vertices, edges, offsets, incidence, ghost }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn dimension(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Neighbours of `v` together with the connecting edge index.
    pub fn incident(&self, v: usize) -> &[(usize, usize)] {
        &self.incidence[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn ghost(&self) -> Option<usize> {
        self.ghost
    }

    /// Number of vertices that carry lattice coordinates (all but the ghost).
    pub fn num_site_vertices(&self) -> usize {
        self.num_vertices - usize::from(self.ghost.is_some())
    }

    pub fn is_box(&self) -> bool {
        self.topology == Topology::FreeBox
    }

    pub fn coords(&self, v: usize) -> Vec<usize> {
        assert!(!self.sides.is_empty() && v < self.num_site_vertices());
        let mut c = vec![0; self.sides.len()];
        let mut rest = v;
        for a in (0..self.sides.len()).rev() {
            c[a] = rest % self.sides[a];
            rest /= self.sides[a];
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.sides.len());
        coords
            .iter()
            .zip(&self.sides)
            .fold(0, |acc, (&c, &n)| acc * n + c)
    }

    /// Vertex displaced by `delta` along `axis`; wraps on a torus, `None`
    /// when leaving a box.
    pub fn shift(&self, v: usize, axis: usize, delta: isize) -> Option<usize> {
        let mut c = self.coords(v);
        let n = self.sides[axis] as isize;
        let target = c[axis] as isize + delta;
        match self.topology {
            Topology::Torus => c[axis] = target.rem_euclid(n) as usize,
            _ if (0..n).contains(&target) => c[axis] = target as usize,
            _ => return None,
        }
        Some(self.index(&c))
    }

    /// Box vertices with at least one missing lattice neighbour.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        if self.topology != Topology::FreeBox {
            return Vec::new();
        }
        (0..self.num_site_vertices())
            .filter(|&v| {
                self.coords(v)
                    .iter()
                    .zip(&self.sides)
                    .any(|(&c, &n)| c == 0 || c + 1 == n)
            })
            .collect()
    }

    /// Edges of `Z^d` leaving the box, as `(vertex, axis, direction)` with
    /// direction `-1` or `+1`. Ordered by vertex, then axis, then direction.
    pub fn exterior_edges(&self) -> Vec<(usize, usize, i8)> {
        let mut out = Vec::new();
        if self.topology != Topology::FreeBox {
            return out;
        }
        for v in 0..self.num_site_vertices() {
            let c = self.coords(v);
            for a in 0..self.sides.len() {
                if c[a] == 0 {
                    out.push((v, a, -1));
                }
                if c[a] + 1 == self.sides[a] {
                    out.push((v, a, 1));
                }
            }
        }
        out
    }

    /// Number of connected components (isolated vertices included).
    pub fn num_components(&self) -> usize {
        let mut uf = crate::cluster::UnionFind::new(self.num_vertices);
        for &(u, v) in &self.edges {
            uf.union(u, v);
        }
        uf.num_sets()
    }

    /// Dimension `|E| - |V| + components` of the cycle space.
    pub fn cycle_space_dim(&self) -> usize {
        self.edges.len() + self.num_components() - self.num_vertices
    }

    /// Subgraph induced by `vertices`; returns the graph and the map from
    /// new edge indices to edges of `self`.
    pub fn induced(&self, vertices: &[usize]) -> (Lattice, Vec<usize>) {
        let mut local = vec![usize::MAX; self.num_vertices];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let mut edges = Vec::new();
        let mut origin = Vec::new();
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            if local[u] != usize::MAX && local[v] != usize::MAX {
                edges.push((local[u], local[v]));
                origin.push(e);
            }
        }
        (
            Self::from_parts(Vec::new(), Topology::Custom, vertices.len(), edges, None),
            origin,
        )
    }
}

/// Planar dual of a 2D free box. Dual edge `e*` carries the same index as
/// primal edge `e`; the exterior face is the last dual vertex, so the dual
/// is in general a multigraph.
pub fn dual_lattice(lat: &Lattice) -> Result<Lattice> {
    if lat.topology != Topology::FreeBox || lat.dimension() != 2 || lat.ghost.is_some() {
        return Err(Error::InvalidLattice("dual requires a plain 2D free box".into()));
    }
    let (n0, n1) = (lat.sides[0], lat.sides[1]);
    if n0 < 2 || n1 < 2 {
        return Err(Error::InvalidLattice(
            "dual requires both sides at least 2 (otherwise edges border one face twice)".into(),
        ));
    }
    let (f0, f1) = (n0 - 1, n1 - 1);
    let outer = f0 * f1;
    let face = |x: isize, y: isize| -> usize {
        if x < 0 || y < 0 || x >= f0 as isize || y >= f1 as isize {
            outer
        } else {
            x as usize * f1 + y as usize
        }
    };
    let edges = lat
        .edges
        .iter()
        .map(|&(u, v)| {
            let cu = lat.coords(u);
            let cv = lat.coords(v);
            let (x, y) = (cu[0] as isize, cu[1] as isize);
            if cv[0] != cu[0] {
                // along axis 0: faces on either side in axis 1
                (face(x, y - 1), face(x, y))
            } else {
                (face(x - 1, y), face(x, y))
            }
        })
        .collect();
    Ok(Lattice::from_parts(
        vec![f0, f1],
        Topology::PlanarDual { outer_face: outer },
        outer + 1,
        edges,
        None,
    ))
}

/// Adds a ghost vertex joined to every boundary vertex of a free box. Ghost
/// edges are appended after the lattice edges in boundary-vertex order.
pub fn ghost_augment(lat: &Lattice) -> Result<Lattice> {
    if lat.ghost.is_some() {
        return Err(Error::InvalidLattice("lattice already has a ghost vertex".into()));
    }
    if lat.topology != Topology::FreeBox {
        return Err(Error::InvalidLattice("ghost augmentation requires a free box".into()));
    }
    let g = lat.num_vertices;
    let mut edges = lat.edges.clone();
    edges.extend(lat.boundary_vertices().into_iter().map(|v| (v, g)));
    Ok(Lattice::from_parts(lat.sides.clone(), Topology::FreeBox, g + 1, edges, Some(g)))
}

/// Iterator over all even subgraphs (every vertex of even degree) as edge
/// bitmasks, in Gray-code order over a fundamental-cycle basis. The empty
/// set comes first.
pub struct EvenSubgraphs {
    basis: Vec<u64>,
    offset: u64,
    counter: u64,
    current: u64,
    done: bool,
}

impl Iterator for EvenSubgraphs {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.done {
            return None;
        }
        let out = self.current ^ self.offset;
        self.counter += 1;
        if self.counter >> self.basis.len() != 0 {
            self.done = true;
        } else {
            let bit = self.counter.trailing_zeros() as usize;
            self.current ^= self.basis[bit];
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = if self.done { 0 } else { (1u64 << self.basis.len()) - self.counter };
        (left as usize, Some(left as usize))
    }
}

fn check_mask_capacity(lat: &Lattice) -> Result<()> {
    if lat.num_edges() > 64 {
        return Err(Error::SizeCap(format!(
            "subgraph enumeration needs at most 64 edges, got {}",
            lat.num_edges()
        )));
    }
    if lat.cycle_space_dim() > MAX_CYCLE_SPACE_DIM {
        return Err(Error::SizeCap(format!(
            "cycle space dimension {} exceeds {MAX_CYCLE_SPACE_DIM}",
            lat.cycle_space_dim()
        )));
    }
    Ok(())
}

/// Spanning forest parent pointers: `(parent vertex, parent edge)` per vertex,
/// plus the list of non-tree edges and the BFS depth.
fn spanning_forest(lat: &Lattice) -> (Vec<Option<(usize, usize)>>, Vec<usize>, Vec<usize>) {
    let n = lat.num_vertices;
    let mut parent = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    let mut tree_edge = vec![false; lat.num_edges()];
    let mut queue = std::collections::VecDeque::new();
    for root in 0..n {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for &(w, e) in lat.incident(u) {
                if depth[w] == usize::MAX {
                    depth[w] = depth[u] + 1;
                    parent[w] = Some((u, e));
                    tree_edge[e] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let non_tree = (0..lat.num_edges()).filter(|&e| !tree_edge[e]).collect();
    (parent, non_tree, depth)
}

fn tree_path(parent: &[Option<(usize, usize)>], depth: &[usize], mut a: usize, mut b: usize) -> u64 {
    let mut mask = 0u64;
    while depth[a] > depth[b] {
        let (p, e) = parent[a].unwrap();
        mask ^= 1 << e;
        a = p;
    }
    while depth[b] > depth[a] {
        let (p, e) = parent[b].unwrap();
        mask ^= 1 << e;
        b = p;
    }
    while a != b {
        let (pa, ea) = parent[a].unwrap();
        let (pb, eb) = parent[b].unwrap();
        mask ^= (1 << ea) ^ (1 << eb);
        a = pa;
        b = pb;
    }
    mask
}

/// Enumerates the even subgraphs of `lat`.
pub fn even_subgraphs(lat: &Lattice) -> Result<EvenSubgraphs> {
    Ok(subgraphs_with_odd_set(lat, &[])?.expect("the empty subgraph is always even"))
}

/// Enumerates edge subsets whose odd-degree vertex set is exactly `sources`.
/// Returns `Ok(None)` when no such subset exists (a component holds an odd
/// number of sources). Repeated entries in `sources` cancel pairwise.
pub fn subgraphs_with_odd_set(lat: &Lattice, sources: &[usize]) -> Result<Option<EvenSubgraphs>> {
    check_mask_capacity(lat)?;
    let (parent, non_tree, depth) = spanning_forest(lat);
    let basis: Vec<u64> = non_tree
        .iter()
        .map(|&e| {
            let (u, v) = lat.edges[e];
            (1u64 << e) ^ tree_path(&parent, &depth, u, v)
        })
        .collect();

    let mut odd = vec![false; lat.num_vertices];
    for &s in sources {
        if s >= lat.num_vertices {
            return Err(Error::InvalidVertex(s));
        }
        odd[s] ^= true;
    }
    // pair sources by component root
    let root_of = |mut v: usize| {
        while let Some((p, _)) = parent[v] {
            v = p;
        }
        v
    };
    let mut pending: HashMap<usize, usize> = HashMap::new();
    let mut offset = 0u64;
    for v in (0..lat.num_vertices).filter(|&v| odd[v]) {
        let r = root_of(v);
        match pending.remove(&r) {
            Some(u) => offset ^= tree_path(&parent, &depth, u, v),
            None => {
                pending.insert(r, v);
            }
        }
    }
    if !pending.is_empty() {
        return Ok(None);
    }
    Ok(Some(EvenSubgraphs { basis, offset, counter: 0, current: 0, done: false }))
}

/// Parses the text edge-list format: `v <id>` declares a vertex, `e <u> <v> <J>`
/// an edge with coupling `J`; lines starting with `#` are comments. Vertex
/// ids are arbitrary integers mapped to indices in declaration order.
pub fn parse_edge_list(text: &str) -> Result<(Lattice, Vec<f64>)> {
    let mut ids: HashMap<i64, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut couplings = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Parse(format!("line {}: {msg}: {raw:?}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["v", id] => {
                let id: i64 = id.parse().map_err(|_| bad("bad vertex id"))?;
                let next = ids.len();
                if ids.insert(id, next).is_some() {
                    return Err(bad("duplicate vertex"));
                }
            }
            ["e", u, v, j] => {
                let lookup = |s: &str| -> Result<usize> {
                    let id: i64 = s.parse().map_err(|_| bad("bad vertex id"))?;
                    ids.get(&id).copied().ok_or_else(|| bad("undeclared vertex"))
                };
                let j: f64 = j.parse().map_err(|_| bad("bad coupling"))?;
                if !j.is_finite() {
                    return Err(bad("non-finite coupling"));
                }
                edges.push((lookup(u)?, lookup(v)?));
                couplings.push(j);
            }
            _ => return Err(bad("expected `v <id>` or `e <u> <v> <J>`")),
        }
    }
    Ok((Lattice::from_edges(ids.len(), edges)?, couplings))
}

/// Writes `lat` in the edge-list format with vertex ids equal to indices.
pub fn write_edge_list(lat: &Lattice, couplings: &[f64]) -> String {
    let mut out = String::new();
    for v in 0..lat.num_vertices() {
        writeln!(out, "v {v}").unwrap();
    }
    for (e, &(u, v)) in lat.edges().iter().enumerate() {
        writeln!(out, "e {u} {v} {:?}", couplings.get(e).copied().unwrap_or(1.0)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(sides: &[usize]) -> Lattice {
        Lattice::build(sides, Topology::FreeBox).unwrap()
    }

    #[test]
    fn counts_match_box_and_torus_combinatorics() {
        let path = boxed(&[3]);
        assert_eq!((path.num_vertices(), path.num_edges()), (3, 2));
        let square = boxed(&[2, 2]);
        assert_eq!((square.num_vertices(), square.num_edges()), (4, 4));
        let torus = Lattice::build(&[4, 4], Topology::Torus).unwrap();
        assert_eq!((torus.num_vertices(), torus.num_edges()), (16, 32));
        let cube = boxed(&[3, 4, 5]);
        assert_eq!(cube.num_edges(), 2 * 4 * 5 + 3 * 3 * 5 + 3 * 4 * 4);
    }

    #[test]
    fn rejects_small_torus_and_zero_sides() {
        assert!(Lattice::build(&[2, 4], Topology::Torus).is_err());
        assert!(Lattice::build(&[3, 0], Topology::FreeBox).is_err());
        assert!(Lattice::build(&[], Topology::FreeBox).is_err());
        assert!(Lattice::build(&[1 << 20, 1 << 20], Topology::FreeBox).is_err());
    }

    #[test]
    fn row_major_edge_order() {
        let lat = boxed(&[2, 3]);
        assert_eq!(lat.edges(), &[(0, 3), (0, 1), (1, 4), (1, 2), (2, 5), (3, 4), (4, 5)]);
        assert_eq!(lat.coords(4), vec![1, 1]);
        assert_eq!(lat.index(&[1, 2]), 5);
    }

    #[test]
    fn dual_face_counts() {
        let d1 = dual_lattice(&boxed(&[2, 2])).unwrap();
        assert_eq!((d1.num_vertices(), d1.num_edges()), (2, 4));
        let d2 = dual_lattice(&boxed(&[3, 3])).unwrap();
        assert_eq!((d2.num_vertices(), d2.num_edges()), (5, 12));
        for sides in [[2, 5], [4, 3], [4, 4]] {
            let lat = boxed(&sides);
            let dual = dual_lattice(&lat).unwrap();
            assert_eq!(dual.num_edges(), lat.num_edges());
            // Euler: V - E + F = 2
            assert_eq!(lat.num_vertices() + dual.num_vertices(), lat.num_edges() + 2);
        }
        assert!(dual_lattice(&Lattice::build(&[3, 3], Topology::Torus).unwrap()).is_err());
        assert!(dual_lattice(&boxed(&[3])).is_err());
    }

    #[test]
    fn ghost_degree_is_boundary_size() {
        let lat = boxed(&[3, 3]);
        let g = ghost_augment(&lat).unwrap();
        assert_eq!(g.degree(g.ghost().unwrap()), 8);
        assert_eq!(g.num_edges(), lat.num_edges() + 8);
        let single = ghost_augment(&boxed(&[1, 1])).unwrap();
        assert_eq!(single.degree(1), 1);
        assert!(ghost_augment(&g).is_err());
    }

    #[test]
    fn even_subgraph_counts() {
        let triangle = Lattice::from_edges(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let all: Vec<u64> = even_subgraphs(&triangle).unwrap().collect();
        assert_eq!(all, vec![0, 0b111]);
        let path = boxed(&[4]);
        assert_eq!(even_subgraphs(&path).unwrap().collect::<Vec<_>>(), vec![0]);
        assert_eq!(even_subgraphs(&boxed(&[2, 2])).unwrap().count(), 2);
    }

    fn brute_force_even(lat: &Lattice) -> Vec<u64> {
        (0u64..1 << lat.num_edges())
            .filter(|&m| {
                let mut deg = vec![0; lat.num_vertices()];
                for e in 0..lat.num_edges() {
                    if m >> e & 1 == 1 {
                        let (u, v) = lat.edge(e);
                        deg[u] += 1;
                        deg[v] += 1;
                    }
                }
                deg.iter().all(|d| d % 2 == 0)
            })
            .collect()
    }

    #[test]
    fn even_subgraphs_of_duals_match_brute_force() {
        for sides in [[2, 2], [2, 3], [3, 3]] {
            let dual = dual_lattice(&boxed(&sides)).unwrap();
            let mut fast: Vec<u64> = even_subgraphs(&dual).unwrap().collect();
            fast.sort_unstable();
            let slow = brute_force_even(&dual);
            assert_eq!(fast, slow);
            assert_eq!(fast.len(), 1 << dual.cycle_space_dim());
        }
    }

    #[test]
    fn odd_set_subgraphs() {
        let lat = boxed(&[2, 3]);
        let found: Vec<u64> = subgraphs_with_odd_set(&lat, &[0, 5]).unwrap().unwrap().collect();
        assert_eq!(found.len(), 1 << lat.cycle_space_dim());
        for m in found {
            let mut deg = [0; 6];
            for e in 0..lat.num_edges() {
                if m >> e & 1 == 1 {
                    deg[lat.edge(e).0] += 1;
                    deg[lat.edge(e).1] += 1;
                }
            }
            let odd: Vec<usize> = (0..6).filter(|&v| deg[v] % 2 == 1).collect();
            assert_eq!(odd, vec![0, 5]);
        }
        assert!(subgraphs_with_odd_set(&lat, &[0]).unwrap().is_none());
        let split = Lattice::from_edges(4, vec![(0, 1), (2, 3)]).unwrap();
        assert!(subgraphs_with_odd_set(&split, &[0, 2]).unwrap().is_none());
    }

    #[test]
    fn cycle_space_cap() {
        let big = Lattice::build(&[6, 6], Topology::Torus).unwrap();
        assert!(matches!(even_subgraphs(&big), Err(Error::SizeCap(_))));
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let text = "# triangle\nv 10\nv 20\nv 30\ne 10 20 1.5\ne 20 30 1\ne 30 10 0.25\n";
        let (lat, j) = parse_edge_list(text).unwrap();
        assert_eq!(lat.num_vertices(), 3);
        assert_eq!(lat.edges(), &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(j, vec![1.5, 1.0, 0.25]);
        let (again, j2) = parse_edge_list(&write_edge_list(&lat, &j)).unwrap();
        assert_eq!(again.edges(), lat.edges());
        assert_eq!(j2, j);
        assert!(parse_edge_list("v 1\ne 1 2 1\n").is_err());
        assert!(parse_edge_list("v 1\nv 1\n").is_err());
        assert!(parse_edge_list("v 1\nv 2\ne 1 2 1\ne 2 1 1\n").is_err());
        assert!(parse_edge_list("x 1\n").is_err());
    }

    #[test]
    fn exterior_edges_of_square() {
        let lat = boxed(&[2, 2]);
        // each corner of a 2x2 box has two exterior edges
        assert_eq!(lat.exterior_edges().len(), 8);
        assert_eq!(boxed(&[3, 3]).exterior_edges().len(), 12);
        assert_eq!(boxed(&[1]).exterior_edges(), vec![(0, 0, -1), (0, 0, 1)]);
    }
}
