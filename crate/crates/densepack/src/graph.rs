//! Periodic Voronoi tessellation and the neighbour graph it induces.
//!
//! Two balls are neighbours when their Voronoi cells share a facet of
//! positive (d-1)-measure; degenerate contacts (the diagonal of a square
//! grid, say) are excluded. Each periodic image pair is tested separately,
//! so an edge may connect a vertex to its own image (`k == j` with a
//! nonzero shift) and two vertices may be joined through several images.
//!
//! Facet measures are computed exactly: candidate images are pruned by a
//! certified cell-radius bound, the cell of each ball is written as a
//! half-space intersection, and the facet polytope is measured in the
//! bisector hyperplane.

use crate::error::{Error, Result};
use crate::linalg;
use crate::par;
use crate::polytope::{self, HalfSpace};
use crate::torus::{shift_block, Basis, Configuration, Shift};

/// Default relative facet-measure threshold.
pub const DEFAULT_FACET_TOL: f64 = 1e-9;

/// Undirected neighbour relation between ball `k` and the image of ball
/// `j` displaced by `shift`. Canonical orientation: `k < j`, or `k == j`
/// with a lexicographically positive shift.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicEdge {
    pub k: usize,
    pub j: usize,
    pub shift: Shift,
    /// Center distance through this image.
    pub length: f64,
    /// length - 2r.
    pub gap: f64,
}

/// Neighbour graph on the torus with per-edge image shifts.
#[derive(Debug, Clone)]
pub struct PeriodicGraph {
    n: usize,
    d: usize,
    edges: Vec<PeriodicEdge>,
    neighbors: Vec<Vec<(usize, Shift)>>,
}

impl PeriodicGraph {
    /// Assemble a graph from canonical undirected edges.
    pub fn from_edges(n: usize, d: usize, edges: Vec<PeriodicEdge>) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for e in &edges {
            if e.k >= n || e.j >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}) out of range for n = {n}",
                    e.k, e.j
                )));
            }
            if e.shift.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: e.shift.dim(),
                });
            }
            let canonical = e.k < e.j || (e.k == e.j && e.shift.is_lex_positive());
            if !canonical {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}, {:?}) is not canonically oriented",
                    e.k,
                    e.j,
                    e.shift.entries()
                )));
            }
            if e.k == e.j {
                neighbors[e.k].push((e.k, e.shift.clone()));
                neighbors[e.k].push((e.k, e.shift.negated()));
            } else {
                neighbors[e.k].push((e.j, e.shift.clone()));
                neighbors[e.j].push((e.k, e.shift.negated()));
            }
        }
        for adj in &mut neighbors {
            adj.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        }
        Ok(PeriodicGraph {
            n,
            d,
            edges,
            neighbors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[PeriodicEdge] {
        &self.edges
    }

    /// Directed neighbour list of vertex `k`: pairs `(j, shift)` meaning
    /// the neighbouring image sits at `a_j + shift . basis`.
    pub fn neighbors(&self, k: usize) -> &[(usize, Shift)] {
        &self.neighbors[k]
    }

    /// Degree of vertex `k` counted with image multiplicity.
    pub fn degree(&self, k: usize) -> usize {
        self.neighbors[k].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|k| self.degree(k)).collect()
    }

    /// Largest gap over all edges.
    pub fn max_gap(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.gap)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn signature(&self) -> Signature {
        signature_of(self.n, self.d, &self.neighbors)
    }

    /// Vertex partition into connected components (ignoring shifts).
    pub fn components(&self) -> Vec<usize> {
        components_of(self.n, &self.neighbors)
    }
}

pub(crate) fn components_of(n: usize, adj: &[Vec<(usize, Shift)>]) -> Vec<usize> {
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(v) = stack.pop() {
            for (j, _) in &adj[v] {
                if comp[*j] == usize::MAX {
                    comp[*j] = next;
                    stack.push(*j);
                }
            }
        }
        next += 1;
    }
    comp
}

// ---------------------------------------------------------------------------
// Voronoi construction
// ---------------------------------------------------------------------------

struct Candidate {
    j: usize,
    shift: Vec<i32>,
    /// Image position relative to the cell owner.
    v: Vec<f64>,
    dist: f64,
}

/// Build the neighbour graph of a configuration. An edge is kept when its
/// Voronoi facet measure exceeds `facet_tol * |Q0|^((d-1)/d)`.
pub fn build_delaunay(config: &Configuration, facet_tol: f64) -> Result<PeriodicGraph> {
    let basis = &config.basis;
    let d = basis.dim();
    let n = config.n();
    if let Some((a, b, dist)) = config.closest_pair() {
        if dist <= 1e-12 * basis.volume().powf(1.0 / d as f64) {
            return Err(Error::CoincidentCenters { a, b });
        }
    }

    let positions: Vec<Vec<f64>> = config
        .centers
        .iter()
        .map(|c| basis.cartesian(c.frac()))
        .collect();
    let block = shift_block(d, 1);

    let per_vertex: Vec<Result<Vec<PeriodicEdge>>> = par::map_indexed(n, |k| {
        let mut cands: Vec<Candidate> = Vec::with_capacity(n * block.len());
        for (j, xj) in positions.iter().enumerate() {
            for s in &block {
                if j == k && s.iter().all(|&c| c == 0) {
                    continue;
                }
                let mut v = linalg::sub(xj, &positions[k]);
                for (si, nu) in s.iter().zip(basis.vectors()) {
                    linalg::axpy(&mut v, *si as f64, nu);
                }
                let dist = linalg::norm(&v);
                cands.push(Candidate {
                    j,
                    shift: s.clone(),
                    v,
                    dist,
                });
            }
        }
        cands.sort_by(|a, b| a.dist.total_cmp(&b.dist));

        let radius = cell_radius_bound(basis, &cands);
        let cutoff = 2.0 * radius * (1.0 + 1e-9);
        let active: Vec<&Candidate> = cands.iter().filter(|c| c.dist <= cutoff).collect();

        // Half-space description of the cell of x_k, origin at x_k.
        let halfspaces: Vec<HalfSpace> = active
            .iter()
            .map(|c| HalfSpace {
                normal: linalg::scaled(&c.v, 1.0 / c.dist),
                offset: 0.5 * c.dist,
            })
            .collect();

        let threshold = facet_tol * basis.volume().powf((d - 1) as f64 / d as f64);
        let mut edges = Vec::new();
        for (idx, cand) in active.iter().enumerate() {
            // each undirected facet is measured once, from its smaller endpoint
            let canonical = k < cand.j
                || (k == cand.j && {
                    let s = Shift::new(cand.shift.clone()).expect("block shifts are valid");
                    s.is_lex_positive()
                });
            if !canonical {
                continue;
            }
            let measure = facet_measure(d, &halfspaces, idx, radius);
            if measure > threshold {
                let shift = Shift::new(cand.shift.clone()).expect("block shifts are valid");
                edges.push(PeriodicEdge {
                    k,
                    j: cand.j,
                    shift,
                    length: cand.dist,
                    gap: cand.dist - 2.0 * config.radius,
                });
            }
        }
        Ok(edges)
    });

    let mut edges = Vec::new();
    for res in per_vertex {
        edges.extend(res?);
    }
    edges.sort_by(|a, b| {
        a.k.cmp(&b.k)
            .then_with(|| a.j.cmp(&b.j))
            .then_with(|| a.shift.cmp(&b.shift))
    });
    PeriodicGraph::from_edges(n, d, edges)
}

/// Certified bound on the circumradius of the cell owner's Voronoi cell.
///
/// The cell is contained in the polytope cut by the owner's own +/-nu_i
/// images (always bounded) together with the nearest few candidates;
/// the maximum vertex norm of that polytope bounds the cell radius.
fn cell_radius_bound(basis: &Basis, sorted_cands: &[Candidate]) -> f64 {
    let d = basis.dim();
    let mut bounding: Vec<(Vec<f64>, f64)> = Vec::new();
    for sign in [1.0, -1.0] {
        for nu in basis.vectors() {
            let v = linalg::scaled(nu, sign);
            let dist = linalg::norm(&v);
            bounding.push((linalg::scaled(&v, 1.0 / dist), 0.5 * dist));
        }
    }
    let extra = (4 * d + 8).min(sorted_cands.len());
    for c in &sorted_cands[..extra] {
        bounding.push((linalg::scaled(&c.v, 1.0 / c.dist), 0.5 * c.dist));
    }

    let q = bounding.len();
    let mut best = 0.0f64;
    let mut found = false;
    let mut combo: Vec<usize> = (0..d).collect();
    loop {
        // solve the d x d system picking the planes in `combo`
        let mat: linalg::Mat = combo.iter().map(|&i| bounding[i].0.clone()).collect();
        let rhs: Vec<f64> = combo.iter().map(|&i| bounding[i].1).collect();
        if let Some(vertex) = linalg::solve(&mat, &rhs) {
            let feasible = bounding
                .iter()
                .all(|(nrm, off)| linalg::dot(nrm, &vertex) <= off + 1e-9 * (1.0 + off.abs()));
            if feasible {
                best = best.max(linalg::norm(&vertex));
                found = true;
            }
        }
        // next combination
        let mut i = d;
        loop {
            if i == 0 {
                if found {
                    return best;
                }
                // degenerate fallback; never reached for valid bases
                return basis.covering_bound();
            }
            i -= 1;
            if combo[i] < q - (d - i) {
                combo[i] += 1;
                for k in i + 1..d {
                    combo[k] = combo[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// (d-1)-measure of the facet of constraint `idx` inside the cell.
fn facet_measure(d: usize, halfspaces: &[HalfSpace], idx: usize, radius: f64) -> f64 {
    let face = &halfspaces[idx];
    let anchor = linalg::scaled(&face.normal, face.offset);
    let chart = hyperplane_chart(&face.normal);
    let mut sub: Vec<HalfSpace> = polytope::bounding_box(d - 1, 2.0 * radius + 1.0);
    for (j, other) in halfspaces.iter().enumerate() {
        if j == idx {
            continue;
        }
        let a: Vec<f64> = chart
            .iter()
            .map(|q| linalg::dot(&other.normal, q))
            .collect();
        let b = other.offset - linalg::dot(&other.normal, &anchor);
        match HalfSpace::new(a, b) {
            Some(h) => sub.push(h),
            None => {
                if b < -1e-11 * (1.0 + radius) {
                    return 0.0;
                }
            }
        }
    }
    polytope::volume(d - 1, &sub, radius)
}

fn hyperplane_chart(normal: &[f64]) -> Vec<Vec<f64>> {
    let dim = normal.len();
    let mut chart: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        let c0 = linalg::dot(&e, normal);
        linalg::axpy(&mut e, -c0, normal);
        for q in &chart {
            let c = linalg::dot(&e, q);
            linalg::axpy(&mut e, -c, q);
        }
        let len = linalg::norm(&e);
        if len > 1e-9 {
            chart.push(linalg::scaled(&e, 1.0 / len));
            if chart.len() == dim - 1 {
                break;
            }
        }
    }
    chart
}

/// Exact volume of the Voronoi cell of center `k`; the cells of a valid
/// configuration partition the periodicity cell.
#[cfg(test)]
pub(crate) fn voronoi_cell_volume(config: &Configuration, k: usize) -> f64 {
    let basis = &config.basis;
    let d = basis.dim();
    let positions: Vec<Vec<f64>> = config
        .centers
        .iter()
        .map(|c| basis.cartesian(c.frac()))
        .collect();
    let block = shift_block(d, 1);
    let mut cands = Vec::new();
    for (j, xj) in positions.iter().enumerate() {
        for s in &block {
            if j == k && s.iter().all(|&c| c == 0) {
                continue;
            }
            let mut v = linalg::sub(xj, &positions[k]);
            for (si, nu) in s.iter().zip(basis.vectors()) {
                linalg::axpy(&mut v, *si as f64, nu);
            }
            let dist = linalg::norm(&v);
            cands.push(Candidate {
                j,
                shift: s.clone(),
                v,
                dist,
            });
        }
    }
    cands.sort_by(|a, b| a.dist.total_cmp(&b.dist));
    let radius = cell_radius_bound(basis, &cands);
    let hs: Vec<HalfSpace> = cands
        .iter()
        .filter(|c| c.dist <= 2.0 * radius * (1.0 + 1e-9))
        .map(|c| HalfSpace {
            normal: linalg::scaled(&c.v, 1.0 / c.dist),
            offset: 0.5 * c.dist,
        })
        .collect();
    polytope::volume(d, &hs, radius)
}

// ---------------------------------------------------------------------------
// Class signature
// ---------------------------------------------------------------------------

/// Canonical label of a periodic graph's structure.
///
/// Built from a colour-refinement hash of the quotient multigraph plus
/// invariants that survive vertex relabelling and wholesale re-anchoring
/// of the image shifts: self-loop shift tags and the elementary divisors
/// of the cycle winding lattice. Isomorphic graphs always agree; distinct
/// structures collide only when colour refinement cannot separate them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature(u64);

impl Signature {
    pub fn value(&self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn fnv_u64s(vals: &[u64]) -> u64 {
    let mut bytes = Vec::with_capacity(vals.len() * 8);
    for v in vals {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fnv1a(&bytes)
}

fn loop_tag(shift: &Shift) -> u64 {
    // self-loop shifts are gauge invariant up to sign; hash the
    // lexicographically positive representative
    let canon = if shift.is_lex_positive() {
        shift.clone()
    } else {
        shift.negated()
    };
    let vals: Vec<u64> = canon.entries().iter().map(|&s| (s + 2) as u64).collect();
    fnv_u64s(&vals)
}

pub(crate) fn signature_of(n: usize, d: usize, adj: &[Vec<(usize, Shift)>]) -> Signature {
    // initial colour: degree plus the multiset of self-loop tags
    let mut color: Vec<u64> = (0..n)
        .map(|k| {
            let mut tags: Vec<u64> = adj[k]
                .iter()
                .filter(|(j, _)| *j == k)
                .map(|(_, s)| loop_tag(s))
                .collect();
            tags.sort_unstable();
            let mut vals = vec![adj[k].len() as u64];
            vals.extend(tags);
            fnv_u64s(&vals)
        })
        .collect();

    for _ in 0..n.min(24) + 1 {
        let next: Vec<u64> = (0..n)
            .map(|k| {
                let mut entries: Vec<u64> = adj[k]
                    .iter()
                    .map(|(j, s)| {
                        let tag = if *j == k { loop_tag(s) } else { 0 };
                        fnv_u64s(&[color[*j], tag])
                    })
                    .collect();
                entries.sort_unstable();
                let mut vals = vec![color[k]];
                vals.extend(entries);
                fnv_u64s(&vals)
            })
            .collect();
        color = next;
    }

    let mut sorted = color;
    sorted.sort_unstable();

    let windings = winding_divisors(n, d, adj);
    let comps = components_of(n, adj).iter().max().map_or(0, |m| m + 1);

    let mut vals = vec![n as u64, d as u64, comps as u64];
    vals.extend(sorted);
    vals.push(fnv1a(b"windings"));
    vals.extend(windings.iter().map(|&w| w as u64));
    Signature(fnv_u64s(&vals))
}

/// Elementary divisors of the lattice spanned by the winding vectors of
/// all cycles (Smith normal form diagonal).
pub(crate) fn winding_divisors(n: usize, d: usize, adj: &[Vec<(usize, Shift)>]) -> Vec<i64> {
    // spanning forest offsets; every non-tree edge yields a generator
    let mut offset: Vec<Option<Vec<i64>>> = vec![None; n];
    let mut generators: Vec<Vec<i64>> = Vec::new();
    for root in 0..n {
        if offset[root].is_some() {
            continue;
        }
        offset[root] = Some(vec![0; d]);
        let mut stack = vec![root];
        while let Some(k) = stack.pop() {
            let off_k = offset[k].clone().unwrap();
            for (j, s) in &adj[k] {
                let mut cand = off_k.clone();
                for (c, si) in cand.iter_mut().zip(s.entries()) {
                    *c += *si as i64;
                }
                match &offset[*j] {
                    None => {
                        offset[*j] = Some(cand);
                        stack.push(*j);
                    }
                    Some(existing) => {
                        let w: Vec<i64> = cand.iter().zip(existing).map(|(a, b)| a - b).collect();
                        if w.iter().any(|&x| x != 0) {
                            generators.push(w);
                        }
                    }
                }
            }
        }
    }
    smith_divisors(generators, d)
}

fn smith_divisors(mut rows: Vec<Vec<i64>>, d: usize) -> Vec<i64> {
    let mut divisors = Vec::new();
    let mut col_active: Vec<usize> = (0..d).collect();
    while !rows.is_empty() && !col_active.is_empty() {
        rows.retain(|r| col_active.iter().any(|&c| r[c] != 0));
        if rows.is_empty() {
            break;
        }
        // pick the entry of smallest magnitude as pivot
        let (mut pr, mut pc) = (0, col_active[0]);
        let mut best = i64::MAX;
        for (ri, r) in rows.iter().enumerate() {
            for &c in &col_active {
                if r[c] != 0 && r[c].abs() < best {
                    best = r[c].abs();
                    pr = ri;
                    pc = c;
                }
            }
        }
        let mut reduced = false;
        let piv = rows[pr][pc];
        for ri in 0..rows.len() {
            if ri == pr || rows[ri][pc] == 0 {
                continue;
            }
            let q = rows[ri][pc].div_euclid(piv);
            for &c in &col_active {
                rows[ri][c] -= q * rows[pr][c];
            }
            if rows[ri][pc] != 0 {
                reduced = true;
            }
        }
        if reduced {
            continue; // smaller remainder appeared; pick a new pivot
        }
        // pivot row may still have other nonzero columns; clear them by
        // column operations (allowed in SNF)
        let pivot_row = rows[pr].clone();
        for &c in &col_active {
            if c != pc && pivot_row[c] % piv != 0 {
                // fold column c into the pivot column and retry
                let q = pivot_row[c].div_euclid(piv);
                for r in rows.iter_mut() {
                    r[c] -= q * r[pc];
                }
                reduced = true;
            }
        }
        if reduced {
            continue;
        }
        divisors.push(piv.abs());
        rows.remove(pr);
        col_active.retain(|&c| c != pc);
        for r in rows.iter_mut() {
            r[pc] = 0;
        }
    }
    divisors.sort_unstable();
    divisors
}
