//! Lower bounds on the network energy and percolation diagnostics.
//!
//! The bound chains Jensen's inequality (the weight function is convex
//! and decreasing past contact) with the Cauchy-Schwarz split of the
//! drop-weighted length sum. All three sums run over the support of the
//! drops: edges with vanishing drop contribute nothing to the energy and
//! only loosen the chain, and dropping them is what makes the bound tight
//! on laminated structures where whole families of edges carry no flux.
//!
//! Percolation is winding on the quotient graph: a chain of touching
//! balls connects a pair of opposite faces exactly when some closed walk
//! accumulates a nonzero image offset in that direction. Union-find with
//! integer offset vectors detects this in near-linear time; every
//! offset mismatch on a redundant union is a winding generator.

use serde::Serialize;

use crate::energy::{edge_difference, energy, PotentialField};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::graph::PeriodicGraph;
use crate::linalg;
use crate::torus::{shift_block, Basis, Configuration};

pub const DEFAULT_TOUCH_TOL: f64 = 1e-8;

/// Jensen-Holder lower bound with equality diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// T = directed sum of |drop|^p over the support.
    pub t_power_sum: f64,
    /// Argument handed to the weight function.
    pub mean_arg: f64,
    /// T f(mean_arg) / (2 |Q0|).
    pub bound: f64,
    /// Energy of the same field, same normalisation.
    pub energy: f64,
    /// (energy - bound) / energy.
    pub equality_gap: f64,
    /// True when the supported drops are all equal and their edge lengths
    /// are all equal -- the structural equality case.
    pub equal_drop_edges_equal_gap: bool,
    /// Number of undirected edges carrying flux.
    pub support_edges: usize,
}

/// Lower bound on the energy of `field`; power regime only.
pub fn lower_bound(
    graph: &PeriodicGraph,
    model: &FluxModel,
    field: &PotentialField,
    basis: &Basis,
) -> Result<BoundReport> {
    let f = model.weight_fn()?;
    let p = model.exponent() as f64;

    let drops: Vec<f64> = graph
        .edges()
        .iter()
        .map(|e| edge_difference(field, e, basis))
        .collect();
    let max_drop = drops.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if max_drop == 0.0 {
        return Err(Error::UndefinedBound);
    }
    let support_tol = 1e-12 * max_drop;

    let mut t_power_sum = 0.0;
    let mut drop_2p = 0.0;
    let mut len_sq = 0.0;
    let mut support_edges = 0;
    let mut first: Option<(f64, f64)> = None;
    let mut equal = true;
    for (e, drop) in graph.edges().iter().zip(&drops) {
        let a = drop.abs();
        if a <= support_tol {
            continue;
        }
        support_edges += 1;
        t_power_sum += 2.0 * a.powf(p);
        drop_2p += 2.0 * a.powf(2.0 * p);
        len_sq += 2.0 * e.length * e.length;
        match first {
            None => first = Some((a, e.length)),
            Some((a0, l0)) => {
                if (a - a0).abs() > 1e-9 * a0.max(a) || (e.length - l0).abs() > 1e-9 * l0 {
                    equal = false;
                }
            }
        }
    }

    let mean_arg = drop_2p.sqrt() * len_sq.sqrt() / t_power_sum;
    let bound = t_power_sum * f(mean_arg) / (2.0 * basis.volume());
    let energy = energy(graph, model, field, basis)?;
    let equality_gap = (energy - bound) / energy;

    Ok(BoundReport {
        t_power_sum,
        mean_arg,
        bound,
        energy,
        equality_gap,
        equal_drop_edges_equal_gap: equal,
        support_edges,
    })
}

// ---------------------------------------------------------------------------
// Percolation
// ---------------------------------------------------------------------------

/// Union-find over the quotient graph carrying, per node, the integer
/// image offset to its root. `union` on an already-joined pair returns
/// the winding vector of the implied cycle.
struct OffsetForest {
    parent: Vec<usize>,
    rank: Vec<u32>,
    offset: Vec<Vec<i64>>,
}

impl OffsetForest {
    fn new(n: usize, d: usize) -> Self {
        OffsetForest {
            parent: (0..n).collect(),
            rank: vec![0; n],
            offset: vec![vec![0; d]; n],
        }
    }

    /// Root of `x` plus the offset of `x` relative to that root.
    fn find(&mut self, x: usize) -> (usize, Vec<i64>) {
        if self.parent[x] == x {
            return (x, self.offset[x].clone());
        }
        let (root, parent_off) = self.find(self.parent[x]);
        for (o, po) in self.offset[x].iter_mut().zip(&parent_off) {
            *o += po;
        }
        self.parent[x] = root;
        (root, self.offset[x].clone())
    }

    /// Join `a` and `b` with the lift relation `lift(b) = lift(a) + shift`.
    /// Returns the winding generator when the pair was already connected.
    fn union(&mut self, a: usize, b: usize, shift: &[i64]) -> Option<Vec<i64>> {
        let (ra, oa) = self.find(a);
        let (rb, ob) = self.find(b);
        // required offset of b relative to a's root
        let want: Vec<i64> = oa.iter().zip(shift).map(|(x, s)| x + s).collect();
        if ra == rb {
            let w: Vec<i64> = want.iter().zip(&ob).map(|(w, o)| w - o).collect();
            return Some(w);
        }
        if self.rank[ra] < self.rank[rb] {
            // attach ra under rb: offset[ra] = ob - shift - oa ... derive via
            // lift(a) = lift(b) - shift
            let off: Vec<i64> = ob
                .iter()
                .zip(shift)
                .zip(&oa)
                .map(|((o, s), x)| o - s - x)
                .collect();
            self.parent[ra] = rb;
            self.offset[ra] = off;
        } else {
            let off: Vec<i64> = want.iter().zip(&ob).map(|(w, o)| w - o).collect();
            self.parent[rb] = ra;
            self.offset[rb] = off;
            if self.rank[ra] == self.rank[rb] {
                self.rank[ra] += 1;
            }
        }
        None
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PercolationReport {
    /// Per direction: does a chain of touching balls wind around it?
    pub winding: Vec<bool>,
    /// Touching relations found (undirected, with image multiplicity).
    pub touching_edges: usize,
    /// Connected components of the touching graph.
    pub components: usize,
    /// All directions wind: necessary for macroscopic isotropy.
    pub isotropy_necessary: bool,
}

struct TouchingPair {
    k: usize,
    j: usize,
    shift: Vec<i64>,
    gap: f64,
}

/// Pairs within `touch_tol * r` of contact, over all images in the
/// minimal-image block; the `all` flag widens to every candidate pair
/// (used by the densify scan).
fn near_pairs(config: &Configuration, keep: impl Fn(f64) -> bool) -> Vec<TouchingPair> {
    let basis = &config.basis;
    let d = basis.dim();
    let n = config.n();
    let positions: Vec<Vec<f64>> = config
        .centers
        .iter()
        .map(|c| basis.cartesian(c.frac()))
        .collect();
    let mut out = Vec::new();
    for k in 0..n {
        for j in k..n {
            for s in shift_block(d, 1) {
                if k == j {
                    // self pairs: skip zero and keep one orientation
                    let lex_positive = s.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0);
                    if !lex_positive {
                        continue;
                    }
                }
                let mut v = linalg::sub(&positions[j], &positions[k]);
                for (si, nu) in s.iter().zip(basis.vectors()) {
                    linalg::axpy(&mut v, *si as f64, nu);
                }
                let gap = linalg::norm(&v) - 2.0 * config.radius;
                if keep(gap) {
                    out.push(TouchingPair {
                        k,
                        j,
                        shift: s.iter().map(|&x| x as i64).collect(),
                        gap,
                    });
                }
            }
        }
    }
    out
}

/// Detect percolation chains of touching balls in every lattice direction.
pub fn detect_percolation(config: &Configuration, touch_tol: f64) -> PercolationReport {
    let d = config.dim();
    let threshold = touch_tol * config.radius;
    let pairs = near_pairs(config, |gap| gap <= threshold);
    let mut forest = OffsetForest::new(config.n(), d);
    let mut winding = vec![false; d];
    for p in &pairs {
        if let Some(w) = forest.union(p.k, p.j, &p.shift) {
            for (flag, &wi) in winding.iter_mut().zip(&w) {
                if wi != 0 {
                    *flag = true;
                }
            }
        }
    }
    let mut roots = std::collections::BTreeSet::new();
    for v in 0..config.n() {
        let (r, _) = forest.find(v);
        roots.insert(r);
    }
    let isotropy_necessary = winding.iter().all(|&w| w);
    PercolationReport {
        winding,
        touching_edges: pairs.len(),
        components: roots.len(),
        isotropy_necessary,
    }
}

/// Advisory translation that would create a new contact for a component
/// of the touching graph.
#[derive(Debug, Clone, Serialize)]
pub struct DensifyHint {
    /// Vertices of the component to translate rigidly.
    pub component: Vec<usize>,
    /// Smallest gap from this component to anything it is not yet
    /// touching (another component, or a fresh image of itself).
    pub gap: f64,
    pub pair: (usize, usize),
    pub shift: Vec<i64>,
}

/// For each component of the touching graph that is not part of a fully
/// percolating structure, the rigid translation magnitude that would
/// close the nearest new contact. Empty when the configuration already
/// percolates in every direction.
pub fn densify_hints(config: &Configuration, touch_tol: f64) -> Vec<DensifyHint> {
    let report = detect_percolation(config, touch_tol);
    if report.isotropy_necessary {
        return Vec::new();
    }
    let d = config.dim();
    let threshold = touch_tol * config.radius;

    // rebuild the forest to query component structure and lifts
    let pairs = near_pairs(config, |gap| gap <= threshold);
    let mut forest = OffsetForest::new(config.n(), d);
    for p in &pairs {
        forest.union(p.k, p.j, &p.shift);
    }
    let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for v in 0..config.n() {
        let (r, _) = forest.find(v);
        members.entry(r).or_default().push(v);
    }

    let candidates = near_pairs(config, |gap| gap > threshold);
    let mut hints = Vec::new();
    for (&root, verts) in &members {
        let mut best: Option<&TouchingPair> = None;
        for c in &candidates {
            let (rk, ok) = forest.find(c.k);
            let (rj, oj) = forest.find(c.j);
            let touches_this = rk == root || rj == root;
            if !touches_this {
                continue;
            }
            // same component through the same lift adds nothing
            if rk == rj {
                let consistent = ok
                    .iter()
                    .zip(&c.shift)
                    .zip(&oj)
                    .all(|((a, s), b)| a + s == *b);
                if consistent {
                    continue;
                }
            }
            if best.is_none_or(|b| c.gap < b.gap) {
                best = Some(c);
            }
        }
        if let Some(b) = best {
            hints.push(DensifyHint {
                component: verts.clone(),
                gap: b.gap,
                pair: (b.k, b.j),
                shift: b.shift.clone(),
            });
        }
    }
    hints.sort_by(|a, b| a.gap.total_cmp(&b.gap));
    hints
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_delaunay;
    use crate::torus::TorusPoint;
    use approx::assert_relative_eq;

    fn hexagonal_config(radius: f64) -> Configuration {
        let c = (std::f64::consts::PI / 3.0).cos();
        let s = (std::f64::consts::PI / 3.0).sin();
        let basis = Basis::new(vec![vec![1.0, 0.0], vec![c, s]]).unwrap();
        Configuration::new(basis, vec![TorusPoint::new(vec![0.0, 0.0])], radius).unwrap()
    }

    #[test]
    fn hexagonal_at_touching_percolates_everywhere() {
        let cfg = hexagonal_config(0.5);
        let rep = detect_percolation(&cfg, DEFAULT_TOUCH_TOL);
        assert_eq!(rep.winding, vec![true, true]);
        assert!(rep.isotropy_necessary);
    }

    #[test]
    fn shrunk_radius_kills_percolation() {
        let cfg = hexagonal_config(0.5 * 0.99);
        let rep = detect_percolation(&cfg, DEFAULT_TOUCH_TOL);
        assert_eq!(rep.winding, vec![false, false]);
        assert!(!rep.isotropy_necessary);
        assert_eq!(rep.touching_edges, 0);
    }

    #[test]
    fn straight_chain_winds_one_direction() {
        // two balls stacked along nu_1 only, cell tall enough that rows
        // do not touch
        let basis = Basis::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let centers = vec![
            TorusPoint::new(vec![0.0, 0.0]),
            TorusPoint::new(vec![0.5, 0.0]),
        ];
        let cfg = Configuration::new(basis, centers, 0.5).unwrap();
        let rep = detect_percolation(&cfg, DEFAULT_TOUCH_TOL);
        assert_eq!(rep.winding, vec![true, false]);
    }

    #[test]
    fn percolation_invariant_under_translation() {
        let basis = Basis::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        for offset in [0.0, 0.31, 0.77] {
            let centers = vec![
                TorusPoint::new(vec![offset, 0.1 + offset]),
                TorusPoint::new(vec![0.5 + offset, 0.1 + offset]),
            ];
            let cfg = Configuration::new(basis.clone(), centers, 0.5).unwrap();
            let rep = detect_percolation(&cfg, DEFAULT_TOUCH_TOL);
            assert_eq!(rep.winding, vec![true, false]);
        }
    }

    #[test]
    fn densify_suggests_min_image_gap_for_single_ball() {
        let cfg = hexagonal_config(0.4);
        let hints = densify_hints(&cfg, DEFAULT_TOUCH_TOL);
        assert_eq!(hints.len(), 1);
        assert_relative_eq!(hints[0].gap, 1.0 - 0.8, max_relative = 1e-12);
    }

    #[test]
    fn densify_empty_when_percolating() {
        let cfg = hexagonal_config(0.5);
        assert!(densify_hints(&cfg, DEFAULT_TOUCH_TOL).is_empty());
    }

    #[test]
    fn densify_suggests_inter_dimer_gap() {
        // two touching dimers separated across the cell
        let basis = Basis::new(vec![vec![4.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let centers = vec![
            TorusPoint::new(vec![0.0, 0.0]),
            TorusPoint::new(vec![0.25, 0.0]),
            TorusPoint::new(vec![0.55, 0.5]),
            TorusPoint::new(vec![0.80, 0.5]),
        ];
        let cfg = Configuration::new(basis, centers, 0.5).unwrap();
        let hints = densify_hints(&cfg, DEFAULT_TOUCH_TOL);
        assert_eq!(hints.len(), 2);
        // nearest approach between the dimers goes through an image:
        // ball 3 at (3.2, 2) against ball 0 at (4, 0)
        let expect = (0.8f64 * 0.8 + 4.0).sqrt() - 1.0;
        assert_relative_eq!(hints[0].gap, expect, max_relative = 1e-12);
    }

    #[test]
    fn two_edge_toy_bound_is_strict() {
        // drops (1, 1) with unequal lengths: Jensen is strict
        let basis = Basis::cubic(2, 1.0).unwrap();
        let r = 0.2;
        let model = FluxModel::new(2, 2, r).unwrap();
        let delta = 0.01;
        let centers = vec![
            TorusPoint::new(vec![0.0, 0.25]),
            TorusPoint::new(vec![2.0 * r + delta, 0.25]),
            TorusPoint::new(vec![2.0 * r + delta + 2.0 * r + 2.0 * delta, 0.25]),
        ];
        let cfg = Configuration::new(basis.clone(), centers, r).unwrap();
        let g = build_delaunay(&cfg, 1e-9).unwrap();
        // restrict to the two short horizontal edges
        let edges: Vec<_> = g
            .edges()
            .iter()
            .filter(|e| e.shift.is_zero() && e.gap < 3.0 * delta)
            .cloned()
            .collect();
        assert_eq!(edges.len(), 2);
        let g2 = PeriodicGraph::from_edges(3, 2, edges).unwrap();
        let field = PotentialField::new(vec![1.0, 0.0], vec![0.0, 1.0, 2.0]).unwrap();
        let rep = lower_bound(&g2, &model, &field, &basis).unwrap();
        assert!(rep.bound < rep.energy);
        assert!(rep.equality_gap > 1e-6);
        assert!(!rep.equal_drop_edges_equal_gap);

        // hand check of both sides: drops are 1, lengths L1, L2
        let (l1, l2) = (2.0 * r + delta, 2.0 * r + 2.0 * delta);
        let f = model.weight_fn().unwrap();
        let e_hand = (2.0 * f(l1) + 2.0 * f(l2)) / 2.0;
        assert_relative_eq!(rep.energy, e_hand, max_relative = 1e-12);
        let t_sum = 4.0;
        let mean = (4.0f64).sqrt() * (2.0 * (l1 * l1 + l2 * l2)).sqrt() / t_sum;
        assert_relative_eq!(rep.bound, t_sum * f(mean) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn all_drops_zero_is_undefined() {
        let cfg = hexagonal_config(0.45);
        let g = build_delaunay(&cfg, 1e-9).unwrap();
        let model = FluxModel::new(2, 2, 0.45).unwrap();
        // single vertex: t = 0; xi orthogonal to nothing still gives
        // nonzero jumps, so force zero drops with a zero-ish xi? jumps
        // come from xi; use xi orthogonal to both lattice vectors: none
        // exists in 2d, so build an unwrapped two-vertex graph instead.
        let basis = Basis::cubic(2, 1.0).unwrap();
        let edges = vec![crate::graph::PeriodicEdge {
            k: 0,
            j: 1,
            shift: crate::torus::Shift::zero(2),
            length: 0.5,
            gap: 0.1,
        }];
        let g2 = PeriodicGraph::from_edges(2, 2, edges).unwrap();
        let field = PotentialField::new(vec![1.0, 0.0], vec![0.3, 0.3]).unwrap();
        let err = lower_bound(&g2, &model, &field, &basis).unwrap_err();
        assert!(matches!(err, Error::UndefinedBound));
        drop(g);
    }

    #[test]
    fn bound_scales_with_potential_power() {
        let basis = Basis::cubic(2, 1.0).unwrap();
        let r = 0.2;
        let model = FluxModel::new(2, 3, r).unwrap();
        let cfg = Configuration::new(
            basis.clone(),
            vec![
                TorusPoint::new(vec![0.0, 0.0]),
                TorusPoint::new(vec![0.5, 0.0]),
            ],
            r,
        )
        .unwrap();
        let g = build_delaunay(&cfg, 1e-9).unwrap();
        let lam = 3.0f64;
        let f1 = PotentialField::new(vec![0.0, 1.0], vec![0.0, 0.4]).unwrap();
        let f2 = PotentialField::new(vec![0.0, lam], vec![0.0, lam * 0.4]).unwrap();
        let r1 = lower_bound(&g, &model, &f1, &basis).unwrap();
        let r2 = lower_bound(&g, &model, &f2, &basis).unwrap();
        let p = 3.0;
        assert_relative_eq!(r2.bound, lam.powf(p) * r1.bound, max_relative = 1e-10);
        assert_relative_eq!(r2.energy, lam.powf(p) * r1.energy, max_relative = 1e-10);
        assert_relative_eq!(r2.equality_gap, r1.equality_gap, max_relative = 1e-8);
    }
}
