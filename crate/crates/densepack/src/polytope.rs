//! Exact volumes of half-space intersections in low dimension.
//!
//! `volume` implements the divergence-theorem recursion
//! `m * vol(P) = sum_i b_i * vol(F_i)` for `P = {x : u_i . x <= b_i}` with
//! unit normals: each face volume is computed in an orthonormal chart of
//! its hyperplane, down to interval lengths at m = 1. Works for any
//! bounded input polytope, returns 0 for empty or lower-dimensional ones.
//! We use it both for the (d-1)-measure of Voronoi facets and, in tests,
//! for whole Voronoi cells.

use crate::linalg;

#[derive(Debug, Clone)]
pub(crate) struct HalfSpace {
    /// Unit outward normal.
    pub normal: Vec<f64>,
    /// Signed offset: the constraint is `normal . x <= offset`.
    pub offset: f64,
}

impl HalfSpace {
    /// Normalize `a . x <= b` to a unit normal; `None` when `a` vanishes.
    pub fn new(a: Vec<f64>, b: f64) -> Option<Self> {
        let len = linalg::norm(&a);
        if len <= 1e-13 {
            return None;
        }
        Some(HalfSpace {
            normal: linalg::scaled(&a, 1.0 / len),
            offset: b / len,
        })
    }
}

/// Remove duplicates (same plane within `tol`), keeping the tighter offset.
fn dedup(hs: Vec<HalfSpace>, tol: f64) -> Vec<HalfSpace> {
    let mut out: Vec<HalfSpace> = Vec::with_capacity(hs.len());
    'outer: for h in hs {
        for kept in out.iter_mut() {
            let same_dir = kept
                .normal
                .iter()
                .zip(&h.normal)
                .all(|(a, b)| (a - b).abs() <= tol);
            if same_dir {
                if h.offset < kept.offset {
                    kept.offset = h.offset;
                }
                continue 'outer;
            }
        }
        out.push(h);
    }
    out
}

/// Orthonormal basis of the hyperplane orthogonal to `normal` (unit).
fn hyperplane_chart(normal: &[f64]) -> Vec<Vec<f64>> {
    let dim = normal.len();
    let mut chart: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        // project out the normal and the chart built so far
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
    debug_assert_eq!(chart.len(), dim - 1);
    chart
}

/// Volume of the intersection of half-spaces in `dim` dimensions.
///
/// The polytope must be bounded (callers add a bounding box when in
/// doubt); `scale` is a characteristic length used for tolerances.
pub(crate) fn volume(dim: usize, halfspaces: &[HalfSpace], scale: f64) -> f64 {
    let tol = 1e-11 * scale.max(1.0);
    let hs = dedup(halfspaces.to_vec(), 1e-10);

    if dim == 0 {
        // point: feasible iff no constraint excludes the origin of the chart
        return if hs.iter().all(|h| h.offset >= -tol) {
            1.0
        } else {
            0.0
        };
    }
    if dim == 1 {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for h in &hs {
            let a = h.normal[0];
            if a > 0.0 {
                hi = hi.min(h.offset / a);
            } else {
                lo = lo.max(h.offset / a);
            }
        }
        return (hi - lo).max(0.0);
    }

    let mut acc = 0.0;
    for (i, face) in hs.iter().enumerate() {
        // Chart of the face hyperplane anchored at offset * normal.
        let anchor = linalg::scaled(&face.normal, face.offset);
        let chart = hyperplane_chart(&face.normal);
        let mut sub: Vec<HalfSpace> = Vec::with_capacity(hs.len() - 1);
        let mut feasible = true;
        for (j, other) in hs.iter().enumerate() {
            if i == j {
                continue;
            }
            let a: Vec<f64> = chart
                .iter()
                .map(|q| linalg::dot(&other.normal, q))
                .collect();
            let b = other.offset - linalg::dot(&other.normal, &anchor);
            match HalfSpace::new(a, b) {
                Some(h) => sub.push(h),
                // Constraint plane parallel to the face: either the whole
                // face satisfies it or none of it does.
                None => {
                    if b < -tol {
                        feasible = false;
                        break;
                    }
                }
            }
        }
        if !feasible {
            continue;
        }
        let face_vol = volume(dim - 1, &sub, scale);
        acc += face.offset * face_vol;
    }
    (acc / dim as f64).max(0.0)
}

/// Axis-aligned bounding box `|x_i| <= half` as half-spaces.
pub(crate) fn bounding_box(dim: usize, half: f64) -> Vec<HalfSpace> {
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut n = vec![0.0; dim];
            n[i] = sign;
            out.push(HalfSpace {
                normal: n,
                offset: half,
            });
        }
    }
    out
}
