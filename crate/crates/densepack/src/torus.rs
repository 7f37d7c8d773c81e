//! Geometry of the periodicity cell with glued opposite faces.
//!
//! A [`Basis`] holds the d fundamental translation vectors spanning the
//! cell. Points live in fractional coordinates canonicalized to `[0, 1)`,
//! which keeps the glued topology and all wrap bookkeeping exact. The
//! minimal-image search looks at the 3^d block of neighbouring images;
//! [`Basis::new`] rejects cells skewed enough that this block could miss
//! the true minimum instead of silently widening the window.

use crate::error::{Error, Result};
use crate::linalg;

/// Fundamental translation vectors of the periodic cell.
///
/// Vectors are stored row per vector; the cartesian position of a
/// fractional point `f` is `sum_j f_j * nu_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    vectors: Vec<Vec<f64>>,
    volume: f64,
    /// Rows of the inverse of the column matrix (nu_1 ... nu_d); used to
    /// map cartesian coordinates back to fractional ones.
    inv_rows: Vec<Vec<f64>>,
    covering_bound: f64,
}

impl Basis {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let d = vectors.len();
        if d == 0 {
            return Err(Error::InvalidInput(
                "basis needs at least one vector".into(),
            ));
        }
        for v in &vectors {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidInput("basis vector is not finite".into()));
            }
        }
        // Column matrix M = (nu_1 ... nu_d).
        let m: linalg::Mat = (0..d)
            .map(|i| (0..d).map(|j| vectors[j][i]).collect())
            .collect();
        let det = linalg::det(&m);
        let scale = vectors
            .iter()
            .map(|v| linalg::norm(v))
            .fold(0.0f64, f64::max);
        if det.abs() <= 1e-12 * scale.powi(d as i32) {
            return Err(Error::InvalidBasis { det });
        }
        let inv_rows = linalg::inverse(&m).ok_or(Error::InvalidBasis { det })?;

        // Covering radius bound: every point of space is within half a cell
        // diameter of a lattice point. The diameter is realised at a vertex
        // pair of the parallelotope, i.e. max over sign patterns.
        let mut covering_bound = 0.0f64;
        for mask in 0..(1u32 << (d - 1)) {
            let mut acc = vec![0.0; d];
            for (j, v) in vectors.iter().enumerate() {
                let sign = if j == 0 || mask >> (j - 1) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                };
                linalg::axpy(&mut acc, sign, v);
            }
            covering_bound = covering_bound.max(0.5 * linalg::norm(&acc));
        }

        // Minimal-image guard. With fractional differences pre-reduced to
        // (-1, 1) the minimising image satisfies |m_i| <= |frac(voronoi
        // point)_i| + 1, and any Voronoi-cell point lies within the covering
        // radius of the origin, so row_i(M^-1) * covering < 1.5 guarantees
        // |m_i| <= 1.
        for row in &inv_rows {
            if linalg::norm(row) * covering_bound >= 1.5 {
                return Err(Error::SkewedCell);
            }
        }

        Ok(Basis {
            vectors,
            volume: det.abs(),
            inv_rows,
            covering_bound,
        })
    }

    /// Cubic cell of the given side length.
    pub fn cubic(d: usize, side: f64) -> Result<Self> {
        let vectors = (0..d)
            .map(|i| (0..d).map(|j| if i == j { side } else { 0.0 }).collect())
            .collect();
        Basis::new(vectors)
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Cell volume |det(nu_1 ... nu_d)|.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Upper bound on the covering radius of the lattice.
    pub fn covering_bound(&self) -> f64 {
        self.covering_bound
    }

    pub fn cartesian(&self, frac: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (f, v) in frac.iter().zip(&self.vectors) {
            linalg::axpy(&mut x, *f, v);
        }
        x
    }

    pub fn fractional(&self, cart: &[f64]) -> Vec<f64> {
        self.inv_rows
            .iter()
            .map(|row| linalg::dot(row, cart))
            .collect()
    }

    /// Length of the shortest nonzero lattice vector. The skew guard keeps
    /// the minimiser inside the +/-2 block.
    pub fn shortest_lattice_vector(&self) -> f64 {
        let d = self.dim();
        let mut best = f64::INFINITY;
        for m in shift_block(d, 2) {
            if m.iter().all(|&s| s == 0) {
                continue;
            }
            let mut x = vec![0.0; d];
            for (s, v) in m.iter().zip(&self.vectors) {
                linalg::axpy(&mut x, *s as f64, v);
            }
            best = best.min(linalg::norm(&x));
        }
        best
    }
}

/// Point on the torus in fractional coordinates, each in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    frac: Vec<f64>,
}

impl TorusPoint {
    /// Reduce every coordinate modulo 1 into `[0, 1)`.
    pub fn new(frac: Vec<f64>) -> Self {
        let frac = frac
            .into_iter()
            .map(|x| {
                let mut y = x.rem_euclid(1.0);
                // rem_euclid of a tiny negative rounds up to exactly 1.0
                if y >= 1.0 {
                    y = 0.0;
                }
                y
            })
            .collect();
        TorusPoint { frac }
    }

    pub fn frac(&self) -> &[f64] {
        &self.frac
    }

    pub fn dim(&self) -> usize {
        self.frac.len()
    }
}

/// Integer image offset, each entry in {-1, 0, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shift(Vec<i32>);

impl Shift {
    pub fn new(s: Vec<i32>) -> Result<Self> {
        if s.iter().any(|&v| v.abs() > 1) {
            return Err(Error::InvalidInput(format!(
                "shift entries must be in -1..=1, got {s:?}"
            )));
        }
        Ok(Shift(s))
    }

    pub fn zero(d: usize) -> Self {
        Shift(vec![0; d])
    }

    pub fn entries(&self) -> &[i32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&s| s == 0)
    }

    pub fn negated(&self) -> Shift {
        Shift(self.0.iter().map(|s| -s).collect())
    }

    /// True when self is lexicographically positive (first nonzero entry > 0).
    pub fn is_lex_positive(&self) -> bool {
        for &s in &self.0 {
            if s != 0 {
                return s > 0;
            }
        }
        false
    }

    /// Cartesian offset sum_l s_l nu_l.
    pub fn cartesian(&self, basis: &Basis) -> Vec<f64> {
        let mut x = vec![0.0; basis.dim()];
        for (s, v) in self.0.iter().zip(basis.vectors()) {
            linalg::axpy(&mut x, *s as f64, v);
        }
        x
    }
}

/// All integer vectors in {-radius..=radius}^d, lexicographic order.
pub(crate) fn shift_block(d: usize, radius: i32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let mut cur = vec![-radius; d];
    loop {
        out.push(cur.clone());
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < radius {
                cur[i] += 1;
                for c in cur.iter_mut().skip(i + 1) {
                    *c = -radius;
                }
                break;
            }
        }
    }
}

/// Minimal-image distance between two torus points, together with the
/// image offset m realising `|a - b + sum_l m_l nu_l|`. Ties go to the
/// lexicographically smallest m so rebuilt graphs come out identical.
pub fn torus_distance(basis: &Basis, a: &TorusPoint, b: &TorusPoint) -> (f64, Shift) {
    let d = basis.dim();
    debug_assert_eq!(a.dim(), d);
    debug_assert_eq!(b.dim(), d);
    let diff: Vec<f64> = a.frac().iter().zip(b.frac()).map(|(x, y)| x - y).collect();
    let mut best = f64::INFINITY;
    let mut best_m: Option<Vec<i32>> = None;
    for m in shift_block(d, 1) {
        let f: Vec<f64> = diff.iter().zip(&m).map(|(x, s)| x + *s as f64).collect();
        let dist = linalg::norm(&basis.cartesian(&f));
        // lexicographic enumeration order resolves ties toward the
        // smallest shift
        if best_m.is_none() || dist < best - 1e-14 * (1.0 + dist) {
            best = dist;
            best_m = Some(m);
        }
    }
    (best, Shift(best_m.expect("shift block is never empty")))
}

/// Cell volume; kept as a free function to mirror the rest of the
/// geometric operations.
pub fn cell_volume(basis: &Basis) -> f64 {
    basis.volume()
}

/// n equal balls of common radius on the torus.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub basis: Basis,
    pub centers: Vec<TorusPoint>,
    pub radius: f64,
}

impl Configuration {
    pub fn new(basis: Basis, centers: Vec<TorusPoint>, radius: f64) -> Result<Self> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "radius must be positive, got {radius}"
            )));
        }
        let d = basis.dim();
        for c in &centers {
            if c.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: c.dim(),
                });
            }
        }
        if centers.is_empty() {
            return Err(Error::InvalidInput(
                "configuration needs at least one center".into(),
            ));
        }
        let cfg = Configuration {
            basis,
            centers,
            radius,
        };
        if let Some((a, b, dist)) = cfg.closest_pair() {
            let scale = cfg.basis.volume().powf(1.0 / d as f64);
            if dist <= 1e-12 * scale {
                return Err(Error::CoincidentCenters { a, b });
            }
        }
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn n(&self) -> usize {
        self.centers.len()
    }

    /// Closest distinct pair of centers (indices and distance), if n > 1.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let n = self.centers.len();
        let mut best: Option<(usize, usize, f64)> = None;
        for k in 0..n {
            for j in k + 1..n {
                let (dist, _) = torus_distance(&self.basis, &self.centers[k], &self.centers[j]);
                if best.is_none_or(|(_, _, b)| dist < b) {
                    best = Some((k, j, dist));
                }
            }
        }
        best
    }

    /// Smallest gap over all pairs including periodic self-images.
    pub fn min_gap(&self) -> f64 {
        let mut min_dist = self.basis.shortest_lattice_vector();
        if let Some((_, _, dist)) = self.closest_pair() {
            min_dist = min_dist.min(dist);
        }
        min_dist - 2.0 * self.radius
    }

    /// Error out on the first overlapping pair (gap < -tol).
    pub fn check_nonoverlapping(&self, tol: f64) -> Result<()> {
        let n = self.centers.len();
        let lattice_gap = self.basis.shortest_lattice_vector() - 2.0 * self.radius;
        if lattice_gap < -tol {
            return Err(Error::Overlap {
                a: 0,
                b: 0,
                gap: lattice_gap,
            });
        }
        for k in 0..n {
            for j in k + 1..n {
                let (dist, _) = torus_distance(&self.basis, &self.centers[k], &self.centers[j]);
                let gap = dist - 2.0 * self.radius;
                if gap < -tol {
                    return Err(Error::Overlap { a: k, b: j, gap });
                }
            }
        }
        Ok(())
    }
}
