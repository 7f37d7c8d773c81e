//! Optimal center placement inside a fixed graph class.
//!
//! A graph class pins down, for every ball, which neighbours it must keep
//! and through which periodic images. Stationarity of the squared-length
//! spread makes every center the average of its neighbour images,
//!
//! ```text
//! a_k = (1/N_k) sum_{(j,s) in J_k} (a_j + s . basis),
//! ```
//!
//! a linear system that decouples by coordinate and is solvable up to a
//! rigid translation whenever the class is connected. Solving it once per
//! basis index with unit right-hand sides gives basis-independent
//! coefficient tables, so one numeric solve covers every concrete cell.
//! Packing then reads the radius off the closest pair and asks the
//! rebuilt tessellation whether the class survived.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{self, build_delaunay, PeriodicGraph, Signature};
use crate::linalg;
use crate::par;
use crate::special::unit_ball_volume;
use crate::torus::{Basis, Configuration, Shift, TorusPoint};

pub const DEFAULT_CENTER_TOL: f64 = 1e-10;

/// Abstract periodic adjacency: for every vertex the directed list of
/// (neighbour, image shift) pairs, symmetric under orientation reversal.
#[derive(Debug, Clone)]
pub struct GraphClass {
    n: usize,
    d: usize,
    adjacency: Vec<Vec<(usize, Shift)>>,
}

impl GraphClass {
    pub fn new(d: usize, adjacency: Vec<Vec<(usize, Shift)>>) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "graph class needs at least one vertex".into(),
            ));
        }
        for (k, adj) in adjacency.iter().enumerate() {
            for (j, s) in adj {
                if *j >= n {
                    return Err(Error::InvalidInput(format!("neighbour {j} out of range")));
                }
                if s.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: s.dim(),
                    });
                }
                // symmetry: the reversed entry must be present
                let reversed = s.negated();
                let count_fwd = adjacency[k]
                    .iter()
                    .filter(|(a, b)| a == j && *b == *s)
                    .count();
                let count_rev = adjacency[*j]
                    .iter()
                    .filter(|(a, b)| a == &k && *b == reversed)
                    .count();
                if count_fwd != count_rev {
                    return Err(Error::InvalidInput(format!(
                        "asymmetric adjacency between {k} and {j}"
                    )));
                }
            }
        }
        Ok(GraphClass { n, d, adjacency })
    }

    pub fn from_graph(g: &PeriodicGraph) -> Self {
        let adjacency = (0..g.n()).map(|k| g.neighbors(k).to_vec()).collect();
        GraphClass {
            n: g.n(),
            d: g.dim(),
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn neighbors(&self, k: usize) -> &[(usize, Shift)] {
        &self.adjacency[k]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(|a| a.len()).collect()
    }

    pub fn signature(&self) -> Signature {
        graph::signature_of(self.n, self.d, &self.adjacency)
    }

    pub fn is_connected(&self) -> bool {
        graph::components_of(self.n, &self.adjacency)
            .iter()
            .all(|&c| c == 0)
    }
}

/// Centers solving the stationarity system, in both basis-independent
/// (fractional coefficient) and realized form.
#[derive(Debug, Clone)]
pub struct CenterSolution {
    /// n x d coefficient table: row k holds the multipliers of the basis
    /// vectors, i.e. the fractional coordinates before reduction.
    /// Mean-zero per column.
    pub coeffs: Vec<Vec<f64>>,
    /// Realized positions reduced into the cell.
    pub centers: Vec<TorusPoint>,
    /// Max cartesian defect of the stationarity equations.
    pub residual: f64,
}

fn laplacian(cls: &GraphClass) -> linalg::Mat {
    let n = cls.n;
    let mut l = vec![vec![0.0; n]; n];
    for (k, adj) in cls.adjacency.iter().enumerate() {
        l[k][k] += adj.len() as f64;
        for (j, _) in adj {
            l[k][*j] -= 1.0;
        }
    }
    l
}

/// Solve the bordered system `L y = rhs`, mean-zero gauge.
fn solve_gauged(l: &linalg::Mat, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = l.len();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    let mut b = vec![0.0; n + 1];
    for (i, row) in l.iter().enumerate() {
        a[i][..n].copy_from_slice(row);
        a[i][n] = 1.0;
        a[n][i] = 1.0;
        b[i] = rhs[i];
    }
    linalg::solve(&a, &b)
        .map(|x| x[..n].to_vec())
        .ok_or_else(|| Error::RankDeficient("gauged center system is singular".into()))
}

fn ensure_connected(cls: &GraphClass) -> Result<()> {
    if !cls.is_connected() {
        return Err(Error::RankDeficient(
            "graph class is disconnected; centers are only determined per component".into(),
        ));
    }
    Ok(())
}

/// Cartesian stationarity defect at positions `y` (n x d).
pub fn stationarity_residual(cls: &GraphClass, basis: &Basis, y: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (k, adj) in cls.adjacency.iter().enumerate() {
        let mut avg = vec![0.0; cls.d];
        for (j, s) in adj {
            linalg::axpy(&mut avg, 1.0, &y[*j]);
            linalg::axpy(&mut avg, 1.0, &s.cartesian(basis));
        }
        let nk = adj.len() as f64;
        let defect: f64 = (0..cls.d)
            .map(|q| (y[k][q] - avg[q] / nk).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(defect);
    }
    worst
}

/// Solve the stationarity system for a concrete basis, one decoupled
/// solve per cartesian coordinate.
pub fn solve_centers(cls: &GraphClass, basis: &Basis, tol: f64) -> Result<CenterSolution> {
    if basis.dim() != cls.d {
        return Err(Error::DimensionMismatch {
            expected: cls.d,
            got: basis.dim(),
        });
    }
    ensure_connected(cls)?;
    let l = laplacian(cls);
    let coords: Vec<Result<Vec<f64>>> = par::map_indexed(cls.d, |q| {
        let rhs: Vec<f64> = cls
            .adjacency
            .iter()
            .map(|adj| adj.iter().map(|(_, s)| s.cartesian(basis)[q]).sum())
            .collect();
        solve_gauged(&l, &rhs)
    });
    let mut y = vec![vec![0.0; cls.d]; cls.n];
    for (q, col) in coords.into_iter().enumerate() {
        for (k, v) in col?.into_iter().enumerate() {
            y[k][q] = v;
        }
    }
    let residual = stationarity_residual(cls, basis, &y);
    let scale = basis.volume().powf(1.0 / cls.d as f64);
    if residual > tol.max(1e-9) * scale * cls.n as f64 {
        return Err(Error::InfeasibleClass(format!(
            "stationarity defect {residual:.3e} after direct solve"
        )));
    }
    Ok(finish_solution(cls, basis, y, residual))
}

fn finish_solution(
    cls: &GraphClass,
    basis: &Basis,
    y: Vec<Vec<f64>>,
    residual: f64,
) -> CenterSolution {
    let mut coeffs: Vec<Vec<f64>> = y.iter().map(|row| basis.fractional(row)).collect();
    for q in 0..cls.d {
        let mean: f64 = coeffs.iter().map(|r| r[q]).sum::<f64>() / cls.n as f64;
        for r in coeffs.iter_mut() {
            r[q] -= mean;
        }
    }
    let centers = coeffs.iter().map(|r| TorusPoint::new(r.clone())).collect();
    CenterSolution {
        coeffs,
        centers,
        residual,
    }
}

/// Solve the per-basis-index systems once, with unit right-hand sides,
/// returning the n x d coefficient table valid for every concrete basis.
pub fn solve_centers_symbolic(cls: &GraphClass, _tol: f64) -> Result<Vec<Vec<f64>>> {
    ensure_connected(cls)?;
    let l = laplacian(cls);
    let cols: Vec<Result<Vec<f64>>> = par::map_indexed(cls.d, |ell| {
        let rhs: Vec<f64> = cls
            .adjacency
            .iter()
            .map(|adj| adj.iter().map(|(_, s)| s.entries()[ell] as f64).sum())
            .collect();
        solve_gauged(&l, &rhs)
    });
    let mut table = vec![vec![0.0; cls.d]; cls.n];
    for (ell, col) in cols.into_iter().enumerate() {
        let col = col?;
        let mean: f64 = col.iter().sum::<f64>() / cls.n as f64;
        for (k, v) in col.into_iter().enumerate() {
            table[k][ell] = v - mean;
        }
    }
    Ok(table)
}

/// Realize a coefficient table over a concrete basis.
pub fn recombine(cls: &GraphClass, basis: &Basis, table: &[Vec<f64>]) -> CenterSolution {
    let y: Vec<Vec<f64>> = table.iter().map(|row| basis.cartesian(row)).collect();
    let residual = stationarity_residual(cls, basis, &y);
    finish_solution(cls, basis, y, residual)
}

/// Damped fixed-point relaxation of the stationarity system from an
/// arbitrary start; converges to the solve_centers solution up to a
/// rigid translation.
pub fn relax_centers(
    cls: &GraphClass,
    basis: &Basis,
    start: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Vec<f64>>, f64, usize)> {
    ensure_connected(cls)?;
    let omega = 0.7; // plain averaging oscillates on bipartite classes
    let mut y: Vec<Vec<f64>> = start.to_vec();
    let scale = basis.volume().powf(1.0 / cls.d as f64);
    for iter in 0..max_iter {
        let mut next = vec![vec![0.0; cls.d]; cls.n];
        for (k, adj) in cls.adjacency.iter().enumerate() {
            let mut avg = vec![0.0; cls.d];
            for (j, s) in adj {
                linalg::axpy(&mut avg, 1.0, &y[*j]);
                linalg::axpy(&mut avg, 1.0, &s.cartesian(basis));
            }
            let nk = adj.len() as f64;
            for q in 0..cls.d {
                next[k][q] = (1.0 - omega) * y[k][q] + omega * avg[q] / nk;
            }
        }
        y = next;
        let residual = stationarity_residual(cls, basis, &y);
        if residual <= tol * scale {
            return Ok((y, residual, iter + 1));
        }
    }
    let residual = stationarity_residual(cls, basis, &y);
    Err(Error::IterationLimit(format!(
        "center relaxation stalled at defect {residual:.3e} after {max_iter} iterations"
    )))
}

/// Result of packing a class over a concrete basis.
#[derive(Debug, Clone)]
pub struct PackOutcome {
    pub solution: CenterSolution,
    pub config: Configuration,
    pub radius: f64,
    pub density: f64,
    pub class_signature: Signature,
    pub realized_signature: Signature,
    /// True when the realized tessellation flipped out of the class.
    pub class_violation: bool,
}

/// Solve the class, inflate balls to first contact, and check that the
/// realized tessellation still matches the class.
pub fn pack_in_class(cls: &GraphClass, basis: &Basis, facet_tol: f64) -> Result<PackOutcome> {
    let solution = solve_centers(cls, basis, DEFAULT_CENTER_TOL)?;
    let scale = basis.volume().powf(1.0 / cls.d as f64);

    let mut min_dist = basis.shortest_lattice_vector();
    for (k, a) in solution.centers.iter().enumerate() {
        for b in solution.centers.iter().skip(k + 1) {
            let (dist, _) = crate::torus::torus_distance(basis, a, b);
            min_dist = min_dist.min(dist);
        }
    }
    if min_dist <= 1e-9 * scale {
        return Err(Error::DegenerateClass(format!(
            "solved centers collapse (closest pair {min_dist:.3e})"
        )));
    }
    let radius = 0.5 * min_dist;
    let config = Configuration::new(basis.clone(), solution.centers.clone(), radius)?;
    let density =
        cls.n as f64 * unit_ball_volume(cls.d) * radius.powi(cls.d as i32) / basis.volume();

    let realized = build_delaunay(&config, facet_tol)?;
    let class_signature = cls.signature();
    let realized_signature = realized.signature();
    let class_violation = class_signature != realized_signature;

    Ok(PackOutcome {
        solution,
        config,
        radius,
        density,
        class_signature,
        realized_signature,
        class_violation,
    })
}

/// Squared-length spread of positions y over the class adjacency
/// (directed double sum).
pub fn spread(cls: &GraphClass, basis: &Basis, y: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (k, adj) in cls.adjacency.iter().enumerate() {
        for (j, s) in adj {
            let mut v = linalg::sub(&y[*j], &y[k]);
            linalg::axpy(&mut v, 1.0, &s.cartesian(basis));
            acc += linalg::dot(&v, &v);
        }
    }
    acc
}

/// Spread at the stationary solution of the class.
pub fn maximize_spread(cls: &GraphClass, basis: &Basis) -> Result<(f64, CenterSolution)> {
    let solution = solve_centers(cls, basis, DEFAULT_CENTER_TOL)?;
    let y: Vec<Vec<f64>> = solution.coeffs.iter().map(|r| basis.cartesian(r)).collect();
    Ok((spread(cls, basis, &y), solution))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpreadCheck {
    pub value: f64,
    /// Worst relative deviation of the restarted values from `value`.
    pub max_rel_dev: f64,
    pub starts: usize,
    pub reconverged: bool,
}

/// Multi-start verification: perturb the solution, relax back, and compare
/// the spread values.
pub fn verify_spread(
    cls: &GraphClass,
    basis: &Basis,
    starts: usize,
    magnitude: f64,
    seed: u64,
) -> Result<SpreadCheck> {
    let (value, solution) = maximize_spread(cls, basis)?;
    let y0: Vec<Vec<f64>> = solution.coeffs.iter().map(|r| basis.cartesian(r)).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut max_rel_dev = 0.0f64;
    let mut reconverged = true;
    for _ in 0..starts {
        let start: Vec<Vec<f64>> = y0
            .iter()
            .map(|row| {
                row.iter()
                    .map(|x| x + rng.random_range(-magnitude..magnitude))
                    .collect()
            })
            .collect();
        match relax_centers(cls, basis, &start, 1e-12, 200_000) {
            Ok((y, _, _)) => {
                let v = spread(cls, basis, &y);
                let dev = ((v - value) / value).abs();
                max_rel_dev = max_rel_dev.max(dev);
            }
            Err(_) => reconverged = false,
        }
    }
    Ok(SpreadCheck {
        value,
        max_rel_dev,
        starts,
        reconverged: reconverged && max_rel_dev < 1e-8,
    })
}

/// Rank data of the homogeneous per-coordinate system.
#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub n: usize,
    pub rank: usize,
    /// L . 1 vanishes identically (row sums are zero by construction).
    pub constant_in_kernel: bool,
    /// Rank equals n - 1, so constants are the whole kernel.
    pub kernel_is_constants: bool,
}

pub fn kernel_diagnostics(cls: &GraphClass) -> KernelReport {
    let l = laplacian(cls);
    let rank = linalg::rank(&l, 1e-10);
    let ones = vec![1.0; cls.n];
    let image_norm: f64 = l
        .iter()
        .map(|row| linalg::dot(row, &ones))
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let constant_in_kernel = image_norm <= 1e-10 * cls.n as f64;
    KernelReport {
        n: cls.n,
        rank,
        constant_in_kernel,
        kernel_is_constants: rank + 1 == cls.n,
    }
}

/// Pack the class over every candidate basis; percolation of the packed
/// configuration is the acceptance check, density the score.
#[derive(Debug)]
pub struct ScanOutcome {
    pub results: Vec<Result<(PackOutcome, bool)>>,
    /// Index of the densest percolating basis, if any; otherwise densest
    /// overall.
    pub best: Option<usize>,
}

pub fn scan_bases(
    cls: &GraphClass,
    bases: &[Basis],
    facet_tol: f64,
    touch_tol: f64,
) -> ScanOutcome {
    let results: Vec<Result<(PackOutcome, bool)>> = par::map_slice(bases, |basis| {
        let out = pack_in_class(cls, basis, facet_tol)?;
        let report = crate::analysis::detect_percolation(&out.config, touch_tol);
        Ok((out, report.isotropy_necessary))
    });
    let mut best: Option<usize> = None;
    let mut best_key = (false, f64::NEG_INFINITY);
    for (i, r) in results.iter().enumerate() {
        if let Ok((out, percolates)) = r {
            let key = (*percolates, out.density);
            let better = (key.0 && !best_key.0) || (key.0 == best_key.0 && key.1 > best_key.1);
            if better {
                best_key = key;
                best = Some(i);
            }
        }
    }
    ScanOutcome { results, best }
}
