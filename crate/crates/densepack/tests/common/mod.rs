//! Independent oracles shared by the integration suites. Everything here
//! recomputes from first principles (exhaustive enumeration, dense
//! sampling, path search) and deliberately avoids the library's own
//! algorithms for the quantity under test.

#![allow(dead_code)]

use densepack::torus::{Basis, Configuration, TorusPoint};

/// Minimal-image distance by brute force over a wide image window.
pub fn exhaustive_distance(basis: &Basis, a: &TorusPoint, b: &TorusPoint, window: i32) -> f64 {
    let d = basis.dim();
    let mut best = f64::INFINITY;
    let mut idx = vec![-window; d];
    loop {
        let frac: Vec<f64> = a
            .frac()
            .iter()
            .zip(b.frac())
            .zip(&idx)
            .map(|((x, y), m)| x - y + *m as f64)
            .collect();
        let cart = basis.cartesian(&frac);
        let dist = cart.iter().map(|x| x * x).sum::<f64>().sqrt();
        best = best.min(dist);
        let mut q = d;
        loop {
            if q == 0 {
                return best;
            }
            q -= 1;
            if idx[q] < window {
                idx[q] += 1;
                for r in idx.iter_mut().skip(q + 1) {
                    *r = -window;
                }
                break;
            }
        }
    }
}

/// Neighbour pairs detected by dense sampling of the cell: a pair (k, j,
/// shift) is reported when many sample points are almost equidistant from
/// those two images while strictly closer to them than to everything
/// else. `grid` sample points per axis.
pub fn sampled_voronoi_neighbors(
    config: &Configuration,
    grid: usize,
) -> std::collections::BTreeMap<(usize, usize, Vec<i32>), usize> {
    let basis = &config.basis;
    let d = basis.dim();
    let scale = basis.volume().powf(1.0 / d as f64);
    let band = 2.0 * scale / grid as f64;

    // all candidate images: (vertex, shift, cartesian)
    let mut images: Vec<(usize, Vec<i32>, Vec<f64>)> = Vec::new();
    let mut idx = vec![-1i32; d];
    'outer: loop {
        for (j, c) in config.centers.iter().enumerate() {
            let frac: Vec<f64> = c
                .frac()
                .iter()
                .zip(&idx)
                .map(|(x, m)| x + *m as f64)
                .collect();
            images.push((j, idx.clone(), basis.cartesian(&frac)));
        }
        let mut q = d;
        loop {
            if q == 0 {
                break 'outer;
            }
            q -= 1;
            if idx[q] < 1 {
                idx[q] += 1;
                for r in idx.iter_mut().skip(q + 1) {
                    *r = -1;
                }
                break;
            }
        }
    }

    let mut hits: std::collections::BTreeMap<(usize, usize, Vec<i32>), usize> = Default::default();
    let mut counter = vec![0usize; d];
    'samples: loop {
        let frac: Vec<f64> = counter
            .iter()
            .map(|&c| (c as f64 + 0.5) / grid as f64)
            .collect();
        let y = basis.cartesian(&frac);
        // two nearest images
        let mut best: (f64, usize) = (f64::INFINITY, usize::MAX);
        let mut second: (f64, usize) = (f64::INFINITY, usize::MAX);
        for (i, (_, _, x)) in images.iter().enumerate() {
            let dist = y
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist < best.0 {
                second = best;
                best = (dist, i);
            } else if dist < second.0 {
                second = (dist, i);
            }
        }
        if second.0 - best.0 < band {
            let (ka, sa, _) = &images[best.1];
            let (kb, sb, _) = &images[second.1];
            // relative shift of b's image as seen from a's
            let rel: Vec<i32> = sb.iter().zip(sa).map(|(x, y)| x - y).collect();
            if rel.iter().all(|r| r.abs() <= 1) {
                let key = canonical_pair(*ka, *kb, rel);
                *hits.entry(key).or_default() += 1;
            }
        }
        let mut q = d;
        loop {
            if q == 0 {
                break 'samples;
            }
            q -= 1;
            counter[q] += 1;
            if counter[q] < grid {
                break;
            }
            counter[q] = 0;
        }
    }
    hits
}

pub fn canonical_pair(k: usize, j: usize, shift: Vec<i32>) -> (usize, usize, Vec<i32>) {
    let lex_positive = shift.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0);
    if k < j || (k == j && lex_positive) {
        (k, j, shift)
    } else {
        (j, k, shift.iter().map(|x| -x).collect())
    }
}

/// Per-direction winding flags by exhaustive simple-path search on the
/// lifted touching graph. Edges are undirected (k, j, shift) triples.
pub fn winding_by_path_search(n: usize, d: usize, edges: &[(usize, usize, Vec<i64>)]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, Vec<i64>)>> = vec![Vec::new(); n];
    for (k, j, s) in edges {
        adj[*k].push((*j, s.clone()));
        adj[*j].push((*k, s.iter().map(|x| -x).collect()));
    }
    let mut flags = vec![false; d];
    for root in 0..n {
        let mut visited = vec![false; n];
        visited[root] = true;
        dfs(root, root, &vec![0; d], &mut visited, &adj, &mut flags);
    }
    flags
}

fn dfs(
    v: usize,
    root: usize,
    offset: &[i64],
    visited: &mut Vec<bool>,
    adj: &[Vec<(usize, Vec<i64>)>],
    flags: &mut [bool],
) {
    for (u, s) in &adj[v] {
        let next: Vec<i64> = offset.iter().zip(s).map(|(o, si)| o + si).collect();
        if *u == root {
            for (f, w) in flags.iter_mut().zip(&next) {
                if *w != 0 {
                    *f = true;
                }
            }
        } else if !visited[*u] {
            visited[*u] = true;
            dfs(*u, root, &next, visited, adj, flags);
            visited[*u] = false;
        }
    }
}

/// Touching pairs of a configuration by direct enumeration (independent
/// of the analysis module's pair scan).
pub fn touching_pairs(config: &Configuration, tol: f64) -> Vec<(usize, usize, Vec<i64>)> {
    let basis = &config.basis;
    let d = basis.dim();
    let n = config.n();
    let mut out = Vec::new();
    for k in 0..n {
        for j in k..n {
            let mut idx = vec![-1i32; d];
            'win: loop {
                let skip = if k == j {
                    // keep one orientation of self pairs, drop zero
                    !idx.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
                } else {
                    false
                };
                if !skip {
                    let frac: Vec<f64> = config.centers[j]
                        .frac()
                        .iter()
                        .zip(config.centers[k].frac())
                        .zip(&idx)
                        .map(|((xj, xk), m)| xj - xk + *m as f64)
                        .collect();
                    let cart = basis.cartesian(&frac);
                    let dist = cart.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if dist - 2.0 * config.radius <= tol * config.radius {
                        out.push((k, j, idx.iter().map(|&x| x as i64).collect()));
                    }
                }
                let mut q = d;
                loop {
                    if q == 0 {
                        break 'win;
                    }
                    q -= 1;
                    if idx[q] < 1 {
                        idx[q] += 1;
                        for r in idx.iter_mut().skip(q + 1) {
                            *r = -1;
                        }
                        break;
                    }
                    idx[q] = -1;
                }
            }
        }
    }
    out
}

/// Hexagonal basis with side m.
pub fn hexagonal_basis(m: f64) -> Basis {
    let c = (std::f64::consts::PI / 3.0).cos();
    let s = (std::f64::consts::PI / 3.0).sin();
    Basis::new(vec![vec![m, 0.0], vec![m * c, m * s]]).unwrap()
}
