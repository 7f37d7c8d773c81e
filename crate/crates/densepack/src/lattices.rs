//! Reference lattices with their graph classes and laminated potentials.
//!
//! Every generator places centers at unit nearest-neighbour spacing
//! (touching radius 1/2), builds the tessellation, and derives the graph
//! class from the realized geometry rather than hard-coding adjacency.
//! The layered potential assigns each ball its layer index and scales the
//! flux vector so consecutive layers differ by exactly one, which makes
//! the assignment the exact energy minimiser for flux normal to the
//! layers.

use serde::{Deserialize, Serialize};

use crate::energy::PotentialField;
use crate::error::{Error, Result};
use crate::graph::{build_delaunay, PeriodicGraph, DEFAULT_FACET_TOL};
use crate::linalg;
use crate::optimizer::GraphClass;
use crate::torus::{Basis, Configuration, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Integer lattice in d dimensions, n = m^d.
    Zd,
    /// Hexagonal lattice in the plane, n = m^2.
    A2,
    /// Face-centered cubic in the conventional cubic cell, n = 4 m^3.
    Fcc,
    /// Hexagonal close packing, two-layer cell, n = 2 m^3.
    Hcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    pub family: Family,
    /// Repetitions per cell direction.
    pub m: usize,
    /// Dimension; only `Zd` is free to choose it.
    pub d: usize,
}

impl LatticeSpec {
    pub fn new(family: Family, m: usize, d: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("repetition count must be >= 1".into()));
        }
        let ok = match family {
            Family::Zd => d >= 1,
            Family::A2 => d == 2,
            Family::Fcc | Family::Hcp => d == 3,
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "family {family:?} does not support dimension {d}"
            )));
        }
        Ok(LatticeSpec { family, m, d })
    }
}

/// A generated reference structure: geometry, tessellation and class.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub spec: LatticeSpec,
    pub basis: Basis,
    pub centers: Vec<TorusPoint>,
    pub graph: PeriodicGraph,
    pub class: GraphClass,
    /// Radius at first contact (always 1/2: unit spacing).
    pub touch_radius: f64,
}

impl Lattice {
    /// Configuration with every nearest-neighbour gap equal to `gap`.
    pub fn config_at_gap(&self, gap: f64) -> Result<Configuration> {
        Configuration::new(
            self.basis.clone(),
            self.centers.clone(),
            self.touch_radius - 0.5 * gap,
        )
    }

    pub fn config_at_touching(&self) -> Result<Configuration> {
        Configuration::new(self.basis.clone(), self.centers.clone(), self.touch_radius)
    }
}

fn grid_fractions(m: usize, d: usize, offsets: &[Vec<f64>]) -> Vec<TorusPoint> {
    let mut centers = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        for o in offsets {
            let frac: Vec<f64> = idx
                .iter()
                .zip(o)
                .map(|(&i, oi)| (i as f64 + oi) / m as f64)
                .collect();
            centers.push(TorusPoint::new(frac));
        }
        let mut q = d;
        loop {
            if q == 0 {
                return centers;
            }
            q -= 1;
            idx[q] += 1;
            if idx[q] < m {
                break;
            }
            idx[q] = 0;
        }
    }
}

pub fn generate(spec: LatticeSpec) -> Result<Lattice> {
    let m = spec.m as f64;
    let (basis, centers) = match spec.family {
        Family::Zd => {
            let basis = Basis::cubic(spec.d, m)?;
            let centers = grid_fractions(spec.m, spec.d, &[vec![0.0; spec.d]]);
            (basis, centers)
        }
        Family::A2 => {
            let c = (std::f64::consts::PI / 3.0).cos();
            let s = (std::f64::consts::PI / 3.0).sin();
            let basis = Basis::new(vec![vec![m, 0.0], vec![m * c, m * s]])?;
            let centers = grid_fractions(spec.m, 2, &[vec![0.0, 0.0]]);
            (basis, centers)
        }
        Family::Fcc => {
            let side = 2.0f64.sqrt();
            let basis = Basis::cubic(3, side * m)?;
            let offsets = vec![
                vec![0.0, 0.0, 0.0],
                vec![0.5, 0.5, 0.0],
                vec![0.5, 0.0, 0.5],
                vec![0.0, 0.5, 0.5],
            ];
            (basis, grid_fractions(spec.m, 3, &offsets))
        }
        Family::Hcp => {
            let c_axis = 2.0 * (2.0f64 / 3.0).sqrt();
            let cos = (std::f64::consts::PI / 3.0).cos();
            let sin = (std::f64::consts::PI / 3.0).sin();
            let basis = Basis::new(vec![
                vec![m, 0.0, 0.0],
                vec![m * cos, m * sin, 0.0],
                vec![0.0, 0.0, m * c_axis],
            ])?;
            let offsets = vec![vec![0.0, 0.0, 0.0], vec![1.0 / 3.0, 1.0 / 3.0, 0.5]];
            (basis, grid_fractions(spec.m, 3, &offsets))
        }
    };
    let touch_radius = 0.5;
    let config = Configuration::new(basis.clone(), centers.clone(), touch_radius)?;
    let graph = build_delaunay(&config, DEFAULT_FACET_TOL)?;
    let class = GraphClass::from_graph(&graph);
    Ok(Lattice {
        spec,
        basis,
        centers,
        graph,
        class,
        touch_radius,
    })
}

/// Layer normal and spacing of the laminated reading of each family.
fn lamination(spec: LatticeSpec) -> (Vec<f64>, f64) {
    match spec.family {
        Family::Zd => {
            let mut normal = vec![0.0; spec.d];
            normal[spec.d - 1] = 1.0;
            (normal, 1.0)
        }
        Family::A2 => (vec![0.0, 1.0], 0.5 * 3.0f64.sqrt()),
        Family::Fcc => {
            let s = 3.0f64.sqrt().recip();
            (vec![s, s, s], 2.0f64.sqrt() / 3.0f64.sqrt())
        }
        Family::Hcp => (vec![0.0, 0.0, 1.0], (2.0f64 / 3.0).sqrt()),
    }
}

/// Layer index of every center along the lamination normal.
pub fn layer_indices(lattice: &Lattice) -> Vec<i64> {
    let (normal, spacing) = lamination(lattice.spec);
    lattice
        .centers
        .iter()
        .map(|c| {
            let x = lattice.basis.cartesian(c.frac());
            (linalg::dot(&x, &normal) / spacing).round() as i64
        })
        .collect()
}

/// The laminated potential: t_k = layer index (gauge-shifted), with the
/// flux vector scaled so one layer equals one potential unit.
pub fn layered_potential(lattice: &Lattice) -> Result<PotentialField> {
    let (normal, spacing) = lamination(lattice.spec);
    let xi: Vec<f64> = normal.iter().map(|x| x / spacing).collect();
    let t: Vec<f64> = layer_indices(lattice).iter().map(|&q| q as f64).collect();
    PotentialField::new(xi, t)
}
