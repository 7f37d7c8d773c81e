//! On-disk JSON schemas and their conversions to domain types.
//!
//! Configurations: `{"d": int, "basis": [[..]], "centers": [[..]], "radius": real}`
//! with one row per basis vector and fractional center coordinates.
//! Graphs: `{"n": int, "d": int, "edges": [{"k", "j", "shift", "gap", "length"}]}`.
//! Classes: `{"n": int, "adjacency": [[{"j", "shift"}, ..], ..]}`.
//! Everything round-trips through the validating constructors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{PeriodicEdge, PeriodicGraph};
use crate::optimizer::GraphClass;
use crate::torus::{Basis, Configuration, Shift, TorusPoint};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigFile {
    pub d: usize,
    pub basis: Vec<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
}

impl ConfigFile {
    pub fn from_configuration(config: &Configuration) -> Self {
        ConfigFile {
            d: config.dim(),
            basis: config.basis.vectors().to_vec(),
            centers: config.centers.iter().map(|c| c.frac().to_vec()).collect(),
            radius: config.radius,
        }
    }

    pub fn into_configuration(self) -> Result<Configuration> {
        if self.basis.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: self.basis.len(),
            });
        }
        let basis = Basis::new(self.basis)?;
        let centers = self.centers.into_iter().map(TorusPoint::new).collect();
        Configuration::new(basis, centers, self.radius)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisFile {
    pub d: usize,
    pub basis: Vec<Vec<f64>>,
}

impl BasisFile {
    pub fn from_basis(basis: &Basis) -> Self {
        BasisFile {
            d: basis.dim(),
            basis: basis.vectors().to_vec(),
        }
    }

    pub fn into_basis(self) -> Result<Basis> {
        if self.basis.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: self.basis.len(),
            });
        }
        Basis::new(self.basis)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeFile {
    pub k: usize,
    pub j: usize,
    pub shift: Vec<i32>,
    pub gap: f64,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub d: usize,
    pub edges: Vec<EdgeFile>,
}

impl GraphFile {
    pub fn from_graph(graph: &PeriodicGraph) -> Self {
        GraphFile {
            n: graph.n(),
            d: graph.dim(),
            edges: graph
                .edges()
                .iter()
                .map(|e| EdgeFile {
                    k: e.k,
                    j: e.j,
                    shift: e.shift.entries().to_vec(),
                    gap: e.gap,
                    length: e.length,
                })
                .collect(),
        }
    }

    pub fn into_graph(self) -> Result<PeriodicGraph> {
        let edges = self
            .edges
            .into_iter()
            .map(|e| {
                Ok(PeriodicEdge {
                    k: e.k,
                    j: e.j,
                    shift: Shift::new(e.shift)?,
                    gap: e.gap,
                    length: e.length,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PeriodicGraph::from_edges(self.n, self.d, edges)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjacencyEntry {
    pub j: usize,
    pub shift: Vec<i32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassFile {
    pub n: usize,
    pub adjacency: Vec<Vec<AdjacencyEntry>>,
}

impl ClassFile {
    pub fn from_class(class: &GraphClass) -> Self {
        ClassFile {
            n: class.n(),
            adjacency: (0..class.n())
                .map(|k| {
                    class
                        .neighbors(k)
                        .iter()
                        .map(|(j, s)| AdjacencyEntry {
                            j: *j,
                            shift: s.entries().to_vec(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn into_class(self) -> Result<GraphClass> {
        if self.adjacency.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "class file: n = {} but adjacency has {} rows",
                self.n,
                self.adjacency.len()
            )));
        }
        let d = self
            .adjacency
            .iter()
            .flatten()
            .map(|e| e.shift.len())
            .next()
            .ok_or_else(|| Error::InvalidInput("class file has no adjacency entries".into()))?;
        let adjacency = self
            .adjacency
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|e| Ok((e.j, Shift::new(e.shift)?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        GraphClass::new(d, adjacency)
    }
}

/// Explicit list of candidate bases for `pack --basis-scan`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanFile {
    pub bases: Vec<Vec<Vec<f64>>>,
}

impl ScanFile {
    pub fn into_bases(self) -> Result<Vec<Basis>> {
        if self.bases.is_empty() {
            return Err(Error::InvalidInput("basis scan file lists no bases".into()));
        }
        self.bases.into_iter().map(Basis::new).collect()
    }
}
