use std::ops::Range;

use super::GeometryError;
use crate::systems::SystemClass;

/// Coordinate layout of the state manifold in a single global chart.
///
/// Blocks appear in the fixed order q, p, W, N, Gamma, S, Sigma. With no
/// subsystems (`subsystems == 0`) there is a single entropy `S` and no
/// Gamma/Sigma blocks; otherwise each subsystem carries a (Gamma, S, Sigma)
/// triple. Names get a 1-based suffix when a block has more than one entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChartSpec {
    n: usize,
    compartments: usize,
    subsystems: usize,
    ports: usize,
    sources: usize,
    names: Vec<String>,
}

fn block_names(stem: &str, count: usize) -> Vec<String> {
    match count {
        1 => vec![stem.to_string()],
        _ => (1..=count).map(|i| format!("{stem}{i}")).collect(),
    }
}

impl ChartSpec {
    pub fn new(n: usize, compartments: usize, subsystems: usize, ports: usize, sources: usize) -> Self {
        let entropies = subsystems.max(1);
        let mut names = block_names("q", n);
        names.extend(block_names("p", n));
        names.extend(block_names("W", compartments));
        names.extend(block_names("N", compartments));
        names.extend(block_names("Gamma", subsystems));
        names.extend(block_names("S", entropies));
        names.extend(block_names("Sigma", subsystems));
        ChartSpec {
            n,
            compartments,
            subsystems,
            ports,
            sources,
            names,
        }
    }

    /// Builds the chart of `class` and checks the block sizes fit it.
    pub fn for_class(
        class: SystemClass,
        n: usize,
        compartments: usize,
        subsystems: usize,
        ports: usize,
        sources: usize,
    ) -> Result<Self, GeometryError> {
        let chart = ChartSpec::new(n, compartments, subsystems, ports, sources);
        chart.check_class(class)?;
        Ok(chart)
    }

    pub fn simple_closed(n: usize) -> Self {
        ChartSpec::new(n, 0, 0, 0, 0)
    }

    pub fn mass_transfer(n: usize, compartments: usize) -> Self {
        ChartSpec::new(n, compartments, 0, 0, 0)
    }

    /// One compartment per subsystem.
    pub fn non_simple(n: usize, subsystems: usize) -> Self {
        ChartSpec::new(n, subsystems, subsystems, 0, 0)
    }

    pub fn open_simple(n: usize, ports: usize, sources: usize) -> Self {
        ChartSpec::new(n, 1, 1, ports, sources)
    }

    pub fn check_class(&self, class: SystemClass) -> Result<(), GeometryError> {
        let mismatch = |reason: &str| {
            Err(GeometryError::LayoutMismatch {
                class: class.to_string(),
                reason: reason.to_string(),
            })
        };
        let exchanges = self.ports + self.sources;
        match class {
            SystemClass::SimpleClosed => {
                if self.compartments != 0 || self.subsystems != 0 || exchanges != 0 {
                    return mismatch("a simple closed system has only q, p and S blocks");
                }
            }
            SystemClass::MassTransfer => {
                if self.compartments == 0 {
                    return mismatch("mass transfer needs at least one compartment");
                }
                if self.subsystems != 0 || exchanges != 0 {
                    return mismatch("mass transfer has a single entropy and no ports");
                }
            }
            SystemClass::NonSimple => {
                if self.subsystems == 0 {
                    return mismatch("a non-simple system needs at least one subsystem");
                }
                if self.compartments != self.subsystems {
                    return mismatch("each subsystem has exactly one compartment");
                }
                if exchanges != 0 {
                    return mismatch("a non-simple system is adiabatically closed");
                }
            }
            SystemClass::OpenSimple => {
                if self.compartments != 1 || self.subsystems != 1 {
                    return mismatch("an open simple system has one species and one compartment");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn compartments(&self) -> usize {
        self.compartments
    }

    pub fn subsystems(&self) -> usize {
        self.subsystems
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Coordinate names of the velocity-side chart: the p-block becomes qdot.
    pub fn velocity_names(&self) -> Vec<String> {
        let mut names = self.names.clone();
        let qdot = block_names("qdot", self.n);
        names.splice(self.p_range(), qdot);
        names
    }

    pub fn q_range(&self) -> Range<usize> {
        0..self.n
    }

    pub fn p_range(&self) -> Range<usize> {
        self.n..2 * self.n
    }

    pub fn w_range(&self) -> Range<usize> {
        let start = 2 * self.n;
        start..start + self.compartments
    }

    pub fn n_range(&self) -> Range<usize> {
        let start = self.w_range().end;
        start..start + self.compartments
    }

    pub fn gamma_range(&self) -> Range<usize> {
        let start = self.n_range().end;
        start..start + self.subsystems
    }

    pub fn s_range(&self) -> Range<usize> {
        let start = self.gamma_range().end;
        start..start + self.subsystems.max(1)
    }

    pub fn sigma_range(&self) -> Range<usize> {
        let start = self.s_range().end;
        start..start + self.subsystems
    }
}
