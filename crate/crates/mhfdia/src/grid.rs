//! IEEE 14-bus small-signal closed-loop model: a synchronous-generator swing
//! network over an admittance-weighted Laplacian, discretized by forward
//! Euler into the LTI plant the estimator and attacker both see.
//!
//! State x = [delta; omega] (generator rotor angles and speeds, deviation
//! coordinates), output y = [omega; P_net] (speed measurements plus net bus
//! power injections). Bus angles are eliminated algebraically through the
//! load partition of the Laplacian.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::plant::PlantModel;
use crate::{Error, Result};

/// Network data: the full node Laplacian over generator internal nodes and
/// buses, plus machine and readout parameters.
#[derive(Debug, Clone)]
pub struct GridTopology {
    pub n_g: usize,
    pub n_b: usize,
    /// (n_g + n_b) x (n_g + n_b), generator nodes first.
    pub l: DMatrix<f64>,
    /// Generator inertias (diagonal), length n_g.
    pub m_inertia: DVector<f64>,
    /// Generator dampings (diagonal), length n_g.
    pub d_g: DVector<f64>,
    /// Maps bus angles to the power readout; identity by default.
    pub p_node: DMatrix<f64>,
    /// Load vector, length n_b (zero in deviation coordinates).
    pub p_d: DVector<f64>,
}

impl GridTopology {
    pub fn l_gg(&self) -> DMatrix<f64> {
        self.l.view((0, 0), (self.n_g, self.n_g)).clone_owned()
    }

    pub fn l_gl(&self) -> DMatrix<f64> {
        self.l.view((0, self.n_g), (self.n_g, self.n_b)).clone_owned()
    }

    pub fn l_lg(&self) -> DMatrix<f64> {
        self.l.view((self.n_g, 0), (self.n_b, self.n_g)).clone_owned()
    }

    pub fn l_ll(&self) -> DMatrix<f64> {
        self.l.view((self.n_g, self.n_g), (self.n_b, self.n_b)).clone_owned()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.n_g + self.n_b;
        if self.l.nrows() != dim || self.l.ncols() != dim {
            return Err(Error::Dimension(format!(
                "Laplacian must be {dim}x{dim}, got {}x{}",
                self.l.nrows(),
                self.l.ncols()
            )));
        }
        if (&self.l - self.l.transpose()).norm() > 1e-8 {
            return Err(Error::Config("Laplacian must be symmetric".into()));
        }
        for i in 0..dim {
            let row_sum: f64 = self.l.row(i).iter().sum();
            if row_sum.abs() > 1e-8 {
                return Err(Error::Config(format!("Laplacian row {i} sums to {row_sum}, expected 0")));
            }
        }
        if self.m_inertia.len() != self.n_g || self.d_g.len() != self.n_g {
            return Err(Error::Dimension("inertia/damping length must equal generator count".into()));
        }
        if self.m_inertia.iter().any(|&x| x <= 0.0) || self.d_g.iter().any(|&x| x <= 0.0) {
            return Err(Error::Config("inertias and dampings must be strictly positive".into()));
        }
        if self.p_node.nrows() != self.n_b || self.p_node.ncols() != self.n_b {
            return Err(Error::Dimension("P_node must be n_b x n_b".into()));
        }
        if self.p_d.len() != self.n_b {
            return Err(Error::Dimension("load vector length must equal bus count".into()));
        }
        if self.l_ll().lu().try_inverse().is_none() {
            return Err(Error::Config("load partition L_ll is singular".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct TopologyFile {
    buses: usize,
    #[serde(default)]
    p_d: Vec<f64>,
    generator: Vec<GeneratorEntry>,
    line: Vec<LineEntry>,
}

#[derive(Debug, Deserialize)]
struct GeneratorEntry {
    bus: usize,
    inertia: f64,
    damping: f64,
    coupling: f64,
}

#[derive(Debug, Deserialize)]
struct LineEntry {
    from: usize,
    to: usize,
    susceptance: f64,
}

/// Parse the structured-text topology format: bus count, generator entries
/// (terminal bus, inertia, damping, coupling susceptance) and line entries
/// (bus pair, susceptance). Bus numbers are 1-based.
pub fn parse_topology(content: &str) -> Result<GridTopology> {
    let file: TopologyFile =
        toml::from_str(content).map_err(|e| Error::Config(format!("topology parse error: {e}")))?;
    let n_b = file.buses;
    let n_g = file.generator.len();
    if n_b == 0 || n_g == 0 {
        return Err(Error::Config("topology needs at least one bus and one generator".into()));
    }
    let dim = n_g + n_b;
    let mut l = DMatrix::zeros(dim, dim);
    let mut add_edge = |i: usize, j: usize, b: f64| {
        l[(i, i)] += b;
        l[(j, j)] += b;
        l[(i, j)] -= b;
        l[(j, i)] -= b;
    };
    for (g, entry) in file.generator.iter().enumerate() {
        if entry.bus == 0 || entry.bus > n_b {
            return Err(Error::Config(format!("generator bus {} out of range", entry.bus)));
        }
        if entry.coupling <= 0.0 {
            return Err(Error::Config("generator coupling susceptance must be positive".into()));
        }
        add_edge(g, n_g + entry.bus - 1, entry.coupling);
    }
    for line in &file.line {
        if line.from == 0 || line.from > n_b || line.to == 0 || line.to > n_b || line.from == line.to {
            return Err(Error::Config(format!("line {}-{} out of range", line.from, line.to)));
        }
        if line.susceptance <= 0.0 {
            return Err(Error::Config("line susceptance must be positive".into()));
        }
        add_edge(n_g + line.from - 1, n_g + line.to - 1, line.susceptance);
    }
    let p_d = if file.p_d.is_empty() {
        DVector::zeros(n_b)
    } else if file.p_d.len() == n_b {
        DVector::from_vec(file.p_d)
    } else {
        return Err(Error::Config("load vector length must equal bus count".into()));
    };
    let topology = GridTopology {
        n_g,
        n_b,
        l,
        m_inertia: DVector::from_iterator(n_g, file.generator.iter().map(|g| g.inertia)),
        d_g: DVector::from_iterator(n_g, file.generator.iter().map(|g| g.damping)),
        p_node: DMatrix::identity(n_b, n_b),
        p_d,
    };
    topology.validate()?;
    Ok(topology)
}

/// The shipped IEEE 14-bus defaults: standard line susceptances, five
/// generators (buses 1, 2, 3, 6, 8), unit inertia, 0.1 damping, identity
/// power readout, zero loads. Repository defaults, not measured data.
pub fn default_ieee14() -> GridTopology {
    parse_topology(include_str!("../data/ieee14.topology"))
        .expect("shipped IEEE 14-bus topology must parse")
}

/// The discretized closed-loop plant plus the bus-angle readout factors.
#[derive(Debug, Clone)]
pub struct GridPlant {
    pub plant: PlantModel,
    /// theta = theta_map * delta + theta_load, the eliminated bus angles.
    pub theta_map: DMatrix<f64>,
    pub theta_load: DVector<f64>,
    pub n_g: usize,
    pub n_b: usize,
}

impl GridPlant {
    /// Bus angles recovered from the generator angles.
    pub fn bus_angles(&self, delta: &DVector<f64>) -> Result<DVector<f64>> {
        if delta.len() != self.n_g {
            return Err(Error::Dimension("delta length must equal generator count".into()));
        }
        Ok(&self.theta_map * delta + &self.theta_load)
    }
}

/// Continuous-time dynamics over x = [delta; omega]:
/// A_c = [[0, I], [-M^-1 (L_gg - L_gl L_ll^-1 L_lg), -M^-1 D_g]].
pub fn continuous_dynamics(topology: &GridTopology) -> Result<DMatrix<f64>> {
    let n_g = topology.n_g;
    let l_ll_lu = topology.l_ll().lu();
    let kron = l_ll_lu
        .solve(&topology.l_lg())
        .ok_or_else(|| Error::Numerical("load partition L_ll is singular".into()))?;
    let l_red = topology.l_gg() - topology.l_gl() * &kron;
    let mut a_c = DMatrix::zeros(2 * n_g, 2 * n_g);
    for i in 0..n_g {
        a_c[(i, n_g + i)] = 1.0;
        a_c[(n_g + i, n_g + i)] = -topology.d_g[i] / topology.m_inertia[i];
        for j in 0..n_g {
            a_c[(n_g + i, j)] = -l_red[(i, j)] / topology.m_inertia[i];
        }
    }
    Ok(a_c)
}

/// Simple droop-style regulation u = -k_p * delta - k_omega * omega; the
/// open network has a rigid-body mode (the reduced Laplacian is singular),
/// so some k_p > 0 is needed for a strictly stable discretization.
pub fn default_regulation(n_g: usize, k_p: f64, k_omega: f64) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(n_g, 2 * n_g);
    for i in 0..n_g {
        k[(i, i)] = -k_p;
        k[(i, n_g + i)] = -k_omega;
    }
    k
}

/// Forward-Euler discretization of the regulated swing network, with the
/// measurement stack y = [omega; P_net].
pub fn build_grid_plant(
    topology: &GridTopology,
    t_s: f64,
    k_reg: Option<&DMatrix<f64>>,
) -> Result<GridPlant> {
    topology.validate()?;
    if t_s <= 0.0 {
        return Err(Error::Config("sample period must be positive".into()));
    }
    let n_g = topology.n_g;
    let n_b = topology.n_b;
    let n = 2 * n_g;

    let mut a_c = continuous_dynamics(topology)?;
    if let Some(k) = k_reg {
        if k.nrows() != n_g || k.ncols() != n {
            return Err(Error::Dimension(format!(
                "regulation gain must be {n_g}x{n}, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        // torque input enters through M^-1
        for i in 0..n_g {
            for j in 0..n {
                a_c[(n_g + i, j)] += k[(i, j)] / topology.m_inertia[i];
            }
        }
    }
    let a = DMatrix::identity(n, n) + t_s * a_c;

    let l_ll_lu = topology.l_ll().lu();
    let kron = l_ll_lu
        .solve(&topology.l_lg())
        .ok_or_else(|| Error::Numerical("load partition L_ll is singular".into()))?;
    let theta_map = -&kron;
    let theta_load = l_ll_lu
        .solve(&topology.p_d)
        .ok_or_else(|| Error::Numerical("load partition L_ll is singular".into()))?;

    let m = n_g + n_b;
    let mut c = DMatrix::zeros(m, n);
    for i in 0..n_g {
        c[(i, n_g + i)] = 1.0;
    }
    let p_net_map = &topology.p_node * &kron;
    for i in 0..n_b {
        for j in 0..n_g {
            c[(n_g + i, j)] = -p_net_map[(i, j)];
        }
    }

    let plant = PlantModel::new(a, c, t_s, 0.0)?;
    let rho = plant.spectral_radius();
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Config(format!(
            "closed-loop discretization is not stable (rho(A) = {rho}): reduce T_s or supply K_reg"
        )));
    }
    Ok(GridPlant { plant, theta_map, theta_load, n_g, n_b })
}

/// Measurement stack y = [omega; P_net] at state x = [delta; omega].
pub fn grid_measurement(grid: &GridPlant, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != 2 * grid.n_g {
        return Err(Error::Dimension(format!(
            "state dimension must be {}, got {}",
            2 * grid.n_g,
            x.len()
        )));
    }
    Ok(grid.plant.measure(x))
}
