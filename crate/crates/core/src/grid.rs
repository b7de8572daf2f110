//! Delayed coupled-oscillator model of DERs in a power-grid supply chain.
//!
//! Each DER `i` follows
//!
//! ```text
//! θ̈ᵢ = qᵢ − βᵢ θ̇ᵢ + Σⱼ αᵢⱼ sin(θⱼ − θᵢ) − Φᵢ θ̇ᵢ(t − τᵢ)
//! ```
//!
//! integrated with fixed-step RK4. Delayed velocities come from a
//! [`VelocityHistory`] by linear interpolation; velocities before `t = 0` are zero.
//! The stability index replaces the point delay with a windowed average:
//!
//! ```text
//! sᵢ(t) = qᵢ − βᵢ θ̇ᵢ + Σⱼ αᵢⱼ sin(θⱼ − θᵢ) − (Φᵢ / T) ∫_{t−T}^{t} θ̇ᵢ(t' − τᵢ) dt'
//! ```
//!
//! and a DER is stable while `sᵢ ≤ 0`.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::fmt::g9;
use crate::{Error, Result};

/// A distributed energy resource with its oscillator state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerNode {
    pub id: usize,
    /// Per-unit power; positive generates, negative consumes.
    pub power: f64,
    #[serde(default)]
    pub damping: f64,
    #[serde(default)]
    pub elasticity: f64,
    /// Response delay in seconds.
    #[serde(default)]
    pub delay: f64,
    /// Rotor angle in radians, unwrapped.
    #[serde(default)]
    pub theta: f64,
    /// Angular velocity dθ/dt in rad/s.
    #[serde(default)]
    pub omega: f64,
}

impl DerNode {
    pub fn new(id: usize, power: f64) -> Self {
        Self {
            id,
            power,
            damping: 0.0,
            elasticity: 0.0,
            delay: 0.0,
            theta: 0.0,
            omega: 0.0,
        }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_elasticity(mut self, elasticity: f64) -> Self {
        self.elasticity = elasticity;
        self
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_state(mut self, theta: f64, omega: f64) -> Self {
        self.theta = theta;
        self.omega = omega;
        self
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.power, self.damping, self.elasticity, self.delay, self.theta, self.omega]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig(format!("node {} has non-finite fields", self.id)));
        }
        if self.damping < 0.0 || self.elasticity < 0.0 || self.delay < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "node {}: damping, elasticity and delay must be nonnegative",
                self.id
            )));
        }
        Ok(())
    }
}

/// Power actually supplied after the elastic response: `q − Φ·θ̇`.
pub fn supplied_power(node: &DerNode) -> f64 {
    node.power - node.elasticity * node.omega
}

/// DERs plus a symmetric, zero-diagonal coupling matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTopology {
    nodes: Vec<DerNode>,
    coupling: Vec<f64>,
}

impl GridTopology {
    pub fn new(nodes: Vec<DerNode>, coupling: Vec<Vec<f64>>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::InvalidConfig("topology has no nodes".into()));
        }
        if coupling.len() != n || coupling.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidConfig(format!(
                "coupling matrix must be {n}x{n}"
            )));
        }
        for node in &nodes {
            node.validate()?;
        }
        for i in 0..n {
            if coupling[i][i] != 0.0 {
                return Err(Error::InvalidConfig(format!("coupling[{i}][{i}] must be zero")));
            }
            for j in 0..n {
                let a = coupling[i][j];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "coupling[{i}][{j}] must be finite and nonnegative"
                    )));
                }
                if a != coupling[j][i] {
                    return Err(Error::InvalidConfig(format!(
                        "coupling is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            nodes,
            coupling: coupling.into_iter().flatten().collect(),
        })
    }

    /// Nodes with no coupling at all.
    pub fn uncoupled(nodes: Vec<DerNode>) -> Result<Self> {
        let n = nodes.len();
        Self::new(nodes, vec![vec![0.0; n]; n])
    }

    pub fn nodes(&self) -> &[DerNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.nodes.len() + j]
    }

    fn coupling_torque(&self, i: usize, thetas: &[f64]) -> f64 {
        let n = self.nodes.len();
        let row = &self.coupling[i * n..(i + 1) * n];
        row.iter()
            .zip(thetas)
            .filter(|(&a, _)| a != 0.0)
            .map(|(&a, &theta_j)| a * (theta_j - thetas[i]).sin())
            .sum()
    }

    /// Undelayed right-hand side `q − βθ̇ + Σ α sin(Δθ)` for node `i`.
    pub fn undelayed_acceleration(&self, i: usize) -> f64 {
        let thetas: Vec<f64> = self.nodes.iter().map(|n| n.theta).collect();
        let node = &self.nodes[i];
        node.power - node.damping * node.omega + self.coupling_torque(i, &thetas)
    }

    fn max_delay(&self) -> f64 {
        self.nodes.iter().map(|n| n.delay).fold(0.0, f64::max)
    }
}

/// Integration and measurement settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Averaging window `T` of the stability index.
    pub window: f64,
    /// Rotating-frame reference (rad/s); angles and velocities are deviations from it.
    #[serde(default = "default_reference")]
    pub reference_frequency: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_reference() -> f64 {
    REFERENCE_50HZ
}

pub const REFERENCE_50HZ: f64 = 2.0 * std::f64::consts::PI * 50.0;
pub const REFERENCE_60HZ: f64 = 2.0 * std::f64::consts::PI * 60.0;

impl SimulationConfig {
    pub fn new(dt: f64, horizon: f64, window: f64) -> Self {
        Self {
            dt,
            horizon,
            window,
            reference_frequency: REFERENCE_50HZ,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.dt, self.horizon, self.window, self.reference_frequency]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.dt <= 0.0 || self.horizon <= 0.0 || self.window <= 0.0 {
            return Err(Error::InvalidConfig(
                "dt, horizon and window must be positive and finite".into(),
            ));
        }
        if self.dt >= self.window {
            return Err(Error::InvalidConfig("dt must be smaller than the window".into()));
        }
        if self.horizon < self.window {
            return Err(Error::InvalidConfig("horizon must cover at least one window".into()));
        }
        if self.reference_frequency <= 0.0 {
            return Err(Error::InvalidConfig("reference frequency must be positive".into()));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn window_intervals(&self) -> usize {
        ((self.window / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Past angular velocities of every node, sampled on the `dt` grid.
///
/// The newest sample belongs to the current time. Histories built for a
/// simulation treat all times before zero as zero velocity; histories built from
/// an explicit series have no pre-history and report
/// [`Error::InsufficientHistory`] instead.
#[derive(Clone, Debug)]
pub struct VelocityHistory {
    dt: f64,
    latest: i64,
    samples: Vec<VecDeque<f64>>,
    capacity: usize,
    zero_prehistory: bool,
}

impl VelocityHistory {
    /// Empty history for a simulation, seeded with the nodes' current velocities at `t = 0`.
    pub fn for_topology(topology: &GridTopology, cfg: &SimulationConfig) -> Self {
        let reach = topology.max_delay() + cfg.window;
        let capacity = (reach / cfg.dt).ceil() as usize + 3;
        let samples = topology
            .nodes
            .iter()
            .map(|n| {
                let mut q = VecDeque::with_capacity(capacity + 1);
                q.push_back(n.omega);
                q
            })
            .collect();
        Self {
            dt: cfg.dt,
            latest: 0,
            samples,
            capacity,
            zero_prehistory: true,
        }
    }

    /// History from explicit per-node series; the first sample sits at `t = 0`
    /// and the last at the current time.
    pub fn from_series(dt: f64, series: Vec<Vec<f64>>) -> Result<Self> {
        let len = series.first().map_or(0, Vec::len);
        if len == 0 || series.iter().any(|s| s.len() != len) {
            return Err(Error::InvalidConfig(
                "velocity series must be nonempty and of equal length".into(),
            ));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        Ok(Self {
            dt,
            latest: len as i64 - 1,
            samples: series.into_iter().map(VecDeque::from).collect(),
            capacity: len,
            zero_prehistory: false,
        })
    }

    pub fn time(&self) -> f64 {
        self.latest as f64 * self.dt
    }

    /// Number of retained samples per node.
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, VecDeque::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends the velocities of the next time step.
    pub fn push(&mut self, omegas: &[f64]) {
        debug_assert_eq!(omegas.len(), self.samples.len());
        self.latest += 1;
        for (q, &w) in self.samples.iter_mut().zip(omegas) {
            q.push_back(w);
            if q.len() > self.capacity {
                q.pop_front();
            }
        }
    }

    fn sample(&self, node: usize, step: i64) -> Result<f64> {
        let q = &self.samples[node];
        let oldest = self.latest - q.len() as i64 + 1;
        if step < oldest {
            if step < 0 && self.zero_prehistory {
                return Ok(0.0);
            }
            return Err(Error::InsufficientHistory {
                needed: (self.latest - step + 1) as usize,
                available: q.len(),
            });
        }
        Ok(q[(step - oldest) as usize])
    }

    /// Velocity of `node` at absolute `time`, linearly interpolated.
    pub fn value_at(&self, node: usize, time: f64) -> Result<f64> {
        let pos = time / self.dt;
        let latest = self.latest as f64;
        if pos > latest + 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "history lookup at t = {time} lies in the future"
            )));
        }
        let pos = pos.min(latest);
        let lower = pos.floor();
        let frac = pos - lower;
        let i0 = lower as i64;
        let v0 = self.sample(node, i0)?;
        if frac < 1e-12 {
            return Ok(v0);
        }
        let v1 = self.sample(node, i0 + 1)?;
        Ok(v0 + frac * (v1 - v0))
    }
}

/// Advances every node by one `dt` with classical RK4.
///
/// `history` must end at the current time and hold the current velocities.
pub fn step(topology: &GridTopology, history: &VelocityHistory, cfg: &SimulationConfig) -> Result<GridTopology> {
    let n = topology.len();
    let dt = cfg.dt;
    let t = history.time();
    let theta0: Vec<f64> = topology.nodes.iter().map(|n| n.theta).collect();
    let omega0: Vec<f64> = topology.nodes.iter().map(|n| n.omega).collect();

    // Acceleration of every node at stage offset `c·dt` with stage state (theta, omega).
    let accel = |c: f64, theta: &[f64], omega: &[f64]| -> Result<Vec<f64>> {
        let offset = c * dt;
        (0..n)
            .map(|i| {
                let node = &topology.nodes[i];
                let mut a = node.power - node.damping * omega[i] + topology.coupling_torque(i, theta);
                if node.elasticity != 0.0 {
                    let delayed = if node.delay >= offset {
                        history.value_at(i, t + offset - node.delay)?
                    } else {
                        // Delay shorter than the stage offset: interpolate inside the step.
                        let w = node.delay / offset;
                        w * omega0[i] + (1.0 - w) * omega[i]
                    };
                    a -= node.elasticity * delayed;
                }
                Ok(a)
            })
            .collect()
    };
    let advance = |base: &[f64], slope: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(slope).map(|(b, s)| b + h * s).collect()
    };

    let k1_theta = omega0.clone();
    let k1_omega = accel(0.0, &theta0, &omega0)?;

    let theta2 = advance(&theta0, &k1_theta, dt / 2.0);
    let omega2 = advance(&omega0, &k1_omega, dt / 2.0);
    let k2_theta = omega2.clone();
    let k2_omega = accel(0.5, &theta2, &omega2)?;

    let theta3 = advance(&theta0, &k2_theta, dt / 2.0);
    let omega3 = advance(&omega0, &k2_omega, dt / 2.0);
    let k3_theta = omega3.clone();
    let k3_omega = accel(0.5, &theta3, &omega3)?;

    let theta4 = advance(&theta0, &k3_theta, dt);
    let omega4 = advance(&omega0, &k3_omega, dt);
    let k4_theta = omega4.clone();
    let k4_omega = accel(1.0, &theta4, &omega4)?;

    let mut next = topology.clone();
    for i in 0..n {
        let node = &mut next.nodes[i];
        node.theta = theta0[i] + dt / 6.0 * (k1_theta[i] + 2.0 * k2_theta[i] + 2.0 * k3_theta[i] + k4_theta[i]);
        node.omega = omega0[i] + dt / 6.0 * (k1_omega[i] + 2.0 * k2_omega[i] + 2.0 * k3_omega[i] + k4_omega[i]);
        if !node.theta.is_finite() || !node.omega.is_finite() {
            return Err(Error::SimulationDiverged {
                node: node.id,
                time: t + dt,
            });
        }
    }
    Ok(next)
}

/// Stability index `sᵢ(t)` of node `node` at the history's current time.
///
/// The window integral uses the trapezoidal rule with each integrand sample
/// delayed by the node's `τᵢ`.
pub fn stability_index(
    topology: &GridTopology,
    node: usize,
    history: &VelocityHistory,
    cfg: &SimulationConfig,
) -> Result<f64> {
    let der = &topology.nodes[node];
    let thetas: Vec<f64> = topology.nodes.iter().map(|n| n.theta).collect();
    let mut s = der.power - der.damping * der.omega + topology.coupling_torque(node, &thetas);
    if der.elasticity != 0.0 {
        let t = history.time();
        let intervals = cfg.window_intervals();
        let h = cfg.window / intervals as f64;
        let mut integral = 0.0;
        for k in 0..=intervals {
            let v = history.value_at(node, t - cfg.window + k as f64 * h - der.delay)?;
            let weight = if k == 0 || k == intervals { 0.5 } else { 1.0 };
            integral += weight * v;
        }
        integral *= h;
        s -= der.elasticity / cfg.window * integral;
    }
    Ok(s)
}

/// Nonpositive stability index means a (linearly) stable DER.
pub fn is_stable(s: f64) -> bool {
    s <= 0.0
}

/// Samples of one node's trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSeries {
    pub id: usize,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub stability: Vec<f64>,
}

/// Every node sampled at every `dt` from `t = 0` to the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub nodes: Vec<NodeSeries>,
}

impl Trajectory {
    /// Terminal stability index of each node.
    pub fn final_stability(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|n| *n.stability.last().expect("nonempty trajectory"))
            .collect()
    }

    pub fn final_theta(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| *n.theta.last().expect("nonempty trajectory")).collect()
    }

    pub fn final_omega(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| *n.omega.last().expect("nonempty trajectory")).collect()
    }

    /// CSV with header `t,node_id,theta,omega,s`, one row per node per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,node_id,theta,omega,s")?;
        for (k, &t) in self.times.iter().enumerate() {
            for node in &self.nodes {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    g9(t),
                    node.id,
                    g9(node.theta[k]),
                    g9(node.omega[k]),
                    g9(node.stability[k])
                )?;
            }
        }
        Ok(())
    }
}

/// Runs the model from the topology's initial state over the configured horizon.
pub fn simulate(topology: &GridTopology, cfg: &SimulationConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let steps = cfg.steps();
    let mut history = VelocityHistory::for_topology(topology, cfg);
    let mut state = topology.clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut nodes: Vec<NodeSeries> = topology
        .nodes
        .iter()
        .map(|n| NodeSeries {
            id: n.id,
            theta: Vec::with_capacity(steps + 1),
            omega: Vec::with_capacity(steps + 1),
            stability: Vec::with_capacity(steps + 1),
        })
        .collect();
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        times.push(t);
        for (i, series) in nodes.iter_mut().enumerate() {
            let s = stability_index(&state, i, &history, cfg)?;
            if !s.is_finite() {
                return Err(Error::SimulationDiverged {
                    node: state.nodes[i].id,
                    time: t,
                });
            }
            series.theta.push(state.nodes[i].theta);
            series.omega.push(state.nodes[i].omega);
            series.stability.push(s);
        }
        if k < steps {
            state = step(&state, &history, cfg)?;
            let omegas: Vec<f64> = state.nodes.iter().map(|n| n.omega).collect();
            history.push(&omegas);
        }
    }
    Ok(Trajectory { times, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node(theta2: f64) -> GridTopology {
        GridTopology::new(
            vec![
                DerNode::new(0, 0.8).with_damping(0.1),
                DerNode::new(1, -0.8).with_damping(0.1).with_state(theta2, 0.0),
            ],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn supplied_power_examples() {
        assert_eq!(supplied_power(&DerNode::new(0, 1.0)), 1.0);
        let n = DerNode::new(0, 1.0).with_elasticity(0.5).with_state(0.0, 0.2);
        assert!((supplied_power(&n) - 0.9).abs() < 1e-15);
        let n = DerNode::new(0, 0.0).with_elasticity(1.0).with_state(0.0, -0.3);
        assert!((supplied_power(&n) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn is_stable_boundary() {
        assert!(is_stable(-0.2));
        assert!(is_stable(0.0));
        assert!(!is_stable(0.1));
    }

    #[test]
    fn zero_forcing_stays_at_rest() {
        let topo = GridTopology::uncoupled(vec![DerNode::new(0, 0.0)]).unwrap();
        let traj = simulate(&topo, &SimulationConfig::new(0.01, 5.0, 1.0)).unwrap();
        let node = &traj.nodes[0];
        assert!(node.theta.iter().chain(&node.omega).chain(&node.stability).all(|&v| v == 0.0));
        assert_eq!(traj.times.len(), 501);
    }

    #[test]
    fn damping_decay_matches_exponential() {
        let topo = GridTopology::uncoupled(vec![DerNode::new(0, 0.0).with_damping(0.5).with_state(0.0, 1.0)]).unwrap();
        let traj = simulate(&topo, &SimulationConfig::new(0.01, 2.0, 0.5)).unwrap();
        let w = traj.final_omega()[0];
        assert!((w - (-1.0f64).exp()).abs() < 1e-4, "omega(2) = {w}");
    }

    #[test]
    fn two_node_reaches_phase_locked_equilibrium() {
        let traj = simulate(&two_node(-0.5), &SimulationConfig::new(0.01, 600.0, 1.0)).unwrap();
        let th = traj.final_theta();
        let expected = -(0.8f64).asin();
        assert!((th[1] - th[0] - expected).abs() < 1e-6, "Δθ = {}", th[1] - th[0]);
        for s in traj.final_stability() {
            assert!(s.abs() < 1e-6);
        }
    }

    #[test]
    fn single_node_stability_index_is_power_without_damping() {
        let topo = GridTopology::uncoupled(vec![DerNode::new(0, 0.5)]).unwrap();
        let cfg = SimulationConfig::new(0.1, 1.0, 0.5);
        let history = VelocityHistory::from_series(0.1, vec![vec![0.0; 10]]).unwrap();
        assert_eq!(stability_index(&topo, 0, &history, &cfg).unwrap(), 0.5);
        let zero = GridTopology::uncoupled(vec![DerNode::new(0, 0.0).with_elasticity(1.0)]).unwrap();
        assert_eq!(stability_index(&zero, 0, &history, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn stability_index_needs_a_full_window() {
        let topo = GridTopology::uncoupled(vec![DerNode::new(0, 0.0).with_elasticity(1.0)]).unwrap();
        let cfg = SimulationConfig::new(0.1, 2.0, 1.0);
        let short = VelocityHistory::from_series(0.1, vec![vec![0.0; 5]]).unwrap();
        assert!(matches!(
            stability_index(&topo, 0, &short, &cfg),
            Err(Error::InsufficientHistory { .. })
        ));
        let full = VelocityHistory::from_series(0.1, vec![vec![0.0; 11]]).unwrap();
        assert!(stability_index(&topo, 0, &full, &cfg).is_ok());
    }

    #[test]
    fn window_integral_is_trapezoidal_mean() {
        // Velocity ramp v(t) = t on [0, 1]; window T = 1 gives mean 0.5.
        let dt = 0.1;
        let series: Vec<f64> = (0..=10).map(|k| k as f64 * dt).collect();
        let topo = GridTopology::uncoupled(vec![DerNode::new(0, 0.0).with_elasticity(2.0)]).unwrap();
        let history = VelocityHistory::from_series(dt, vec![series]).unwrap();
        let cfg = SimulationConfig::new(dt, 1.0, 1.0 - 1e-12);
        let s = stability_index(&topo, 0, &history, &cfg).unwrap();
        assert!((s + 2.0 * 0.5).abs() < 1e-9, "s = {s}");
    }

    #[test]
    fn unbalanced_single_node_is_unstable() {
        let topo = GridTopology::uncoupled(vec![DerNode::new(0, 5.0)]).unwrap();
        let traj = simulate(&topo, &SimulationConfig::new(0.05, 3.0, 1.0)).unwrap();
        assert!(!is_stable(traj.final_stability()[0]));
    }

    #[test]
    fn divergence_names_node_and_time() {
        let topo = GridTopology::uncoupled(vec![DerNode::new(3, 1e308).with_state(0.0, 1e308)]).unwrap();
        let err = simulate(&topo, &SimulationConfig::new(0.5, 10.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::SimulationDiverged { node: 3, .. }), "{err}");
    }

    #[test]
    fn invalid_topologies_are_rejected() {
        let nodes = || vec![DerNode::new(0, 0.0), DerNode::new(1, 0.0)];
        assert!(GridTopology::new(nodes(), vec![vec![0.0, 1.0], vec![0.5, 0.0]]).is_err());
        assert!(GridTopology::new(nodes(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(GridTopology::new(nodes(), vec![vec![0.0]]).is_err());
        assert!(GridTopology::uncoupled(vec![DerNode::new(0, 0.0).with_damping(-1.0)]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::new(0.1, 1.0, 0.05).validate().is_err());
        assert!(SimulationConfig::new(0.1, 0.5, 1.0).validate().is_err());
        assert!(SimulationConfig::new(0.0, 1.0, 0.5).validate().is_err());
        assert!(SimulationConfig::new(0.01, 1.0, 0.5).validate().is_ok());
    }

    #[test]
    fn csv_header_and_rows() {
        let topo = GridTopology::uncoupled(vec![DerNode::new(4, 0.0), DerNode::new(9, 0.0)]).unwrap();
        let traj = simulate(&topo, &SimulationConfig::new(0.5, 1.0, 1.0)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,node_id,theta,omega,s");
        assert_eq!(lines.len(), 1 + 3 * 2);
        assert_eq!(lines[1], "0,4,0,0,0");
        assert_eq!(lines[6], "1,9,0,0,0");
    }
}
