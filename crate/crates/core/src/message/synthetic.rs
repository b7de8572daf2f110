//! Synthetic fallback datasets used when the public CSVs are not supplied.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};

use super::{Dataset, Schema};
use crate::grid::{simulate, DerNode, GridTopology, SimulationConfig};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Grid settings for synthesizing stability records: a four-node star with the
/// producer (node 1) coupled to three consumers.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilitySynthesis {
    pub sim: SimulationConfig,
    /// Coupling strength of each producer–consumer line.
    pub coupling: f64,
    pub damping: f64,
}

impl Default for StabilitySynthesis {
    fn default() -> Self {
        Self {
            sim: SimulationConfig::new(0.05, 20.0, 2.0),
            coupling: 1.0,
            damping: 0.1,
        }
    }
}

impl StabilitySynthesis {
    fn topology(&self, tau: &[f64; 4], p: &[f64; 4], g: &[f64; 4]) -> Result<GridTopology> {
        let nodes = (0..4)
            .map(|i| {
                DerNode::new(i, p[i])
                    .with_damping(self.damping)
                    .with_elasticity(g[i])
                    .with_delay(tau[i])
            })
            .collect();
        let mut coupling = vec![vec![0.0; 4]; 4];
        for j in 1..4 {
            coupling[0][j] = self.coupling;
            coupling[j][0] = self.coupling;
        }
        GridTopology::new(nodes, coupling)
    }
}

/// Draws `n` parameter sets, simulates each four-node grid and records the
/// largest terminal stability index as `stab`.
///
/// Ranges: `tau ∈ [0.5, 10]`, consumer powers `p2..p4 ∈ [-2, -0.1]` with
/// `p1 = -(p2 + p3 + p4)`, `g ∈ [0.05, 1]`.
pub fn synthesize_stability_dataset(n: usize, cfg: &StabilitySynthesis, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one record".into()));
    }
    cfg.sim.validate()?;
    let mut rng = rng::seeded(seed);
    let mut rows = Vec::with_capacity(n * 13);
    for _ in 0..n {
        let tau: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.5..=10.0));
        let mut p = [0.0; 4];
        for pk in p.iter_mut().skip(1) {
            *pk = -rng.random_range(0.1..=2.0);
        }
        p[0] = -(p[1] + p[2] + p[3]);
        let g: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.05..=1.0));
        let trajectory = simulate(&cfg.topology(&tau, &p, &g)?, &cfg.sim)?;
        let stab = trajectory
            .final_stability()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        rows.extend_from_slice(&tau);
        rows.extend_from_slice(&p);
        rows.extend_from_slice(&g);
        rows.push(stab);
    }
    let features = Array2::from_shape_vec((n, 13), rows).expect("row-major");
    Dataset::new(Schema::Stability, features, None)
}

struct TrafficProfile {
    weight: f64,
    packets: f64,
    packet_bytes: (f64, f64),
    loss: f64,
    response: f64,
}

// Polling, event reporting and bulk (file/log) transfer between a DER and SCADA.
const PROFILES: [TrafficProfile; 3] = [
    TrafficProfile {
        weight: 0.6,
        packets: 12.0,
        packet_bytes: (64.0, 4.0),
        loss: 0.02,
        response: 1.0,
    },
    TrafficProfile {
        weight: 0.3,
        packets: 30.0,
        packet_bytes: (120.0, 10.0),
        loss: 0.03,
        response: 0.5,
    },
    TrafficProfile {
        weight: 0.1,
        packets: 80.0,
        packet_bytes: (512.0, 40.0),
        loss: 0.05,
        response: 0.25,
    },
];

fn poisson(rng: &mut Rng, mean: f64) -> f64 {
    Poisson::new(mean).expect("positive mean").sample(rng)
}

/// Draws `n` SCADA message statistics from a mixture of traffic profiles.
///
/// Each message sends `a` packets totalling `b` bytes; `c` of them reach the
/// destination, `d` responses come back and `e` counts every received packet.
pub fn synthesize_scada_dataset(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one message".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut rows = Vec::with_capacity(n * 5);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let profile = PROFILES
            .iter()
            .find(|p| {
                acc += p.weight;
                u < acc
            })
            .unwrap_or(&PROFILES[PROFILES.len() - 1]);
        let a = poisson(&mut rng, profile.packets).max(1.0);
        let size = Normal::new(profile.packet_bytes.0, profile.packet_bytes.1)
            .expect("positive sd")
            .sample(&mut rng)
            .max(1.0);
        let b = (a * size).round();
        let lost = (0..a as usize).filter(|_| rng.random::<f64>() < profile.loss).count() as f64;
        let c = a - lost;
        let d = (0..c as usize).filter(|_| rng.random::<f64>() < profile.response).count() as f64;
        let e = d + poisson(&mut rng, 1.0);
        rows.extend_from_slice(&[a, b, c, d, e]);
    }
    let features = Array2::from_shape_vec((n, 5), rows).expect("row-major");
    Dataset::new(Schema::Scada, features, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::is_stable;

    #[test]
    fn stability_dataset_is_deterministic_and_consistent() {
        let cfg = StabilitySynthesis::default();
        let a = synthesize_stability_dataset(20, &cfg, 5).unwrap();
        let b = synthesize_stability_dataset(20, &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        for row in a.features().rows() {
            let p = &row.as_slice().unwrap()[4..8];
            assert!((p[0] + p[1] + p[2] + p[3]).abs() < 1e-12);
            assert!(row.iter().take(4).all(|&t| (0.5..=10.0).contains(&t)));
            assert!(row.iter().skip(8).take(4).all(|&g| (0.05..=1.0).contains(&g)));
        }
    }

    #[test]
    fn scada_dataset_counts_are_consistent() {
        let ds = synthesize_scada_dataset(500, 3).unwrap();
        assert_eq!(ds, synthesize_scada_dataset(500, 3).unwrap());
        for row in ds.features().rows() {
            let (a, b, c, d, e) = (row[0], row[1], row[2], row[3], row[4]);
            assert!(a >= 1.0 && b > 0.0);
            assert!(c <= a && d <= c && e >= d);
            assert!([a, b, c, d, e].iter().all(|v| v.fract() == 0.0));
        }
    }

    #[test]
    fn zero_rows_rejected() {
        assert!(synthesize_scada_dataset(0, 1).is_err());
        assert!(synthesize_stability_dataset(0, &StabilitySynthesis::default(), 1).is_err());
    }

    #[test]
    fn stabf_follows_stab_sign() {
        let ds = synthesize_stability_dataset(10, &StabilitySynthesis::default(), 9).unwrap();
        let strata = ds.strata();
        for (row, s) in ds.features().rows().into_iter().zip(strata) {
            assert_eq!(s == 0, is_stable(row[12]));
        }
    }
}
