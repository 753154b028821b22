//! Agents walking on a road network. Hidden states are directed edges; an
//! agent on edge `(a, b)` either stays or moves to an edge leaving `b`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Marginal, ObservationModel, TransitionModel};

pub const NETWORK_SCHEMA: &str = "ensemble-flow/network/v1";

const REFERENCE_NETWORK: &str = include_str!("../fixtures/reference_network.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct NetworkModel {
    pub nodes: Vec<Node>,
    /// Hidden state `i` is the directed edge `edges[i] = (from, to)` by node id.
    pub edges: Vec<(usize, usize)>,
    /// Edges favoured by the true dynamics.
    pub preferred: Vec<(usize, usize)>,
    pub sensors: Vec<Point>,
    pub initial_edge: (usize, usize),
    pub agents: u64,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    schema: String,
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    preferred: Vec<(usize, usize)>,
    sensors: Vec<Point>,
    initial_edge: (usize, usize),
    agents: u64,
}

impl TryFrom<RawNetwork> for NetworkModel {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        if raw.schema != NETWORK_SCHEMA {
            return Err(Error::Model(format!(
                "unsupported network schema {:?}, expected {NETWORK_SCHEMA:?}",
                raw.schema
            )));
        }
        let model = NetworkModel {
            nodes: raw.nodes,
            edges: raw.edges,
            preferred: raw.preferred,
            sensors: raw.sensors,
            initial_edge: raw.initial_edge,
            agents: raw.agents,
        };
        model.check()?;
        Ok(model)
    }
}

impl From<NetworkModel> for RawNetwork {
    fn from(m: NetworkModel) -> Self {
        RawNetwork {
            schema: NETWORK_SCHEMA.to_string(),
            nodes: m.nodes,
            edges: m.edges,
            preferred: m.preferred,
            sensors: m.sensors,
            initial_edge: m.initial_edge,
            agents: m.agents,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Every non-reversing successor is equally likely.
    Uniform,
    /// Successors in the preferred set weigh 20, other non-reversing ones 1.
    Weighted,
}

impl NetworkModel {
    fn check(&self) -> Result<()> {
        for (k, n) in self.nodes.iter().enumerate() {
            if self.nodes[..k].iter().any(|m| m.id == n.id) {
                return Err(Error::Model(format!("duplicate node id {}", n.id)));
            }
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(Error::Model(format!("node {} has non-finite coordinates", n.id)));
            }
        }
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            if self.node(a).is_none() || self.node(b).is_none() {
                return Err(Error::Model(format!("edge {k} = ({a}, {b}) references an unknown node")));
            }
            if a == b || self.edges[..k].contains(&(a, b)) {
                return Err(Error::Model(format!("edge ({a}, {b}) is a loop or a duplicate")));
            }
        }
        for e in self.preferred.iter().chain(std::iter::once(&self.initial_edge)) {
            if self.edge_index(*e).is_none() {
                return Err(Error::Model(format!("edge {e:?} is not in the edge list")));
            }
        }
        Ok(())
    }

    fn node(&self, id: usize) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn n(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_index(&self, edge: (usize, usize)) -> Option<usize> {
        self.edges.iter().position(|&e| e == edge)
    }

    pub fn midpoint(&self, edge: usize) -> Point {
        let (a, b) = self.edges[edge];
        let (p, q) = (self.node(a).unwrap(), self.node(b).unwrap());
        Point {
            x: 0.5 * (p.x + q.x),
            y: 0.5 * (p.y + q.y),
        }
    }

    /// All agents on the initial edge.
    pub fn initial_marginal(&self) -> Marginal {
        let mut counts = vec![0; self.n()];
        counts[self.edge_index(self.initial_edge).unwrap()] = self.agents;
        Marginal::from_counts(&counts)
    }

    /// `weights[i][j]` for moving from edge `i` onto edge `j`; zero unless
    /// `j` leaves the node `i` enters.
    pub fn successor_weights(&self, mode: WeightMode) -> Array2<f64> {
        let n = self.n();
        let mut w = Array2::zeros((n, n));
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            for (j, &(c, d)) in self.edges.iter().enumerate() {
                if c != b || d == a {
                    continue;
                }
                w[[i, j]] = match mode {
                    WeightMode::Uniform => 1.0,
                    WeightMode::Weighted if self.preferred.contains(&(c, d)) => 20.0,
                    WeightMode::Weighted => 1.0,
                };
            }
        }
        w
    }
}

/// The bundled 11-node network with 28 directed edges and 7 sensors.
pub fn reference_network() -> NetworkModel {
    NetworkModel::from_json(REFERENCE_NETWORK).expect("bundled network fixture is valid")
}

/// Stay with probability 0.5, otherwise move to a successor edge with
/// probability proportional to its weight.
pub fn build_network_transitions(model: &NetworkModel, mode: WeightMode) -> Result<TransitionModel> {
    let weights = model.successor_weights(mode);
    let n = model.n();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        let total: f64 = weights.row(i).sum();
        if !(total > 0.0) {
            return Err(Error::Model(format!(
                "edge {:?} has no admissible successor",
                model.edges[i]
            )));
        }
        for j in 0..n {
            a[[i, j]] = 0.5 * weights[[i, j]] / total;
        }
        a[[i, i]] += 0.5;
    }
    TransitionModel::renormalized(a)
}

/// Detection probability of a sensor at distance `d` from an edge midpoint.
pub fn detection_probability(d: f64) -> f64 {
    (2.0 * (-5.0 * d).exp()).min(0.99)
}

/// One `n × 2` model per sensor with columns `[detected, not detected]`.
pub fn build_sensor_models(model: &NetworkModel) -> Result<Vec<ObservationModel>> {
    model
        .sensors
        .iter()
        .map(|s| {
            let mut b = Array2::zeros((model.n(), 2));
            for i in 0..model.n() {
                let m = model.midpoint(i);
                let p = detection_probability((m.x - s.x).hypot(m.y - s.y));
                b[[i, 0]] = p;
                b[[i, 1]] = 1.0 - p;
            }
            ObservationModel::new(b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(nodes: usize, edges: Vec<(usize, usize)>) -> NetworkModel {
        NetworkModel {
            nodes: (1..=nodes).map(|id| Node { id, x: id as f64, y: 0.0 }).collect(),
            initial_edge: edges[0],
            edges,
            preferred: vec![],
            sensors: vec![],
            agents: 1,
        }
    }

    #[test]
    fn reference_network_has_the_published_counts() {
        let net = reference_network();
        assert_eq!(net.nodes.len(), 11);
        assert_eq!(net.n(), 28);
        assert_eq!(net.sensors.len(), 7);
        assert_eq!(net.initial_edge, (1, 3));
        assert_eq!(net.initial_marginal().total(), 100.0);
        build_network_transitions(&net, WeightMode::Weighted).unwrap();
        build_network_transitions(&net, WeightMode::Uniform).unwrap();
        assert_eq!(build_sensor_models(&net).unwrap().len(), 7);
    }

    #[test]
    fn single_successor_takes_the_other_half() {
        let net = graph(3, vec![(1, 2), (2, 3), (3, 1)]);
        let a = build_network_transitions(&net, WeightMode::Uniform).unwrap();
        assert_eq!(a.kernel().row(0).to_vec(), vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn preferred_successor_gets_twenty_parts() {
        let mut net = graph(4, vec![(1, 2), (2, 3), (2, 4), (3, 1), (4, 1)]);
        net.preferred = vec![(2, 3)];
        let a = build_network_transitions(&net, WeightMode::Weighted).unwrap();
        let k = a.kernel();
        assert!((k[[0, 1]] - 0.5 * 20.0 / 21.0).abs() < 1e-15);
        assert!((k[[0, 2]] - 0.5 / 21.0).abs() < 1e-15);
        let u = build_network_transitions(&net, WeightMode::Uniform).unwrap();
        assert_eq!(u.kernel()[[0, 1]], 0.25);
    }

    #[test]
    fn u_turn_only_is_a_model_error() {
        let net = graph(2, vec![(1, 2), (2, 1)]);
        assert!(matches!(
            build_network_transitions(&net, WeightMode::Uniform),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn detection_curve() {
        assert_eq!(detection_probability(0.0), 0.99);
        assert!((detection_probability(1.0) - 2.0 * (-5f64).exp()).abs() < 1e-17);
        assert!((detection_probability(1.0) - 0.013_475_893_998_170_934).abs() < 1e-15);
        assert!(detection_probability(50.0) < 1e-100);
    }

    #[test]
    fn bad_fixture_reports_path() {
        let text = REFERENCE_NETWORK.replacen("\"x\": 0.0", "\"x\": \"zero\"", 1);
        match NetworkModel::from_json(&text) {
            Err(Error::Schema { path, .. }) => assert!(path.starts_with("nodes[0]"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let net = reference_network();
        let text = serde_json::to_string(&net).unwrap();
        assert_eq!(NetworkModel::from_json(&text).unwrap(), net);
    }
}
