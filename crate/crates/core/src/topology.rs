//! Reservoir graph families and the edge mutation used by the annealing search.
//!
//! Edges are directed. Every constructor is a pure function of its arguments
//! and seed; input neurons always occupy ids `0..m_in`.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    /// Input neuron fanning out into the first stage of a chain.
    InputFanin,
    /// Input neuron wired to its private partner neuron.
    OneToOne,
    /// Recurrent reservoir connection; the only class the search may remove.
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub payload: f64,
    pub delay: f64,
    pub class: EdgeClass,
}

/// Payload and delay shared by every edge of a constructed network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Synapse {
    pub payload: f64,
    pub delay: f64,
}

impl Default for Synapse {
    fn default() -> Self {
        Self {
            payload: 1.0,
            delay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirNetwork {
    pub n_neurons: usize,
    pub input_neurons: Vec<usize>,
    pub edges: Vec<Edge>,
}

impl ReservoirNetwork {
    pub fn new(n_neurons: usize, input_neurons: Vec<usize>, edges: Vec<Edge>) -> Result<Self> {
        let net = Self {
            n_neurons,
            input_neurons,
            edges,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_neurons.len() > self.n_neurons {
            return Err(Error::InvalidParameter(format!(
                "{} input neurons exceed network size {}",
                self.input_neurons.len(),
                self.n_neurons
            )));
        }
        let mut seen = HashSet::new();
        for &i in &self.input_neurons {
            if i >= self.n_neurons {
                return Err(Error::InvalidParameter(format!(
                    "input neuron {i} out of range"
                )));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidParameter(format!(
                    "input neuron {i} listed twice"
                )));
            }
        }
        for e in &self.edges {
            if e.src >= self.n_neurons || e.dst >= self.n_neurons {
                return Err(Error::InvalidParameter(format!(
                    "edge {}->{} out of range",
                    e.src, e.dst
                )));
            }
            if e.src == e.dst {
                return Err(Error::InvalidParameter(format!("self-loop on {}", e.src)));
            }
            if !(e.delay >= 0.0) || !e.payload.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "edge {}->{} has invalid payload/delay",
                    e.src, e.dst
                )));
            }
        }
        Ok(())
    }

    pub fn m_in(&self) -> usize {
        self.input_neurons.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn count_class(&self, class: EdgeClass) -> usize {
        self.edges.iter().filter(|e| e.class == class).count()
    }

    pub fn internal_edge_count(&self) -> usize {
        self.count_class(EdgeClass::Internal)
    }

    pub fn in_degree(&self, neuron: usize) -> usize {
        self.edges.iter().filter(|e| e.dst == neuron).count()
    }

    /// Outgoing edges per neuron, in edge-list order.
    pub fn fanout(&self) -> Vec<Vec<Edge>> {
        let mut out = vec![Vec::new(); self.n_neurons];
        for e in &self.edges {
            out[e.src].push(*e);
        }
        out
    }

    /// Returns a copy with every edge carrying `synapse`.
    pub fn with_synapse(&self, synapse: Synapse) -> Self {
        let mut net = self.clone();
        for e in &mut net.edges {
            e.payload = synapse.payload;
            e.delay = synapse.delay;
        }
        net
    }

    /// Removes one uniformly chosen internal edge.
    pub fn remove_random_internal_edge<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(Self, Edge)> {
        let candidates: Vec<usize> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.class == EdgeClass::Internal)
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            return Err(Error::NoInternalEdges);
        }
        let pick = candidates[rng.gen_range(0..candidates.len())];
        let mut net = self.clone();
        let removed = net.edges.remove(pick);
        Ok((net, removed))
    }

    /// Removes the first edge matching `(src, dst, class)`, if any.
    pub fn remove_edge(&self, edge: &Edge) -> Option<Self> {
        let pos = self
            .edges
            .iter()
            .position(|e| e.src == edge.src && e.dst == edge.dst && e.class == edge.class)?;
        let mut net = self.clone();
        net.edges.remove(pos);
        Some(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn edge(src: usize, dst: usize, s: Synapse, class: EdgeClass) -> Edge {
    Edge {
        src,
        dst,
        payload: s.payload,
        delay: s.delay,
        class,
    }
}

fn check_probability(p: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "{name} = {p} is not a probability"
        )));
    }
    Ok(())
}

/// Directed G(m, p): every ordered pair `(i, j)`, `i != j`, is an edge with
/// probability `p`. Neurons `0..m_in` are the inputs.
pub fn erdos_renyi(
    m: usize,
    p: f64,
    m_in: usize,
    synapse: Synapse,
    seed: u64,
) -> Result<ReservoirNetwork> {
    check_probability(p, "p")?;
    if m < 2 {
        return Err(Error::InvalidParameter("erdos_renyi needs m >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i != j && rng.gen::<f64>() < p {
                edges.push(edge(i, j, synapse, EdgeClass::Internal));
            }
        }
    }
    ReservoirNetwork::new(m, (0..m_in).collect(), edges)
}

/// Ring lattice over `ring` (neuron ids in ring order) where each node sends
/// to its `k` nearest neighbours on both sides, plus independent directed
/// shortcuts with probability `p_add` for every ordered pair not on the ring.
fn ring_edges(
    ring: &[usize],
    k: usize,
    p_add: f64,
    synapse: Synapse,
    rng: &mut ChaCha8Rng,
) -> Vec<Edge> {
    let m = ring.len();
    let mut edges = Vec::new();
    let mut on_ring = HashSet::new();
    for pos in 0..m {
        for d in 1..=k {
            for nb in [(pos + d) % m, (pos + m - d) % m] {
                if on_ring.insert((ring[pos], ring[nb])) {
                    edges.push(edge(ring[pos], ring[nb], synapse, EdgeClass::Internal));
                }
            }
        }
    }
    if p_add > 0.0 {
        for &i in ring {
            for &j in ring {
                if i != j && !on_ring.contains(&(i, j)) && rng.gen::<f64>() < p_add {
                    edges.push(edge(i, j, synapse, EdgeClass::Internal));
                }
            }
        }
    }
    edges
}

fn check_ring(m: usize, k: usize) -> Result<()> {
    if k == 0 || m <= 2 * k {
        return Err(Error::InvalidParameter(format!(
            "ring needs k >= 1 and m > 2k (m = {m}, k = {k})"
        )));
    }
    Ok(())
}

/// Small-world ring with added (not rewired) shortcuts. The `m_in` input ids
/// `0..m_in` are spread evenly around the ring (every other node when
/// `m = 2 m_in`).
pub fn ring_small_world(
    m: usize,
    k: usize,
    p_add: f64,
    m_in: usize,
    synapse: Synapse,
    seed: u64,
) -> Result<ReservoirNetwork> {
    check_ring(m, k)?;
    check_probability(p_add, "p_add")?;
    if m_in > m {
        return Err(Error::InvalidParameter("m_in exceeds m".into()));
    }
    let mut ring = vec![usize::MAX; m];
    for j in 0..m_in {
        ring[j * m / m_in] = j;
    }
    for (id, slot) in (m_in..).zip(ring.iter_mut().filter(|s| **s == usize::MAX)) {
        *slot = id;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = ring_edges(&ring, k, p_add, synapse, &mut rng);
    ReservoirNetwork::new(m, (0..m_in).collect(), edges)
}

/// Outer layer of `m_in` input neurons, each wired one-to-one to an inner
/// small-world ring (`k` neighbours per side plus shortcuts). Inputs have no
/// incoming edges.
pub fn input_ring(
    m_in: usize,
    k: usize,
    p_add: f64,
    synapse: Synapse,
    seed: u64,
) -> Result<ReservoirNetwork> {
    check_ring(m_in, k)?;
    check_probability(p_add, "p_add")?;
    let mut edges: Vec<Edge> = (0..m_in)
        .map(|i| edge(i, m_in + i, synapse, EdgeClass::OneToOne))
        .collect();
    let inner: Vec<usize> = (m_in..2 * m_in).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.extend(ring_edges(&inner, k, p_add, synapse, &mut rng));
    ReservoirNetwork::new(2 * m_in, (0..m_in).collect(), edges)
}

/// The hand-designed two-ring network: inputs feed a plain bidirectional
/// nearest-neighbour ring one-to-one.
pub fn handpicked_ring(m_in: usize, synapse: Synapse) -> Result<ReservoirNetwork> {
    if m_in < 3 {
        return Err(Error::InvalidParameter(
            "handpicked_ring needs m_in >= 3".into(),
        ));
    }
    input_ring(m_in, 1, 0.0, synapse, 0)
}

/// Chains of fully bipartite clusters. Chain `c` has input neuron `c`, which
/// feeds every neuron of the chain's first cluster; each cluster feeds every
/// neuron of the next one.
pub fn cluster_chains(
    n_chains: usize,
    clusters_per_chain: usize,
    cluster_size: usize,
    synapse: Synapse,
) -> Result<ReservoirNetwork> {
    if n_chains == 0 || clusters_per_chain == 0 || cluster_size == 0 {
        return Err(Error::InvalidParameter(
            "cluster_chains counts must be >= 1".into(),
        ));
    }
    let per_chain = clusters_per_chain * cluster_size;
    let cluster = |chain: usize, c: usize| {
        let start = n_chains + chain * per_chain + c * cluster_size;
        start..start + cluster_size
    };
    let mut edges = Vec::new();
    for chain in 0..n_chains {
        for dst in cluster(chain, 0) {
            edges.push(edge(chain, dst, synapse, EdgeClass::InputFanin));
        }
        for c in 0..clusters_per_chain - 1 {
            for src in cluster(chain, c) {
                for dst in cluster(chain, c + 1) {
                    edges.push(edge(src, dst, synapse, EdgeClass::Internal));
                }
            }
        }
    }
    ReservoirNetwork::new(n_chains * (1 + per_chain), (0..n_chains).collect(), edges)
}

/// `m_in` disjoint directed paths of `chain_len` neurons; input `i` heads
/// chain `i`.
pub fn linear_chains(m_in: usize, chain_len: usize, synapse: Synapse) -> Result<ReservoirNetwork> {
    if chain_len == 0 {
        return Err(Error::InvalidParameter("chain_len must be >= 1".into()));
    }
    let tail = chain_len - 1;
    let member = |chain: usize, pos: usize| {
        if pos == 0 {
            chain
        } else {
            m_in + chain * tail + pos - 1
        }
    };
    let mut edges = Vec::new();
    for chain in 0..m_in {
        for pos in 0..tail {
            edges.push(edge(
                member(chain, pos),
                member(chain, pos + 1),
                synapse,
                EdgeClass::Internal,
            ));
        }
    }
    ReservoirNetwork::new(m_in * chain_len, (0..m_in).collect(), edges)
}
