//! Apollonian network construction.
//!
//! The deterministic network of generation `K` starts from a triangle on
//! nodes 0, 1, 2 and, `K` times, inserts one node into every internal
//! triangular face, joining it to the face's three corners. Faces live in a
//! FIFO queue: each round dequeues every face present at the start of the
//! round and enqueues the three children `(a,b,n)`, `(a,c,n)`, `(b,c,n)` of
//! each, so node ids and adjacency order are fully canonical. The outer face
//! is never subdivided.

use std::collections::VecDeque;
use std::fmt;

use num_rational::Ratio;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest generation accepted by [`build_apollonian`].
pub const MAX_GENERATION: u32 = 16;

/// Identifier of the generator used by [`build_random_apollonian`]; written
/// into serialized documents of random networks.
pub const RANDOM_ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index fits in u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Apollonian,
    RandomApollonian,
}

/// One subdivision: the corners of the face that was split and the node
/// inserted into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceRecord {
    pub corners: [NodeId; 3],
    pub inserted: NodeId,
}

/// Undirected simple graph with per-node generation labels.
///
/// Immutable once built. Equality compares kind, generation, seed,
/// adjacency and labels; the construction `face_log` is not part of the
/// document format and is ignored.
#[derive(Debug, Clone)]
pub struct ApollonianGraph {
    kind: GraphKind,
    generation: u32,
    seed: Option<u64>,
    adjacency: Vec<Vec<NodeId>>,
    node_generation: Vec<u32>,
    face_log: Vec<FaceRecord>,
}

impl PartialEq for ApollonianGraph {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.generation == other.generation
            && self.seed == other.seed
            && self.adjacency == other.adjacency
            && self.node_generation == other.node_generation
    }
}

impl Eq for ApollonianGraph {}

/// Exact closed-form size figures for the deterministic network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosedFormCounts {
    pub nodes: u64,
    pub edges: u64,
    /// `3 * 2^(K-1)`; only defined for `K >= 1`.
    pub max_degree: Option<u64>,
    /// `6 - 24 / (3^K + 5)`, kept as an exact fraction.
    pub average_degree: Ratio<u64>,
}

pub fn closed_form_counts(generation: u32) -> Result<ClosedFormCounts> {
    if generation > 40 {
        return Err(Error::Capacity(format!(
            "closed-form counts overflow u64 for generation {generation}"
        )));
    }
    let pow3 = 3u64.pow(generation);
    let max_degree = (generation >= 1).then(|| 3 * (1u64 << (generation - 1)));
    Ok(ClosedFormCounts {
        nodes: (pow3 + 5) / 2,
        edges: 3 * (pow3 + 1) / 2,
        max_degree,
        average_degree: Ratio::from_integer(6) - Ratio::new(24, pow3 + 5),
    })
}

/// Number of nodes created in round `g` of the deterministic construction.
pub fn generation_size(g: u32) -> u64 {
    if g == 0 {
        3
    } else {
        3u64.pow(g - 1)
    }
}

/// Build the deterministic Apollonian network of generation `k`.
pub fn build_apollonian(k: u32) -> Result<ApollonianGraph> {
    if k > MAX_GENERATION {
        return Err(Error::Capacity(format!(
            "generation {k} exceeds the cap of {MAX_GENERATION}"
        )));
    }
    let mut builder = Builder::triangle();
    let mut faces: VecDeque<[NodeId; 3]> = VecDeque::from([[NodeId(0), NodeId(1), NodeId(2)]]);
    for g in 1..=k {
        for _ in 0..faces.len() {
            let face = faces.pop_front().expect("face count fixed for the round");
            faces.extend(builder.subdivide(face, g));
        }
    }
    Ok(builder.finish(GraphKind::Apollonian, k, None))
}

/// Build a random Apollonian network over `iterations` rounds.
///
/// Round 1 subdivides the initial triangle (the only internal face). Every
/// later round draws `subdivisions_per_iteration` distinct internal faces
/// uniformly (ChaCha8 seeded with `seed`) and subdivides each; asking for
/// more faces than exist is an error.
///
/// Faces are kept in a canonical list: after each round the faces that were
/// not chosen keep their order, followed by the children of the chosen faces
/// in ascending order of the chosen positions.
pub fn build_random_apollonian(
    iterations: u32,
    subdivisions_per_iteration: usize,
    seed: u64,
) -> Result<ApollonianGraph> {
    if iterations == 0 {
        return Err(Error::param("iterations must be positive"));
    }
    if subdivisions_per_iteration == 0 {
        return Err(Error::param("subdivisions per iteration must be positive"));
    }
    let cap = closed_form_counts(MAX_GENERATION)?.nodes;
    let projected = 4 + (iterations as u64 - 1) * subdivisions_per_iteration as u64;
    if projected > cap {
        return Err(Error::Capacity(format!(
            "{projected} nodes requested, cap is {cap}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = Builder::triangle();
    let mut faces: Vec<[NodeId; 3]> = vec![[NodeId(0), NodeId(1), NodeId(2)]];
    for g in 1..=iterations {
        let wanted = if g == 1 { 1 } else { subdivisions_per_iteration };
        if wanted > faces.len() {
            return Err(Error::param(format!(
                "iteration {g}: {subdivisions_per_iteration} subdivisions requested but only {} faces exist",
                faces.len()
            )));
        }
        let mut chosen = index::sample(&mut rng, faces.len(), wanted).into_vec();
        chosen.sort_unstable();
        let mut picked = vec![false; faces.len()];
        for &c in &chosen {
            picked[c] = true;
        }
        let mut next: Vec<[NodeId; 3]> = faces
            .iter()
            .zip(&picked)
            .filter(|(_, &p)| !p)
            .map(|(f, _)| *f)
            .collect();
        for &c in &chosen {
            next.extend(builder.subdivide(faces[c], g));
        }
        faces = next;
    }
    Ok(builder.finish(GraphKind::RandomApollonian, iterations, Some(seed)))
}

struct Builder {
    adjacency: Vec<Vec<NodeId>>,
    node_generation: Vec<u32>,
    face_log: Vec<FaceRecord>,
}

impl Builder {
    fn triangle() -> Self {
        let n = |i| NodeId(i);
        Builder {
            adjacency: vec![vec![n(1), n(2)], vec![n(0), n(2)], vec![n(0), n(1)]],
            node_generation: vec![0; 3],
            face_log: Vec::new(),
        }
    }

    /// Insert a node into `face` and return its three child faces in
    /// corner-sorted order.
    fn subdivide(&mut self, face: [NodeId; 3], generation: u32) -> [[NodeId; 3]; 3] {
        let new = NodeId::from(self.adjacency.len());
        self.adjacency.push(face.to_vec());
        self.node_generation.push(generation);
        for &c in &face {
            self.adjacency[c.index()].push(new);
        }
        self.face_log.push(FaceRecord {
            corners: face,
            inserted: new,
        });
        let [a, b, c] = face;
        // `new` is the largest id so far and the corners are sorted, so every
        // child triple is already ascending.
        [[a, b, new], [a, c, new], [b, c, new]]
    }

    fn finish(mut self, kind: GraphKind, generation: u32, seed: Option<u64>) -> ApollonianGraph {
        for list in &mut self.adjacency {
            list.sort_unstable();
        }
        ApollonianGraph {
            kind,
            generation,
            seed,
            adjacency: self.adjacency,
            node_generation: self.node_generation,
            face_log: self.face_log,
        }
    }
}

impl ApollonianGraph {
    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// Number of construction rounds `K` (the iteration count for random
    /// networks).
    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(NodeId::from)
    }

    /// Neighbours of `node`, ascending.
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node.index()]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node.index()].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn node_generation(&self, node: NodeId) -> u32 {
        self.node_generation[node.index()]
    }

    pub fn node_generations(&self) -> &[u32] {
        &self.node_generation
    }

    pub fn face_log(&self) -> &[FaceRecord] {
        &self.face_log
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.node_count()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.contains(a) && self.adjacency[a.index()].binary_search(&b).is_ok()
    }

    /// Ids of the nodes created in round `g`, ascending.
    pub fn nodes_of_generation(&self, g: u32) -> Result<Vec<NodeId>> {
        if g > self.generation {
            return Err(Error::param(format!(
                "generation {g} out of range 0..={}",
                self.generation
            )));
        }
        Ok(self
            .nodes()
            .filter(|n| self.node_generation[n.index()] == g)
            .collect())
    }

    /// Nodes of the final round (`g = K`).
    pub fn last_generation(&self) -> Vec<NodeId> {
        self.nodes_of_generation(self.generation)
            .expect("own generation is in range")
    }

    /// Edges `(i, j)` with `i < j`, lexicographically sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes()
            .flat_map(|i| {
                self.adjacency[i.index()]
                    .iter()
                    .filter(move |&&j| i < j)
                    .map(move |&j| (i, j))
            })
            .collect()
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            kind: self.kind,
            generation: self.generation,
            seed: self.seed,
            rng: (self.kind == GraphKind::RandomApollonian).then(|| RANDOM_ALGORITHM.to_string()),
            nodes: self
                .nodes()
                .map(|id| NodeEntry {
                    id: id.0,
                    gen: self.node_generation(id),
                })
                .collect(),
            edges: self.edges().into_iter().map(|(a, b)| [a.0, b.0]).collect(),
        }
    }

    /// Serialize to the JSON graph document (single line plus newline).
    pub fn serialize(&self) -> String {
        let mut s = serde_json::to_string(&self.to_document()).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn deserialize(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text).map_err(|e| {
            Error::format(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        Self::from_document(&doc)
    }

    /// Validate a document and rebuild the graph. The face log of a loaded
    /// graph is empty.
    pub fn from_document(doc: &GraphDocument) -> Result<Self> {
        if doc.nodes.len() < 3 {
            return Err(Error::format("nodes", "a network has at least 3 nodes"));
        }
        for (pos, node) in doc.nodes.iter().enumerate() {
            if node.id as usize != pos {
                return Err(Error::format(
                    format!("nodes[{pos}].id"),
                    format!("expected id {pos}, found {}", node.id),
                ));
            }
            if node.gen > doc.generation {
                return Err(Error::format(
                    format!("nodes[{pos}].gen"),
                    format!("generation {} exceeds network generation {}", node.gen, doc.generation),
                ));
            }
            if (pos < 3) != (node.gen == 0) {
                return Err(Error::format(
                    format!("nodes[{pos}].gen"),
                    "exactly nodes 0, 1, 2 carry generation 0",
                ));
            }
        }
        let n = doc.nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut prev: Option<[u32; 2]> = None;
        for (pos, &[a, b]) in doc.edges.iter().enumerate() {
            let loc = || format!("edges[{pos}]");
            if a == b {
                return Err(Error::format(loc(), format!("self-loop on node {a}")));
            }
            if a > b {
                return Err(Error::format(loc(), format!("edge [{a}, {b}] is not ordered i < j")));
            }
            if b as usize >= n {
                return Err(Error::format(loc(), format!("node {b} does not exist")));
            }
            match prev {
                Some(p) if p == [a, b] => {
                    return Err(Error::format(loc(), format!("duplicate edge [{a}, {b}]")))
                }
                Some(p) if p > [a, b] => {
                    return Err(Error::format(loc(), "edges are not sorted lexicographically"))
                }
                _ => {}
            }
            prev = Some([a, b]);
            adjacency[a as usize].push(NodeId(b));
            adjacency[b as usize].push(NodeId(a));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let graph = ApollonianGraph {
            kind: doc.kind,
            generation: doc.generation,
            seed: doc.seed,
            adjacency,
            node_generation: doc.nodes.iter().map(|n| n.gen).collect(),
            face_log: Vec::new(),
        };
        match doc.kind {
            GraphKind::Apollonian => graph.check_deterministic_counts()?,
            GraphKind::RandomApollonian => {
                if doc.seed.is_none() {
                    return Err(Error::format("seed", "random networks must record their seed"));
                }
                if let Some(rng) = &doc.rng {
                    if rng != RANDOM_ALGORITHM {
                        return Err(Error::format(
                            "rng",
                            format!("unknown generator {rng:?}, expected {RANDOM_ALGORITHM:?}"),
                        ));
                    }
                }
                if 3 * (n - 3) + 3 != graph.edge_count() {
                    return Err(Error::format(
                        "edges",
                        "each inserted node must contribute exactly three edges",
                    ));
                }
            }
        }
        Ok(graph)
    }

    fn check_deterministic_counts(&self) -> Result<()> {
        let k = self.generation;
        if k > MAX_GENERATION {
            return Err(Error::format("generation", format!("generation {k} exceeds cap")));
        }
        let counts = closed_form_counts(k)?;
        if self.node_count() as u64 != counts.nodes {
            return Err(Error::format(
                "nodes",
                format!("expected {} nodes for generation {k}, found {}", counts.nodes, self.node_count()),
            ));
        }
        if self.edge_count() as u64 != counts.edges {
            return Err(Error::format(
                "edges",
                format!("expected {} edges for generation {k}, found {}", counts.edges, self.edge_count()),
            ));
        }
        for g in 0..=k {
            let have = self.node_generation.iter().filter(|&&x| x == g).count() as u64;
            if have != generation_size(g) {
                return Err(Error::format(
                    "nodes",
                    format!("expected {} nodes of generation {g}, found {have}", generation_size(g)),
                ));
            }
        }
        if k >= 1 {
            for (a, b) in self.edges() {
                if self.node_generation(a) == k && self.node_generation(b) == k {
                    return Err(Error::format(
                        "edges",
                        format!("last-generation nodes {a} and {b} are adjacent"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: u32,
    pub gen: u32,
}

/// On-disk graph document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub kind: GraphKind,
    pub generation: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<[u32; 2]>,
}
