//! Graphs with rays and functions on them.
//!
//! A [`GraphWithRays`] is a finite connected simple graph `K` with `N`
//! half-lines `{1, 2, …}` attached by an edge from position 1 to a joint
//! vertex of `K`. Several rays may share a joint. Rays are indexed from 0
//! internally and labelled from 1.

mod function;
pub mod poly;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

pub use function::{apply_graph_laplacian, pair, space_membership, RayFunction, RayPart, SpaceKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("the finite part K has no vertices")]
    EmptyK,
    #[error("vertex `{0}` is listed twice")]
    DuplicateVertex(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("self-loop at `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(String, String),
    #[error("the finite part K is disconnected")]
    DisconnectedK,
    #[error("joint `{0}` is not a vertex of K")]
    UnknownJoint(String),
    #[error("at least one ray is required")]
    NoRays,
    #[error("pairing diverges on ray {0}: both factors have nonzero tails")]
    NonSummablePair(usize),
    #[error("invalid site `{0}`")]
    InvalidSite(String),
}

/// A vertex of `K` or a position `pos ≥ 1` on ray `ray` (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    K(usize),
    Ray { ray: usize, pos: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphWithRays {
    vertices: Vec<String>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    joints: Vec<usize>,
}

impl GraphWithRays {
    /// Validates and builds a graph; vertex order is the insertion order.
    pub fn build<V: AsRef<str>>(
        vertices: &[V],
        edges: &[(V, V)],
        joints: &[V],
    ) -> Result<Self, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::EmptyK);
        }
        let mut index = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.as_ref().to_string(), i).is_some() {
                return Err(GraphError::DuplicateVertex(v.as_ref().to_string()));
            }
        }
        let lookup = |v: &V| {
            index.get(v.as_ref()).copied().ok_or_else(|| GraphError::UnknownVertex(v.as_ref().into()))
        };
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); vertices.len()];
        let mut edge_list = Vec::new();
        for (a, b) in edges {
            let (i, j) = (lookup(a)?, lookup(b)?);
            if i == j {
                return Err(GraphError::SelfLoop(a.as_ref().into()));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(GraphError::DuplicateEdge(a.as_ref().into(), b.as_ref().into()));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
            edge_list.push((i.min(j), i.max(j)));
        }
        if joints.is_empty() {
            return Err(GraphError::NoRays);
        }
        let joints = joints
            .iter()
            .map(|x| index.get(x.as_ref()).copied().ok_or_else(|| GraphError::UnknownJoint(x.as_ref().into())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut reached = vec![false; vertices.len()];
        let mut queue = VecDeque::from([0]);
        reached[0] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &adjacency[x] {
                if !reached[y] {
                    reached[y] = true;
                    queue.push_back(y);
                }
            }
        }
        if reached.iter().any(|r| !r) {
            return Err(GraphError::DisconnectedK);
        }
        Ok(GraphWithRays {
            vertices: vertices.iter().map(|v| v.as_ref().to_string()).collect(),
            edges: edge_list,
            adjacency,
            joints,
        })
    }

    /// `K = {0}` with `n` rays joined at `0`.
    pub fn star(n: usize) -> Self {
        Self::build(&["0"], &[], &vec!["0"; n]).expect("star graph is valid")
    }

    pub fn k_len(&self) -> usize {
        self.vertices.len()
    }

    pub fn ray_count(&self) -> usize {
        self.joints.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    /// Joint vertex of each ray.
    pub fn joints(&self) -> &[usize] {
        &self.joints
    }

    /// Rays attached at `x`.
    pub fn rays_at(&self, x: usize) -> Vec<usize> {
        (0..self.ray_count()).filter(|&a| self.joints[a] == x).collect()
    }

    /// Distinct joint vertices in vertex order.
    pub fn joint_vertices(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.joints.iter().copied().collect();
        set.into_iter().collect()
    }

    /// All of `K`, then positions `1..=depth` on each ray in ray order.
    pub fn window(&self, depth: usize) -> Vec<Site> {
        let mut sites: Vec<Site> = (0..self.k_len()).map(Site::K).collect();
        for ray in 0..self.ray_count() {
            sites.extend((1..=depth).map(|pos| Site::Ray { ray, pos }));
        }
        sites
    }

    /// The `count` sites closest to `K`: all of `K` first, then ray
    /// positions layer by layer.
    pub fn nearest_sites(&self, count: usize) -> Vec<Site> {
        let mut sites: Vec<Site> = (0..self.k_len()).map(Site::K).collect();
        let mut pos = 1;
        while sites.len() < count {
            sites.extend((0..self.ray_count()).map(|ray| Site::Ray { ray, pos }));
            pos += 1;
        }
        sites.truncate(count);
        sites
    }

    /// `"k:<name>"` or `"r<ray>:<pos>"` with rays labelled from 1.
    pub fn site_label(&self, site: Site) -> String {
        match site {
            Site::K(x) => format!("k:{}", self.vertices[x]),
            Site::Ray { ray, pos } => format!("r{}:{}", ray + 1, pos),
        }
    }

    pub fn parse_site(&self, label: &str) -> Result<Site, GraphError> {
        let bad = || GraphError::InvalidSite(label.to_string());
        if let Some(name) = label.strip_prefix("k:") {
            return self.vertex_index(name).map(Site::K).ok_or_else(bad);
        }
        let rest = label.strip_prefix('r').ok_or_else(bad)?;
        let (ray, pos) = rest.split_once(':').ok_or_else(bad)?;
        let ray: usize = ray.parse().map_err(|_| bad())?;
        let pos: usize = pos.parse().map_err(|_| bad())?;
        if ray == 0 || ray > self.ray_count() || pos == 0 {
            return Err(bad());
        }
        Ok(Site::Ray { ray: ray - 1, pos })
    }
}

impl fmt::Display for GraphWithRays {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let joints: Vec<&str> = self.joints.iter().map(|&x| self.vertices[x].as_str()).collect();
        write!(
            f,
            "K = {{{}}}, |E0| = {}, joints = [{}]",
            self.vertices.join(", "),
            self.edges.len(),
            joints.join(", ")
        )
    }
}
