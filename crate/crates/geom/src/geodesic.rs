//! Vertex-joint geodesic distances over the body submesh.
//!
//! Each joint is anchored to its closest body vertex; distances are
//! single-source shortest paths along mesh edges from that anchor. Columns
//! are independent and computed in parallel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::GeomError;
use crate::mesh::{compact_indices, edges_within, mesh_edges};
use crate::types::{dist3, RiggedCharacter};

/// Minimum edge weight substituted for degenerate zero-length edges.
pub const DEGENERATE_EDGE_WEIGHT: f64 = 1e-9;

/// Dense body-vertex x joint geodesic distance matrix.
#[derive(Debug, Clone)]
pub struct GeodesicMatrix {
    /// Row-major `n_body x n_joints` distances in meters.
    pub distances: Vec<f64>,
    /// Per-joint anchor vertex, as an original mesh vertex index.
    pub anchor_vertex: Vec<usize>,
    /// Body row -> original vertex index.
    pub body_index: Vec<usize>,
    pub n_body: usize,
    pub n_joints: usize,
}

impl GeodesicMatrix {
    pub fn get(&self, body_row: usize, joint: usize) -> f64 {
        self.distances[body_row * self.n_joints + joint]
    }

    pub fn max_value(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, ties broken by vertex index for determinism.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(n: usize, adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: 0.0, vertex: source });
    while let Some(HeapEntry { dist: d, vertex: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(HeapEntry { dist: nd, vertex: w });
            }
        }
    }
    dist
}

/// Compute the geodesic matrix for the body submesh selected by `body_mask`
/// (true = body vertex).
///
/// Unreachable vertices receive the matrix-wide maximum finite distance plus
/// one so downstream attention still sees finite logits.
pub fn compute_geodesic_matrix(
    character: &RiggedCharacter,
    body_mask: &[bool],
) -> Result<GeodesicMatrix, GeomError> {
    let (body_index, inverse) = compact_indices(body_mask);
    let n_body = body_index.len();
    if n_body == 0 {
        return Err(GeomError::NoBodyVertices);
    }
    let n_joints = character.joint_count();

    let all_edges = mesh_edges(&character.faces);
    let body_edges = edges_within(&all_edges, body_mask);
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_body];
    for (a, b) in body_edges {
        let mut len = dist3(character.vertices[a], character.vertices[b]);
        if len <= 0.0 {
            log::warn!("degenerate zero-length edge ({a}, {b}); using weight {DEGENERATE_EDGE_WEIGHT}");
            len = DEGENERATE_EDGE_WEIGHT;
        }
        let (ra, rb) = (inverse[a], inverse[b]);
        adj[ra].push((rb, len));
        adj[rb].push((ra, len));
    }

    // Anchor each joint at the Euclidean-closest body vertex, lowest original
    // index on ties.
    let mut anchor_vertex = Vec::with_capacity(n_joints);
    for j in 0..n_joints {
        let joint = character.joints[j];
        let mut best = body_index[0];
        let mut best_d = f64::INFINITY;
        for &v in &body_index {
            let d = dist3(character.vertices[v], joint);
            if d < best_d {
                best_d = d;
                best = v;
            }
        }
        anchor_vertex.push(best);
    }

    let columns: Vec<Vec<f64>> = (0..n_joints)
        .into_par_iter()
        .map(|j| dijkstra(n_body, &adj, inverse[anchor_vertex[j]]))
        .collect();

    let mut max_finite: f64 = 0.0;
    for col in &columns {
        for &d in col {
            if d.is_finite() {
                max_finite = max_finite.max(d);
            }
        }
    }
    let sentinel = max_finite + 1.0;

    let mut distances = vec![0.0; n_body * n_joints];
    for (j, col) in columns.iter().enumerate() {
        for (row, &d) in col.iter().enumerate() {
            distances[row * n_joints + j] = if d.is_finite() { d } else { sentinel };
        }
    }

    Ok(GeodesicMatrix { distances, anchor_vertex, body_index, n_body, n_joints })
}
