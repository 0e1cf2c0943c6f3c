//! Mesh connectivity helpers: unique edges, adjacency, partition utilities.

use crate::types::RiggedCharacter;

/// Unique undirected edges of the triangle mesh, as sorted `(lo, hi)` pairs
/// in deterministic lexicographic order.
pub fn mesh_edges(faces: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(faces.len() * 3);
    for f in faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            edges.push(if a < b { (a, b) } else { (b, a) });
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Per-vertex neighbor lists (sorted, deduplicated).
pub fn vertex_adjacency(n_vertices: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n_vertices];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Edges with exactly one endpoint flagged as apparel, sorted index pairs.
pub fn boundary_edges(character: &RiggedCharacter, apparel_mask: &[bool]) -> Vec<(usize, usize)> {
    mesh_edges(&character.faces)
        .into_iter()
        .filter(|&(a, b)| apparel_mask[a] != apparel_mask[b])
        .collect()
}

/// Edges with both endpoints inside the given vertex set.
pub fn edges_within(edges: &[(usize, usize)], mask: &[bool]) -> Vec<(usize, usize)> {
    edges.iter().copied().filter(|&(a, b)| mask[a] && mask[b]).collect()
}

/// Indices of vertices selected by the mask, in increasing order, plus the
/// inverse map from original vertex index to compacted row (usize::MAX when
/// not selected).
pub fn compact_indices(mask: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut selected = Vec::new();
    let mut inverse = vec![usize::MAX; mask.len()];
    for (i, &m) in mask.iter().enumerate() {
        if m {
            inverse[i] = selected.len();
            selected.push(i);
        }
    }
    (selected, inverse)
}

/// Connected components over the given vertex subset using only edges whose
/// endpoints are both in the subset. Returns a component id per compacted row.
pub fn connected_components(selected: &[usize], inverse: &[usize], edges: &[(usize, usize)]) -> Vec<usize> {
    let n = selected.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        let (ra, rb) = (inverse[a], inverse[b]);
        if ra != usize::MAX && rb != usize::MAX {
            adj[ra].push(rb);
            adj[rb].push(ra);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}
