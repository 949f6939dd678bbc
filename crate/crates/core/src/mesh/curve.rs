use std::collections::BTreeMap;

use super::{dist, Marker, Point, TriMesh};
use crate::error::{Error, Result};

/// Closed polygonal curve traced from marked boundary edges of a bulk mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveMesh {
    pub nodes: Vec<Point>,
    /// Segment `k` joins `segments[k][0]` to `segments[k][1]`; consecutive
    /// segments share a node and the last one closes the loop.
    pub segments: Vec<[usize; 2]>,
    /// Bulk-mesh index of each curve node.
    pub parent_indices: Vec<usize>,
}

impl CurveMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_length(&self, k: usize) -> f64 {
        let [a, b] = self.segments[k];
        dist(self.nodes[a], self.nodes[b])
    }

    pub fn total_length(&self) -> f64 {
        (0..self.segments.len()).map(|k| self.segment_length(k)).sum()
    }

    /// Longest segment.
    pub fn h_max(&self) -> f64 {
        (0..self.segments.len())
            .map(|k| self.segment_length(k))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n < 3 || self.segments.len() != n || self.parent_indices.len() != n {
            return Err(Error::Topology(format!(
                "curve with {n} nodes, {} segments and {} parents is not a closed loop",
                self.segments.len(),
                self.parent_indices.len()
            )));
        }
        let mut degree = vec![0usize; n];
        for (k, s) in self.segments.iter().enumerate() {
            if s[0] >= n || s[1] >= n {
                return Err(Error::Topology(format!("segment {k} out of range")));
            }
            degree[s[0]] += 1;
            degree[s[1]] += 1;
            if !(self.segment_length(k) > 0.0) {
                return Err(Error::Topology(format!("segment {k} has zero length")));
            }
        }
        if let Some(i) = degree.iter().position(|&d| d != 2) {
            return Err(Error::Topology(format!("curve node {i} has degree {}", degree[i])));
        }
        let mut parents = self.parent_indices.clone();
        parents.sort_unstable();
        if parents.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Topology("curve parent indices are not injective".into()));
        }
        Ok(())
    }
}

/// Trace the single closed loop formed by boundary edges carrying `marker`.
/// Orientation follows the edges, which run counter-clockwise around the
/// bulk domain; the walk starts at the marked node with the smallest index.
pub fn extract_boundary_curve(mesh: &TriMesh, marker: Marker) -> Result<CurveMesh> {
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    let mut count = 0;
    for e in mesh.boundary_edges.iter().filter(|e| e.marker == marker) {
        count += 1;
        if next.insert(e.nodes[0], e.nodes[1]).is_some() {
            return Err(Error::Topology(format!(
                "{marker} boundary branches at node {}",
                e.nodes[0]
            )));
        }
    }
    if count == 0 {
        return Err(Error::Topology(format!("mesh has no {marker} boundary edges")));
    }
    let (&start, _) = next.iter().next().unwrap();
    let mut parent_indices = vec![start];
    let mut cur = next[&start];
    while cur != start {
        if parent_indices.len() > count {
            break;
        }
        parent_indices.push(cur);
        cur = *next.get(&cur).ok_or_else(|| {
            Error::Topology(format!("{marker} boundary is open at node {cur}"))
        })?;
    }
    if parent_indices.len() != count {
        return Err(Error::Topology(format!(
            "{marker} boundary edges form more than one loop ({} of {count} edges on the first)",
            parent_indices.len()
        )));
    }
    let n = parent_indices.len();
    let curve = CurveMesh {
        nodes: parent_indices.iter().map(|&p| mesh.nodes[p]).collect(),
        segments: (0..n).map(|k| [k, (k + 1) % n]).collect(),
        parent_indices,
    };
    curve.validate()?;
    Ok(curve)
}
