use super::{Marker, Point, TriMesh};
use crate::error::{Error, Result};

/// Default matching tolerance: `1e-9` times the bounding-box diagonal.
pub fn default_tolerance(mesh: &TriMesh) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &mesh.nodes {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    1e-9 * (hi[0] - lo[0]).hypot(hi[1] - lo[1])
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Identify outer-boundary nodes that coincide after translation by either
/// period vector. Every outer-boundary node must have a partner.
pub fn match_periodic_nodes(mesh: &TriMesh, period: [Point; 2], tol: f64) -> Result<TriMesh> {
    let mut on_outer = vec![false; mesh.nodes.len()];
    for e in &mesh.boundary_edges {
        if e.marker == Marker::Outer {
            on_outer[e.nodes[0]] = true;
            on_outer[e.nodes[1]] = true;
        }
    }
    let outer: Vec<usize> = (0..mesh.nodes.len()).filter(|&i| on_outer[i]).collect();
    // sorted by x so candidate partners are found by binary search
    let mut by_x = outer.clone();
    by_x.sort_by(|&a, &b| mesh.nodes[a][0].total_cmp(&mesh.nodes[b][0]));
    let xs: Vec<f64> = by_x.iter().map(|&i| mesh.nodes[i][0]).collect();

    let mut parent: Vec<usize> = (0..mesh.nodes.len()).collect();
    for &i in &outer {
        let p = mesh.nodes[i];
        let mut matched = false;
        for shift in [period[0], period[1]] {
            for sign in [1.0, -1.0] {
                let q = [p[0] + sign * shift[0], p[1] + sign * shift[1]];
                let start = xs.partition_point(|&x| x < q[0] - tol);
                for k in start..by_x.len() {
                    if xs[k] > q[0] + tol {
                        break;
                    }
                    let j = by_x[k];
                    let r = mesh.nodes[j];
                    if (r[0] - q[0]).abs() <= tol && (r[1] - q[1]).abs() <= tol {
                        matched = true;
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
        if !matched {
            return Err(Error::Matching {
                node: i,
                x: p[0],
                y: p[1],
            });
        }
    }

    let mut classes: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &i in &outer {
        let root = find(&mut parent, i);
        classes.entry(root).or_default().push(i);
    }
    let mut out = mesh.clone();
    out.periodic_classes = classes.into_values().filter(|c| c.len() > 1).collect();
    Ok(out)
}
