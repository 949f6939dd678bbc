use std::fmt::Write as _;
use std::path::Path;

use super::{signed_area2, BoundaryEdge, DomainTag, Marker, TriMesh};
use crate::error::{Error, Result};

const HEADER: &str = "TSFEM-MESH 1";

pub fn write_mesh_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(
        s,
        "{} {} {}",
        mesh.nodes.len(),
        mesh.triangles.len(),
        mesh.boundary_edges.len()
    );
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for e in &mesh.boundary_edges {
        let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.marker);
    }
    if !mesh.periodic_classes.is_empty() {
        let _ = writeln!(s, "PERIODIC {}", mesh.periodic_classes.len());
        for class in &mesh.periodic_classes {
            let line: Vec<String> = class.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
    }
    s
}

pub fn write_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    mesh.validate()?;
    std::fs::write(path, write_mesh_string(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_mesh_str(&text, &path.display().to_string())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    source: &'a str,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-blank line with its 1-based number.
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            if !line.trim().is_empty() {
                return Ok((i + 1, line.trim()));
            }
        }
        Err(self.err(self.last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.to_string(),
            line,
            message: message.into(),
        }
    }
}

/// Parse mesh text; `source` names the origin in error messages.
///
/// The format carries no domain tag: meshes with hole markers are tagged
/// `cell_exterior`, all others `macro`.
pub fn read_mesh_str(text: &str, source: &str) -> Result<TriMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        source,
        last: 0,
    };
    let (no, header) = lines.next("header")?;
    if header != HEADER {
        return Err(lines.err(no, format!("malformed header `{header}`, expected `{HEADER}`")));
    }
    let (no, counts) = lines.next("counts")?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| lines.err(no, "counts must be three non-negative integers"))?;
    let [n_nodes, n_tri, n_edges] = counts[..] else {
        return Err(lines.err(no, "counts line must hold exactly three integers"));
    };

    let mut nodes = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let (no, line) = lines.next("node line")?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| lines.err(no, format!("node {i}: coordinates must be numbers")))?;
        match v[..] {
            [x, y] if x.is_finite() && y.is_finite() => nodes.push([x, y]),
            [_, _] => return Err(lines.err(no, format!("node {i}: non-finite coordinate"))),
            _ => return Err(lines.err(no, format!("node {i}: expected `x y`"))),
        }
    }

    let index = |lines: &Lines, no: usize, tok: &str, what: &str| -> Result<usize> {
        let v: usize = tok
            .parse()
            .map_err(|_| lines.err(no, format!("{what}: `{tok}` is not a node index")))?;
        if v >= n_nodes {
            return Err(lines.err(
                no,
                format!("{what}: node index {v} out of range ({n_nodes} nodes)"),
            ));
        }
        Ok(v)
    };

    let mut triangles = Vec::with_capacity(n_tri);
    for t in 0..n_tri {
        let (no, line) = lines.next("triangle line")?;
        let what = format!("triangle {t}");
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(lines.err(no, format!("{what}: expected `i j k`")));
        }
        let tri = [
            index(&lines, no, tok[0], &what)?,
            index(&lines, no, tok[1], &what)?,
            index(&lines, no, tok[2], &what)?,
        ];
        if signed_area2(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) <= 0.0 {
            return Err(lines.err(
                no,
                format!("{what}: non-positive signed area (clockwise or degenerate)"),
            ));
        }
        triangles.push(tri);
    }

    let mut boundary_edges = Vec::with_capacity(n_edges);
    for k in 0..n_edges {
        let (no, line) = lines.next("boundary edge line")?;
        let what = format!("boundary edge {k}");
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(lines.err(no, format!("{what}: expected `i j marker`")));
        }
        let marker: Marker = tok[2].parse().map_err(|m| lines.err(no, format!("{what}: {m}")))?;
        boundary_edges.push(BoundaryEdge {
            nodes: [index(&lines, no, tok[0], &what)?, index(&lines, no, tok[1], &what)?],
            marker,
        });
    }

    let mut periodic_classes = Vec::new();
    if let Ok((no, line)) = lines.next("") {
        let n_classes = line
            .strip_prefix("PERIODIC")
            .and_then(|r| r.trim().parse::<usize>().ok())
            .ok_or_else(|| lines.err(no, format!("unexpected trailing content `{line}`")))?;
        for c in 0..n_classes {
            let (no, line) = lines.next("periodic class line")?;
            let what = format!("periodic class {c}");
            let class = line
                .split_whitespace()
                .map(|tok| index(&lines, no, tok, &what))
                .collect::<Result<Vec<_>>>()?;
            periodic_classes.push(class);
        }
        if let Ok((no, line)) = lines.next("") {
            return Err(lines.err(no, format!("unexpected trailing content `{line}`")));
        }
    }

    let domain_tag = if boundary_edges.iter().any(|e| e.marker == Marker::Hole) {
        DomainTag::CellExterior
    } else {
        DomainTag::Macro
    };
    let mesh = TriMesh {
        nodes,
        triangles,
        boundary_edges,
        periodic_classes,
        domain_tag,
    };
    mesh.validate()?;
    Ok(mesh)
}
