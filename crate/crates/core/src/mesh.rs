//! Structured triangular meshes of the unit square, Crouzeix-Raviart degrees
//! of freedom, the dual mesh of control volumes, and square subdomain
//! partitions with their interface structure.
//!
//! All edge bookkeeping is done with integer midpoint coordinates in units of
//! `1/(2n)`, so dof ordering and subdomain classification are exact: an edge
//! midpoint lies on a partition line iff its doubled coordinate is divisible
//! by `2n/m`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A point in the plane.
pub type Point = [f64; 2];

/// Which diagonal splits each grid cell into two triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagonalOrientation {
    /// Diagonal from the bottom-left to the top-right cell corner (default).
    #[serde(rename = "bltr")]
    BottomLeftTopRight,
    /// Diagonal from the bottom-right to the top-left cell corner.
    #[serde(rename = "brtl")]
    BottomRightTopLeft,
}

impl Default for DiagonalOrientation {
    fn default() -> Self {
        DiagonalOrientation::BottomLeftTopRight
    }
}

impl std::str::FromStr for DiagonalOrientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bltr" => Ok(DiagonalOrientation::BottomLeftTopRight),
            "brtl" => Ok(DiagonalOrientation::BottomRightTopLeft),
            other => Err(Error::InvalidParameter(format!(
                "unknown diagonal orientation '{other}' (expected 'bltr' or 'brtl')"
            ))),
        }
    }
}

/// A mesh edge. Its midpoint carries the Crouzeix-Raviart degree of freedom.
#[derive(Clone, Debug)]
pub struct Edge {
    /// Endpoint vertex indices, ascending.
    pub vertices: [usize; 2],
    /// Adjacent triangles; the second entry is `None` on the domain boundary.
    pub triangles: (usize, Option<usize>),
    /// True when the edge lies on the boundary of the unit square.
    pub boundary: bool,
    /// Edge midpoint in physical coordinates.
    pub midpoint: Point,
    /// Edge midpoint in units of `1/(2n)`; exact, used for ordering and
    /// partition classification.
    pub grid_mid: [usize; 2],
}

/// Conforming triangulation of the unit square into `2 n^2` triangles.
#[derive(Clone, Debug)]
pub struct TriMesh {
    /// Number of grid cells per side.
    pub blocks: usize,
    /// Cell-splitting diagonal.
    pub diag: DiagonalOrientation,
    /// Vertex coordinates; vertex `j*(n+1)+i` sits at `(i/n, j/n)`.
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Edges sorted lexicographically by midpoint `(y, x)`.
    pub edges: Vec<Edge>,
    /// For each triangle, the edge opposite each local vertex.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Mesh parameter: the longest edge, `sqrt(2)/n` here.
    pub h: f64,
}

impl TriMesh {
    /// Coordinates of a triangle's three vertices.
    pub fn tri_coords(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Triangle area (positive; triangles are stored counterclockwise).
    pub fn tri_area(&self, t: usize) -> f64 {
        let [p, q, r] = self.tri_coords(t);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    /// Triangle barycenter.
    pub fn centroid(&self, t: usize) -> Point {
        let [p, q, r] = self.tri_coords(t);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Number of edges, which is also the number of CR unknowns before
    /// boundary elimination.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Plain-text dump: `v x y`, `t i j k`, `e i j b` lines, in index order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {:.17e} {:.17e}\n", v[0], v[1]));
        }
        for t in &self.triangles {
            out.push_str(&format!("t {} {} {}\n", t[0], t[1], t[2]));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "e {} {} {}\n",
                e.vertices[0],
                e.vertices[1],
                u8::from(e.boundary)
            ));
        }
        out
    }
}

/// Builds the structured `n x n` grid mesh, each cell split by `diag`.
pub fn build_structured_mesh(n: usize, diag: DiagonalOrientation) -> Result<TriMesh> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "mesh needs at least 2 cells per side, got {n}"
        )));
    }
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }

    let vid = |i: usize, j: usize| j * np + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for by in 0..n {
        for bx in 0..n {
            let a = vid(bx, by);
            let b = vid(bx + 1, by);
            let c = vid(bx + 1, by + 1);
            let d = vid(bx, by + 1);
            match diag {
                DiagonalOrientation::BottomLeftTopRight => {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                }
                DiagonalOrientation::BottomRightTopLeft => {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
    }

    // Collect unique edges with their adjacent triangles.
    let mut edge_tris: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let u = tri[i];
            let v = tri[(i + 1) % 3];
            let key = (u.min(v), u.max(v));
            edge_tris.entry(key).or_default().push(t);
        }
    }

    let grid_of = |v: usize| (v % np, v / np);
    let mut edges: Vec<Edge> = edge_tris
        .into_iter()
        .map(|((u, v), tris)| {
            debug_assert!(matches!(tris.len(), 1 | 2));
            let (ui, uj) = grid_of(u);
            let (vi, vj) = grid_of(v);
            let grid_mid = [ui + vi, uj + vj];
            let pu = vertices[u];
            let pv = vertices[v];
            Edge {
                vertices: [u, v],
                triangles: (tris[0], tris.get(1).copied()),
                boundary: tris.len() == 1,
                midpoint: [0.5 * (pu[0] + pv[0]), 0.5 * (pu[1] + pv[1])],
                grid_mid,
            }
        })
        .collect();
    edges.sort_by_key(|e| (e.grid_mid[1], e.grid_mid[0]));

    let edge_index: BTreeMap<(usize, usize), usize> = edges
        .iter()
        .enumerate()
        .map(|(idx, e)| ((e.vertices[0], e.vertices[1]), idx))
        .collect();

    let mut triangle_edges = Vec::with_capacity(triangles.len());
    for tri in &triangles {
        let mut te = [0usize; 3];
        for (i, slot) in te.iter_mut().enumerate() {
            let u = tri[(i + 1) % 3];
            let v = tri[(i + 2) % 3];
            *slot = edge_index[&(u.min(v), u.max(v))];
        }
        triangle_edges.push(te);
    }

    let h = edges
        .iter()
        .map(|e| {
            let [u, v] = e.vertices;
            let d = [
                vertices[v][0] - vertices[u][0],
                vertices[v][1] - vertices[u][1],
            ];
            (d[0] * d[0] + d[1] * d[1]).sqrt()
        })
        .fold(0.0, f64::max);

    Ok(TriMesh {
        blocks: n,
        diag,
        vertices,
        triangles,
        edges,
        triangle_edges,
        h,
    })
}

/// Partition of edge-midpoint unknowns into free and Dirichlet sets.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// One unknown per edge.
    pub n_dofs: usize,
    /// Interior edges, ascending.
    pub free_dofs: Vec<usize>,
    /// Domain-boundary edges, ascending; eliminated by homogeneous Dirichlet
    /// conditions.
    pub boundary_dofs: Vec<usize>,
    /// Edge index to position within `free_dofs`.
    pub free_index: Vec<Option<usize>>,
}

/// Enumerates CR unknowns: one per edge, free iff the edge is interior.
pub fn enumerate_cr_dofs(mesh: &TriMesh) -> DofMap {
    let n_dofs = mesh.edges.len();
    let mut free_dofs = Vec::new();
    let mut boundary_dofs = Vec::new();
    let mut free_index = vec![None; n_dofs];
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.boundary {
            boundary_dofs.push(e);
        } else {
            free_index[e] = Some(free_dofs.len());
            free_dofs.push(e);
        }
    }
    DofMap {
        n_dofs,
        free_dofs,
        boundary_dofs,
        free_index,
    }
}

/// One oriented piece of a control-volume boundary, lying inside one triangle.
#[derive(Clone, Debug)]
pub struct VolumeSegment {
    /// Segment endpoints, counterclockwise around the control volume.
    pub a: Point,
    pub b: Point,
    /// Segment midpoint (quadrature node for boundary-flux integrals).
    pub mid: Point,
    /// Segment length.
    pub length: f64,
    /// Outward unit normal of the control volume.
    pub normal: [f64; 2],
    /// Triangle containing the segment; fixes the trial-side gradient.
    pub triangle: usize,
}

/// Control volume around one edge midpoint: endpoints of the edge joined to
/// the barycenters of the adjacent triangles.
#[derive(Clone, Debug)]
pub struct ControlVolume {
    /// Counterclockwise boundary pieces interior to the mesh. For boundary
    /// edges the closing piece along the domain boundary is omitted.
    pub segments: Vec<VolumeSegment>,
    /// Volume area.
    pub area: f64,
}

/// Dual mesh: one control volume per edge, indexed like `TriMesh::edges`.
#[derive(Clone, Debug)]
pub struct DualMesh {
    pub volumes: Vec<ControlVolume>,
}

fn polygon_signed_area(poly: &[Point]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

fn segment(a: Point, b: Point, triangle: usize) -> VolumeSegment {
    let d = [b[0] - a[0], b[1] - a[1]];
    let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
    VolumeSegment {
        a,
        b,
        mid: [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])],
        length,
        // Clockwise rotation of the direction: outward for a counterclockwise
        // traversal.
        normal: [d[1] / length, -d[0] / length],
        triangle,
    }
}

/// Builds the dual mesh of control volumes.
pub fn build_control_volumes(mesh: &TriMesh) -> Result<DualMesh> {
    let mut volumes = Vec::with_capacity(mesh.edges.len());
    for edge in &mesh.edges {
        let p0 = mesh.vertices[edge.vertices[0]];
        let p1 = mesh.vertices[edge.vertices[1]];
        let (t0, t1) = edge.triangles;
        let volume = match t1 {
            Some(t1) => {
                let mut corners = [(mesh.centroid(t0), t0), (mesh.centroid(t1), t1)];
                let poly = [p0, corners[0].0, p1, corners[1].0];
                let area = polygon_signed_area(&poly);
                if area < 0.0 {
                    corners.swap(0, 1);
                }
                let (c0, o0) = corners[0];
                let (c1, o1) = corners[1];
                ControlVolume {
                    segments: vec![
                        segment(p0, c0, o0),
                        segment(c0, p1, o0),
                        segment(p1, c1, o1),
                        segment(c1, p0, o1),
                    ],
                    area: area.abs(),
                }
            }
            None => {
                let c = mesh.centroid(t0);
                let mut ends = [p0, p1];
                let area = polygon_signed_area(&[p0, c, p1]);
                if area < 0.0 {
                    ends.swap(0, 1);
                }
                ControlVolume {
                    segments: vec![segment(ends[0], c, t0), segment(c, ends[1], t0)],
                    area: area.abs(),
                }
            }
        };
        if volume.area <= f64::EPSILON {
            return Err(Error::SingularGeometry(
                "control volume with vanishing area".into(),
            ));
        }
        volumes.push(volume);
    }
    Ok(DualMesh { volumes })
}

/// Role of an edge unknown relative to the subdomain partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofClass {
    /// Strictly inside one subdomain.
    Interior { subdomain: usize },
    /// On exactly one inter-subdomain interface segment.
    Interface { index: usize },
    /// On the boundary of the unit square (Dirichlet, not free).
    DomainBoundary,
}

/// One open interface segment between two neighboring subdomains.
#[derive(Clone, Debug)]
pub struct Interface {
    /// Lower subdomain index.
    pub k: usize,
    /// Higher subdomain index.
    pub l: usize,
    /// Edge indices of the CR nodes on the segment, ordered along it.
    pub nodes: Vec<usize>,
}

/// Decomposition of the mesh into an `m x m` grid of square subdomains.
#[derive(Clone, Debug)]
pub struct Partition {
    /// Subdomains per side.
    pub m: usize,
    /// Total subdomain count, `m^2`.
    pub subdomains: usize,
    /// Subdomain side length, `1/m`.
    pub coarse_h: f64,
    /// Subdomain owning each triangle; row-major from the bottom-left.
    pub subdomain_of_triangle: Vec<usize>,
    /// Classification of every edge unknown.
    pub dof_class: Vec<DofClass>,
    /// Edges strictly interior to each subdomain, ascending.
    pub interior_dofs: Vec<Vec<usize>>,
    /// Edges on each subdomain's boundary (interfaces and the outer
    /// boundary), ascending.
    pub subdomain_boundary_dofs: Vec<Vec<usize>>,
    /// Interface segments sorted by `(k, l)`.
    pub interfaces: Vec<Interface>,
}

/// Splits the mesh into `m x m` square subdomains and enumerates interfaces.
///
/// Requires `m >= 1` and `m | n`. Subdomain `k = sy*m + sx` covers
/// `[sx/m,(sx+1)/m] x [sy/m,(sy+1)/m]`.
pub fn build_partition(mesh: &TriMesh, m: usize) -> Result<Partition> {
    let n = mesh.blocks;
    if m == 0 {
        return Err(Error::InvalidParameter("partition needs m >= 1".into()));
    }
    if m > n || n % m != 0 {
        return Err(Error::InvalidParameter(format!(
            "subdomain count {m} must divide the mesh size {n}"
        )));
    }
    let subdomains = m * m;
    // Blocks per subdomain side; q is a partition line spacing in midpoint
    // units of 1/(2n).
    let bs = n / m;
    let q = 2 * bs;

    let mut subdomain_of_triangle = Vec::with_capacity(mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        // Triangles come in cell order: two per cell, cells row-major.
        let cell = t / 2;
        let bx = cell % n;
        let by = cell / n;
        subdomain_of_triangle.push((by / bs) * m + bx / bs);
    }

    // First pass: classify edges, grouping interface nodes by (k, l).
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut raw_class: Vec<Option<(usize, usize)>> = vec![None; mesh.edges.len()];
    let mut interior_dofs = vec![Vec::new(); subdomains];
    let mut is_interior: Vec<Option<usize>> = vec![None; mesh.edges.len()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.boundary {
            continue;
        }
        let [mx, my] = edge.grid_mid;
        if mx % q == 0 {
            // Only vertical edges have even x-midpoints, so the edge is
            // collinear with the vertical partition line at x = mx/(2n).
            let sx = mx / q;
            let sy = my / q;
            let k = sy * m + (sx - 1);
            let l = sy * m + sx;
            groups.entry((k, l)).or_default().push(e);
            raw_class[e] = Some((k, l));
        } else if my % q == 0 {
            let sx = mx / q;
            let sy = my / q;
            let k = (sy - 1) * m + sx;
            let l = sy * m + sx;
            groups.entry((k, l)).or_default().push(e);
            raw_class[e] = Some((k, l));
        } else {
            let k = (my / q) * m + mx / q;
            interior_dofs[k].push(e);
            is_interior[e] = Some(k);
        }
    }

    // Interface node order along the segment: edges were visited in (y, x)
    // midpoint order, which is monotone along both vertical and horizontal
    // segments.
    let mut interfaces = Vec::with_capacity(groups.len());
    let mut interface_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for ((k, l), nodes) in groups {
        interface_index.insert((k, l), interfaces.len());
        interfaces.push(Interface { k, l, nodes });
    }

    let mut dof_class = Vec::with_capacity(mesh.edges.len());
    let mut subdomain_boundary_dofs = vec![Vec::new(); subdomains];
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.boundary {
            dof_class.push(DofClass::DomainBoundary);
            let [mx, my] = edge.grid_mid;
            let sx = (mx / q).min(m - 1);
            let sy = (my / q).min(m - 1);
            subdomain_boundary_dofs[sy * m + sx].push(e);
        } else if let Some((k, l)) = raw_class[e] {
            dof_class.push(DofClass::Interface {
                index: interface_index[&(k, l)],
            });
            subdomain_boundary_dofs[k].push(e);
            subdomain_boundary_dofs[l].push(e);
        } else {
            dof_class.push(DofClass::Interior {
                subdomain: is_interior[e].expect("edge classified"),
            });
        }
    }

    Ok(Partition {
        m,
        subdomains,
        coarse_h: 1.0 / m as f64,
        subdomain_of_triangle,
        dof_class,
        interior_dofs,
        subdomain_boundary_dofs,
        interfaces,
    })
}
