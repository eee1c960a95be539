//! Structured simplicial meshes of boxes in two and three dimensions.
//!
//! Boxes are split uniformly (two triangles per square, six Kuhn tetrahedra
//! per cube) and refined by quadra-section / octa-section. Faces are the
//! `(dim-1)`-simplices, enumerated lexicographically by sorted vertex indices.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{invalid, Error, Result};

/// Relative tolerance for the measure tiling check.
const TILING_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<Vec<usize>>,
    faces: Vec<Vec<usize>>,
    face_boundary: Vec<bool>,
    face_cells: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    vertex_cells: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
    domain_measure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMetrics {
    pub h: f64,
    pub h_min: f64,
    pub n_vertices: usize,
    pub shape_regularity: f64,
    pub quasi_uniformity: f64,
    /// `N h^dim / |Omega|`, lower slot.
    pub c_lower: f64,
    /// `N h^dim / |Omega|`, upper slot.
    pub c_upper: f64,
}

impl SimplicialMesh {
    /// Assembles a mesh and derives its face incidence. `domain_measure` is
    /// checked against the sum of cell measures when given.
    pub fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        cells: Vec<Vec<usize>>,
        domain_measure: Option<f64>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if coords.len() % dim != 0 {
            return Err(invalid("coordinate array length is not a multiple of dim"));
        }
        let nv = coords.len() / dim;
        let mut total = 0.0;
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() != dim + 1 {
                return Err(Error::MeshDefect(format!("cell {c} has {} vertices", cell.len())));
            }
            if let Some(&bad) = cell.iter().find(|&&v| v >= nv) {
                return Err(Error::MeshDefect(format!("cell {c} references vertex {bad}")));
            }
            let pts: Vec<&[f64]> = cell.iter().map(|&v| &coords[v * dim..(v + 1) * dim]).collect();
            let m = signed_measure(&pts);
            if !(m > 0.0) {
                return Err(Error::MeshDefect(format!("cell {c} has non-positive measure {m:e}")));
            }
            total += m;
        }
        let domain_measure = match domain_measure {
            Some(omega) => {
                if ((total - omega) / omega).abs() > TILING_RTOL {
                    return Err(Error::MeshDefect(format!(
                        "cells cover {total} but the domain measures {omega}"
                    )));
                }
                omega
            }
            None => total,
        };

        let mut face_map: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (c, cell) in cells.iter().enumerate() {
            for skip in 0..=dim {
                let mut f: Vec<usize> = (0..=dim).filter(|&k| k != skip).map(|k| cell[k]).collect();
                f.sort_unstable();
                face_map.entry(f).or_default().push(c);
            }
        }
        let mut faces = Vec::with_capacity(face_map.len());
        let mut face_cells = Vec::with_capacity(face_map.len());
        let mut face_boundary = Vec::with_capacity(face_map.len());
        for (f, cs) in face_map {
            if cs.len() > 2 {
                return Err(Error::MeshDefect(format!("face {f:?} is shared by {} cells", cs.len())));
            }
            face_boundary.push(cs.len() == 1);
            faces.push(f);
            face_cells.push(cs);
        }

        let mut vertex_cells = vec![Vec::new(); nv];
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                vertex_cells[v].push(c);
            }
        }
        let mut vertex_faces = vec![Vec::new(); nv];
        let mut boundary_vertex = vec![false; nv];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v].push(fi);
                if face_boundary[fi] {
                    boundary_vertex[v] = true;
                }
            }
        }

        Ok(SimplicialMesh {
            dim,
            coords,
            cells,
            faces,
            face_boundary,
            face_cells,
            boundary_vertex,
            vertex_cells,
            vertex_faces,
            domain_measure,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &[usize] {
        &self.faces[f]
    }

    pub fn face_is_boundary(&self, f: usize) -> bool {
        self.face_boundary[f]
    }

    pub fn face_cells(&self, f: usize) -> &[usize] {
        &self.face_cells[f]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_vertices(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn domain_measure(&self) -> f64 {
        self.domain_measure
    }

    pub fn cell_points(&self, c: usize) -> Vec<&[f64]> {
        self.cells[c].iter().map(|&v| self.vertex(v)).collect()
    }

    pub fn face_points(&self, f: usize) -> Vec<&[f64]> {
        self.faces[f].iter().map(|&v| self.vertex(v)).collect()
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        signed_measure(&self.cell_points(c))
    }

    pub fn face_measure(&self, f: usize) -> f64 {
        simplex_volume(&self.face_points(f))
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        diameter(&self.cell_points(c))
    }

    /// `dim * |tau| / sum of facet measures`.
    pub fn cell_inradius(&self, c: usize) -> f64 {
        let cell = &self.cells[c];
        let facets: f64 = (0..=self.dim)
            .map(|skip| {
                let pts: Vec<&[f64]> = (0..=self.dim)
                    .filter(|&k| k != skip)
                    .map(|k| self.vertex(cell[k]))
                    .collect();
                simplex_volume(&pts)
            })
            .sum();
        self.dim as f64 * self.cell_measure(c) / facets
    }
}

/// Signed measure of a full-dimensional simplex (`dim + 1` points in `R^dim`).
pub fn signed_measure(pts: &[&[f64]]) -> f64 {
    match pts.len() {
        3 if pts[0].len() == 2 => {
            let (a, b, c) = (pts[0], pts[1], pts[2]);
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        }
        4 if pts[0].len() == 3 => {
            let e: Vec<[f64; 3]> = (1..4)
                .map(|k| {
                    [
                        pts[k][0] - pts[0][0],
                        pts[k][1] - pts[0][1],
                        pts[k][2] - pts[0][2],
                    ]
                })
                .collect();
            let det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
                - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
                + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
            det / 6.0
        }
        _ => panic!("signed_measure needs dim+1 points in R^dim"),
    }
}

/// Unsigned `k`-volume of a `k`-simplex embedded in any dimension (Gram
/// determinant).
pub fn simplex_volume(pts: &[&[f64]]) -> f64 {
    let k = pts.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let edges: Vec<Vec<f64>> = (1..=k)
        .map(|i| pts[i].iter().zip(pts[0]).map(|(a, b)| a - b).collect())
        .collect();
    let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        edges[i].iter().zip(&edges[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    gram.determinant().max(0.0).sqrt() / fact
}

/// Max pairwise vertex distance.
pub fn diameter(pts: &[&[f64]]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(dist(pts[i], pts[j]));
        }
    }
    d
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Uniform triangulation of `[0, extents[0]] x ... ` with `n_per_axis` cells
/// per axis.
pub fn build_box_mesh(dim: usize, extents: &[f64], n_per_axis: usize) -> Result<SimplicialMesh> {
    if dim != 2 && dim != 3 {
        return Err(invalid(format!("dimension must be 2 or 3, got {dim}")));
    }
    if extents.len() != dim {
        return Err(invalid(format!("expected {dim} extents, got {}", extents.len())));
    }
    if extents.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(invalid("extents must be positive"));
    }
    if n_per_axis == 0 {
        return Err(invalid("n_per_axis must be at least 1"));
    }
    let n = n_per_axis;
    let np = n + 1;
    let measure: f64 = extents.iter().product();
    match dim {
        2 => {
            let idx = |i: usize, j: usize| i + np * j;
            let mut coords = Vec::with_capacity(np * np * 2);
            for j in 0..np {
                for i in 0..np {
                    coords.push(extents[0] * i as f64 / n as f64);
                    coords.push(extents[1] * j as f64 / n as f64);
                }
            }
            let mut cells = Vec::with_capacity(2 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let (v00, v10, v11, v01) =
                        (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                    cells.push(vec![v00, v10, v11]);
                    cells.push(vec![v00, v11, v01]);
                }
            }
            SimplicialMesh::from_parts(2, coords, cells, Some(measure))
        }
        _ => {
            let idx = |i: usize, j: usize, k: usize| i + np * (j + np * k);
            let mut coords = Vec::with_capacity(np * np * np * 3);
            for k in 0..np {
                for j in 0..np {
                    for i in 0..np {
                        coords.push(extents[0] * i as f64 / n as f64);
                        coords.push(extents[1] * j as f64 / n as f64);
                        coords.push(extents[2] * k as f64 / n as f64);
                    }
                }
            }
            const PERMS: [[usize; 3]; 6] =
                [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let mut cells = Vec::with_capacity(6 * n * n * n);
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        for perm in PERMS {
                            let mut p = [i, j, k];
                            let mut tet = vec![idx(p[0], p[1], p[2])];
                            for &axis in &perm {
                                p[axis] += 1;
                                tet.push(idx(p[0], p[1], p[2]));
                            }
                            cells.push(tet);
                        }
                    }
                }
            }
            orient_cells(3, &coords, &mut cells);
            SimplicialMesh::from_parts(3, coords, cells, Some(measure))
        }
    }
}

fn orient_cells(dim: usize, coords: &[f64], cells: &mut [Vec<usize>]) {
    for cell in cells.iter_mut() {
        let pts: Vec<&[f64]> = cell.iter().map(|&v| &coords[v * dim..(v + 1) * dim]).collect();
        if signed_measure(&pts) < 0.0 {
            let n = cell.len();
            cell.swap(n - 2, n - 1);
        }
    }
}

/// Uniform red refinement: every cell is split into `2^dim` children.
pub fn refine(mesh: &SimplicialMesh) -> Result<SimplicialMesh> {
    let dim = mesh.dim;
    let mut coords = mesh.coords.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, coords: &mut Vec<f64>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let id = coords.len() / dim;
            for c in 0..dim {
                let v = 0.5 * (coords[a * dim + c] + coords[b * dim + c]);
                coords.push(v);
            }
            id
        })
    };
    let mut cells = Vec::with_capacity(mesh.cells.len() << dim);
    for cell in &mesh.cells {
        if dim == 2 {
            let (x0, x1, x2) = (cell[0], cell[1], cell[2]);
            let m01 = mid(x0, x1, &mut coords);
            let m12 = mid(x1, x2, &mut coords);
            let m02 = mid(x0, x2, &mut coords);
            cells.push(vec![x0, m01, m02]);
            cells.push(vec![m01, x1, m12]);
            cells.push(vec![m02, m12, x2]);
            cells.push(vec![m01, m12, m02]);
        } else {
            let x = [cell[0], cell[1], cell[2], cell[3]];
            let mut m = [[usize::MAX; 4]; 4];
            for a in 0..4 {
                for b in a + 1..4 {
                    let id = mid(x[a], x[b], &mut coords);
                    m[a][b] = id;
                    m[b][a] = id;
                }
            }
            cells.push(vec![x[0], m[0][1], m[0][2], m[0][3]]);
            cells.push(vec![m[0][1], x[1], m[1][2], m[1][3]]);
            cells.push(vec![m[0][2], m[1][2], x[2], m[2][3]]);
            cells.push(vec![m[0][3], m[1][3], m[2][3], x[3]]);

            // Inner octahedron: split along its shortest diagonal; ties go to
            // the first candidate.
            let diagonals = [
                ((0, 2), (1, 3), (0, 3), (1, 2), (0, 1), (2, 3)),
                ((0, 3), (1, 2), (0, 1), (2, 3), (0, 2), (1, 3)),
                ((0, 1), (2, 3), (0, 2), (1, 3), (0, 3), (1, 2)),
            ];
            let len = |p: (usize, usize), q: (usize, usize), coords: &Vec<f64>| {
                let (a, b) = (m[p.0][p.1], m[q.0][q.1]);
                dist(&coords[a * 3..a * 3 + 3], &coords[b * 3..b * 3 + 3])
            };
            let mut best = 0;
            let mut best_len = len(diagonals[0].0, diagonals[0].1, &coords);
            for (i, d) in diagonals.iter().enumerate().skip(1) {
                let l = len(d.0, d.1, &coords);
                if l < best_len * (1.0 - 1e-12) {
                    best = i;
                    best_len = l;
                }
            }
            let (p, q, r1, r1o, r2, r2o) = diagonals[best];
            let id = |e: (usize, usize)| m[e.0][e.1];
            let ring = [id(r1), id(r2), id(r1o), id(r2o)];
            for s in 0..4 {
                cells.push(vec![id(p), id(q), ring[s], ring[(s + 1) % 4]]);
            }
        }
    }
    orient_cells(dim, &coords, &mut cells);
    SimplicialMesh::from_parts(dim, coords, cells, Some(mesh.domain_measure))
}

pub fn metrics(mesh: &SimplicialMesh) -> MeshMetrics {
    let mut h: f64 = 0.0;
    let mut h_min = f64::INFINITY;
    let mut shape: f64 = 0.0;
    for c in 0..mesh.n_cells() {
        let d = mesh.cell_diameter(c);
        h = h.max(d);
        h_min = h_min.min(d);
        shape = shape.max(d / mesh.cell_inradius(c));
    }
    let n = mesh.n_vertices();
    let c = n as f64 * h.powi(mesh.dim as i32) / mesh.domain_measure;
    MeshMetrics {
        h,
        h_min,
        n_vertices: n,
        shape_regularity: shape,
        quasi_uniformity: h / h_min,
        c_lower: c,
        c_upper: c,
    }
}

/// Per-level metrics of a uniformly refined box family and the bracket
/// `[min, max]` of `N h^d / |Omega|` over the levels.
pub fn family_bracket(dim: usize, n0: usize, levels: usize) -> Result<(Vec<MeshMetrics>, f64, f64)> {
    if levels == 0 {
        return Err(invalid("a bracket needs at least one level"));
    }
    let mut mesh = build_box_mesh(dim, &vec![1.0; dim], n0)?;
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            mesh = refine(&mesh)?;
        }
        rows.push(metrics(&mesh));
    }
    let lo = rows.iter().map(|m| m.c_lower).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|m| m.c_upper).fold(0.0, f64::max);
    Ok((rows, lo, hi))
}

/// The face assigned to a vertex: the lowest-indexed incident face, restricted
/// to boundary faces when the vertex lies on the boundary.
pub fn select_face(mesh: &SimplicialMesh, vertex: usize) -> Result<usize> {
    if vertex >= mesh.n_vertices() {
        return Err(invalid(format!("vertex {vertex} out of range")));
    }
    let need_boundary = mesh.boundary_vertex[vertex];
    mesh.vertex_faces[vertex]
        .iter()
        .copied()
        .find(|&f| !need_boundary || mesh.face_boundary[f])
        .ok_or_else(|| Error::MeshDefect(format!("no admissible face for vertex {vertex}")))
}

/// All cells whose closure meets the closure of `cell`, including itself.
pub fn support_region(mesh: &SimplicialMesh, cell: usize) -> Vec<usize> {
    let mut out: Vec<usize> = mesh.cells[cell]
        .iter()
        .flat_map(|&v| mesh.vertex_cells[v].iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Writes the plain-text mesh format: `dim N ncells`, coordinates, cells,
/// then a boundary bitmask line of `0`/`1` characters.
pub fn write_mesh_text<W: Write>(mesh: &SimplicialMesh, mut out: W) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "{} {} {}", mesh.dim, mesh.n_vertices(), mesh.n_cells()).unwrap();
    for v in 0..mesh.n_vertices() {
        let line: Vec<String> = mesh.vertex(v).iter().map(|x| format!("{x:?}")).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    for cell in &mesh.cells {
        let line: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    let mask: String = mesh.boundary_vertex.iter().map(|&b| if b { '1' } else { '0' }).collect();
    writeln!(s, "{mask}").unwrap();
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_mesh_text<R: BufRead>(input: R) -> Result<SimplicialMesh> {
    let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
    let bad = |line: usize, msg: &str| Error::MeshDefect(format!("line {}: {msg}", line + 1));
    let header: Vec<usize> = lines
        .first()
        .ok_or_else(|| bad(0, "empty file"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(0, "bad header")))
        .collect::<Result<_>>()?;
    if header.len() != 3 {
        return Err(bad(0, "header must be `dim N ncells`"));
    }
    let (dim, nv, nc) = (header[0], header[1], header[2]);
    if lines.len() < 1 + nv + nc + 1 {
        return Err(bad(lines.len(), "truncated file"));
    }
    let mut coords = Vec::with_capacity(nv * dim);
    for (l, line) in lines.iter().enumerate().skip(1).take(nv) {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(l, "bad coordinate")))
            .collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(bad(l, "wrong coordinate count"));
        }
        coords.extend(row);
    }
    let mut cells = Vec::with_capacity(nc);
    for (l, line) in lines.iter().enumerate().skip(1 + nv).take(nc) {
        let row: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(l, "bad vertex index")))
            .collect::<Result<_>>()?;
        cells.push(row);
    }
    let mesh = SimplicialMesh::from_parts(dim, coords, cells, None)?;
    let mask_line = 1 + nv + nc;
    let mask: Vec<bool> = lines[mask_line].trim().chars().map(|c| c == '1').collect();
    if mask != mesh.boundary_vertex {
        return Err(bad(mask_line, "boundary mask disagrees with mesh topology"));
    }
    Ok(mesh)
}

/// Bin-accelerated point location.
pub struct CellLocator<'a> {
    mesh: &'a SimplicialMesh,
    lo: Vec<f64>,
    cell_size: Vec<f64>,
    bins_per_axis: usize,
    bins: Vec<Vec<usize>>,
}

impl<'a> CellLocator<'a> {
    pub fn new(mesh: &'a SimplicialMesh) -> Self {
        let dim = mesh.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for v in 0..mesh.n_vertices() {
            for (a, &x) in mesh.vertex(v).iter().enumerate() {
                lo[a] = lo[a].min(x);
                hi[a] = hi[a].max(x);
            }
        }
        let target = (mesh.n_cells() as f64).powf(1.0 / dim as f64).ceil() as usize;
        let bins_per_axis = target.max(1);
        let cell_size: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| ((h - l) / bins_per_axis as f64).max(f64::MIN_POSITIVE))
            .collect();
        let mut loc = CellLocator {
            mesh,
            lo,
            cell_size,
            bins_per_axis,
            bins: vec![Vec::new(); bins_per_axis.pow(dim as u32)],
        };
        for c in 0..mesh.n_cells() {
            let pts = mesh.cell_points(c);
            let mut blo = vec![usize::MAX; dim];
            let mut bhi = vec![0; dim];
            for p in &pts {
                let b = loc.bin_coords(p);
                for a in 0..dim {
                    blo[a] = blo[a].min(b[a]);
                    bhi[a] = bhi[a].max(b[a]);
                }
            }
            let mut idx = blo.clone();
            loop {
                let flat = loc.flatten(&idx);
                loc.bins[flat].push(c);
                let mut a = 0;
                while a < dim {
                    idx[a] += 1;
                    if idx[a] <= bhi[a] {
                        break;
                    }
                    idx[a] = blo[a];
                    a += 1;
                }
                if a == dim {
                    break;
                }
            }
        }
        loc
    }

    fn bin_coords(&self, p: &[f64]) -> Vec<usize> {
        p.iter()
            .zip(&self.lo)
            .zip(&self.cell_size)
            .map(|((x, l), s)| {
                let b = ((x - l) / s).floor();
                (b.max(0.0) as usize).min(self.bins_per_axis - 1)
            })
            .collect()
    }

    fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &i| acc * self.bins_per_axis + i)
    }

    /// Finds a cell containing `p` (within a small barycentric tolerance) and
    /// the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: &[f64]) -> Option<(usize, Vec<f64>)> {
        let b = self.bin_coords(p);
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for &c in &self.bins[self.flatten(&b)] {
            let lam = barycentric(&self.mesh.cell_points(c), p);
            let worst = lam.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -1e-12 {
                return Some((c, lam));
            }
            if best.as_ref().map_or(true, |(_, _, w)| worst > *w) {
                best = Some((c, lam, worst));
            }
        }
        best.filter(|(_, _, w)| *w > -1e-9).map(|(c, l, _)| (c, l))
    }
}

/// Barycentric coordinates of `p` with respect to a full-dimensional simplex.
pub fn barycentric(verts: &[&[f64]], p: &[f64]) -> Vec<f64> {
    match p.len() {
        2 => {
            let m = Matrix2::new(
                verts[1][0] - verts[0][0],
                verts[2][0] - verts[0][0],
                verts[1][1] - verts[0][1],
                verts[2][1] - verts[0][1],
            );
            let r = Vector2::new(p[0] - verts[0][0], p[1] - verts[0][1]);
            let s = m.lu().solve(&r).unwrap_or_else(|| Vector2::repeat(f64::NAN));
            vec![1.0 - s[0] - s[1], s[0], s[1]]
        }
        3 => {
            let m = Matrix3::from_fn(|i, j| verts[j + 1][i] - verts[0][i]);
            let r = Vector3::new(p[0] - verts[0][0], p[1] - verts[0][1], p[2] - verts[0][2]);
            let s = m.lu().solve(&r).unwrap_or_else(|| Vector3::repeat(f64::NAN));
            vec![1.0 - s[0] - s[1] - s[2], s[0], s[1], s[2]]
        }
        d => panic!("barycentric coordinates need dim 2 or 3, got {d}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, n: usize) -> SimplicialMesh {
        build_box_mesh(dim, &vec![1.0; dim], n).unwrap()
    }

    #[test]
    fn minimal_square() {
        let m = unit(2, 1);
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_cells(), 2);
        assert!((m.domain_measure() - 1.0).abs() < 1e-15);
        assert!(m.boundary_vertices().iter().all(|&b| b));
    }

    #[test]
    fn square_n4_counts_and_h() {
        let m = unit(2, 4);
        assert_eq!(m.n_vertices(), 25);
        assert_eq!(m.n_cells(), 32);
        let mm = metrics(&m);
        assert!((mm.h - 2f64.sqrt() / 4.0).abs() < 1e-14);
        assert!((mm.c_lower - 3.125).abs() < 1e-12);
        assert_eq!(mm.c_lower, mm.c_upper);
    }

    #[test]
    fn cube_n2_counts_and_h() {
        let m = unit(3, 2);
        assert_eq!(m.n_vertices(), 27);
        assert_eq!(m.n_cells(), 48);
        let mm = metrics(&m);
        assert!((mm.h - 3f64.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_dimension_and_inputs() {
        assert!(build_box_mesh(1, &[1.0], 2).is_err());
        assert!(build_box_mesh(4, &[1.0; 4], 2).is_err());
        assert!(build_box_mesh(2, &[1.0, -1.0], 2).is_err());
        assert!(build_box_mesh(2, &[1.0, 1.0], 0).is_err());
    }

    #[test]
    fn refine_square_counts() {
        let m = unit(2, 1);
        let r = refine(&m).unwrap();
        assert_eq!(r.n_cells(), 8);
        assert!((metrics(&r).h - metrics(&m).h / 2.0).abs() < 1e-15);

        let mut m = unit(2, 2);
        let mut counts = vec![m.n_vertices()];
        for _ in 0..3 {
            m = refine(&m).unwrap();
            counts.push(m.n_vertices());
        }
        assert_eq!(counts, vec![9, 25, 81, 289]);
    }

    #[test]
    fn refined_metrics_follow_similarity() {
        let m = unit(2, 4);
        let r = refine(&m).unwrap();
        let (a, b) = (metrics(&m), metrics(&r));
        assert_eq!(b.n_vertices, 81);
        assert!((b.h - 2f64.sqrt() / 8.0).abs() < 1e-14);
        assert!((b.c_lower - 81.0 / 32.0).abs() < 1e-12);
        assert!((a.quasi_uniformity - b.quasi_uniformity).abs() < 1e-12);
        assert!(b.shape_regularity <= a.shape_regularity * (1.0 + 1e-9));
    }

    #[test]
    fn refine_3d_halves_h() {
        let m = unit(3, 1);
        let mut cur = m.clone();
        let h0 = metrics(&m).h;
        for level in 1..=3 {
            cur = refine(&cur).unwrap();
            let mm = metrics(&cur);
            assert_eq!(cur.n_cells(), 6 * 8usize.pow(level));
            assert!((mm.h - h0 / 2f64.powi(level as i32)).abs() < 1e-14);
            let n = (1usize << level) + 1;
            assert_eq!(cur.n_vertices(), n * n * n);
        }
    }

    #[test]
    fn regular_simplex_bounds_shape_regularity() {
        for dim in [2, 3] {
            let mm = metrics(&unit(dim, 3));
            // regular triangle: a / (a / (2 sqrt 3)); regular tetrahedron: a / (a / (2 sqrt 6))
            let regular = if dim == 2 { 2.0 * 3f64.sqrt() } else { 2.0 * 6f64.sqrt() };
            assert!(mm.shape_regularity >= regular - 1e-12);
            assert!(mm.h >= mm.h_min && mm.h_min > 0.0);
        }
    }

    #[test]
    fn corner_vertex_gets_axis_edge() {
        let m = unit(2, 4);
        let f = select_face(&m, 0).unwrap();
        assert!(m.face_is_boundary(f));
        let pts = m.face_points(f);
        let on_axis = pts.iter().all(|p| p[0] == 0.0) || pts.iter().all(|p| p[1] == 0.0);
        assert!(on_axis);
        assert!(m.face(f).contains(&0));
    }

    #[test]
    fn select_face_rules_hold_exhaustively() {
        let meshes = [unit(2, 1), unit(2, 4), unit(3, 2), refine(&unit(3, 1)).unwrap()];
        for m in &meshes {
            for v in 0..m.n_vertices() {
                let f = select_face(m, v).unwrap();
                assert!(m.face(f).contains(&v));
                if m.is_boundary_vertex(v) {
                    assert!(m.face_is_boundary(f));
                }
                assert_eq!(select_face(m, v).unwrap(), f);
            }
        }
    }

    #[test]
    fn topological_boundary_matches_geometry() {
        for m in [unit(2, 3), unit(3, 2), refine(&unit(2, 2)).unwrap(), refine(&unit(3, 1)).unwrap()] {
            for v in 0..m.n_vertices() {
                let on_box = m.vertex(v).iter().any(|&x| x == 0.0 || x == 1.0);
                assert_eq!(on_box, m.is_boundary_vertex(v), "vertex {v}");
            }
        }
    }

    #[test]
    fn face_incidence_counts() {
        for m in [unit(2, 3), unit(3, 2)] {
            for f in 0..m.n_faces() {
                let expect = if m.face_is_boundary(f) { 1 } else { 2 };
                assert_eq!(m.face_cells(f).len(), expect);
            }
            let faces = m.faces();
            assert!(faces.windows(2).all(|w| w[0] < w[1]), "faces not lexicographic");
        }
    }

    fn closures_meet(m: &SimplicialMesh, a: usize, b: usize) -> bool {
        // closed simplices of a conforming mesh meet iff they share a vertex
        m.cell(a).iter().any(|v| m.cell(b).contains(v))
    }

    #[test]
    fn support_region_matches_brute_force() {
        let m = unit(2, 4);
        for c in 0..m.n_cells() {
            let brute: Vec<usize> = (0..m.n_cells()).filter(|&o| closures_meet(&m, c, o)).collect();
            assert_eq!(support_region(&m, c), brute);
        }
        // interior triangle
        let interior = (0..m.n_cells())
            .find(|&c| m.cell(c).iter().all(|&v| !m.is_boundary_vertex(v)))
            .unwrap();
        assert_eq!(support_region(&m, interior).len(), 13);
        let small = unit(2, 1);
        assert_eq!(support_region(&small, 0), vec![0, 1]);
    }

    #[test]
    fn support_region_size_bounded_under_refinement() {
        let mut m = unit(2, 4);
        let mut q = Vec::new();
        for _ in 0..3 {
            q.push((0..m.n_cells()).map(|c| support_region(&m, c).len()).max().unwrap());
            m = refine(&m).unwrap();
        }
        assert!(q.iter().all(|&x| x == q[0]), "{q:?}");
    }

    #[test]
    fn text_format_roundtrip() {
        let m = unit(3, 2);
        let mut buf = Vec::new();
        write_mesh_text(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3 27 48\n"));
        let back = read_mesh_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.n_vertices(), m.n_vertices());
        for v in 0..m.n_vertices() {
            assert_eq!(back.vertex(v), m.vertex(v));
        }
    }

    #[test]
    fn locator_finds_points() {
        let m = refine(&unit(3, 2)).unwrap();
        let loc = CellLocator::new(&m);
        for p in [[0.1, 0.2, 0.3], [0.999, 0.5, 0.0], [0.5, 0.5, 0.5]] {
            let (c, lam) = loc.locate(&p).unwrap();
            let pts = m.cell_points(c);
            for a in 0..3 {
                let x: f64 = lam.iter().zip(&pts).map(|(l, q)| l * q[a]).sum();
                assert!((x - p[a]).abs() < 1e-12);
            }
        }
    }
}
