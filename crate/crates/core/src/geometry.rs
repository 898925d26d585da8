//! Box-in-box geometry: an axis-aligned solid block immersed in an
//! axis-aligned fluid box, meshed by the Kuhn (6-tet) subdivision of a
//! uniform hexahedral grid.
//!
//! Interface faces are numbered `0..6` as `2 * axis + side`, where `side` is
//! 0 for the face at the inner box minimum and 1 for the maximum. The face
//! normal `ν` points from the fluid into the solid, so the `x`-min face has
//! `ν = +e_x`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

const ALIGN_TOL: f64 = 1e-9;

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn cube(lo: f64, hi: f64) -> Self {
        Aabb { min: [lo; 3], max: [hi; 3] }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.max[a] - self.min[a]).product()
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConfig {
    pub outer: Aabb,
    pub inner: Aabb,
    /// Cells per axis.
    pub n: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            outer: Aabb::cube(0.0, 1.0),
            inner: Aabb::cube(0.25, 0.75),
            n: 8,
        }
    }
}

impl GeometryConfig {
    pub fn with_n(n: usize) -> Self {
        GeometryConfig { n, ..Default::default() }
    }

    /// Grid index ranges `[lo, hi]` of the inner box along each axis.
    pub fn inner_grid_range(&self) -> Result<[[usize; 2]; 3]> {
        let (outer, inner) = (&self.outer, &self.inner);
        let strictly_inside = (0..3).all(|a| {
            outer.min[a] < inner.min[a] && inner.min[a] < inner.max[a] && inner.max[a] < outer.max[a]
        });
        if self.n == 0 || !strictly_inside {
            return Err(Error::DegenerateBox);
        }
        let mut range = [[0; 2]; 3];
        for a in 0..3 {
            let h = (outer.max[a] - outer.min[a]) / self.n as f64;
            for (s, coord) in [inner.min[a], inner.max[a]].into_iter().enumerate() {
                let k = (coord - outer.min[a]) / h;
                if (k - k.round()).abs() > ALIGN_TOL {
                    return Err(Error::GridMisaligned { coord, n: self.n });
                }
                range[a][s] = k.round() as usize;
            }
        }
        Ok(range)
    }

    pub fn validate(&self) -> Result<()> {
        self.inner_grid_range().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fluid,
    Solid,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Fluid => "fluid",
            Region::Solid => "solid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexClass {
    /// On the outer boundary `Γ_f`.
    Exterior,
    /// Strictly inside the fluid region.
    Fluid,
    /// On the fluid/solid interface `Γ_s`.
    Interface,
    /// Strictly inside the solid block.
    SolidInterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tet {
    pub v: [usize; 4],
    pub region: Region,
}

/// A facet between a fluid tet and a solid tet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceTri {
    /// Ordered so that the right-hand normal equals the face normal `ν`.
    pub v: [usize; 3],
    pub face: usize,
    pub fluid_tet: usize,
    pub solid_tet: usize,
}

/// Orthonormal, right-handed face frame `(ν, τ₁, τ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFrame {
    pub normal: Point,
    pub tangent1: Point,
    pub tangent2: Point,
}

impl FaceFrame {
    /// Rows `[τ₁, τ₂, ν]`: maps global components to face-local ones.
    pub fn local_rows(&self) -> [Point; 3] {
        [self.tangent1, self.tangent2, self.normal]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub axis: usize,
    /// 0 at the inner box minimum, 1 at the maximum.
    pub side: usize,
    pub plane: f64,
    pub frame: FaceFrame,
    /// Indices into `Mesh::interface_tris`.
    pub tris: Vec<usize>,
    /// All vertices of the closed face, ascending.
    pub vertices: Vec<usize>,
    /// Vertices not on any other face, ascending.
    pub interior_vertices: Vec<usize>,
}

/// Mesh edges along `∂Γ_j ∩ ∂Γ_l` together with the in-face conormals.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedEdge {
    pub faces: (usize, usize),
    /// Vertices along the edge, ordered by the edge direction.
    pub vertices: Vec<usize>,
    pub direction: Point,
    /// Outward conormals of the first and second face, tangent to their faces.
    pub conormals: (Point, Point),
}

impl SharedEdge {
    pub fn mesh_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub config: GeometryConfig,
    pub vertices: Vec<Point>,
    pub tets: Vec<Tet>,
    pub exterior_tris: Vec<[usize; 3]>,
    pub interface_tris: Vec<InterfaceTri>,
    pub faces: Vec<Face>,
    pub shared_edges: Vec<SharedEdge>,
    pub vertex_class: Vec<VertexClass>,
}

// Kuhn paths: each permutation of the axes gives one tet of the unit cell.
const KUHN_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

const TET_FACETS: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn signed_volume(p: [&Point; 4]) -> f64 {
    let (a, b, c) = (sub(p[1], p[0]), sub(p[2], p[0]), sub(p[3], p[0]));
    dot(&a, &cross(&b, &c)) / 6.0
}

pub fn triangle_area(p: [&Point; 3]) -> f64 {
    let c = cross(&sub(p[1], p[0]), &sub(p[2], p[0]));
    0.5 * dot(&c, &c).sqrt()
}

fn unit(axis: usize, sign: f64) -> Point {
    let mut e = [0.0; 3];
    e[axis] = sign;
    e
}

/// Frame of the face normal to `axis` on the given side. The tangents are
/// the two remaining coordinate axes, taken in cyclic order and swapped on
/// the max side so that `ν · (τ₁ × τ₂) = +1`.
fn axis_frame(axis: usize, side: usize) -> FaceFrame {
    let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
    if side == 0 {
        FaceFrame { normal: unit(axis, 1.0), tangent1: unit(a1, 1.0), tangent2: unit(a2, 1.0) }
    } else {
        FaceFrame { normal: unit(axis, -1.0), tangent1: unit(a2, 1.0), tangent2: unit(a1, 1.0) }
    }
}

pub fn build_mesh(cfg: &GeometryConfig) -> Result<Mesh> {
    let range = cfg.inner_grid_range()?;
    let n = cfg.n;
    let np = n + 1;
    let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let h: Point = std::array::from_fn(|a| (cfg.outer.max[a] - cfg.outer.min[a]) / n as f64);

    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                let g = [i, j, k];
                vertices.push(std::array::from_fn(|a| {
                    // pin the inner box planes to their exact coordinates
                    if g[a] == range[a][0] {
                        cfg.inner.min[a]
                    } else if g[a] == range[a][1] {
                        cfg.inner.max[a]
                    } else if g[a] == n {
                        cfg.outer.max[a]
                    } else {
                        cfg.outer.min[a] + g[a] as f64 * h[a]
                    }
                }));
            }
        }
    }

    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let cell = [i, j, k];
                let solid = (0..3).all(|a| cell[a] >= range[a][0] && cell[a] < range[a][1]);
                let region = if solid { Region::Solid } else { Region::Fluid };
                for perm in KUHN_PERMS {
                    let mut c = cell;
                    let mut v = [vid(c[0], c[1], c[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        v[s + 1] = vid(c[0], c[1], c[2]);
                    }
                    let vol = signed_volume([&vertices[v[0]], &vertices[v[1]], &vertices[v[2]], &vertices[v[3]]]);
                    if vol < 0.0 {
                        v.swap(2, 3);
                    }
                    tets.push(Tet { v, region });
                }
            }
        }
    }

    let mut facet_owners: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::new();
    for (t, tet) in tets.iter().enumerate() {
        for (f, local) in TET_FACETS.iter().enumerate() {
            let mut key = local.map(|l| tet.v[l]);
            key.sort_unstable();
            facet_owners.entry(key).or_default().push((t, f));
        }
    }

    let mut faces: Vec<Face> = (0..6)
        .map(|j| {
            let (axis, side) = (j / 2, j % 2);
            Face {
                axis,
                side,
                plane: if side == 0 { cfg.inner.min[axis] } else { cfg.inner.max[axis] },
                frame: axis_frame(axis, side),
                tris: Vec::new(),
                vertices: Vec::new(),
                interior_vertices: Vec::new(),
            }
        })
        .collect();

    let mut exterior_tris = Vec::new();
    let mut interface_tris = Vec::new();
    for (t, tet) in tets.iter().enumerate() {
        for local in TET_FACETS.iter() {
            let mut key = local.map(|l| tet.v[l]);
            key.sort_unstable();
            let owners = &facet_owners[&key];
            if owners.len() == 1 {
                exterior_tris.push(key);
                continue;
            }
            let other = if owners[0].0 == t { owners[1].0 } else { owners[0].0 };
            if tet.region != Region::Fluid || tets[other].region != Region::Solid {
                continue;
            }
            let centroid: Point = std::array::from_fn(|a| key.iter().map(|&v| vertices[v][a]).sum::<f64>() / 3.0);
            let face = (0..6)
                .find(|&j| {
                    let (axis, side) = (j / 2, j % 2);
                    let plane = if side == 0 { cfg.inner.min[axis] } else { cfg.inner.max[axis] };
                    (centroid[axis] - plane).abs() <= ALIGN_TOL * (1.0 + plane.abs())
                })
                .expect("interface facet lies on an inner box plane");
            let mut v = key;
            let nrm = cross(&sub(&vertices[v[1]], &vertices[v[0]]), &sub(&vertices[v[2]], &vertices[v[0]]));
            if dot(&nrm, &faces[face].frame.normal) < 0.0 {
                v.swap(1, 2);
            }
            faces[face].tris.push(interface_tris.len());
            interface_tris.push(InterfaceTri { v, face, fluid_tet: t, solid_tet: other });
        }
    }

    let mut vertex_faces: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for tri in &interface_tris {
        for &v in &tri.v {
            if !vertex_faces[v].contains(&tri.face) {
                vertex_faces[v].push(tri.face);
            }
        }
    }
    for (j, face) in faces.iter_mut().enumerate() {
        let mut vs: Vec<usize> = face.tris.iter().flat_map(|&t| interface_tris[t].v).collect();
        vs.sort_unstable();
        vs.dedup();
        face.interior_vertices = vs.iter().copied().filter(|&v| vertex_faces[v] == [j]).collect();
        face.vertices = vs;
    }

    let mut vertex_class = vec![VertexClass::Fluid; vertices.len()];
    for tet in tets.iter().filter(|t| t.region == Region::Solid) {
        for &v in &tet.v {
            vertex_class[v] = VertexClass::SolidInterior;
        }
    }
    for (v, fs) in vertex_faces.iter().enumerate() {
        if !fs.is_empty() {
            vertex_class[v] = VertexClass::Interface;
        }
    }
    for tri in &exterior_tris {
        for &v in tri {
            vertex_class[v] = VertexClass::Exterior;
        }
    }

    let mut shared_edges = Vec::new();
    for j in 0..6 {
        for l in (j + 1)..6 {
            let (fj, fl) = (&faces[j], &faces[l]);
            if fj.axis == fl.axis {
                continue;
            }
            let dir_axis = 3 - fj.axis - fl.axis;
            let mut g = [0usize; 3];
            g[fj.axis] = range[fj.axis][fj.side];
            g[fl.axis] = range[fl.axis][fl.side];
            let verts = (range[dir_axis][0]..=range[dir_axis][1])
                .map(|s| {
                    g[dir_axis] = s;
                    vid(g[0], g[1], g[2])
                })
                .collect();
            // outward in-face conormal of face j points toward face l's plane
            let outward = |side: usize| if side == 0 { -1.0 } else { 1.0 };
            shared_edges.push(SharedEdge {
                faces: (j, l),
                vertices: verts,
                direction: unit(dir_axis, 1.0),
                conormals: (unit(fl.axis, outward(fl.side)), unit(fj.axis, outward(fj.side))),
            });
        }
    }

    Ok(Mesh {
        config: *cfg,
        vertices,
        tets,
        exterior_tris,
        interface_tris,
        faces,
        shared_edges,
        vertex_class,
    })
}

impl Mesh {
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].v.map(|v| self.vertices[v])
    }

    pub fn tri_points(&self, v: &[usize; 3]) -> [Point; 3] {
        v.map(|v| self.vertices[v])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        signed_volume([&p[0], &p[1], &p[2], &p[3]])
    }

    pub fn tet_centroid(&self, t: usize) -> Point {
        let p = self.tet_points(t);
        std::array::from_fn(|a| p.iter().map(|q| q[a]).sum::<f64>() / 4.0)
    }

    pub fn face(&self, j: usize) -> Result<&Face> {
        self.faces.get(j).ok_or(Error::UnknownFace(j))
    }

    pub fn face_area(&self, j: usize) -> Result<f64> {
        let face = self.face(j)?;
        Ok(face
            .tris
            .iter()
            .map(|&t| {
                let p = self.tri_points(&self.interface_tris[t].v);
                triangle_area([&p[0], &p[1], &p[2]])
            })
            .sum())
    }

    pub fn solid_tets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tets.len()).filter(|&t| self.tets[t].region == Region::Solid)
    }

    pub fn fluid_tets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tets.len()).filter(|&t| self.tets[t].region == Region::Fluid)
    }

    pub fn count_class(&self, class: VertexClass) -> usize {
        self.vertex_class.iter().filter(|&&c| c == class).count()
    }

    /// Plain-text export: vertex table, tet table with region tags, and the
    /// interface triangle table with face indices.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# lameheat mesh n={}", self.config.n);
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
        }
        let _ = writeln!(s, "tets {}", self.tets.len());
        for t in &self.tets {
            let _ = writeln!(s, "{} {} {} {} {}", t.v[0], t.v[1], t.v[2], t.v[3], t.region.as_str());
        }
        let _ = writeln!(s, "interface {}", self.interface_tris.len());
        for t in &self.interface_tris {
            let _ = writeln!(s, "{} {} {} {}", t.v[0], t.v[1], t.v[2], t.face);
        }
        s
    }
}

/// The frame `(ν, τ₁, τ₂)` of interface face `j`.
pub fn face_frame(mesh: &Mesh, j: usize) -> Result<FaceFrame> {
    mesh.face(j).map(|f| f.frame)
}

pub fn shared_edge_table(mesh: &Mesh) -> &[SharedEdge] {
    &mesh.shared_edges
}
