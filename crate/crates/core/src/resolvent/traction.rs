//! Interface traction `ν·σ(v)` of a P1 solid field, computed two ways:
//!
//! * pointwise, from the gradient of the solid element under each interface
//!   triangle written in the face frame, averaged to vertices by area;
//! * variationally, from the residual of the discrete Lamé equation tested
//!   with the hat function of each interface vertex, divided by the lumped
//!   boundary mass.
//!
//! Both are reported at the vertices interior to a face; values at face
//! edges mix two different normals.

use crate::assembly::{build_dof_map, SystemMatrices};
use crate::error::Result;
use crate::fem::{self, LameParams, TetGeometry};
use crate::geometry::{triangle_area, GeometryConfig, Mesh, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct TractionTrace {
    pub face: usize,
    /// Face-interior vertices.
    pub vertices: Vec<usize>,
    pub pointwise: Vec<Point>,
    pub variational: Vec<Point>,
    /// `∫_{Γ_j} φ_i` per vertex.
    pub weights: Vec<f64>,
}

impl TractionTrace {
    /// `Σ_i m_i |A_i − B_i|²`.
    pub fn squared_gap(&self) -> f64 {
        self.pointwise
            .iter()
            .zip(&self.variational)
            .zip(&self.weights)
            .map(|((a, b), m)| m * (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>())
            .sum()
    }

    pub fn max_deviation_from(&self, t: &Point) -> f64 {
        self.pointwise
            .iter()
            .chain(&self.variational)
            .flat_map(|p| (0..3).map(move |c| (p[c] - t[c]).abs()))
            .fold(0.0, f64::max)
    }
}

/// `v` and `div_sigma` are nodal fields on the displacement block (the
/// latter is the body-force data `div σ(v)`, zero for Lamé-harmonic `v`).
pub fn traction_trace(
    mesh: &Mesh,
    mats: &SystemMatrices,
    params: &LameParams,
    v: &[f64],
    div_sigma: &[f64],
    j: usize,
) -> Result<TractionTrace> {
    let face = mesh.face(j)?;
    let dofs = &mats.dofs;
    let nodal = |vert: usize| -> Point {
        let b = dofs.disp[vert].unwrap();
        [v[b], v[b + 1], v[b + 2]]
    };

    let k = face.interior_vertices.len();
    let slot = |vert: usize| face.interior_vertices.binary_search(&vert).ok();
    let mut weights = vec![0.0; k];
    let mut pointwise = vec![[0.0; 3]; k];
    let mut area_sum = vec![0.0; k];
    for &t in &face.tris {
        let tri = &mesh.interface_tris[t];
        let p = mesh.tri_points(&tri.v);
        let area = triangle_area([&p[0], &p[1], &p[2]]);
        let tet = &mesh.tets[tri.solid_tet];
        let geo = TetGeometry::new(&mesh.tet_points(tri.solid_tet))?;
        let grad = geo.field_gradient(&tet.v.map(nodal));
        let tr = fem::frame_traction(&grad, &face.frame, params.mu, params.lambda);
        for &vert in &tri.v {
            if let Some(s) = slot(vert) {
                weights[s] += area / 3.0;
                area_sum[s] += area;
                for c in 0..3 {
                    pointwise[s][c] += area * tr[c];
                }
            }
        }
    }
    for s in 0..k {
        for c in 0..3 {
            pointwise[s][c] /= area_sum[s];
        }
    }

    let kv = mats.solid_stiffness.mul_vec(v);
    let mf = mats.solid_mass.mul_vec(div_sigma);
    let variational = face
        .interior_vertices
        .iter()
        .enumerate()
        .map(|(s, &vert)| {
            let b = dofs.disp[vert].unwrap();
            [0, 1, 2].map(|c| -(kv[b + c] + mf[b + c]) / weights[s])
        })
        .collect();

    Ok(TractionTrace { face: j, vertices: face.interior_vertices.clone(), pointwise, variational, weights })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub ns: Vec<usize>,
    /// Weighted RMS gap `(Σ m_i |A_i − B_i|² / Σ m_i)^{1/2}` over the
    /// face-interior vertices of all faces, per mesh.
    pub gaps: Vec<f64>,
    /// `log₂` ratios of successive gaps (meshes are expected to double).
    pub orders: Vec<f64>,
}

impl RefinementStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Pointwise-versus-variational traction gap for a smooth field with known
/// `div σ`, on the default box geometry at each resolution in `ns`.
pub fn traction_refinement_study(
    params: &LameParams,
    ns: &[usize],
    field: impl Fn(&Point) -> Point,
    div_sigma: impl Fn(&Point) -> Point,
) -> Result<RefinementStudy> {
    let mut gaps = Vec::with_capacity(ns.len());
    for &n in ns {
        let mesh = crate::geometry::build_mesh(&GeometryConfig::with_n(n))?;
        let mats = SystemMatrices::assemble(&mesh, &build_dof_map(&mesh), params)?;
        let v = mats.displacement_state(&mesh, &field);
        let f = mats.displacement_state(&mesh, &div_sigma);
        let (v, f) = (v.displacement_block(&mats.dofs), f.displacement_block(&mats.dofs));
        let (mut total, mut weight) = (0.0, 0.0);
        for j in 0..mesh.num_faces() {
            let t = traction_trace(&mesh, &mats, params, v, f, j)?;
            total += t.squared_gap();
            weight += t.weights.iter().sum::<f64>();
        }
        gaps.push((total / weight).sqrt());
    }
    let orders = gaps.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(RefinementStudy { ns: ns.to_vec(), gaps, orders })
}

/// `v = (sin(x+y), cos(y+z), sin(z+x))`.
pub fn manufactured_field(p: &Point) -> Point {
    let [x, y, z] = *p;
    [(x + y).sin(), (y + z).cos(), (z + x).sin()]
}

/// `div σ(v) = μ Δv + (μ+λ) ∇ div v` for [`manufactured_field`].
pub fn manufactured_div_sigma(params: &LameParams, p: &Point) -> Point {
    let [x, y, z] = *p;
    let (a, b, c) = ((x + y).sin(), (y + z).cos(), (z + x).sin());
    let lap = [-2.0 * a, -2.0 * b, -2.0 * c];
    let grad_div = [-a - c, -a - b, -b - c];
    let (mu, ml) = (params.mu, params.mu + params.lambda);
    [0, 1, 2].map(|k| mu * lap[k] + ml * grad_div[k])
}
