//! Discrete energy space and the generator pencil `(M_E, B)`.
//!
//! State vectors are split into a velocity block `V` and a displacement
//! block `D`, stored as `X = [V; D]`:
//!
//! * `V` holds one velocity triple per vertex off the outer boundary: the
//!   heat field `u` at fluid and interface vertices, and `w₁` at solid
//!   interior vertices. On the interface the same triple is `u`, the thin
//!   velocity `h₁` and the trace of `w₁`, so those identifications hold by
//!   construction, including along shared face edges.
//! * `D` holds one displacement triple per interface or solid-interior
//!   vertex: `h₀` on the interface (which is also the trace of `w₀`) and
//!   `w₀` inside the solid.
//!
//! With `P` the injection of solid-side fields into `V`,
//!
//! ```text
//! M_E = [ M_V   0  ]      B = [ -A_f     -P K_D ]
//!       [  0   K_D ]          [ K_D Pᵀ     0    ]
//! ```
//!
//! where `M_V` is the fluid, thin-layer and solid L² mass on velocities,
//! `A_f` the fluid gradient stiffness and `K_D` the thin-layer energy plus the
//! solid Lamé stiffness. Hence `Re Xᴴ B X = −‖∇u‖²` for every `X`.

use std::ops::{Deref, DerefMut};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::fem::{self, LameParams};
use crate::geometry::{Mesh, Point, VertexClass};
use crate::linalg::{BandLayout, BandedCholesky, Csr, Scalar, Triplets};

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub n_vel: usize,
    pub n_disp: usize,
    /// First velocity index of each vertex (`None` on the outer boundary).
    pub vel: Vec<Option<usize>>,
    /// First displacement index (local to the `D` block) of each vertex.
    pub disp: Vec<Option<usize>>,
    pub class: Vec<VertexClass>,
    /// For every displacement index, the velocity index at the same vertex
    /// and component: the injection `P`.
    pub disp_to_vel: Vec<usize>,
    /// Velocity indices of `u` DOFs (fluid and interface vertices).
    pub heat_dofs: Vec<usize>,
}

pub fn build_dof_map(mesh: &Mesh) -> DofMap {
    let nv = mesh.vertices.len();
    let mut vel = vec![None; nv];
    let mut disp = vec![None; nv];
    let (mut n_vel, mut n_disp) = (0, 0);
    let mut disp_to_vel = Vec::new();
    let mut heat_dofs = Vec::new();
    for v in 0..nv {
        let class = mesh.vertex_class[v];
        if class == VertexClass::Exterior {
            continue;
        }
        vel[v] = Some(n_vel);
        if matches!(class, VertexClass::Fluid | VertexClass::Interface) {
            heat_dofs.extend(n_vel..n_vel + 3);
        }
        if matches!(class, VertexClass::Interface | VertexClass::SolidInterior) {
            disp[v] = Some(n_disp);
            disp_to_vel.extend(n_vel..n_vel + 3);
            n_disp += 3;
        }
        n_vel += 3;
    }
    DofMap { n_vel, n_disp, vel, disp, class: mesh.vertex_class.clone(), disp_to_vel, heat_dofs }
}

impl DofMap {
    pub fn len(&self) -> usize {
        self.n_vel + self.n_disp
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertices_of(&self, class: VertexClass) -> impl Iterator<Item = usize> + '_ {
        (0..self.class.len()).filter(move |&v| self.class[v] == class)
    }

    /// Interface and solid-interior vertices, ascending.
    pub fn solid_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.class.len()).filter(|&v| self.disp[v].is_some())
    }

    /// Global state index of displacement DOF `d` of the `D` block.
    pub fn disp_global(&self, d: usize) -> usize {
        self.n_vel + d
    }

    /// Displacement indices (local to `D`) at solid-interior vertices.
    pub fn interior_disp_dofs(&self) -> Vec<usize> {
        self.vertices_of(VertexClass::SolidInterior)
            .flat_map(|v| {
                let b = self.disp[v].unwrap();
                b..b + 3
            })
            .collect()
    }

    /// Displacement indices (local to `D`) at interface vertices.
    pub fn interface_disp_dofs(&self) -> Vec<usize> {
        self.vertices_of(VertexClass::Interface)
            .flat_map(|v| {
                let b = self.disp[v].unwrap();
                b..b + 3
            })
            .collect()
    }
}

/// A point of the discrete energy space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    pub values: Vec<T>,
}

impl<T> Deref for StateVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.values
    }
}

impl<T> DerefMut for StateVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

impl<T: Scalar> StateVector<T> {
    pub fn zeros(dofs: &DofMap) -> Self {
        StateVector { values: vec![T::zero(); dofs.len()] }
    }

    pub fn from_vec(values: Vec<T>) -> Self {
        StateVector { values }
    }

    pub fn velocity_block(&self, dofs: &DofMap) -> &[T] {
        &self.values[..dofs.n_vel]
    }

    pub fn displacement_block(&self, dofs: &DofMap) -> &[T] {
        &self.values[dofs.n_vel..]
    }

    fn triple(&self, base: Option<usize>) -> Option<[T; 3]> {
        base.map(|b| [self.values[b], self.values[b + 1], self.values[b + 2]])
    }

    /// Heat field `u` at a vertex (zero on the outer boundary; `None` inside
    /// the solid).
    pub fn u(&self, dofs: &DofMap, v: usize) -> Option<[T; 3]> {
        match dofs.class[v] {
            VertexClass::Exterior => Some([T::zero(); 3]),
            VertexClass::SolidInterior => None,
            _ => self.triple(dofs.vel[v]),
        }
    }

    /// Thin displacement `h₀` at an interface vertex.
    pub fn h0(&self, dofs: &DofMap, v: usize) -> Option<[T; 3]> {
        match dofs.class[v] {
            VertexClass::Interface => self.triple(dofs.disp[v].map(|d| d + dofs.n_vel)),
            _ => None,
        }
    }

    /// Thin velocity `h₁` at an interface vertex: the shared velocity triple.
    pub fn h1(&self, dofs: &DofMap, v: usize) -> Option<[T; 3]> {
        match dofs.class[v] {
            VertexClass::Interface => self.triple(dofs.vel[v]),
            _ => None,
        }
    }

    /// Thick displacement `w₀` at any solid-side vertex.
    pub fn w0(&self, dofs: &DofMap, v: usize) -> Option<[T; 3]> {
        self.triple(dofs.disp[v].map(|d| d + dofs.n_vel))
    }

    /// Thick velocity `w₁` at any solid-side vertex.
    pub fn w1(&self, dofs: &DofMap, v: usize) -> Option<[T; 3]> {
        dofs.disp[v].and_then(|_| self.triple(dofs.vel[v]))
    }

    /// `h₀` values on the vertices of face `j`.
    pub fn h0_face(&self, dofs: &DofMap, mesh: &Mesh, j: usize) -> Result<Vec<[T; 3]>> {
        Ok(mesh.face(j)?.vertices.iter().map(|&v| self.h0(dofs, v).unwrap()).collect())
    }

    /// `h₁` values on the vertices of face `j`.
    pub fn h1_face(&self, dofs: &DofMap, mesh: &Mesh, j: usize) -> Result<Vec<[T; 3]>> {
        Ok(mesh.face(j)?.vertices.iter().map(|&v| self.h1(dofs, v).unwrap()).collect())
    }
}

/// Assembled blocks and the generator pencil.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub dofs: DofMap,
    /// Energy Gram `M_E` on the full state.
    pub energy: Csr,
    /// Generator `B` on the full state.
    pub generator: Csr,
    /// `M_V = M_f + Σ_j M_j + M_s` on the velocity block.
    pub mass_vel: Csr,
    /// Fluid gradient stiffness `A_f` on the velocity block.
    pub heat_stiffness: Csr,
    /// `K_D = Σ_j (K_j + M_j) + K_s` on the displacement block.
    pub disp_energy: Csr,
    pub fluid_mass: Csr,
    pub thin_mass_vel: Csr,
    pub solid_mass_vel: Csr,
    /// Thin stiffness plus zeroth-order term, displacement block.
    pub thin_energy: Csr,
    /// Lamé stiffness `K_s`, displacement block numbering.
    pub solid_stiffness: Csr,
    /// Solid L² mass, displacement block numbering.
    pub solid_mass: Csr,
    /// Cholesky certificate of `K_D`.
    pub disp_factor: BandedCholesky,
    /// Band layout for the reduced velocity systems.
    pub reduced_layout: BandLayout,
}

fn par_elements<E: Send, F>(items: &[usize], f: F) -> Result<Vec<E>>
where
    F: Fn(usize) -> Result<E> + Sync,
{
    items.par_iter().map(|&e| f(e)).collect()
}

fn vec_triples(t: &mut Triplets, bases: &[usize], blk: impl Fn(usize, usize) -> f64) {
    for (a, &ba) in bases.iter().enumerate() {
        for (b, &bb) in bases.iter().enumerate() {
            for i in 0..3 {
                for k in 0..3 {
                    let v = blk(3 * a + i, 3 * b + k);
                    if v != 0.0 {
                        t.push(ba + i, bb + k, v);
                    }
                }
            }
        }
    }
}

/// Scalar element matrix applied componentwise to vector DOFs.
fn scalar_triples(t: &mut Triplets, bases: &[Option<usize>], blk: impl Fn(usize, usize) -> f64) {
    for (a, ba) in bases.iter().enumerate() {
        let Some(ba) = ba else { continue };
        for (b, bb) in bases.iter().enumerate() {
            let Some(bb) = bb else { continue };
            let v = blk(a, b);
            for i in 0..3 {
                t.push(ba + i, bb + i, v);
            }
        }
    }
}

/// Thin-layer energy `K_j + M_j` of one face patch in a patch-local numbering.
#[derive(Debug, Clone)]
pub struct ThinPatch {
    pub face: usize,
    /// Patch vertex list; local DOF `3 * k + c` belongs to `vertices[k]`.
    pub vertices: Vec<usize>,
    pub energy: Csr,
    pub mass: Csr,
}

pub fn assemble_thin_patch(mesh: &Mesh, params: &LameParams, j: usize) -> Result<ThinPatch> {
    let face = mesh.face(j)?;
    let local = |v: usize| face.vertices.binary_search(&v).unwrap();
    let n = 3 * face.vertices.len();
    let mut te = Triplets::new(n, n);
    let mut tm = Triplets::new(n, n);
    for &t in &face.tris {
        let tri = &mesh.interface_tris[t];
        let p = mesh.tri_points(&tri.v);
        let ke = fem::tri_thin_energy(&p, &face.frame, params)?;
        let me = fem::tri_mass(&fem::face_local_coords(&p, &face.frame))?;
        let bases: Vec<usize> = tri.v.iter().map(|&v| 3 * local(v)).collect();
        vec_triples(&mut te, &bases, |r, c| ke[(r, c)]);
        scalar_triples(&mut tm, &bases.iter().map(|&b| Some(b)).collect::<Vec<_>>(), |a, b| me[(a, b)]);
    }
    Ok(ThinPatch { face: j, vertices: face.vertices.clone(), energy: te.to_csr(), mass: tm.to_csr() })
}

impl SystemMatrices {
    pub fn assemble(mesh: &Mesh, dofs: &DofMap, params: &LameParams) -> Result<Self> {
        params.validate()?;
        let (nv, nd) = (dofs.n_vel, dofs.n_disp);

        let fluid: Vec<usize> = mesh.fluid_tets().collect();
        let solid: Vec<usize> = mesh.solid_tets().collect();
        let fluid_elems = par_elements(&fluid, |t| {
            let p = mesh.tet_points(t);
            Ok((fem::tet_grad_stiffness(&p)?, fem::tet_mass(&p)?))
        })?;
        let solid_elems = par_elements(&solid, |t| {
            let p = mesh.tet_points(t);
            Ok((fem::tet_lame_stiffness(&p, params.mu, params.lambda)?, fem::tet_mass(&p)?))
        })?;

        let mut t_af = Triplets::new(nv, nv);
        let mut t_mf = Triplets::new(nv, nv);
        for (&t, (k, m)) in fluid.iter().zip(&fluid_elems) {
            let bases = mesh.tets[t].v.map(|v| dofs.vel[v]);
            scalar_triples(&mut t_af, &bases, |a, b| k[(a, b)]);
            scalar_triples(&mut t_mf, &bases, |a, b| m[(a, b)]);
        }

        let mut t_ks = Triplets::new(nd, nd);
        let mut t_ms = Triplets::new(nd, nd);
        for (&t, (k, m)) in solid.iter().zip(&solid_elems) {
            let tet = mesh.tets[t].v;
            let bases: Vec<usize> = tet.iter().map(|&v| dofs.disp[v].unwrap()).collect();
            vec_triples(&mut t_ks, &bases, |r, c| k[(r, c)]);
            scalar_triples(&mut t_ms, &tet.map(|v| dofs.disp[v]), |a, b| m[(a, b)]);
        }

        let mut t_thin = Triplets::new(nd, nd);
        let mut t_thin_mass = Triplets::new(nd, nd);
        for j in 0..mesh.num_faces() {
            let patch = assemble_thin_patch(mesh, params, j)?;
            let to_global = |l: usize| dofs.disp[patch.vertices[l / 3]].unwrap() + l % 3;
            for (r, c, v) in patch.energy.triplets() {
                t_thin.push(to_global(r), to_global(c), v);
            }
            for (r, c, v) in patch.mass.triplets() {
                t_thin_mass.push(to_global(r), to_global(c), v);
            }
        }

        let heat_stiffness = t_af.to_csr();
        let fluid_mass = t_mf.to_csr();
        let solid_stiffness = t_ks.to_csr();
        let solid_mass = t_ms.to_csr();
        let thin_energy = t_thin.to_csr();
        let thin_mass = t_thin_mass.to_csr();

        let inject = |a: &Csr| -> Csr {
            let mut t = Triplets::new(nv, nv);
            for (i, j, v) in a.triplets() {
                t.push(dofs.disp_to_vel[i], dofs.disp_to_vel[j], v);
            }
            t.to_csr()
        };
        let thin_mass_vel = inject(&thin_mass);
        let solid_mass_vel = inject(&solid_mass);
        let mass_vel = Csr::linear_combination(&[(1.0, &fluid_mass), (1.0, &thin_mass_vel), (1.0, &solid_mass_vel)]);
        let disp_energy = Csr::linear_combination(&[(1.0, &thin_energy), (1.0, &solid_stiffness)]);

        let disp_factor = BandedCholesky::factor(&BandLayout::rcm(&disp_energy), &disp_energy)?;
        BandedCholesky::factor(&BandLayout::rcm(&mass_vel), &mass_vel)?;

        let n = nv + nd;
        let mut te = Triplets::new(n, n);
        let mut tb = Triplets::new(n, n);
        for (i, j, v) in mass_vel.triplets() {
            te.push(i, j, v);
        }
        for (i, j, v) in disp_energy.triplets() {
            te.push(nv + i, nv + j, v);
            tb.push(dofs.disp_to_vel[i], nv + j, -v);
            tb.push(nv + i, dofs.disp_to_vel[j], v);
        }
        for (i, j, v) in heat_stiffness.triplets() {
            tb.push(i, j, -v);
        }

        let pattern = Csr::linear_combination(&[(1.0, &mass_vel), (1.0, &heat_stiffness), (1.0, &inject(&disp_energy))]);
        let reduced_layout = BandLayout::rcm(&pattern);

        Ok(SystemMatrices {
            dofs: dofs.clone(),
            energy: te.to_csr(),
            generator: tb.to_csr(),
            mass_vel,
            heat_stiffness,
            disp_energy,
            fluid_mass,
            thin_mass_vel,
            solid_mass_vel,
            thin_energy,
            solid_stiffness,
            solid_mass,
            disp_factor,
            reduced_layout,
        })
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// `Pᵀ V`: solid-side restriction of a velocity block.
    pub fn restrict<T: Scalar>(&self, vel: &[T]) -> Vec<T> {
        self.dofs.disp_to_vel.iter().map(|&i| vel[i]).collect()
    }

    /// `P y`: extension of a displacement-indexed field by zero.
    pub fn extend<T: Scalar>(&self, disp: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dofs.n_vel];
        for (d, &i) in self.dofs.disp_to_vel.iter().enumerate() {
            out[i] += disp[d];
        }
        out
    }

    /// `‖∇u‖²` over the fluid region.
    pub fn heat_dissipation<T: Scalar>(&self, x: &[T]) -> f64 {
        let v = &x[..self.dofs.n_vel];
        self.heat_stiffness.form(v, v).re()
    }

    /// `⟨x, y⟩_H = xᴴ M_E y`.
    pub fn inner<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        self.energy.form(x, y)
    }

    /// Skew part `S` and dissipative part `N = N*` with `B = S + N`.
    pub fn split_generator(&self) -> (Csr, Csr) {
        let n = self.len();
        let mut tn = Triplets::new(n, n);
        for (i, j, v) in self.heat_stiffness.triplets() {
            tn.push(i, j, -v);
        }
        let dissipative = tn.to_csr();
        let skew = Csr::linear_combination(&[(1.0, &self.generator), (-1.0, &dissipative)]);
        (skew, dissipative)
    }

    /// Random state with standard normal entries.
    pub fn random_state<R: rand::Rng>(&self, rng: &mut R) -> StateVector<f64> {
        use rand_distr::{Distribution, StandardNormal};
        StateVector::from_vec((0..self.len()).map(|_| StandardNormal.sample(rng)).collect())
    }

    pub fn random_complex_state<R: rand::Rng>(&self, rng: &mut R) -> StateVector<Complex64> {
        use rand_distr::{Distribution, StandardNormal};
        StateVector::from_vec(
            (0..self.len()).map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))).collect(),
        )
    }

    /// State whose displacement is the given vector field evaluated at the
    /// solid-side vertices; velocities zero.
    pub fn displacement_state(&self, mesh: &Mesh, f: impl Fn(&Point) -> Point) -> StateVector<f64> {
        let mut x = StateVector::zeros(&self.dofs);
        for v in self.dofs.solid_vertices() {
            let b = self.dofs.n_vel + self.dofs.disp[v].unwrap();
            let val = f(&mesh.vertices[v]);
            x.values[b..b + 3].copy_from_slice(&val);
        }
        x
    }
}

/// Energy Gram `M_E`; fails with `NonPositiveEnergy` if it is not definite.
pub fn assemble_energy(mesh: &Mesh, dofs: &DofMap, params: &LameParams) -> Result<Csr> {
    SystemMatrices::assemble(mesh, dofs, params).map(|m| m.energy)
}

pub fn assemble_generator(mesh: &Mesh, dofs: &DofMap, params: &LameParams) -> Result<Csr> {
    SystemMatrices::assemble(mesh, dofs, params).map(|m| m.generator)
}

/// `√(Xᴴ M_E X)`.
pub fn energy_norm<T: Scalar>(energy: &Csr, x: &[T]) -> f64 {
    energy.form(x, x).re().max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, GeometryConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (Mesh, SystemMatrices) {
        let mesh = build_mesh(&GeometryConfig::with_n(n)).unwrap();
        let dofs = build_dof_map(&mesh);
        let mats = SystemMatrices::assemble(&mesh, &dofs, &LameParams::default()).unwrap();
        (mesh, mats)
    }

    #[test]
    fn dof_census_n4() {
        let mesh = build_mesh(&GeometryConfig::with_n(4)).unwrap();
        let dofs = build_dof_map(&mesh);
        // 5³ vertices: 98 on the outer boundary, 26 interface, 1 solid interior
        assert_eq!(mesh.count_class(VertexClass::Exterior), 98);
        assert_eq!(mesh.count_class(VertexClass::Interface), 26);
        assert_eq!(mesh.count_class(VertexClass::SolidInterior), 1);
        let fluid_side = 125 - 98 - 1;
        assert_eq!(dofs.len(), 3 * fluid_side + 3 * 26 + 6);
        for v in dofs.vertices_of(VertexClass::Exterior) {
            assert!(dofs.vel[v].is_none() && dofs.disp[v].is_none());
        }
        for v in dofs.vertices_of(VertexClass::Interface) {
            assert!(dofs.vel[v].is_some() && dofs.disp[v].is_some());
        }
    }

    #[test]
    fn constant_displacement_energy() {
        let (mesh, mats) = setup(8);
        let x = mats.displacement_state(&mesh, |_| [1.0, 0.0, 0.0]);
        let e = mats.inner(&x, &x);
        assert!((e - 1.5).abs() < 1e-12, "{e}");
        let zero = StateVector::<f64>::zeros(&mats.dofs);
        assert_eq!(energy_norm(&mats.energy, &zero), 0.0);
    }

    #[test]
    fn matrices_symmetric() {
        let (_, mats) = setup(4);
        for m in [&mats.energy, &mats.mass_vel, &mats.disp_energy, &mats.heat_stiffness] {
            assert!(m.asymmetry() <= 1e-15 * m.max_abs());
        }
        let (skew, diss) = mats.split_generator();
        let skt = skew.transpose();
        assert!(Csr::linear_combination(&[(1.0, &skew), (1.0, &skt)]).max_abs() == 0.0);
        assert!(diss.asymmetry() == 0.0);
    }

    #[test]
    fn patchwise_thin_assembly_matches_monolithic() {
        let (mesh, mats) = setup(4);
        let params = LameParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = mats.random_state(&mut rng);
        let d = x.displacement_block(&mats.dofs);
        let mono = mats.thin_energy.form(d, d);
        let mut patchwise = 0.0;
        for j in 0..6 {
            let patch = assemble_thin_patch(&mesh, &params, j).unwrap();
            let local: Vec<f64> = (0..3 * patch.vertices.len())
                .map(|l| d[mats.dofs.disp[patch.vertices[l / 3]].unwrap() + l % 3])
                .collect();
            patchwise += patch.energy.form(&local, &local);
        }
        assert!((mono - patchwise).abs() <= 1e-12 * mono.abs());
    }
}
