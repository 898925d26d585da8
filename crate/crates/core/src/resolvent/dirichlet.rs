use num_complex::Complex64;

use crate::assembly::{assemble_thin_patch, SystemMatrices};
use crate::error::{Error, Result};
use crate::fem::LameParams;
use crate::geometry::Mesh;
use crate::linalg::{norm, BandLayout, BandedCholesky, Csr, Scalar};

use super::ResolventQuery;

/// Lamé-harmonic extension of interface data into the solid.
pub struct DirichletSolver<'a> {
    mats: &'a SystemMatrices,
    /// Displacement-block indices, interior then interface.
    pub interior: Vec<usize>,
    pub interface: Vec<usize>,
    k_ii: BandedCholesky,
    k_ig: Csr,
}

impl<'a> DirichletSolver<'a> {
    pub fn new(mats: &'a SystemMatrices) -> Result<Self> {
        let interior = mats.dofs.interior_disp_dofs();
        let interface = mats.dofs.interface_disp_dofs();
        let k = mats.solid_stiffness.submatrix(&interior, &interior);
        let k_ii = BandedCholesky::factor(&BandLayout::rcm(&k), &k)?;
        let k_ig = mats.solid_stiffness.submatrix(&interior, &interface);
        Ok(DirichletSolver { mats, interior, interface, k_ii, k_ig })
    }

    /// `g` is given on `self.interface` (in that order); the result is a
    /// full displacement-block field.
    pub fn map<T: Scalar>(&self, g: &[T]) -> Vec<T> {
        assert_eq!(g.len(), self.interface.len());
        let rhs: Vec<T> = self.k_ig.mul_vec(g).into_iter().map(|v| -v).collect();
        let vi = self.k_ii.solve(&rhs);
        let mut v = vec![T::zero(); self.mats.dofs.n_disp];
        for (k, &d) in self.interior.iter().enumerate() {
            v[d] = vi[k];
        }
        for (k, &d) in self.interface.iter().enumerate() {
            v[d] = g[k];
        }
        v
    }
}

pub fn dirichlet_map<T: Scalar>(mats: &SystemMatrices, g: &[T]) -> Result<Vec<T>> {
    Ok(DirichletSolver::new(mats)?.map(g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZDecomposition {
    /// `z` on the displacement block.
    pub z: Vec<Complex64>,
    /// `‖z|_Γ‖` relative to the sizes of `w₀` and the correction.
    pub trace_residual: f64,
    /// Weak residual of the interior equation, relative to the sum of its
    /// term sizes.
    pub interior_residual: f64,
    /// The same residual with the `D(g)` forcing taken as `−iβ D(g)`.
    pub flipped_sign_residual: f64,
}

/// Builds `z = w₀ − (i/β) D([α w₀ − u − w₀*]|_Γ)` and checks that it
/// vanishes on the interface and satisfies, on interior tests,
/// `−β² z − div σ(z) = iβ D(g) − (α² + 2iαβ) w₀ + (α+iβ) w₀* + w₁*`.
pub fn z_decomposition_check(mats: &SystemMatrices, q: &ResolventQuery, x: &[Complex64]) -> Result<ZDecomposition> {
    if q.beta == 0.0 {
        return Err(Error::BetaZero);
    }
    let (alpha, beta) = (q.alpha, q.beta);
    let dofs = &mats.dofs;
    let nv = dofs.n_vel;
    let solver = DirichletSolver::new(mats)?;
    let w0 = &x[nv..];
    let w0s = &q.data[nv..];
    let w1s: Vec<Complex64> = dofs.disp_to_vel.iter().map(|&i| q.data[i]).collect();

    let g: Vec<Complex64> =
        solver.interface.iter().map(|&d| w0[d] * alpha - x[dofs.disp_to_vel[d]] - w0s[d]).collect();
    let dg = solver.map(&g);
    let i_over_beta = Complex64::new(0.0, 1.0 / beta);
    let z: Vec<Complex64> = w0.iter().zip(&dg).map(|(&w, &d)| w - i_over_beta * d).collect();

    let z_trace: Vec<Complex64> = solver.interface.iter().map(|&d| z[d]).collect();
    let w_trace: Vec<Complex64> = solver.interface.iter().map(|&d| w0[d]).collect();
    let trace_scale = norm(&w_trace) + norm(&dg) / beta.abs();
    let trace_residual = if trace_scale == 0.0 { norm(&z_trace) } else { norm(&z_trace) / trace_scale };

    let interior = &solver.interior;
    let restrict = |v: Vec<Complex64>| -> Vec<Complex64> { interior.iter().map(|&d| v[d]).collect() };
    let ks_z = restrict(mats.solid_stiffness.mul_vec(&z));
    let ms_z = restrict(mats.solid_mass.mul_vec(&z));
    let ms_w0 = restrict(mats.solid_mass.mul_vec(w0));
    let ms_w0s = restrict(mats.solid_mass.mul_vec(w0s));
    let ms_w1s = restrict(mats.solid_mass.mul_vec(&w1s));
    let ms_dg = restrict(mats.solid_mass.mul_vec(&dg));

    let zshift = q.shift();
    let c_w0 = -Complex64::new(alpha * alpha, 2.0 * alpha * beta);
    let ib = Complex64::new(0.0, beta);
    let residual = |sign: f64| -> f64 {
        let n = interior.len();
        let diff: Vec<Complex64> = (0..n)
            .map(|k| {
                let lhs = ks_z[k] - ms_z[k] * (beta * beta);
                let rhs = c_w0 * ms_w0[k] + zshift * ms_w0s[k] + ms_w1s[k] + ib * sign * ms_dg[k];
                lhs - rhs
            })
            .collect();
        let scale = norm(&ks_z)
            + beta * beta * norm(&ms_z)
            + c_w0.norm() * norm(&ms_w0)
            + zshift.norm() * norm(&ms_w0s)
            + norm(&ms_w1s)
            + beta.abs() * norm(&ms_dg);
        if scale == 0.0 {
            norm(&diff)
        } else {
            norm(&diff) / scale
        }
    };

    Ok(ZDecomposition {
        interior_residual: residual(1.0),
        flipped_sign_residual: residual(-1.0),
        trace_residual,
        z,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThinBalance {
    /// Relative defect of the velocity equation tested against `h₀`.
    pub residual: f64,
    /// `Σ_j [(σ_Γ(h₀), ε_Γ(h₀))_{Γ_j} + ‖h₀‖²_{Γ_j}]` summed face by face.
    pub thin_energy: f64,
    /// Relative gap between the face-by-face and monolithic thin energies.
    pub patchwise_gap: f64,
}

/// Tests the velocity rows of the resolvent system against the test field
/// equal to `h₀` on the interface and zero elsewhere. The thin-layer term is
/// summed from independently assembled face patches, so no edge terms enter.
pub fn thin_identity_check(
    mesh: &Mesh,
    params: &LameParams,
    mats: &SystemMatrices,
    q: &ResolventQuery,
    x: &[Complex64],
) -> Result<ThinBalance> {
    let dofs = &mats.dofs;
    let nv = dofs.n_vel;
    let (v, d) = x.split_at(nv);

    let mut h0_ext = vec![Complex64::new(0.0, 0.0); dofs.n_disp];
    for dd in dofs.interface_disp_dofs() {
        h0_ext[dd] = d[dd];
    }
    let psi = mats.extend(&h0_ext);

    let t_mass = q.shift() * mats.mass_vel.form(&psi, v);
    let t_heat = mats.heat_stiffness.form(&psi, v);
    let t_solid = mats.solid_stiffness.form(&h0_ext, d);
    let t_data = mats.mass_vel.form(&psi, &q.data[..nv]);

    let mut t_thin = Complex64::new(0.0, 0.0);
    for j in 0..mesh.num_faces() {
        let patch = assemble_thin_patch(mesh, params, j)?;
        let local: Vec<Complex64> =
            (0..3 * patch.vertices.len()).map(|l| d[dofs.disp[patch.vertices[l / 3]].unwrap() + l % 3]).collect();
        t_thin += patch.energy.form(&local, &local);
    }
    let mono = mats.thin_energy.form(&h0_ext, d);

    let defect = (t_mass + t_heat + t_thin + t_solid - t_data).norm();
    let scale = t_mass.norm() + t_heat.norm() + t_thin.norm() + t_solid.norm() + t_data.norm();
    Ok(ThinBalance {
        residual: if scale == 0.0 { defect } else { defect / scale },
        thin_energy: t_thin.re,
        patchwise_gap: if t_thin.norm() == 0.0 { (mono - t_thin).norm() } else { (mono - t_thin).norm() / t_thin.norm() },
    })
}
