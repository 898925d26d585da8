//! P1 element kernels: heat gradient stiffness and 3D Lamé stiffness on
//! tetrahedra, flat-face thin-layer Lamé stiffness on triangles, and the
//! consistent P1 mass matrices. All integrands are polynomial and integrated
//! in closed form.
//!
//! Vector-valued element matrices use vertex-major ordering: local DOF
//! `3 * a + i` is component `i` at vertex `a`.

use nalgebra::{Matrix3, Matrix4, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{FaceFrame, Point};

pub type LameMatrix = SMatrix<f64, 12, 12>;
pub type ThinMatrix = SMatrix<f64, 9, 9>;

/// Lamé parameters of the thick solid and of the thin interface layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameParams {
    pub mu: f64,
    pub lambda: f64,
    pub mu_thin: f64,
    pub lambda_thin: f64,
}

impl Default for LameParams {
    fn default() -> Self {
        LameParams { mu: 1.0, lambda: 1.0, mu_thin: 1.0, lambda_thin: 1.0 }
    }
}

impl LameParams {
    pub fn validate(&self) -> Result<()> {
        let check = |field: &str, ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Validation { field: field.into(), msg: msg.into() })
            }
        };
        check("mu", self.mu > 0.0, "must be positive")?;
        check("mu_thin", self.mu_thin > 0.0, "must be positive")?;
        check("lambda", self.lambda >= 0.0, "must be nonnegative")?;
        check("lambda_thin", self.lambda_thin >= 0.0, "must be nonnegative")
    }

    pub fn scaled(&self, s: f64) -> Self {
        LameParams {
            mu: s * self.mu,
            lambda: s * self.lambda,
            mu_thin: s * self.mu_thin,
            lambda_thin: s * self.lambda_thin,
        }
    }
}

/// Volume and barycentric gradients of a P1 tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub volume: f64,
    pub grads: [Vector3<f64>; 4],
}

impl TetGeometry {
    pub fn new(p: &[Point; 4]) -> Result<Self> {
        let col = |k: usize| Vector3::new(p[k][0] - p[0][0], p[k][1] - p[0][1], p[k][2] - p[0][2]);
        let jac = Matrix3::from_columns(&[col(1), col(2), col(3)]);
        let det = jac.determinant();
        let volume = det / 6.0;
        let scale = (1..4).map(|k| col(k).norm()).fold(0.0, f64::max);
        if !(volume > 1e-14 * scale.powi(3)) {
            return Err(Error::DegenerateTet(volume));
        }
        let inv = jac.try_inverse().ok_or(Error::DegenerateTet(volume))?;
        let g1 = inv.row(0).transpose();
        let g2 = inv.row(1).transpose();
        let g3 = inv.row(2).transpose();
        Ok(TetGeometry { volume, grads: [-(g1 + g2 + g3), g1, g2, g3] })
    }

    /// Gradient of the P1 interpolant of a nodal vector field:
    /// `G[(a, b)] = ∂v_a / ∂x_b`.
    pub fn field_gradient(&self, values: &[Point; 4]) -> Matrix3<f64> {
        let mut g = Matrix3::zeros();
        for (k, v) in values.iter().enumerate() {
            g += Vector3::from(*v) * self.grads[k].transpose();
        }
        g
    }
}

/// `∫ ∇φ_a · ∇φ_b` over the tet.
pub fn tet_grad_stiffness(p: &[Point; 4]) -> Result<Matrix4<f64>> {
    let geo = TetGeometry::new(p)?;
    Ok(Matrix4::from_fn(|a, b| geo.volume * geo.grads[a].dot(&geo.grads[b])))
}

/// `∫ σ(φ_b e_k) : ε(φ_a e_i)` with `σ(v) = 2με(v) + λ tr ε(v) I`.
pub fn tet_lame_stiffness(p: &[Point; 4], mu: f64, lambda: f64) -> Result<LameMatrix> {
    let geo = TetGeometry::new(p)?;
    let g = &geo.grads;
    Ok(LameMatrix::from_fn(|r, c| {
        let (a, i, b, k) = (r / 3, r % 3, c / 3, c % 3);
        let diag = if i == k { g[a].dot(&g[b]) } else { 0.0 };
        geo.volume * (mu * (diag + g[a][k] * g[b][i]) + lambda * g[a][i] * g[b][k])
    }))
}

/// Consistent P1 mass: `vol / 20 · (1 + δ_ab)`.
pub fn tet_mass(p: &[Point; 4]) -> Result<Matrix4<f64>> {
    let geo = TetGeometry::new(p)?;
    Ok(Matrix4::from_fn(|a, b| geo.volume / 20.0 * if a == b { 2.0 } else { 1.0 }))
}

fn tri_geometry(p: &[[f64; 2]; 3]) -> Result<(f64, [[f64; 2]; 3])> {
    let (e1, e2) = ([p[1][0] - p[0][0], p[1][1] - p[0][1]], [p[2][0] - p[0][0], p[2][1] - p[0][1]]);
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    let area = 0.5 * det.abs();
    let scale = (e1[0].hypot(e1[1])).max(e2[0].hypot(e2[1]));
    if !(area > 1e-14 * scale * scale) {
        return Err(Error::DegenerateTriangle(area));
    }
    // rows of the inverse Jacobian are the gradients of λ1, λ2
    let g1 = [e2[1] / det, -e2[0] / det];
    let g2 = [-e1[1] / det, e1[0] / det];
    Ok((area, [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]))
}

/// Consistent P1 mass of a triangle: `area / 12 · (1 + δ_ab)`.
pub fn tri_mass(p: &[[f64; 2]; 3]) -> Result<Matrix3<f64>> {
    let (area, _) = tri_geometry(p)?;
    Ok(Matrix3::from_fn(|a, b| area / 12.0 * if a == b { 2.0 } else { 1.0 }))
}

/// Thin-layer stiffness on a flat triangle given in face-local coordinates.
///
/// Local components per vertex are `(τ₁, τ₂, ν)`. The tangential pair carries
/// the 2D Lamé form with `(μ_Γ, λ_Γ)`; the normal component carries the
/// scalar gradient form scaled by `μ_Γ`.
pub fn tri_thin_lame_stiffness(p: &[[f64; 2]; 3], mu: f64, lambda: f64) -> Result<ThinMatrix> {
    let (area, g) = tri_geometry(p)?;
    Ok(ThinMatrix::from_fn(|r, c| {
        let (a, i, b, k) = (r / 3, r % 3, c / 3, c % 3);
        let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1];
        let v = match (i, k) {
            (2, 2) => mu * gg,
            (2, _) | (_, 2) => 0.0,
            _ => {
                let diag = if i == k { gg } else { 0.0 };
                mu * (diag + g[a][k] * g[b][i]) + lambda * g[a][i] * g[b][k]
            }
        };
        area * v
    }))
}

/// Face-local 2D coordinates `(x·τ₁, x·τ₂)` of a triangle on a flat face.
pub fn face_local_coords(p: &[Point; 3], frame: &FaceFrame) -> [[f64; 2]; 3] {
    let d = |a: &Point, b: &Point| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    p.map(|q| [d(&q, &frame.tangent1), d(&q, &frame.tangent2)])
}

/// Rotates a thin-layer matrix from local `(τ₁, τ₂, ν)` components to global
/// Cartesian components, vertex block by vertex block: `Rᵀ K R`.
pub fn thin_to_global(local: &ThinMatrix, frame: &FaceFrame) -> ThinMatrix {
    let rows = frame.local_rows();
    let r = Matrix3::from_fn(|i, j| rows[i][j]);
    let mut out = ThinMatrix::zeros();
    for a in 0..3 {
        for b in 0..3 {
            let blk: Matrix3<f64> = local.fixed_view::<3, 3>(3 * a, 3 * b).into_owned();
            out.fixed_view_mut::<3, 3>(3 * a, 3 * b).copy_from(&(r.transpose() * blk * r));
        }
    }
    out
}

/// Thin stiffness plus the zeroth-order term, in global components.
pub fn tri_thin_energy(p: &[Point; 3], frame: &FaceFrame, params: &LameParams) -> Result<ThinMatrix> {
    let local = face_local_coords(p, frame);
    let k = tri_thin_lame_stiffness(&local, params.mu_thin, params.lambda_thin)?;
    let m = tri_mass(&local)?;
    let mut out = thin_to_global(&k, frame);
    for a in 0..3 {
        for b in 0..3 {
            for i in 0..3 {
                out[(3 * a + i, 3 * b + i)] += m[(a, b)];
            }
        }
    }
    Ok(out)
}

/// Traction `ν · σ(z)` from a displacement gradient, evaluated through the
/// face frame: a normal part from the divergence, `2μ ∂z/∂ν`, and the
/// tangential correction brackets.
pub fn frame_traction(grad: &Matrix3<f64>, frame: &FaceFrame, mu: f64, lambda: f64) -> Point {
    let e = |p: &Point| Vector3::new(p[0], p[1], p[2]);
    let (nu, t1, t2) = (e(&frame.normal), e(&frame.tangent1), e(&frame.tangent2));
    // directional derivative ∂z/∂d = G d
    let dn = grad * nu;
    let d1 = grad * t1;
    let d2 = grad * t2;
    let div = dn.dot(&nu) + d1.dot(&t1) + d2.dot(&t2);
    let t = lambda * div * nu
        + 2.0 * mu * dn
        + mu * (d2.dot(&nu) - dn.dot(&t2)) * t2
        + mu * (d1.dot(&nu) - dn.dot(&t1)) * t1;
    [t[0], t[1], t[2]]
}

/// Stress `σ = 2με + λ tr(ε) I` of a displacement gradient.
pub fn stress(grad: &Matrix3<f64>, mu: f64, lambda: f64) -> Matrix3<f64> {
    let eps = 0.5 * (grad + grad.transpose());
    2.0 * mu * eps + lambda * eps.trace() * Matrix3::identity()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, Matrix4, SVector, SymmetricEigen, Vector4};

    const REF_TET: [Point; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    const SKEW_TET: [Point; 4] = [[0.1, -0.2, 0.3], [1.3, 0.1, 0.2], [0.4, 0.9, -0.1], [0.2, 0.3, 1.1]];

    fn lame_vec(p: &[Point; 4], f: impl Fn(&Point) -> Point) -> SVector<f64, 12> {
        SVector::<f64, 12>::from_fn(|r, _| f(&p[r / 3])[r % 3])
    }

    /// Barycentric coordinates by inverting `[1 x y z]`, an independent route
    /// to the P1 gradients.
    fn oracle_grads(p: &[Point; 4]) -> (f64, [[f64; 3]; 4]) {
        let a = Matrix4::from_fn(|r, c| if c == 0 { 1.0 } else { p[r][c - 1] });
        let inv = a.try_inverse().unwrap();
        let vol = a.determinant().abs() / 6.0;
        (vol, std::array::from_fn(|k| [inv[(1, k)], inv[(2, k)], inv[(3, k)]]))
    }

    #[test]
    fn grad_stiffness_matches_oracle() {
        for p in [REF_TET, SKEW_TET] {
            let k = tet_grad_stiffness(&p).unwrap();
            let (vol, g) = oracle_grads(&p);
            for a in 0..4 {
                for b in 0..4 {
                    let want = vol * (0..3).map(|i| g[a][i] * g[b][i]).sum::<f64>();
                    assert!((k[(a, b)] - want).abs() < 1e-14, "{a}{b}");
                }
                assert!(k.row(a).sum().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grad_stiffness_linear_field_energy() {
        let k = tet_grad_stiffness(&SKEW_TET).unwrap();
        let u = Vector4::from_fn(|a, _| SKEW_TET[a][0]);
        let vol = TetGeometry::new(&SKEW_TET).unwrap().volume;
        assert!(((u.transpose() * k * u)[0] - vol).abs() < 1e-13);
        let ones = Vector4::repeat(1.0);
        assert!((k * ones).norm() < 1e-14);
    }

    #[test]
    fn degenerate_elements_rejected() {
        let flat = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(matches!(tet_grad_stiffness(&flat), Err(Error::DegenerateTet(_))));
        let mut inverted = REF_TET;
        inverted.swap(1, 2);
        assert!(matches!(tet_mass(&inverted), Err(Error::DegenerateTet(_))));
        let line = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(matches!(tri_mass(&line), Err(Error::DegenerateTriangle(_))));
    }

    #[test]
    fn lame_rigid_motions_in_kernel() {
        let k = tet_lame_stiffness(&SKEW_TET, 1.3, 0.7).unwrap();
        let t = lame_vec(&SKEW_TET, |_| [0.3, -1.0, 2.0]);
        assert!((k * t).norm() < 1e-13);
        let w = [0.2, -0.5, 0.9];
        let r = lame_vec(&SKEW_TET, |x| cross3(&w, x));
        assert!((k * r).norm() < 1e-13);
    }

    fn cross3(a: &Point, b: &Point) -> Point {
        crate::geometry::cross(a, b)
    }

    #[test]
    fn lame_identity_field_energy() {
        let (mu, lambda) = (1.3, 0.7);
        let k = tet_lame_stiffness(&SKEW_TET, mu, lambda).unwrap();
        let v = lame_vec(&SKEW_TET, |x| *x);
        let vol = TetGeometry::new(&SKEW_TET).unwrap().volume;
        let e = (v.transpose() * k * v)[0];
        assert!((e - (6.0 * mu + 9.0 * lambda) * vol).abs() < 1e-13);
    }

    #[test]
    fn lame_kernel_is_exactly_rigid_motions() {
        let k = tet_lame_stiffness(&SKEW_TET, 1.0, 0.5).unwrap();
        let eig = SymmetricEigen::new(DMatrix::from_column_slice(12, 12, k.as_slice()));
        let scale = eig.eigenvalues.amax();
        let zeros = eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-12 * scale).count();
        assert_eq!(zeros, 6);
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-12 * scale));
        let kg = tet_grad_stiffness(&SKEW_TET).unwrap();
        let eig = SymmetricEigen::new(DMatrix::from_column_slice(4, 4, kg.as_slice()));
        let scale = eig.eigenvalues.amax();
        assert_eq!(eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-12 * scale).count(), 1);
    }

    const TRI: [[f64; 2]; 3] = [[0.1, 0.2], [1.2, 0.1], [0.3, 0.9]];

    fn tri_area(p: &[[f64; 2]; 3]) -> f64 {
        0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0])).abs()
    }

    fn thin_vec(f: impl Fn(&[f64; 2]) -> [f64; 3]) -> SVector<f64, 9> {
        SVector::<f64, 9>::from_fn(|r, _| f(&TRI[r / 3])[r % 3])
    }

    #[test]
    fn thin_stiffness_kernel_and_identity() {
        let (mu, lambda) = (0.8, 1.7);
        let k = tri_thin_lame_stiffness(&TRI, mu, lambda).unwrap();
        let c = thin_vec(|_| [0.4, -0.3, 0.0]);
        assert!((k * c).norm() < 1e-14);
        let rot = thin_vec(|x| [-x[1], x[0], 0.0]);
        assert!((k * rot).norm() < 1e-13);
        let n = thin_vec(|_| [0.0, 0.0, 2.5]);
        assert!((k * n).norm() < 1e-14);
        let id = thin_vec(|x| [x[0], x[1], 0.0]);
        let e = (id.transpose() * k * id)[0];
        assert!((e - (4.0 * mu + 4.0 * lambda) * tri_area(&TRI)).abs() < 1e-13);
        // normal block: scalar Laplacian scaled by μ_Γ
        let nx = thin_vec(|x| [0.0, 0.0, x[0]]);
        assert!(((nx.transpose() * k * nx)[0] - mu * tri_area(&TRI)).abs() < 1e-13);
    }

    #[test]
    fn thin_stiffness_psd_symmetric() {
        let k = tri_thin_lame_stiffness(&TRI, 1.0, 0.0).unwrap();
        assert_eq!(k, k.transpose());
        let eig = SymmetricEigen::new(DMatrix::from_column_slice(9, 9, k.as_slice()));
        let scale = eig.eigenvalues.amax();
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-13 * scale));
        // 3 in-plane rigid motions plus constant normal displacement
        assert_eq!(eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-12 * scale).count(), 4);
    }

    /// 4-point rule, exact for quadratics on a tet.
    fn quad_mass_oracle(p: &[Point; 4]) -> [[f64; 4]; 4] {
        let (a, b) = (0.585_410_196_624_968_5, 0.138_196_601_125_010_5);
        let (vol, _) = oracle_grads(p);
        let mut m = [[0.0; 4]; 4];
        for q in 0..4 {
            let bary: [f64; 4] = std::array::from_fn(|k| if k == q { a } else { b });
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] += vol / 4.0 * bary[i] * bary[j];
                }
            }
        }
        m
    }

    #[test]
    fn tet_mass_matches_quadrature() {
        for p in [REF_TET, SKEW_TET] {
            let m = tet_mass(&p).unwrap();
            let want = quad_mass_oracle(&p);
            for i in 0..4 {
                for j in 0..4 {
                    assert!((m[(i, j)] - want[i][j]).abs() < 1e-15);
                }
            }
            assert_eq!(m, m.transpose());
            let ones = Vector4::repeat(1.0);
            let vol = TetGeometry::new(&p).unwrap().volume;
            assert!(((ones.transpose() * m * ones)[0] - vol).abs() < 1e-15);
        }
    }

    #[test]
    fn tri_mass_measure() {
        let m = tri_mass(&TRI).unwrap();
        assert!((m.sum() - tri_area(&TRI)).abs() < 1e-15);
        assert!(m.cholesky().is_some());
    }

    #[test]
    fn frame_traction_equals_stress_times_normal() {
        let g = Matrix3::new(0.3, -1.2, 0.5, 0.7, 0.1, -0.4, 2.0, 0.6, -0.9);
        let frame = FaceFrame {
            normal: [0.0, -1.0, 0.0],
            tangent1: [1.0, 0.0, 0.0],
            tangent2: [0.0, 0.0, 1.0],
        };
        let (mu, lambda) = (1.4, 0.6);
        let t = frame_traction(&g, &frame, mu, lambda);
        let want = stress(&g, mu, lambda) * Vector3::new(0.0, -1.0, 0.0);
        for i in 0..3 {
            assert!((t[i] - want[i]).abs() < 1e-14);
        }
        let t = frame_traction(&Matrix3::identity(), &frame, mu, lambda);
        assert_eq!(t, [0.0, -(2.0 * mu + 3.0 * lambda), 0.0]);
    }
}
