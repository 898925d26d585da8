//! Direct solves with the shifted pencil `a M_E − b B`.
//!
//! Eliminating the displacement block leaves a system on velocities only:
//!
//! ```text
//! (a M_V + b A_f + (b²/a) P K_D Pᵀ) V = R_V − (b/a) P R_D
//! D = (K_D⁻¹ R_D + b Pᵀ V) / a
//! ```
//!
//! The reduced matrix is SPD for real positive `a, b` and complex symmetric
//! otherwise; it is factored once with a banded LU in RCM order.

use crate::assembly::SystemMatrices;
use crate::error::{Error, Result};
use crate::linalg::{norm, BandedLu, Scalar};

pub struct PencilSolver<'a, T: Scalar> {
    mats: &'a SystemMatrices,
    a: T,
    b: T,
    lu: BandedLu<T>,
}

impl<'a, T: Scalar> PencilSolver<'a, T> {
    pub fn new(mats: &'a SystemMatrices, a: T, b: T) -> Result<Self> {
        if a.modulus() == 0.0 {
            return Err(Error::SolverBreakdown("pencil shift a = 0".into()));
        }
        let c = b * b / a;
        let d2v = &mats.dofs.disp_to_vel;
        let entries = mats
            .mass_vel
            .triplets()
            .map(move |(i, j, v)| (i, j, a * v))
            .chain(mats.heat_stiffness.triplets().map(move |(i, j, v)| (i, j, b * v)))
            .chain(mats.disp_energy.triplets().map(move |(i, j, v)| (d2v[i], d2v[j], c * v)));
        let lu = BandedLu::factor(&mats.reduced_layout, entries)?;
        Ok(PencilSolver { mats, a, b, lu })
    }

    /// Solve with the displacement data given as `G = K_D⁻¹ R_D`.
    pub fn solve_split(&self, r_vel: &[T], g: &[T]) -> Vec<T> {
        let kg = self.mats.disp_energy.mul_vec(g);
        self.solve_parts(r_vel, &kg, g)
    }

    fn solve_parts(&self, r_vel: &[T], r_disp: &[T], g: &[T]) -> Vec<T> {
        let m = self.mats;
        let s = self.b / self.a;
        let mut rhs = r_vel.to_vec();
        for (d, &i) in m.dofs.disp_to_vel.iter().enumerate() {
            rhs[i] -= s * r_disp[d];
        }
        let vel = self.lu.solve(&rhs);
        let inv_a = T::from(1.0) / self.a;
        let disp: Vec<T> = g
            .iter()
            .zip(&m.dofs.disp_to_vel)
            .map(|(&gd, &i)| (gd + self.b * vel[i]) * inv_a)
            .collect();
        let mut x = vel;
        x.extend(disp);
        x
    }

    /// Solve `(a M_E − b B) X = R` for a general right-hand side.
    pub fn solve(&self, r: &[T]) -> Vec<T> {
        let nv = self.mats.dofs.n_vel;
        let (r_vel, r_disp) = r.split_at(nv);
        let g = self.mats.disp_factor.solve(r_disp);
        self.solve_parts(r_vel, r_disp, &g)
    }

    /// Solve `(a M_E − b B) X = M_E Y`, avoiding the `K_D` solve.
    pub fn solve_gram(&self, y: &[T]) -> Vec<T> {
        let nv = self.mats.dofs.n_vel;
        let (y_vel, y_disp) = y.split_at(nv);
        let r_vel = self.mats.mass_vel.mul_vec(y_vel);
        let r_disp = self.mats.disp_energy.mul_vec(y_disp);
        self.solve_parts(&r_vel, &r_disp, y_disp)
    }

    /// `(a M_E − b B) X`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mx = self.mats.energy.mul_vec(x);
        let bx = self.mats.generator.mul_vec(x);
        mx.iter().zip(&bx).map(|(&m, &b)| self.a * m - self.b * b).collect()
    }

    /// `‖(a M_E − b B) X − R‖ / ‖R‖` (absolute when `R = 0`).
    pub fn residual(&self, x: &[T], r: &[T]) -> f64 {
        let ax = self.apply(x);
        let diff: Vec<T> = ax.iter().zip(r).map(|(&p, &q)| p - q).collect();
        let rn = norm(r);
        if rn == 0.0 {
            norm(&diff)
        } else {
            norm(&diff) / rn
        }
    }

    /// General solve followed by up to `steps` rounds of iterative refinement.
    pub fn solve_refined(&self, r: &[T], steps: usize) -> Vec<T> {
        let mut x = self.solve(r);
        for _ in 0..steps {
            let ax = self.apply(&x);
            let res: Vec<T> = r.iter().zip(&ax).map(|(&p, &q)| p - q).collect();
            if norm(&res) <= 1e-15 * norm(r) {
                break;
            }
            let dx = self.solve(&res);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{build_dof_map, SystemMatrices};
    use crate::fem::LameParams;
    use crate::geometry::{build_mesh, GeometryConfig};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mats(n: usize) -> SystemMatrices {
        let mesh = build_mesh(&GeometryConfig::with_n(n)).unwrap();
        SystemMatrices::assemble(&mesh, &build_dof_map(&mesh), &LameParams::default()).unwrap()
    }

    #[test]
    fn real_and_complex_solves_match_full_pencil() {
        let m = mats(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = m.random_state(&mut rng);
        let s = PencilSolver::new(&m, 1.0, 0.25).unwrap();
        let x = s.solve(&r);
        assert!(s.residual(&x, &r) < 1e-12);

        let rc = m.random_complex_state(&mut rng);
        let z = Complex64::new(1e-3, -4.0);
        let sc = PencilSolver::new(&m, z, Complex64::new(1.0, 0.0)).unwrap();
        let xc = sc.solve_refined(&rc, 2);
        assert!(sc.residual(&xc, &rc) < 1e-11);

        let y = m.random_complex_state(&mut rng);
        let xg = sc.solve_gram(&y);
        assert!(sc.residual(&xg, &m.energy.mul_vec(&y)) < 1e-11);
    }

    #[test]
    fn dense_oracle() {
        let m = mats(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = m.random_state(&mut rng);
        let s = PencilSolver::new(&m, 2.0, 0.5).unwrap();
        let x = s.solve(&r);
        let dense = m.energy.to_dense() * 2.0 - m.generator.to_dense() * 0.5;
        let want = dense.lu().solve(&nalgebra::DVector::from_vec(r.values.clone())).unwrap();
        for (a, b) in x.iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-10 * want.amax());
        }
    }
}
