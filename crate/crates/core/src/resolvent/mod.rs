//! Resolvent solves `((α+iβ) M_E − B) X = M_E X*`, the static dissipation
//! relation, the small-α sweep, the Dirichlet Lamé spectrum, the Dirichlet
//! map and the traction trace.

mod dirichlet;
mod spectrum;
mod traction;

pub use dirichlet::{
    dirichlet_map, thin_identity_check, z_decomposition_check, DirichletSolver, ThinBalance, ZDecomposition,
};
pub use spectrum::{dirichlet_lame_eigs, solid_interior_blocks, spectrum_from_matrices, SpectrumReport};
pub use traction::{
    manufactured_div_sigma, manufactured_field, traction_refinement_study, traction_trace, RefinementStudy,
    TractionTrace,
};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::assembly::{StateVector, SystemMatrices};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::pencil::PencilSolver;

/// Required relative residual of every resolvent solve.
pub const RESOLVENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventQuery {
    pub alpha: f64,
    pub beta: f64,
    pub data: StateVector<Complex64>,
}

impl ResolventQuery {
    pub fn shift(&self) -> Complex64 {
        Complex64::new(self.alpha, self.beta)
    }
}

/// Factorization of `(α+iβ) M_E − B` for repeated data.
pub struct ResolventSolver<'a> {
    mats: &'a SystemMatrices,
    pencil: PencilSolver<'a, Complex64>,
}

impl<'a> ResolventSolver<'a> {
    pub fn new(mats: &'a SystemMatrices, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Validation { field: "alpha".into(), msg: format!("must be positive, got {alpha}") });
        }
        let pencil = PencilSolver::new(mats, Complex64::new(alpha, beta), Complex64::new(1.0, 0.0))?;
        Ok(ResolventSolver { mats, pencil })
    }

    pub fn solve(&self, data: &[Complex64]) -> Result<StateVector<Complex64>> {
        let rhs = self.mats.energy.mul_vec(data);
        let mut x = self.pencil.solve_gram(data);
        let mut res = self.pencil.residual(&x, &rhs);
        for _ in 0..3 {
            if res <= 1e-13 {
                break;
            }
            let ax = self.pencil.apply(&x);
            let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(a, b)| a - b).collect();
            let dx = self.pencil.solve(&r);
            let cand: Vec<Complex64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let cand_res = self.pencil.residual(&cand, &rhs);
            if cand_res >= res {
                break;
            }
            x = cand;
            res = cand_res;
        }
        if !(res <= RESOLVENT_TOL) {
            return Err(Error::SolverBreakdown(format!("resolvent residual {res:.3e}")));
        }
        Ok(StateVector::from_vec(x))
    }
}

pub fn solve_resolvent(mats: &SystemMatrices, q: &ResolventQuery) -> Result<StateVector<Complex64>> {
    ResolventSolver::new(mats, q.alpha, q.beta)?.solve(&q.data)
}

/// `‖((α+iβ) M_E − B) X − M_E X*‖ / ‖M_E X*‖`.
pub fn resolvent_residual(mats: &SystemMatrices, q: &ResolventQuery, x: &[Complex64]) -> f64 {
    let z = q.shift();
    let mx = mats.energy.mul_vec(x);
    let bx = mats.generator.mul_vec(x);
    let rhs = mats.energy.mul_vec(&q.data);
    let diff: Vec<Complex64> = (0..x.len()).map(|i| z * mx[i] - bx[i] - rhs[i]).collect();
    let rn = norm(&rhs);
    if rn == 0.0 {
        norm(&diff)
    } else {
        norm(&diff) / rn
    }
}

/// `|α‖X‖²_H + ‖∇u‖² − Re⟨X*, X⟩_H|`, relative to the sum of the magnitudes
/// of the three terms.
pub fn static_dissipation_check(mats: &SystemMatrices, q: &ResolventQuery, x: &[Complex64]) -> f64 {
    let e = mats.inner(x, x).re;
    let grad = mats.heat_dissipation(x);
    let work = mats.inner(&q.data, x).re;
    let defect = (q.alpha * e + grad - work).abs();
    let scale = q.alpha * e + grad + work.abs();
    if scale == 0.0 {
        defect
    } else {
        defect / scale
    }
}

/// Hille–Yosida ratio `α ‖X‖_H / ‖X*‖_H`; at most 1 for a contraction
/// generator.
pub fn hille_yosida_ratio(mats: &SystemMatrices, q: &ResolventQuery, x: &[Complex64]) -> f64 {
    let xs = mats.inner(&q.data, &q.data).re.sqrt();
    if xs == 0.0 {
        return 0.0;
    }
    q.alpha * mats.inner(x, x).re.sqrt() / xs
}

/// Decreasing α ladder `10⁻¹, …, 10^{-decades}`.
pub fn alpha_ladder(decades: u32) -> Vec<f64> {
    (1..=decades as i32).map(|k| 10f64.powi(-k)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub beta: f64,
    pub alpha: f64,
    pub data_index: usize,
    pub sqrt_alpha_norm: f64,
    pub static_residual: f64,
    pub dist_to_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    /// Ordered by β, then data vector, then α as given.
    pub entries: Vec<SweepEntry>,
    pub margin: f64,
}

impl SweepReport {
    /// Sweep values `√α ‖X‖_H` for one (β, data) pair, in α order.
    pub fn series(&self, beta: f64, data_index: usize) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .filter(|e| e.beta == beta && e.data_index == data_index)
            .map(|e| (e.alpha, e.sqrt_alpha_norm))
            .collect()
    }

    /// `(β, data)` pairs whose values fail to decrease strictly over the
    /// last `tail` α values.
    pub fn non_decreasing_tails(&self, tail: usize) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        let mut keys: Vec<(f64, usize)> = self.entries.iter().map(|e| (e.beta, e.data_index)).collect();
        keys.dedup();
        for (beta, d) in keys {
            let s = self.series(beta, d);
            let t = &s[s.len().saturating_sub(tail)..];
            if t.windows(2).any(|w| !(w[1].1 < w[0].1)) {
                out.push((beta, d));
            }
        }
        out
    }

    /// β values closer than the margin to `S_h ∪ {0}`.
    pub fn flagged_betas(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.entries.iter().filter(|e| e.dist_to_s < self.margin).map(|e| e.beta).collect();
        b.dedup();
        b
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("beta,alpha,sqrt_alpha_norm,static_residual,dist_to_S\n");
        for e in &self.entries {
            s += &format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                e.beta, e.alpha, e.sqrt_alpha_norm, e.static_residual, e.dist_to_s
            );
        }
        s
    }
}

/// For every β and α, one factorization shared by all data vectors. Solves
/// run in parallel; results are collected in input order.
pub fn small_alpha_sweep(
    mats: &SystemMatrices,
    betas: &[f64],
    alphas: &[f64],
    data: &[StateVector<Complex64>],
    spectrum: &SpectrumReport,
    margin: f64,
) -> Result<SweepReport> {
    let grid: Vec<(f64, f64)> = betas.iter().flat_map(|&b| alphas.iter().map(move |&a| (b, a))).collect();
    let solved: Vec<Vec<SweepEntry>> = grid
        .par_iter()
        .map(|&(beta, alpha)| {
            let solver = ResolventSolver::new(mats, alpha, beta)?;
            data.iter()
                .enumerate()
                .map(|(k, xs)| {
                    let x = solver.solve(xs)?;
                    let q = ResolventQuery { alpha, beta, data: xs.clone() };
                    Ok(SweepEntry {
                        beta,
                        alpha,
                        data_index: k,
                        sqrt_alpha_norm: alpha.sqrt() * mats.inner(&x, &x).re.sqrt(),
                        static_residual: static_dissipation_check(mats, &q, &x),
                        dist_to_s: spectrum.distance(beta),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(grid.len() * data.len());
    for (bi, _) in betas.iter().enumerate() {
        for k in 0..data.len() {
            for ai in 0..alphas.len() {
                entries.push(solved[bi * alphas.len() + ai][k].clone());
            }
        }
    }
    Ok(SweepReport { entries, margin })
}
