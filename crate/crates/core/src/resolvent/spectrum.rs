use crate::assembly::{build_dof_map, SystemMatrices};
use crate::error::{Error, Result};
use crate::fem::LameParams;
use crate::geometry::Mesh;
use crate::linalg::{smallest_generalized_eigenpairs, Csr};

/// Eigenpair tolerance of the Dirichlet Lamé solve.
pub const SPECTRUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// `S_h = {±√λ_k}`, ascending.
    pub frequencies: Vec<f64>,
}

impl SpectrumReport {
    fn new(eigenvalues: Vec<f64>, residuals: Vec<f64>, iterations: usize) -> Self {
        let mut frequencies: Vec<f64> = eigenvalues.iter().flat_map(|l| [-l.sqrt(), l.sqrt()]).collect();
        frequencies.sort_by(f64::total_cmp);
        SpectrumReport { eigenvalues, residuals, iterations, frequencies }
    }

    /// `dist(β, S_h ∪ {0})`.
    pub fn distance(&self, beta: f64) -> f64 {
        self.frequencies.iter().fold(beta.abs(), |d, s| d.min((beta - s).abs()))
    }

    /// Whether the computed eigenvalues reach far enough to certify the
    /// distance for `|β| + margin`.
    pub fn covers(&self, beta: f64, margin: f64) -> bool {
        self.eigenvalues.last().is_some_and(|l| l.sqrt() >= beta.abs() + margin)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,lambda,residual\n");
        for (k, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            s += &format!("{},{:.16e},{:.16e}\n", k + 1, l, r);
        }
        s
    }
}

/// Lamé stiffness and mass restricted to solid-interior DOFs (zero
/// displacement on the interface).
pub fn solid_interior_blocks(mats: &SystemMatrices) -> (Csr, Csr) {
    let idx = mats.dofs.interior_disp_dofs();
    (mats.solid_stiffness.submatrix(&idx, &idx), mats.solid_mass.submatrix(&idx, &idx))
}

pub fn spectrum_from_matrices(mats: &SystemMatrices, k: usize) -> Result<SpectrumReport> {
    let (ks, ms) = solid_interior_blocks(mats);
    if k == 0 || k > ks.nrows {
        return Err(Error::Validation {
            field: "eigen_count".into(),
            msg: format!("must lie in 1..={}, got {k}", ks.nrows),
        });
    }
    let pairs = smallest_generalized_eigenpairs(&ks, &ms, k, SPECTRUM_TOL)?;
    Ok(SpectrumReport::new(pairs.values, pairs.residuals, pairs.iterations))
}

/// `k` smallest eigenvalues of `K_s v = λ M_s v` on solid-interior DOFs.
pub fn dirichlet_lame_eigs(mesh: &Mesh, params: &LameParams, k: usize) -> Result<SpectrumReport> {
    let mats = SystemMatrices::assemble(mesh, &build_dof_map(mesh), params)?;
    spectrum_from_matrices(&mats, k)
}
