//! θ-scheme time stepping of `M_E dX/dt = B X` with energy bookkeeping.

use crate::assembly::SystemMatrices;
use crate::error::{Error, Result};
use crate::pencil::PencilSolver;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub theta: f64,
    pub sample_every: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig { dt: 0.05, t_final: 20.0, theta: 0.5, sample_every: 1 }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Validation { field: field.into(), msg });
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return bad("t_final", format!("must be at least dt = {}, got {}", self.dt, self.t_final));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return bad("theta", format!("must lie in [0.5, 1], got {}", self.theta));
        }
        if self.sample_every == 0 {
            return bad("sample_every", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn num_steps(&self) -> usize {
        (self.t_final / self.dt + 1e-9).floor() as usize
    }

    pub fn num_samples(&self) -> usize {
        self.num_steps() / self.sample_every + 1
    }
}

/// Sampled energy history of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    /// `E_n = ‖X_n‖²_H`.
    pub energies: Vec<f64>,
    /// `Q_n = 2 Σ dt ‖∇u_{n-1+θ}‖²`.
    pub dissipated: Vec<f64>,
    /// `E_n + Q_n − E_0`.
    pub residuals: Vec<f64>,
}

impl EnergyTrace {
    fn push(&mut self, t: f64, e: f64, q: f64) {
        let e0 = self.energies.first().copied().unwrap_or(e);
        self.times.push(t);
        self.energies.push(e);
        self.dissipated.push(q);
        self.residuals.push(e + q - e0);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,E,Q,residual\n");
        for k in 0..self.len() {
            s += &format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.times[k], self.energies[k], self.dissipated[k], self.residuals[k]
            );
        }
        s
    }
}

/// One factorization of `M_E − θ dt B`, reused across steps.
pub struct ThetaStepper<'a> {
    mats: &'a SystemMatrices,
    solver: PencilSolver<'a, f64>,
    dt: f64,
    theta: f64,
}

impl<'a> ThetaStepper<'a> {
    /// `dt` may be negative (backward integration).
    pub fn new(mats: &'a SystemMatrices, dt: f64, theta: f64) -> Result<Self> {
        let solver = PencilSolver::new(mats, 1.0, theta * dt)?;
        Ok(ThetaStepper { mats, solver, dt, theta })
    }

    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.mats;
        let nv = m.dofs.n_vel;
        let (v, d) = x.split_at(nv);
        let c = (1.0 - self.theta) * self.dt;
        let mut r_vel = m.mass_vel.mul_vec(v);
        if c != 0.0 {
            let av = m.heat_stiffness.mul_vec(v);
            let pkd = m.extend(&m.disp_energy.mul_vec(d));
            for i in 0..nv {
                r_vel[i] -= c * (av[i] + pkd[i]);
            }
        }
        let g: Vec<f64> = d.iter().zip(&m.dofs.disp_to_vel).map(|(&dd, &i)| dd + c * v[i]).collect();
        let next = self.solver.solve_split(&r_vel, &g);

        let rhs: Vec<f64> = {
            let mx = m.energy.mul_vec(x);
            let bx = m.generator.mul_vec(x);
            mx.iter().zip(&bx).map(|(a, b)| a + c * b).collect()
        };
        let res = self.solver.residual(&next, &rhs);
        if !(res <= 1e-9) {
            return Err(Error::SolverBreakdown(format!("theta step residual {res:.3e}")));
        }
        Ok(next)
    }
}

pub fn step_theta(mats: &SystemMatrices, x: &[f64], dt: f64, theta: f64) -> Result<Vec<f64>> {
    ThetaStepper::new(mats, dt, theta)?.step(x)
}

/// Run to `t_final`, sampling every `sample_every` steps. Returns the trace
/// and the final state.
pub fn simulate(mats: &SystemMatrices, x0: &[f64], cfg: &EvolutionConfig) -> Result<(EnergyTrace, Vec<f64>)> {
    cfg.validate()?;
    let stepper = ThetaStepper::new(mats, cfg.dt, cfg.theta)?;
    let energy = |x: &[f64]| mats.energy.form(x, x);
    let mut trace = EnergyTrace::default();
    let mut x = x0.to_vec();
    let mut q = 0.0;
    trace.push(0.0, energy(&x), q);
    for n in 1..=cfg.num_steps() {
        let next = stepper.step(&x)?;
        let mid: Vec<f64> = next.iter().zip(&x).map(|(a, b)| cfg.theta * a + (1.0 - cfg.theta) * b).collect();
        q += 2.0 * cfg.dt * mats.heat_dissipation(&mid);
        x = next;
        if n % cfg.sample_every == 0 {
            trace.push(n as f64 * cfg.dt, energy(&x), q);
        }
    }
    Ok((trace, x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// Largest `|(E_k + Q_k) − (E_i + Q_i)| / E_0` over sample pairs.
    pub worst: f64,
    pub pair: (usize, usize),
}

/// Energy balance between every pair of samples: `E + Q` must be constant.
pub fn check_energy_identity(trace: &EnergyTrace, tol: f64) -> Result<IdentityReport> {
    if trace.is_empty() {
        return Ok(IdentityReport { worst: 0.0, pair: (0, 0) });
    }
    let e0 = trace.energies[0];
    let scale = if e0 > 0.0 { e0 } else { 1.0 };
    let (mut imax, mut imin) = (0, 0);
    let total = |k: usize| trace.energies[k] + trace.dissipated[k];
    for k in 1..trace.len() {
        if total(k) > total(imax) {
            imax = k;
        }
        if total(k) < total(imin) {
            imin = k;
        }
    }
    let worst = (total(imax) - total(imin)) / scale;
    let pair = (imax.min(imin), imax.max(imin));
    if !(worst <= tol) {
        return Err(Error::IdentityViolated { first: pair.0, second: pair.1, defect: worst });
    }
    Ok(IdentityReport { worst, pair })
}

/// Index of the first sample whose energy exceeds its predecessor.
pub fn first_energy_increase(trace: &EnergyTrace) -> Option<usize> {
    (1..trace.len()).find(|&k| trace.energies[k] > trace.energies[k - 1])
}

impl SystemMatrices {
    /// Copy with the heat dissipation removed, so the generator is the skew
    /// part `S` alone.
    pub fn conservative_part(&self) -> SystemMatrices {
        let (skew, _) = self.split_generator();
        let mut m = self.clone();
        m.heat_stiffness = m.heat_stiffness.scaled(0.0);
        m.generator = skew;
        m
    }
}
