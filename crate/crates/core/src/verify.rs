//! The invariant suite run by `lameheat verify`.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{build_dof_map, StateVector, SystemMatrices};
use crate::config::RunConfig;
use crate::error::Result;
use crate::evolution::{check_energy_identity, simulate, EnergyTrace, EvolutionConfig};
use crate::geometry::{build_mesh, Mesh, VertexClass};
use crate::resolvent::{
    alpha_ladder, dirichlet_map, hille_yosida_ratio, manufactured_div_sigma, manufactured_field,
    spectrum_from_matrices, static_dissipation_check, thin_identity_check, small_alpha_sweep, traction_refinement_study,
    traction_trace, z_decomposition_check, ResolventQuery, ResolventSolver, SpectrumReport, SweepReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `value ≤ bound`
    AtMost,
    /// `value ≥ bound`
    AtLeast,
    /// `value < bound`
    Below,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
        }
    }

    fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
            Relation::Below => value < bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl CheckResult {
    pub fn new(name: &'static str, value: f64, relation: Relation, bound: f64) -> Self {
        CheckResult { name, value, relation, bound, passed: relation.holds(value, bound) }
    }
}

pub fn checks_to_csv(checks: &[CheckResult]) -> String {
    let mut s = String::from("check,value,relation,bound,pass\n");
    for c in checks {
        s += &format!("{},{:.16e},{},{:.16e},{}\n", c.name, c.value, c.relation.as_str(), c.bound, c.passed);
    }
    s
}

/// Independent random streams per check, so that adding a check does not
/// shift the data seen by the others.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub struct Setup {
    pub mesh: Mesh,
    pub mats: SystemMatrices,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let mesh = build_mesh(&cfg.geometry)?;
        let mats = SystemMatrices::assemble(&mesh, &build_dof_map(&mesh), &cfg.params)?;
        Ok(Setup { mesh, mats })
    }
}

/// Random resolvent query with `α` log-uniform in `[α_lo, 1]` and `β`
/// uniform in `[β_lo, β_hi]` with random sign.
pub fn random_query<R: Rng>(mats: &SystemMatrices, rng: &mut R, alpha_lo: f64, beta_lo: f64, beta_hi: f64) -> ResolventQuery {
    let alpha = 10f64.powf(rng.random_range(alpha_lo.log10()..=0.0));
    let mag = rng.random_range(beta_lo..=beta_hi);
    let beta = if rng.random_bool(0.5) { mag } else { -mag };
    ResolventQuery { alpha, beta, data: mats.random_complex_state(rng) }
}

pub fn dissipativity_defect(mats: &SystemMatrices, count: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, 1);
    (0..count)
        .map(|_| {
            let x = mats.random_state(&mut rng);
            let bxx = mats.generator.form(&x, &x);
            (bxx + mats.heat_dissipation(&x)).abs() / mats.inner(&x, &x)
        })
        .fold(0.0, f64::max)
}

pub fn evolution_run(mats: &SystemMatrices, cfg: &EvolutionConfig, seed: u64, id: u64) -> Result<EnergyTrace> {
    let x0 = mats.random_state(&mut stream(seed, id));
    Ok(simulate(mats, &x0, cfg)?.0)
}

/// Worst static-relation residual and worst Hille–Yosida ratio.
pub fn resolvent_checks(mats: &SystemMatrices, count: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = stream(seed, 3);
    let (mut stat, mut hy) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let q = random_query(mats, &mut rng, 1e-6, 0.0, 10.0);
        let x = ResolventSolver::new(mats, q.alpha, q.beta)?.solve(&q.data)?;
        stat = stat.max(static_dissipation_check(mats, &q, &x));
        hy = hy.max(hille_yosida_ratio(mats, &q, &x));
    }
    Ok((stat, hy))
}

pub fn sweep_data(mats: &SystemMatrices, count: usize, seed: u64) -> Vec<StateVector<Complex64>> {
    let mut rng = stream(seed, 4);
    (0..count).map(|_| mats.random_complex_state(&mut rng)).collect()
}

/// Largest `value(α_last) / value(α_first)` over all sweep series.
pub fn sweep_final_ratio(report: &SweepReport) -> f64 {
    let mut worst = 0.0f64;
    let mut keys: Vec<(f64, usize)> = report.entries.iter().map(|e| (e.beta, e.data_index)).collect();
    keys.dedup();
    for (b, d) in keys {
        let s = report.series(b, d);
        if let (Some(first), Some(last)) = (s.first(), s.last()) {
            worst = worst.max(last.1 / first.1);
        }
    }
    worst
}

/// Worst `(trace, interior, thin balance)` residuals over random queries
/// with `|β| ∈ [0.5, 10]`.
pub fn z_checks(setup: &Setup, cfg: &RunConfig, seed: u64) -> Result<(f64, f64, f64)> {
    let mats = &setup.mats;
    let mut rng = stream(seed, 5);
    let (mut tr, mut int, mut thin) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cfg.z_queries {
        let q = random_query(mats, &mut rng, 1e-6, 0.5, 10.0);
        let x = ResolventSolver::new(mats, q.alpha, q.beta)?.solve(&q.data)?;
        let zd = z_decomposition_check(mats, &q, &x)?;
        tr = tr.max(zd.trace_residual);
        int = int.max(zd.interior_residual);
        thin = thin.max(thin_identity_check(&setup.mesh, &cfg.params, mats, &q, &x)?.residual);
    }
    Ok((tr, int, thin))
}

/// `max |D(x|_Γ) − x|` over solid vertices.
pub fn dirichlet_linear_defect(setup: &Setup) -> Result<f64> {
    let (mesh, mats) = (&setup.mesh, &setup.mats);
    let g: Vec<f64> = mats.dofs.vertices_of(VertexClass::Interface).flat_map(|v| mesh.vertices[v]).collect();
    let v = dirichlet_map(mats, &g)?;
    Ok(mats
        .dofs
        .solid_vertices()
        .flat_map(|s| {
            let b = mats.dofs.disp[s].unwrap();
            (0..3).map(move |c| (b, c, s))
        })
        .map(|(b, c, s)| (v[b + c] - mesh.vertices[s][c]).abs())
        .fold(0.0, f64::max))
}

/// `max |t − (2μ+3λ)ν|` over both traction methods and all faces for `v = x`.
pub fn linear_traction_defect(setup: &Setup, cfg: &RunConfig) -> Result<f64> {
    let (mesh, mats) = (&setup.mesh, &setup.mats);
    let v = mats.displacement_state(mesh, |p| *p);
    let v = v.displacement_block(&mats.dofs);
    let zero = vec![0.0; v.len()];
    let k = 2.0 * cfg.params.mu + 3.0 * cfg.params.lambda;
    let mut worst = 0.0f64;
    for j in 0..mesh.num_faces() {
        let t = traction_trace(mesh, mats, &cfg.params, v, &zero, j)?;
        worst = worst.max(t.max_deviation_from(&mesh.faces[j].frame.normal.map(|c| k * c)));
    }
    Ok(worst)
}

/// Outputs of a full `verify` run.
pub struct VerifyOutcome {
    pub checks: Vec<CheckResult>,
    pub energy: EnergyTrace,
    pub sweep: SweepReport,
    pub spectrum: SpectrumReport,
    pub timings: Vec<(&'static str, f64)>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_verify(cfg: &RunConfig) -> Result<VerifyOutcome> {
    use Relation::*;
    let mut checks = Vec::new();
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    let seed = cfg.seed;
    let setup = Setup::new(cfg)?;
    let mats = &setup.mats;
    lap("assembly", &mut timings);

    checks.push(CheckResult::new("dissipativity", dissipativity_defect(mats, cfg.random_states, seed), AtMost, 1e-10));
    lap("dissipativity", &mut timings);

    let mid = EvolutionConfig { theta: 0.5, sample_every: 1, ..cfg.evolution };
    let energy = evolution_run(mats, &mid, seed, 2)?;
    let identity = check_energy_identity(&energy, f64::INFINITY)?.worst;
    checks.push(CheckResult::new("energy_identity", identity, AtMost, 1e-8));
    let n = energy.len() - 1;
    let decay = (energy.energies[n] / energy.energies[0]) / (energy.energies[n / 2] / energy.energies[0]);
    checks.push(CheckResult::new("decay_trend", decay, Below, 1.0));
    lap("midpoint_run", &mut timings);

    let mut increases = 0usize;
    for (k, dt) in [0.5, 0.05, 0.005].into_iter().enumerate() {
        let be = EvolutionConfig { dt, theta: 1.0, sample_every: 1, ..cfg.evolution };
        let trace = evolution_run(mats, &be, seed, 10 + k as u64)?;
        increases += (1..trace.len()).filter(|&i| trace.energies[i] > trace.energies[i - 1]).count();
    }
    checks.push(CheckResult::new("contraction_increases", increases as f64, AtMost, 0.0));
    lap("backward_euler_runs", &mut timings);

    let (stat, hy) = resolvent_checks(mats, cfg.resolvent_queries, seed)?;
    checks.push(CheckResult::new("static_relation", stat, AtMost, 1e-9));
    checks.push(CheckResult::new("hille_yosida", hy, AtMost, 1.0 + 1e-9));
    lap("resolvent_queries", &mut timings);

    let spectrum = spectrum_from_matrices(mats, cfg.eigen_count)?;
    let scaled_cfg = RunConfig { params: cfg.params.scaled(2.0), ..cfg.clone() };
    let scaled = spectrum_from_matrices(&Setup::new(&scaled_cfg)?.mats, cfg.eigen_count)?;
    let homog = spectrum
        .eigenvalues
        .iter()
        .zip(&scaled.eigenvalues)
        .map(|(a, b)| (b - 2.0 * a).abs() / b)
        .fold(0.0, f64::max);
    checks.push(CheckResult::new("spectrum_residual", spectrum.residuals.iter().cloned().fold(0.0, f64::max), AtMost, 1e-8));
    checks.push(CheckResult::new("spectrum_homogeneity", homog, AtMost, 1e-12));
    lap("spectrum", &mut timings);

    let data = sweep_data(mats, cfg.sweep.data_vectors, seed);
    let sweep =
        small_alpha_sweep(mats, &cfg.sweep.betas, &alpha_ladder(cfg.sweep.alpha_decades), &data, &spectrum, cfg.sweep.beta_margin)?;
    let min_dist = cfg.sweep.betas.iter().map(|&b| spectrum.distance(b)).fold(f64::INFINITY, f64::min);
    let covered = cfg.sweep.betas.iter().all(|&b| spectrum.covers(b, cfg.sweep.beta_margin));
    checks.push(CheckResult::new("sweep_beta_distance", if covered { min_dist } else { 0.0 }, AtLeast, cfg.sweep.beta_margin));
    checks.push(CheckResult::new("sweep_nonmonotone_tails", sweep.non_decreasing_tails(4).len() as f64, AtMost, 0.0));
    checks.push(CheckResult::new("sweep_final_ratio", sweep_final_ratio(&sweep), AtMost, 0.1));
    let sweep_static = sweep.entries.iter().map(|e| e.static_residual).fold(0.0, f64::max);
    checks.push(CheckResult::new("sweep_static_relation", sweep_static, AtMost, 1e-9));
    lap("sweep", &mut timings);

    checks.push(CheckResult::new("dirichlet_linear", dirichlet_linear_defect(&setup)?, AtMost, 1e-12));
    let (tr, int, thin) = z_checks(&setup, cfg, seed)?;
    checks.push(CheckResult::new("z_trace", tr, AtMost, 1e-9));
    checks.push(CheckResult::new("z_interior", int, AtMost, 1e-9));
    checks.push(CheckResult::new("thin_balance", thin, AtMost, 1e-9));
    lap("dirichlet", &mut timings);

    checks.push(CheckResult::new("traction_linear", linear_traction_defect(&setup, cfg)?, AtMost, 1e-12));
    let p = cfg.params;
    let study = traction_refinement_study(&p, &cfg.traction_ns, manufactured_field, |x| manufactured_div_sigma(&p, x))?;
    checks.push(CheckResult::new("traction_order", study.min_order(), AtLeast, 0.9));
    lap("traction", &mut timings);

    Ok(VerifyOutcome { checks, energy, sweep, spectrum, timings })
}
