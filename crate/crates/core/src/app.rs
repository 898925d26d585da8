//! Subcommand drivers: each writes its CSVs and a manifest into the output
//! directory and reports whether its checks passed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::config::RunConfig;
use crate::error::Result;
use crate::evolution::{check_energy_identity, first_energy_increase, simulate};
use crate::geometry::Mesh;
use crate::resolvent::{alpha_ladder, spectrum_from_matrices, small_alpha_sweep};
use crate::verify::{self, checks_to_csv, stream, CheckResult, Relation, Setup};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "LAMEHEAT_THREADS";
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Simulate,
    ResolventSweep,
    Spectrum,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Simulate => "simulate",
            Command::ResolventSweep => "resolvent-sweep",
            Command::Spectrum => "spectrum",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub checks: Vec<CheckResult>,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Writer<'a> {
    dir: &'a Path,
    artifacts: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

fn mesh_csv(mesh: &Mesh) -> String {
    let mut s = String::from("vertex,x,y,z,class\n");
    for (i, p) in mesh.vertices.iter().enumerate() {
        let class = format!("{:?}", mesh.vertex_class[i]).to_lowercase();
        let _ = writeln!(s, "{i},{:.16e},{:.16e},{:.16e},{class}", p[0], p[1], p[2]);
    }
    s
}

fn faces_csv(mesh: &Mesh) -> Result<String> {
    let mut s = String::from("face,axis,side,area,nu_x,nu_y,nu_z,tau1_x,tau1_y,tau1_z,tau2_x,tau2_y,tau2_z\n");
    for (j, f) in mesh.faces.iter().enumerate() {
        let fr = &f.frame;
        let _ = write!(s, "{j},{},{},{:.16e}", f.axis, f.side, mesh.face_area(j)?);
        for v in [fr.normal, fr.tangent1, fr.tangent2] {
            for c in v {
                let _ = write!(s, ",{c:.16e}");
            }
        }
        s.push('\n');
    }
    Ok(s)
}

fn run_inner(cmd: Command, cfg: &RunConfig, w: &mut Writer, timings: &mut Vec<(&'static str, f64)>) -> Result<Vec<CheckResult>> {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    match cmd {
        Command::Mesh => {
            let setup = Setup::new(cfg)?;
            w.write("mesh.txt", &setup.mesh.to_text())?;
            w.write("mesh.csv", &mesh_csv(&setup.mesh))?;
            w.write("faces.csv", &faces_csv(&setup.mesh)?)?;
            w.write("energy_matrix.txt", &setup.mats.energy.to_coordinate_text())?;
            w.write("generator_matrix.txt", &setup.mats.generator.to_coordinate_text())?;
            timings.push(("mesh", t0.elapsed().as_secs_f64()));
        }
        Command::Simulate => {
            let setup = Setup::new(cfg)?;
            let x0 = setup.mats.random_state(&mut stream(cfg.seed, 2));
            let (trace, _) = simulate(&setup.mats, &x0, &cfg.evolution)?;
            w.write("energy.csv", &trace.to_csv())?;
            if cfg.evolution.theta == 0.5 {
                let worst = check_energy_identity(&trace, f64::INFINITY)?.worst;
                checks.push(CheckResult::new("energy_identity", worst, Relation::AtMost, 1e-8));
            } else {
                let inc = first_energy_increase(&trace).map_or(0.0, |_| 1.0);
                checks.push(CheckResult::new("contraction_increases", inc, Relation::AtMost, 0.0));
            }
            timings.push(("simulate", t0.elapsed().as_secs_f64()));
        }
        Command::Spectrum => {
            let setup = Setup::new(cfg)?;
            let sp = spectrum_from_matrices(&setup.mats, cfg.eigen_count)?;
            w.write("spectrum.csv", &sp.to_csv())?;
            let worst = sp.residuals.iter().cloned().fold(0.0, f64::max);
            checks.push(CheckResult::new("spectrum_residual", worst, Relation::AtMost, 1e-8));
            timings.push(("spectrum", t0.elapsed().as_secs_f64()));
        }
        Command::ResolventSweep => {
            let setup = Setup::new(cfg)?;
            let mats = &setup.mats;
            let sp = spectrum_from_matrices(mats, cfg.eigen_count)?;
            let data = verify::sweep_data(mats, cfg.sweep.data_vectors, cfg.seed);
            let alphas = alpha_ladder(cfg.sweep.alpha_decades);
            let report = small_alpha_sweep(mats, &cfg.sweep.betas, &alphas, &data, &sp, cfg.sweep.beta_margin)?;
            w.write("sweep.csv", &report.to_csv())?;
            let worst = report.entries.iter().map(|e| e.static_residual).fold(0.0, f64::max);
            checks.push(CheckResult::new("sweep_static_relation", worst, Relation::AtMost, 1e-9));
            // tails are judged only for β away from S_h ∪ {0}
            let flagged = report.flagged_betas();
            let bad = report.non_decreasing_tails(4).iter().filter(|(b, _)| !flagged.contains(b)).count();
            checks.push(CheckResult::new("sweep_nonmonotone_tails", bad as f64, Relation::AtMost, 0.0));
            timings.push(("sweep", t0.elapsed().as_secs_f64()));
        }
        Command::Verify => {
            let out = verify::run_verify(cfg)?;
            w.write("energy.csv", &out.energy.to_csv())?;
            w.write("spectrum.csv", &out.spectrum.to_csv())?;
            w.write("sweep.csv", &out.sweep.to_csv())?;
            w.write("verify.csv", &checks_to_csv(&out.checks))?;
            timings.extend(out.timings);
            checks = out.checks;
        }
    }
    Ok(checks)
}

fn manifest(cmd: Command, cfg: &RunConfig, status: &str, artifacts: &[String], timings: &[(&str, f64)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {}", cmd.name());
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "threads = {}", rayon::current_num_threads());
    let _ = writeln!(s, "status = {status}");
    let _ = writeln!(s, "artifacts = {}", artifacts.join(", "));
    for (name, secs) in timings {
        let _ = writeln!(s, "time.{name} = {secs:.3}");
    }
    s.push_str("\n[config]\n");
    s.push_str(&cfg.to_text());
    s
}

/// Runs one subcommand. Artifacts and `manifest.txt` go to
/// `cfg.output_dir`; a `FAILED` marker is left there when a check fails or
/// the run aborts.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let marker = dir.join(FAILED_MARKER);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let mut w = Writer { dir, artifacts: Vec::new() };
    let mut timings = Vec::new();
    let result = run_inner(cmd, cfg, &mut w, &mut timings);
    let status = match &result {
        Ok(checks) if checks.iter().all(|c| c.passed) => "pass".to_string(),
        Ok(checks) => {
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            format!("fail ({})", failed.join(", "))
        }
        Err(e) => format!("error ({e})"),
    };
    let artifacts = w.artifacts.clone();
    fs::write(dir.join("manifest.txt"), manifest(cmd, cfg, &status, &artifacts, &timings))?;
    if status != "pass" {
        fs::write(&marker, format!("{status}\n"))?;
    }
    Ok(Outcome { checks: result?, artifacts })
}

/// Thread cap from the environment, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

