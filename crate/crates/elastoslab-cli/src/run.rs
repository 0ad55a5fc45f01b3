//! The `run` verb: one trajectory per mollifier radius.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use elastoslab::evolution::{RunOptions, Trajectory};
use elastoslab::initial_data::{assemble_initial_data, mixed_velocity, standard_velocity};
use elastoslab::{InitialData, KappaSystem, MollifierKernel, Slab, VectorField};

use crate::config::{RunConfig, TimeStep, VelocityRecipe};
use crate::error::CliResult;
use crate::output::{
    csv_row, run_dir_name, snapshot_fields, write_csv, write_snapshot, InitialMargins, Manifest, RecordExtras,
    SweepEntry, SweepIndex, ViolationReport,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub kappa: f64,
    pub dir: PathBuf,
    pub t_run: f64,
    pub steps: usize,
    pub violated: bool,
}

pub fn initial_data(config: &RunConfig, slab: &Slab) -> CliResult<InitialData> {
    let v = match config.velocity {
        VelocityRecipe::Equilibrium => VectorField::zeros(slab.grid),
        VelocityRecipe::Standard => standard_velocity(slab, config.seed, config.amplitude),
        VelocityRecipe::Mixed => mixed_velocity(slab.grid, config.amplitude),
    };
    Ok(assemble_initial_data(slab, &v, &config.g0_recipe(slab), config.partition())?)
}

pub fn system<'a>(config: &RunConfig, slab: &'a Slab, init: &InitialData, kappa: f64) -> CliResult<KappaSystem<'a>> {
    let kernel = MollifierKernel::with_floor(kappa, slab, config.kernel_floor)?;
    let mut sys = KappaSystem::new(slab, kernel, init.g0.clone(), init.partition);
    sys.track_deformation = config.track_deformation;
    sys.force_sign = config.force_sign;
    Ok(sys)
}

pub fn time_step(config: &RunConfig, sys: &KappaSystem<'_>, init: &InitialData) -> f64 {
    match config.time_step {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Cfl(f) => {
            // round down to a step that divides t_final
            let bound = f * sys.cfl_bound(&init.v0);
            config.t_final / (config.t_final / bound).ceil()
        }
    }
}

/// Integrate one radius and return the trajectory with its step size.
pub fn integrate(config: &RunConfig, slab: &Slab, init: &InitialData, kappa: f64) -> CliResult<(Trajectory, f64)> {
    let sys = system(config, slab, init, kappa)?;
    let dt = time_step(config, &sys, init);
    let opts = RunOptions {
        t_final: config.t_final,
        dt,
        snapshot_every: config.snapshot_every,
    };
    Ok((sys.run(init, opts)?, dt))
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Run one radius and write its directory.
pub fn run_one(config: &RunConfig, slab: &Slab, init: &InitialData, kappa: f64, dir: &Path) -> CliResult<RunSummary> {
    let start = Instant::now();
    fs::create_dir_all(dir)?;
    let (traj, dt) = integrate(config, slab, init, kappa)?;
    let mut rows = Vec::with_capacity(traj.records.len());
    let mut names = Vec::with_capacity(traj.snapshots.len());
    for (n, (rec, snap)) in traj.records.iter().zip(&traj.snapshots).enumerate() {
        let extras = RecordExtras {
            disp_h2: slab.sobolev_norm_vector(&snap.disp, 2),
            v_h2: slab.sobolev_norm_vector(&snap.v, 2),
            q_max: snap.q.max_abs(),
        };
        rows.push(csv_row(rec, &extras, config.lambda));
        let name = format!("snap_{n:05}.bin");
        write_snapshot(&dir.join(&name), snap.t, &snapshot_fields(snap))?;
        names.push(name);
    }
    write_csv(&dir.join("energy.csv"), &rows)?;
    let violation = traj.violation.map(|v| ViolationReport {
        t: v.t,
        jk_dev: v.status.jk_dev,
        ak_dev: v.status.ak_dev,
        rt_margin: finite(v.status.rt_margin),
    });
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.to_text_for(&[kappa]),
        seed: config.seed,
        kappa,
        grid: [config.n1, config.n2, config.n3],
        dt,
        t_final: config.t_final,
        t_run: traj.t_run,
        steps: traj.steps,
        violation,
        max_pressure_iterations: traj.max_pressure_iterations,
        max_pressure_residual: traj.max_pressure_residual,
        initial_margins: InitialMargins {
            rt: init.margins.rt,
            nc: init.margins.nc,
        },
        snapshots: names,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunSummary {
        kappa,
        dir: dir.to_path_buf(),
        t_run: traj.t_run,
        steps: traj.steps,
        violated: traj.violation.is_some(),
    })
}

/// Run every radius of the configuration under `out`, `jobs` at a time.
pub fn cmd_run(config: &RunConfig, out: &Path, jobs: usize) -> CliResult<Vec<RunSummary>> {
    let slab = Slab::new(config.grid());
    let init = initial_data(config, &slab)?;
    fs::create_dir_all(out)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, CliResult<RunSummary>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, config.kappa.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&kappa) = config.kappa.get(i) else { break };
                let r = run_one(config, &slab, &init, kappa, &out.join(run_dir_name(kappa)));
                results.lock().unwrap().push((i, r));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    let summaries = results.into_iter().map(|(_, r)| r).collect::<CliResult<Vec<_>>>()?;
    let index = SweepIndex {
        runs: summaries
            .iter()
            .map(|s| SweepEntry {
                kappa: s.kappa,
                dir: run_dir_name(s.kappa),
            })
            .collect(),
    };
    fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&index)?)?;
    Ok(summaries)
}
