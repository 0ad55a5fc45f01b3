//! The `sweep-report` verb: read-only summary over completed run directories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use elastoslab::Slab;

use crate::error::{CliError, CliResult};
use crate::output::{read_snapshot, EnergyTable, Manifest, SweepIndex};

/// Relative band the sup energies must share.
pub const UNIFORMITY_BAND: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub kappa: f64,
    pub dir: PathBuf,
    pub e0: f64,
    pub sup_energy: f64,
    pub t_run: f64,
    pub t_final: f64,
    pub dt: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub kappa: [f64; 2],
    /// sup over common snapshot times of ||eta_1 - eta_2||_2.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub runs: Vec<RunRow>,
    pub gaps: Vec<Gap>,
    /// (max - min) / min of the sup energies.
    pub spread: f64,
    pub uniform: bool,
    /// No member stops earlier than a member with a larger radius.
    pub t_run_stable: bool,
    pub all_completed: bool,
    pub gaps_decreasing: bool,
    /// Uniformity verdict: common band and T_run not shrinking with kappa.
    pub pass: bool,
}

fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingRun(path.to_path_buf()))
    }
}

/// Expand a sweep root (holding `sweep.json`) into its run directories.
fn expand(dirs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for d in dirs {
        let index = d.join("sweep.json");
        if index.exists() {
            let idx: SweepIndex = serde_json::from_str(&fs::read_to_string(&index)?)?;
            out.extend(idx.runs.iter().map(|e| d.join(&e.dir)));
        } else {
            out.push(d.clone());
        }
    }
    Ok(out)
}

fn load(dir: &Path) -> CliResult<(RunRow, Manifest)> {
    require(dir)?;
    let mpath = dir.join("manifest.json");
    let cpath = dir.join("energy.csv");
    require(&mpath)?;
    require(&cpath)?;
    let m: Manifest = serde_json::from_str(&fs::read_to_string(&mpath)?)?;
    let table = EnergyTable::read(&cpath)?;
    let e = table.column("E_kappa").ok_or_else(|| CliError::MissingRun(cpath.clone()))?;
    if e.is_empty() {
        return Err(CliError::MissingRun(cpath));
    }
    let row = RunRow {
        kappa: m.kappa,
        dir: dir.to_path_buf(),
        e0: e[0],
        sup_energy: e.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        t_run: m.t_run,
        t_final: m.t_final,
        dt: m.dt,
        violated: m.violation.is_some(),
    };
    Ok((row, m))
}

fn gap(a: &RunRow, ma: &Manifest, b: &RunRow, mb: &Manifest) -> CliResult<f64> {
    let mut slab: Option<Slab> = None;
    let mut worst = 0.0f64;
    for (na, nb) in ma.snapshots.iter().zip(&mb.snapshots) {
        let pa = a.dir.join(na);
        let pb = b.dir.join(nb);
        require(&pa)?;
        require(&pb)?;
        let sa = read_snapshot(&pa)?;
        let sb = read_snapshot(&pb)?;
        if sa.grid != sb.grid || (sa.t - sb.t).abs() > 1e-9 {
            break;
        }
        let slab = slab.get_or_insert_with(|| Slab::new(sa.grid));
        let (Some(da), Some(db)) = (sa.displacement(), sb.displacement()) else {
            return Err(CliError::MissingRun(pa));
        };
        worst = worst.max(slab.sobolev_norm_vector(&da.sub(&db), 2));
    }
    Ok(worst)
}

/// Summarize at least two completed runs, in the order given (descending
/// kappa for a sweep).
pub fn cmd_sweep_report(dirs: &[PathBuf]) -> CliResult<SweepReport> {
    let dirs = expand(dirs)?;
    let loaded = dirs.iter().map(|d| load(d)).collect::<CliResult<Vec<_>>>()?;
    if loaded.len() < 2 {
        return Err(CliError::MissingRun(dirs.first().cloned().unwrap_or_default()));
    }
    let mut gaps = Vec::new();
    for w in loaded.windows(2) {
        let ((a, ma), (b, mb)) = (&w[0], &w[1]);
        gaps.push(Gap {
            kappa: [a.kappa, b.kappa],
            gap: gap(a, ma, b, mb)?,
        });
    }
    let runs: Vec<RunRow> = loaded.into_iter().map(|(r, _)| r).collect();
    let lo = runs.iter().map(|r| r.sup_energy).fold(f64::INFINITY, f64::min);
    let hi = runs.iter().map(|r| r.sup_energy).fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    let uniform = spread <= UNIFORMITY_BAND;
    let t_run_stable = runs.windows(2).all(|w| w[1].t_run >= w[0].t_run - 0.5 * w[0].dt);
    let all_completed = runs
        .iter()
        .all(|r| !r.violated && (r.t_run - r.t_final).abs() <= 0.5 * r.dt);
    let gaps_decreasing = gaps.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(SweepReport {
        pass: uniform && t_run_stable,
        runs,
        gaps,
        spread,
        uniform,
        t_run_stable,
        all_completed,
        gaps_decreasing,
    })
}

impl SweepReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>10} {:>24} {:>24} {:>10} {:>9}", "kappa", "E(0)", "sup E", "T_run", "violated");
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{:>10} {:>24.16e} {:>24.16e} {:>10.4} {:>9}",
                r.kappa, r.e0, r.sup_energy, r.t_run, r.violated
            );
        }
        for g in &self.gaps {
            let _ = writeln!(s, "gap {:?} -> {:?}: {:.16e}", g.kappa[0], g.kappa[1], g.gap);
        }
        let _ = writeln!(
            s,
            "spread {:.4e} (band {UNIFORMITY_BAND}), T_run stable {}, all completed {}, gaps decreasing {}",
            self.spread, self.t_run_stable, self.all_completed, self.gaps_decreasing
        );
        let _ = writeln!(s, "kappa-uniformity: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}
