//! The `verify` verb: every property check with its tolerance.

use std::fmt;
use std::path::Path;

use elastoslab::elliptic::TAU_ELL;
use elastoslab::evolution::CFL_FACTOR;
use elastoslab::Grid;

use crate::config::{RunConfig, TimeStep};
use crate::error::CliResult;
use crate::report::cmd_sweep_report;
use crate::run::{cmd_run, initial_data, integrate};
use crate::verify::*;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub measured: String,
    pub pass: bool,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.measured)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub lines: Vec<CheckLine>,
}

impl VerifyReport {
    fn push(&mut self, name: &str, pass: bool, measured: String) {
        let line = CheckLine {
            name: name.to_string(),
            measured,
            pass,
        };
        println!("{line}");
        self.lines.push(line);
    }

    pub fn pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }
}

/// Sweep radii for the mollifier study when the config lists fewer than two.
const DEFAULT_SWEEP: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn stable(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (b / a - 1.0).abs() <= 0.2
}

/// Run the full suite at the configuration's resolution n = n1; refinement
/// studies compare n/2 with n.
pub fn cmd_verify(config: &RunConfig, out: &Path, jobs: usize) -> CliResult<VerifyReport> {
    let mut rep = VerifyReport::default();
    let n = config.n1;
    let grid = config.grid();
    let kappa = config.kappa[0];
    let eq_dt = match config.time_step {
        TimeStep::Fixed(d) => d,
        TimeStep::Cfl(f) => f * CFL_FACTOR * grid.h_min(),
    };

    let eq = equilibrium_drift(grid, kappa, config.kernel_floor, config.t_final, eq_dt, config.force_sign)?;
    rep.push(
        "equilibrium fixed point",
        eq.drift <= 10.0 * TAU_ELL,
        format!("drift {:.3e} over {} steps (bound {:.1e})", eq.drift, eq.steps, 10.0 * TAU_ELL),
    );
    let force = force_oracle_error(Grid::cube(16)?, config.force_sign)?;
    rep.push("elastic force oracle", force <= 1e-10, format!("relative error {force:.3e}"));

    let sweep = if config.kappa.len() >= 2 { config.kappa.clone() } else { DEFAULT_SWEEP.to_vec() };
    let m = mollifier_study(Grid::new(128, 128, 8)?, &sweep)?;
    let norm = m.operator_norm.iter().copied().fold(0.0, f64::max);
    rep.push("mollifier operator norm", norm <= 1.0 + 1e-8, format!("max {norm:.12}"));
    for (s, slope) in &m.loss_slopes {
        let want = s - 1.0;
        rep.push(
            &format!("mollifier loss slope s={s}"),
            (slope - want).abs() <= 0.15 * want.abs(),
            format!("slope {slope:.4} vs {want}"),
        );
    }
    rep.push(
        "commutator constants uniform",
        m.commutator_spread.iter().all(|&r| r <= 3.0),
        format!("max/min {:?}", m.commutator_spread),
    );

    let coarse = trace_constants(n / 2, 50, 100)?;
    let fine = trace_constants(n, 50, 100)?;
    let hodge_ok = (0..4).all(|s| stable(coarse.hodge[s], fine.hodge[s]));
    rep.push("Hodge constants", hodge_ok, format!("{:?} -> {:?}", coarse.hodge, fine.hodge));
    rep.push(
        "normal trace constant",
        stable(coarse.normal_trace, fine.normal_trace),
        format!("{:.4} -> {:.4}", coarse.normal_trace, fine.normal_trace),
    );
    let closed = normal_trace_closed_form_error(n)?;
    rep.push("normal trace closed form", closed <= 1e-6, format!("error {closed:.3e}"));

    let rt = ig0_round_trip(n, 20, 42)?;
    rep.push(
        "IG0 round trip",
        rt.max_error <= 1e-12 && rt.min_margin >= 0.1,
        format!("error {:.3e}, margin {:.3}", rt.max_error, rt.min_margin),
    );
    rep.push("IG0 forced minor cases", ig0_forced_cases()?, String::from("selection and degeneracy"));
    let (g1, g2) = (ig0_gain(n / 2)?, ig0_gain(n)?);
    rep.push("IG0 gain ratio", stable(g1, g2), format!("{g1:.4} -> {g2:.4}"));

    let r1 = alinhac_residuals(n / 2, 10, 9)?;
    let r2 = alinhac_residuals(n, 10, 9)?;
    let worst = r2.iter().copied().fold(0.0, f64::max);
    let order = r1.iter().zip(&r2).map(|(a, b)| (a / b).log2()).fold(f64::INFINITY, f64::min);
    rep.push(
        "good unknown identity",
        worst <= 1e-3 && order >= 2.0,
        format!("max residual {worst:.3e}, min order {order:.2}"),
    );

    // three levels need the coarsest grid to stay at 8 or above
    let top = n.max(32);
    let ns = [top / 4, top / 2, top];
    let e = elliptic_study(&ns)?;
    let oc = orders(&e.constant);
    let of = orders(&e.flow);
    let bound_ok = n < 64 || (e.constant[2] <= 1e-5 && e.flow[2] <= 1e-5);
    rep.push(
        "elliptic manufactured solutions",
        oc.iter().chain(&of).all(|&o| o >= 3.0) && e.max_residual <= TAU_ELL && bound_ok,
        format!(
            "n {:?}: constant {:?} flow {:?}, orders {:?} {:?}, residual {:.2e}",
            ns, e.constant, e.flow, oc, of, e.max_residual
        ),
    );

    let slab = elastoslab::Slab::new(grid);
    let init = initial_data(config, &slab)?;
    let (traj, _) = integrate(config, &slab, &init, kappa)?;
    let [j, d, f] = constraint_sup(&traj);
    rep.push(
        "constraint drift",
        traj.violation.is_none() && j <= 1e-4 && d <= 1e-4 && f <= 1e-6,
        format!(
            "T_run {:.4}: |J-1| {j:.3e}, div_A v {d:.3e}, F identity {f:.3e}, pressure residual {:.2e}",
            traj.t_run, traj.max_pressure_residual
        ),
    );
    rep.push(
        "pressure residual",
        traj.max_pressure_residual <= TAU_ELL && eq.max_pressure_residual <= TAU_ELL,
        format!("{:.3e}", traj.max_pressure_residual),
    );

    if config.kappa.len() >= 2 {
        cmd_run(config, &out.join("sweep"), jobs)?;
        let r = cmd_sweep_report(&[out.join("sweep")])?;
        rep.push(
            "kappa uniformity",
            r.pass && r.all_completed && r.gaps_decreasing,
            format!(
                "spread {:.3e}, completed {}, gaps {:?}",
                r.spread,
                r.all_completed,
                r.gaps.iter().map(|g| g.gap).collect::<Vec<_>>()
            ),
        );
        let p = psi_study(grid, &config.kappa, config.kernel_floor, 3)?;
        rep.push(
            "psi smallness",
            p.slope <= 2.0 * p.slope_se,
            format!("ratios {:?}, slope {:.3e} +- {:.1e}", p.ratio, p.slope, p.slope_se),
        );
    }

    let gate = stability_gate(n)?;
    let nc_ok = gate.nc_only.is_some_and(|(rt, nc)| rt == [0.0, 0.0] && nc == [1.0, 1.0]);
    let mixed_ok = gate.mixed.is_some_and(|(rt, nc)| rt[0] >= 0.1 && nc[1] >= 0.1);
    rep.push(
        "mixed stability gate",
        nc_ok && mixed_ok && gate.rt_on_zero_pressure_rejected,
        format!("{gate:?}"),
    );
    Ok(rep)
}
