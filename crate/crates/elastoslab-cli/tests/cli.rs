use std::fs;
use std::path::Path;
use std::process::Command;

use elastoslab::{Grid, Regime, ScalarField};
use elastoslab_cli::config::{TimeStep, VelocityRecipe};
use elastoslab_cli::output::{read_snapshot, write_snapshot, EnergyTable, Manifest, CSV_COLUMNS};
use elastoslab_cli::report::cmd_sweep_report;
use elastoslab_cli::run::cmd_run;
use elastoslab_cli::{parse_config, CliError, ConfigError, RunConfig};

fn small(extra: &str) -> RunConfig {
    let text = format!("n1 = 16\nn2 = 16\nn3 = 16\nt_final = 0.02\ndt = 0.005\nsnapshot_every = 1\n{extra}");
    parse_config(&text).unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn empty_config_gives_defaults() {
    let c = parse_config("# nothing here\n\n").unwrap();
    assert_eq!(c, RunConfig::default());
    assert_eq!((c.n1, c.n2, c.n3), (32, 32, 32));
    assert_eq!(c.kappa, vec![0.1]);
    assert_eq!(c.time_step, TimeStep::Fixed(1e-3));
    assert_eq!(c.velocity, VelocityRecipe::Standard);
    assert_eq!((c.bottom, c.top), (Regime::Nc, Regime::Nc));
    assert_eq!(c.force_sign, 1.0);
}

#[test]
fn negative_size_names_its_field() {
    let e = parse_config("n1 = -4").unwrap_err();
    assert!(matches!(e, ConfigError::Validation { .. }));
    assert_eq!(e.field(), Some("n1"));
    assert_eq!(parse_config("n2 = 12").unwrap_err().field(), Some("n2"));
    assert_eq!(parse_config("force_sign = 2").unwrap_err().field(), Some("force_sign"));
}

#[test]
fn kappa_list_parses_and_must_descend() {
    let c = parse_config("kappa = 0.2, 0.1,0.05 # sweep").unwrap();
    assert_eq!(c.kappa, vec![0.2, 0.1, 0.05]);
    assert_eq!(parse_config("kappa = 0.1, 0.2").unwrap_err().field(), Some("kappa"));
    assert_eq!(parse_config("kappa = 0.3").unwrap_err().field(), Some("kappa"));
}

#[test]
fn unknown_and_duplicate_keys_report_lines() {
    match parse_config("n1 = 16\n\nfoo = 1").unwrap_err() {
        ConfigError::Parse { line, message } => {
            assert_eq!(line, 3);
            assert!(message.contains("foo"));
        }
        e => panic!("unexpected {e:?}"),
    }
    assert!(matches!(parse_config("n3 = 16\nn3 = 32").unwrap_err(), ConfigError::Parse { line: 2, .. }));
    assert!(matches!(parse_config("just text").unwrap_err(), ConfigError::Parse { line: 1, .. }));
    assert!(parse_config("dt = 0.001\ncfl = 0.5").is_err());
}

#[test]
fn text_form_round_trips() {
    let c = small("kappa = 0.2, 0.15\nvelocity = mixed\ng0 = sheared\nbottom = rt\ntop = nc\nseed = 99");
    assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    let c = parse_config("cfl = 0.5\ng0 = columnar\ntrack_deformation = false").unwrap();
    assert_eq!(c.time_step, TimeStep::Cfl(0.5));
    assert_eq!(parse_config(&c.to_text()).unwrap(), c);
}

#[test]
fn equilibrium_run_keeps_energy_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small("velocity = equilibrium\nkappa = 0.2");
    let sums = cmd_run(&c, tmp.path(), 1).unwrap();
    assert_eq!(sums.len(), 1);
    assert!(!sums[0].violated);
    assert!((sums[0].t_run - 0.02).abs() < 1e-12);
    let table = EnergyTable::read(&sums[0].dir.join("energy.csv")).unwrap();
    assert_eq!(table.header, CSV_COLUMNS.to_vec());
    assert_eq!(table.rows.len(), 5);
    let e = table.column("E_kappa").unwrap();
    assert!(e.iter().all(|x| (x - e[0]).abs() <= 1e-9 * e[0]));
    let v = table.column("v_h2").unwrap();
    assert!(v.iter().all(|x| x.abs() < 1e-9));
    let m = manifest(&sums[0].dir);
    assert_eq!(m.steps, 4);
    assert_eq!(m.snapshots.len(), 5);
    assert!(m.violation.is_none());
    assert_eq!(parse_config(&m.config).unwrap().kappa, vec![0.2]);
}

#[test]
fn sweep_writes_one_directory_per_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small("kappa = 0.2, 0.15, 0.125");
    let sums = cmd_run(&c, tmp.path(), 2).unwrap();
    let ks: Vec<f64> = sums.iter().map(|s| s.kappa).collect();
    assert_eq!(ks, c.kappa);
    for s in &sums {
        let t = EnergyTable::read(&s.dir.join("energy.csv")).unwrap();
        assert_eq!(t.header, CSV_COLUMNS.to_vec());
        assert_eq!(manifest(&s.dir).kappa, s.kappa);
    }
    assert!(tmp.path().join("sweep.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = small("kappa = 0.2\nseed = 3");
    let ra = cmd_run(&c, a.path(), 1).unwrap();
    let rb = cmd_run(&c, b.path(), 1).unwrap();
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(&ra[0].dir, "energy.csv"), read(&rb[0].dir, "energy.csv"));
    assert_eq!(read(&ra[0].dir, "snap_00004.bin"), read(&rb[0].dir, "snap_00004.bin"));
}

#[test]
fn snapshot_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = Grid::new(8, 16, 9).unwrap();
    let a = ScalarField::from_fn(grid, |x, y, z| x + 2.0 * y - z * z);
    let b = ScalarField::from_fn(grid, |x, _, z| (x * z).sin());
    let path = tmp.path().join("s.bin");
    write_snapshot(&path, 0.125, &[("a", &a), ("b", &b)]).unwrap();
    let s = read_snapshot(&path).unwrap();
    assert_eq!(s.grid, grid);
    assert_eq!(s.t, 0.125);
    assert_eq!(s.field("a"), Some(&a));
    assert_eq!(s.field("b"), Some(&b));
    assert!(s.displacement().is_none());
    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 1);
    fs::write(&path, &bytes).unwrap();
    assert!(read_snapshot(&path).is_err());
}

#[test]
fn equilibrium_sweep_report_has_flat_energies() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small("velocity = equilibrium\nkappa = 0.2, 0.15");
    cmd_run(&c, tmp.path(), 1).unwrap();
    let r = cmd_sweep_report(&[tmp.path().to_path_buf()]).unwrap();
    assert_eq!(r.runs.len(), 2);
    for row in &r.runs {
        assert!((row.sup_energy - row.e0).abs() <= 1e-9 * row.e0);
    }
    assert!(r.spread < 1e-9);
    assert!(r.gaps[0].gap < 1e-9);
    assert!(r.pass && r.all_completed);
    assert!(r.table().contains("kappa-uniformity: PASS"));
}

#[test]
fn missing_run_directory_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small("velocity = equilibrium\nkappa = 0.2, 0.15");
    cmd_run(&c, tmp.path(), 1).unwrap();
    let gone = tmp.path().join("kappa_0.15");
    fs::remove_dir_all(&gone).unwrap();
    match cmd_sweep_report(&[tmp.path().to_path_buf()]) {
        Err(CliError::MissingRun(p)) => assert_eq!(p, gone),
        other => panic!("unexpected {other:?}"),
    }
    let one = [tmp.path().join("kappa_0.2")];
    assert!(matches!(cmd_sweep_report(&one), Err(CliError::MissingRun(_))));
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "n1 = -4\n").unwrap();
    let exe = env!("CARGO_BIN_EXE_elastoslab");
    let out = Command::new(exe).args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n1"));

    let good = tmp.path().join("good.cfg");
    fs::write(&good, small("velocity = equilibrium\nkappa = 0.2").to_text()).unwrap();
    let out = Command::new(exe)
        .args(["run", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(tmp.path().join("runs"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("runs/kappa_0.2/energy.csv").exists());

    let out = Command::new(exe).arg("sweep-report").arg(tmp.path().join("nowhere")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
