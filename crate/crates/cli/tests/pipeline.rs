use std::path::Path;
use std::process::Command;

use tcqd_cli::output::{write_run, HEATMAP_FILE, METADATA_FILE, PLOT_FILE, SERIES_FILE};
use tcqd_cli::{execute, presets, SimConfig};

/// A preset cut down to a few steps.
fn short(name: &str) -> SimConfig {
    let mut cfg = presets::get(name).unwrap().runs.remove(0);
    cfg.grid.t_end = 0.2;
    cfg.grid.sample_stride = 10;
    if let Some(hm) = cfg.heatmap.as_mut() {
        hm.time = 0.1;
        hm.n_theta = 7;
        hm.n_phi = 8;
    }
    cfg
}

fn tcqd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tcqd"))
}

fn code(cmd: &mut Command) -> Option<i32> {
    cmd.output().unwrap().status.code()
}

#[test]
fn csv_output_is_byte_identical_across_runs_and_modes() {
    let mut cfg = short("fig7");
    cfg.tau = vec![0.1];
    let mut seq = cfg.clone();
    seq.numerics.parallel = false;
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    write_run(&execute(&cfg).unwrap(), dirs[0].path()).unwrap();
    write_run(&execute(&cfg).unwrap(), dirs[1].path()).unwrap();
    write_run(&execute(&seq).unwrap(), dirs[2].path()).unwrap();
    let read = |d: &Path| std::fs::read(d.join(SERIES_FILE)).unwrap();
    assert_eq!(read(dirs[0].path()), read(dirs[1].path()));
    assert_eq!(read(dirs[0].path()), read(dirs[2].path()));
}

#[test]
fn series_layout() {
    let out = execute(&short("fig1a")).unwrap();
    assert_eq!(out.n_rows(), 5);
    assert_eq!(out.columns[..4], ["t", "W", "P", "Q"]);
    for c in ["n_photon", "exc_1", "exc_4", "exc_total", "g2_0", "mandel_q"] {
        assert!(out.series(c).is_some(), "{c}");
    }
    let dir = tempfile::tempdir().unwrap();
    write_run(&out, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(SERIES_FILE)).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), out.columns.len());
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    // 17 significant digits in scientific notation
    assert!(
        first
            .iter()
            .all(|f| f.split('e').next().unwrap().trim_start_matches('-').len() == 18),
        "{first:?}"
    );
}

#[test]
fn metadata_echoes_parameters() {
    let out = execute(&short("fig3")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(&out, dir.path()).unwrap();
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join(METADATA_FILE)).unwrap()).unwrap();
    assert_eq!(meta["name"], "fig3");
    assert_eq!(meta["rows"], 5);
    let echoed = SimConfig::from_toml(meta["config_toml"].as_str().unwrap()).unwrap();
    assert_eq!(echoed, out.config);
    assert!(meta["choices"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c.as_str().unwrap().contains("choice, not paper")));
    assert!(meta["diagnostics"]["max_trace_drift"].as_f64().unwrap() < 1e-12);
}

#[test]
fn plot_script_references_only_written_files() {
    let out = execute(&short("fig2")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_run(&out, dir.path()).unwrap();
    assert!(written.iter().any(|p| p.ends_with(HEATMAP_FILE)));
    let script = std::fs::read_to_string(dir.path().join(PLOT_FILE)).unwrap();
    let mut inputs = 0;
    for line in script
        .lines()
        .filter(|l| l.trim_start().starts_with("plot") || l.trim_start().starts_with('\''))
    {
        for name in line.split('\'').skip(1).step_by(2) {
            assert!(dir.path().join(name).exists(), "{name} not written");
            inputs += 1;
        }
    }
    assert!(inputs > 3);
}

#[test]
fn cli_exit_codes() {
    let out = tcqd().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    for name in presets::NAMES {
        assert!(listing.lines().any(|l| l.starts_with(name)), "{name}");
    }

    assert_eq!(code(tcqd().args(["run", "--preset", "fig99"])), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    short("fig5a").save(&good).unwrap();
    assert_eq!(code(tcqd().args(["validate", "--config"]).arg(&good)), Some(0));

    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        short("fig5a").to_toml().replace("n_max = 30", "n_max = 30\nbogus = 1"),
    )
    .unwrap();
    let out = tcqd().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let missing = dir.path().join("nope.toml");
    assert_eq!(code(tcqd().args(["validate", "--config"]).arg(&missing)), Some(3));

    assert_eq!(
        code(tcqd().args(["run", "--config"]).arg(&good).arg("--out").arg(dir.path())),
        Some(0)
    );
    assert!(dir.path().join("fig5a").join(SERIES_FILE).exists());
}

#[test]
fn numerical_failure_exits_with_two() {
    // An empty cavity leaves g2(0) undefined.
    let mut cfg = short("fig4pure");
    cfg.initial.mean_photons = 0.0;
    cfg.grid.t_end = 0.05;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    cfg.save(&path).unwrap();
    let out = tcqd()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
