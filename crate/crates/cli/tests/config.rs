use tcqd_cli::config::Observable;
use tcqd_cli::{presets, CliError, SimConfig};

fn fig1a() -> SimConfig {
    presets::get("fig1a").unwrap().runs.remove(0)
}

#[test]
fn every_preset_round_trips_through_toml() {
    for preset in presets::all() {
        for cfg in preset.runs {
            let text = cfg.to_toml();
            let back = SimConfig::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
            assert_eq!(back, cfg, "{}", cfg.name);
            assert_eq!(back.to_toml(), text);
        }
    }
}

#[test]
fn dumped_preset_reloads_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig1a.toml");
    fig1a().save(&path).unwrap();
    assert_eq!(SimConfig::load(&path).unwrap(), fig1a());
}

#[test]
fn out_of_range_q_is_rejected_with_its_key() {
    let text = fig1a().to_toml();
    let mut cfg = presets::get("fig3").unwrap().runs.remove(0);
    cfg.channel = tcqd::channels::ChannelFamily::Pcenm {
        nu: vec![2.2; 4],
        q: 1.5,
        dephasing_limit: false,
    };
    match cfg.validate() {
        Err(CliError::Config(errs)) => assert!(errs.iter().any(|e| e.contains("channel.q")), "{errs:?}"),
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(SimConfig::from_toml(&text.replace("r = 0.0", "r = -1.0")).is_err());
}

#[test]
fn unknown_keys_are_rejected() {
    let text = fig1a().to_toml().replacen("[layout]", "[layout]\nspins = 3", 1);
    let err = SimConfig::from_toml(&text).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("spins"), "{err}");
}

#[test]
fn every_violation_is_reported() {
    let mut cfg = fig1a();
    cfg.layout.n_max = 0;
    cfg.system.g.pop();
    cfg.observables.push(Observable::G2Tau);
    let errs = cfg.violations();
    assert!(errs.len() >= 3, "{errs:?}");
    for key in ["layout.n_max", "system.g", "tau"] {
        assert!(errs.iter().any(|e| e.starts_with(key)), "{key} missing from {errs:?}");
    }
}

#[test]
fn halved_step_samples_the_same_times() {
    let cfg = fig1a();
    let half = cfg.with_halved_step();
    assert_eq!(half.grid.n_samples(), cfg.grid.n_samples());
    assert_eq!(half.grid.n_steps(), 2 * cfg.grid.n_steps());
    for (a, b) in cfg.grid.sample_times().iter().zip(half.grid.sample_times()) {
        assert!((a - b).abs() < 1e-12);
    }
}
