use bnls::experiments::{sweep, verdict_table};
use bnls::harness::{
    export_ground_state, read_field, read_ground_state_export, run_config, write_run, GridSpec, InitialData,
    RunConfig, SUMMARY_FILE,
};
use bnls::make_grid;
use bnls::make_params;

fn lambda_config(id: &str, lambda: f64) -> RunConfig {
    RunConfig::from_toml(&format!(
        "id = \"{id}\"\n[params]\nd = 3\nsigma = 2.0\n[grid]\nrmax = 40.0\nn = 192\n\
         [initial]\nkind = \"scaled_ground_state\"\nlambda = {lambda:?}\n\
         [cutoff]\nscale = 5.0\nkind = \"generic\"\n[evolution]\nhorizon = 0.02\nrecord_every = 0.01\n"
    ))
    .unwrap()
}

#[test]
fn lambda_sweep_verdicts() {
    let configs = vec![lambda_config("below", 0.8), lambda_config("at", 1.0), lambda_config("above", 1.2)];
    let entries = sweep(&configs);
    let branches: Vec<(String, bool, bool)> = entries
        .iter()
        .map(|e| {
            let c = e.result.as_ref().unwrap().summary.criterion.clone().unwrap();
            (c.branch, c.satisfied, c.boundary)
        })
        .collect();
    assert_eq!(branches[0], ("ii:global_existence".to_string(), false, false));
    assert_eq!(branches[1], ("ii:boundary".to_string(), false, true));
    assert!(branches[2].1);
    let table = verdict_table(&entries).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "config_id,theorem,branch,satisfied,outcome,T_estimate,beta_measured,alpha");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("below,T1_1,ii:global_existence,false,bounded_on_horizon"));
    assert!(lines[2].starts_with("at,T1_1,ii:boundary,false,"));
}

#[test]
fn duplicated_configs_agree_and_failures_are_isolated() {
    let mut bad = lambda_config("bad", 1.0);
    bad.grid.n = 4;
    let cfg = lambda_config("dup", 0.9);
    let entries = sweep(&[cfg.clone(), bad, cfg]);
    assert!(entries[1].result.is_err());
    let a = entries[0].result.as_ref().unwrap();
    let b = entries[2].result.as_ref().unwrap();
    assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());
    assert!(verdict_table(&entries).unwrap().lines().nth(2).unwrap().starts_with("bad,,,,error"));
}

#[test]
fn ground_state_export_feeds_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let params = make_params(3, 2.0, 0.0).unwrap();
    let grid = GridSpec { rmax: 40.0, n: 192 };
    let export = export_ground_state(&params, grid, &Default::default(), &dir.path().join("q")).unwrap();
    let back = read_ground_state_export(&dir.path().join("q").join("groundstate.json")).unwrap();
    assert_eq!(back, export);
    let q = read_field(&dir.path().join("q").join("groundstate.csv"), &make_grid(3, 40.0, 192).unwrap()).unwrap();
    let gs = export.ground_state.unwrap();
    assert!((q.norms().lap_l2.powi(2) - gs.pohozaev.lap_sq).abs() < 1e-12 * gs.pohozaev.lap_sq);

    let mut from_file = lambda_config("file", 1.0);
    from_file.initial = InitialData::FromFile { path: dir.path().join("q").join("groundstate.csv") };
    let direct = run_config(&lambda_config("file", 1.0)).unwrap();
    let loaded = run_config(&from_file).unwrap();
    assert_eq!(direct.summary.criterion.unwrap().branch, "ii:boundary");
    assert_eq!(loaded.summary.criterion.unwrap().branch, "ii:boundary");
    assert_eq!(direct.records.len(), loaded.records.len());
    for (a, b) in direct.records.iter().zip(&loaded.records) {
        assert!((a.lap_l2 - b.lap_l2).abs() < 1e-12 * a.lap_l2);
    }
}

#[test]
fn energy_critical_export_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let params = make_params(6, 2.0, 0.0).unwrap();
    let export = export_ground_state(&params, GridSpec { rmax: 60.0, n: 512 }, &Default::default(), dir.path()).unwrap();
    let w = export.bubble.unwrap();
    assert!(w.energy_identity < 1e-4);

    let cfg = RunConfig::from_toml(
        "id = \"w\"\n[params]\nd = 6\nsigma = 2.0\n[grid]\nrmax = 30.0\nn = 128\n\
         [initial]\nkind = \"gaussian\"\namplitude = 0.1\nwidth = 1.0\n\
         [cutoff]\nscale = 3.0\nkind = \"appendix_b\"\n[evolution]\nhorizon = 0.01\nrecord_every = 0.005\n",
    )
    .unwrap();
    let art = run_config(&cfg).unwrap();
    let c = art.summary.criterion.as_ref().unwrap();
    assert_eq!(c.branch, "ii:global_existence");
    assert!(art.summary.cutoff.eta0.is_some());
    let out = dir.path().join("run");
    write_run(&out, &art).unwrap();
    assert!(out.join(SUMMARY_FILE).exists());
}

#[test]
fn shipped_configs_parse() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    RunConfig::load(&root.join("lambda_q_blowup.toml")).unwrap();
    RunConfig::load(&root.join("mass_critical_mu1.toml")).unwrap();
    let sweep = bnls::harness::SweepConfig::load(&root.join("lambda_sweep.toml")).unwrap();
    assert_eq!(sweep.runs.len(), 3);
}
