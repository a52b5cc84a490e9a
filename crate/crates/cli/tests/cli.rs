use std::process::Command;

fn bnls(root: &std::path::Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bnls"));
    c.env("BNLS_OUTPUT_ROOT", root);
    c
}

#[test]
fn groundstate_writes_profile_and_constants() {
    let root = tempfile::tempdir().unwrap();
    let out = bnls(root.path()).args(["groundstate", "--d", "2", "--sigma", "2", "--out", "q22"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["ground_state"]["c_gn"].as_f64().unwrap() > 0.0);
    assert!(json["ground_state"]["pohozaev"]["mass_identity"].as_f64().unwrap() < 1e-8);
    assert!(root.path().join("q22").join("groundstate.csv").exists());
}

#[test]
fn malformed_config_is_a_usage_error() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("bad.toml");
    std::fs::write(&cfg, "[params]\nd = 3\nsigma = \"two\"\n").unwrap();
    let out = bnls(root.path()).args(["evolve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sigma"), "{err}");
    assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 1);
}

#[test]
fn evolve_and_sweep_write_outputs() {
    let root = tempfile::tempdir().unwrap();
    let run = "id = \"g\"\n[params]\nd = 3\nsigma = 2.0\nmu = 1.0\n[grid]\nrmax = 20.0\nn = 64\n\
               [initial]\nkind = \"gaussian\"\namplitude = 0.5\nwidth = 1.5\n\
               [cutoff]\nscale = 4.0\nkind = \"generic\"\n[evolution]\nhorizon = 0.05\nrecord_every = 0.025\n";
    let cfg = root.path().join("run.toml");
    std::fs::write(&cfg, run).unwrap();
    let out = bnls(root.path()).args(["evolve", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["records.csv", "summary.json", "timing.json", "final_state.csv"] {
        assert!(root.path().join("g").join(f).exists(), "{f}");
    }
    let body = run.replacen("id = \"g\"\n", "", 1).replace("[params]", "[runs.params]").replace("[grid]", "[runs.grid]")
        .replace("[initial]", "[runs.initial]").replace("[cutoff]", "[runs.cutoff]").replace("[evolution]", "[runs.evolution]");
    let sweep = format!("output = \"s\"\n[[runs]]\nid = \"a\"\n{body}[[runs]]\nid = \"b\"\n{body}");
    let scfg = root.path().join("sweep.toml");
    std::fs::write(&scfg, sweep).unwrap();
    let out = bnls(root.path()).args(["sweep", "--config"]).arg(&scfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(root.path().join("s").join("verdicts.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let a = std::fs::read(root.path().join("s").join("000-a").join("records.csv")).unwrap();
    let b = std::fs::read(root.path().join("s").join("001-b").join("records.csv")).unwrap();
    assert_eq!(a, b);
}
