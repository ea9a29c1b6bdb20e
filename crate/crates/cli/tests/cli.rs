//! Runs the `lab` binary end to end on small inputs.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn lab(dir: &Path, args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    if text.trim().is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap()
    }
}

#[test]
fn module_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    lab(d, &["gen", "parity", "--n", "2", "--out", "m.lab.json"]);
    lab(d, &["gen", "uniform", "--n", "4", "--out", "u.lab.json"]);
    lab(d, &["gen", "list", "--dists", "u.lab.json", "--out", "rhos.lab.json"]);
    lab(d, &["gen", "source", "--matrix", "m.lab.json", "--target", "3", "--dist", "u.lab.json", "--out", "s.lab.json"]);

    let sq = lab(d, &["sqdim", "--matrix", "m.lab.json", "--dist", "u.lab.json"]);
    assert_eq!(sq["d"], 4);
    assert_eq!(sq["exact"], true);

    let r2 = lab(d, &["r2", "--matrix", "m.lab.json", "--mu", "u.lab.json", "--rho", "u.lab.json"]);
    assert_eq!(r2["r2_f64"], 0.25);

    let cb = lab(d, &["corrbound", "--matrix", "m.lab.json", "--mu", "u.lab.json", "--rho", "u.lab.json"]);
    assert_eq!(cb["holds"], true);

    let disc = lab(d, &["disc", "--matrix", "m.lab.json", "--min", "--grid", "3", "--restarts", "2"]);
    assert_eq!(disc["sandwich"]["left_certified"], true);

    let rfl = lab(d, &["rfl", "--matrix", "m.lab.json", "--mu", "u.lab.json", "--rhos", "rhos.lab.json"]);
    assert_eq!(rfl["mass_passing"], 1.0);

    let b = lab(d, &["boost", "--matrix", "m.lab.json", "--mu", "u.lab.json", "--rho", "u.lab.json", "--target", "2", "--out", "model.lab.json"]);
    assert_eq!(b["estimate"]["epsilon_achieved"], 0.0);
    assert!(d.join("model.lab.json").exists());

    let run = lab(d, &["bsgd", "--arch", "mlp4", "--source", "s.lab.json", "--T", "20", "--c", "0.125", "--b", "8", "--lr", "0.3", "--via-sq"]);
    assert_eq!(run["query_count"], 20 * 17);
    assert_eq!(run["trajectory"].as_array().unwrap().len(), 20);
}

#[test]
fn chain_from_toml() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.toml"),
        "seed = 4\n[chain]\nadc_trials = 4\nrfl_trials = 1000\n[chain.bsgd]\nsteps = 40\n",
    )
    .unwrap();
    let out = lab(d, &["chain", "--config", "run.toml", "--out", "res"]);
    assert_eq!(out["certificates_hold"], true);
    for f in ["chain.lab.json", "chain_checks.csv", "chain_bsgd.csv"] {
        assert!(d.join("res").join(f).exists(), "{f}");
    }
}
