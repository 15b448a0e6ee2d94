use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use equitax::Error;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn equitax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_equitax")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn convert_calc_prints_worked_example() {
    let o = equitax(&["convert-calc"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "item,value\nnew_shares_issued,500\ncredit_shares,475\noutside_shares,25\nunsold_shares,0\n\
         post_price,80.00\nclearing_price,80.00\nirs_proceeds,2000.00\n"
    );
    let from_file = equitax(&["convert-calc", "--config", scenario("conversion_worked_example.toml").to_str().unwrap()]);
    assert_eq!(stdout(&from_file), stdout(&o));
}

#[test]
fn auction_rations_by_price_priority() {
    let o = equitax(&["auction", "--config", scenario("auction_rationed.toml").to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("bidder,shares,paid,credit\n1,10,100.00,false\n2,0,0.00,false\n3,0,0.00,false\n"), "{text}");
    assert!(text.contains("clearing_price,10\n"));
    assert!(text.contains("unsold,0\n"));
}

#[test]
fn json_output_parses() {
    let o = equitax(&["compare-regimes", "--format", "json"]);
    assert!(o.status.success());
    // Two tables, one JSON array each.
    let text = stdout(&o);
    let mut stream = serde_json::Deserializer::from_str(&text).into_iter::<serde_json::Value>();
    let growth = stream.next().unwrap().unwrap();
    let iceberg = stream.next().unwrap().unwrap();
    assert_eq!(growth.as_array().unwrap().len(), 5);
    for row in iceberg.as_array().unwrap() {
        assert_eq!(row["tax_on_price"], row["tax_on_income"]);
    }
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = equitax(&["simulate", "--seed", seed, "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for f in ["steps.csv", "summary.json", "events.jsonl"] {
            assert!(dir.path().join(f).exists(), "missing {f}");
        }
        std::fs::read(dir.path().join("events.jsonl")).unwrap()
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_ne!(a, run("2"));
}

#[test]
fn simulate_writes_json_steps_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let o = equitax(&[
        "simulate",
        "--config",
        scenario("economy.toml").to_str().unwrap(),
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let steps: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("steps.json")).unwrap()).unwrap();
    assert!(!steps.as_array().unwrap().is_empty());
}

#[test]
fn proptax_and_rates_run() {
    let o = equitax(&["proptax-sim", "--config", scenario("proptax.toml").to_str().unwrap(), "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("multiplier,"));
    let o = equitax(&["rates", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v[0]["relative_gap"].as_str().unwrap().parse::<f64>().unwrap().abs() <= 0.005);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\nhorizon_years = 5\nbogus = 3\n[[firm_class]]\nname = \"a\"\nregime = \"equity_taxed\"\ndrift = 0.05\n").unwrap();
    let o = equitax(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let uneven = dir.path().join("uneven.toml");
    std::fs::write(&uneven, "seed = 1\nhorizon_years = 5\ndt = 0.3\n[[firm_class]]\nname = \"a\"\nregime = \"equity_taxed\"\ndrift = 0.05\n").unwrap();
    assert_eq!(equitax(&["simulate", "--config", uneven.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(equitax(&["auction"]).status.code(), Some(2));
    assert_eq!(equitax(&["simulate", "--config", "/nonexistent/economy.toml"]).status.code(), Some(2));
    assert_eq!(equitax(&["simulate", "--seed", "minus-one"]).status.code(), Some(2));
    assert_eq!(equitax(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn numeric_invariant_errors_map_to_three() {
    assert_eq!(Error::Invariant("drift".into()).exit_code(), 3);
    assert_eq!(Error::Arithmetic("overflow").exit_code(), 3);
    assert_eq!(Error::config("x").exit_code(), 2);
}
