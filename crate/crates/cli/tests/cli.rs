use std::path::Path;
use std::process::{Command, Output};

fn mmw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmw"))
        .args(args)
        .env_remove("MMW_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: [&str; 8] = [
    "--set", "n_t=32", "--set", "n_r=16", "--set", "n_rf_t=4", "--set", "n_rf_r=4",
];

fn design(structure: &str, seed: &str) -> Output {
    let mut args = vec!["design", "--structure", structure, "--seed", seed];
    args.extend(SMALL);
    mmw(&args)
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn design_is_repeatable_and_meets_the_power_budget() {
    let a = design("full", "11");
    let b = design("full", "11");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    for s in ["full", "sub", "omp"] {
        let o = design(s, "11");
        assert!(o.status.success(), "{s}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let power: f64 = field(&text, "transmit_power").parse().unwrap();
        let n_s: f64 = field(&text, "n_s").parse().unwrap();
        assert!((power - n_s).abs() < 1e-6, "{s}: {text}");
    }
    assert_ne!(design("full", "12").stdout, a.stdout);
}

#[test]
fn codebook_writes_both_ends() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cb.json");
    let o = mmw(&[
        "codebook", "--structure", "full", "--bits", "6", "--lobes", "2", "--subpaths", "2",
        "--nt", "16", "--nr", "8", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(field(&text, "total_codewords"), "64");
    assert_eq!(field(&text, "bits_per_index"), "6");
    let tx: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(tx["codewords"].as_array().unwrap().len(), 64);
    assert!(dir.path().join("cb.rx.json").exists());
}

#[test]
fn exit_codes_separate_bad_input_from_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cb.json");
    let out = out.to_str().unwrap();
    // 30 antennas cannot be split over 4 RF chains
    let indivisible = mmw(&[
        "codebook", "--structure", "sub", "--bits", "6", "--lobes", "2", "--subpaths", "2",
        "--nt", "30", "--nr", "8", "--nrf", "4", "--out", out,
    ]);
    assert_eq!(indivisible.status.code(), Some(2));
    let unknown_key = mmw(&["design", "--set", "antennas=3"]);
    assert_eq!(unknown_key.status.code(), Some(2));
    let bad_flag = mmw(&["sweep", "--axis", "bits"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    let missing_dir = Path::new(out).parent().unwrap().join("no/such/dir/out.csv");
    let mut args = vec![
        "sweep", "--axis", "snr", "--values", "0", "--trials", "2", "--out",
        missing_dir.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let unwritable = mmw(&args);
    assert_eq!(unwritable.status.code(), Some(1));
}

#[test]
fn bit_sweep_has_one_row_per_value_snr_and_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bits.csv");
    let mut args = vec![
        "sweep", "--axis", "bits", "--values", "4,5,6", "--trials", "3", "--set",
        "snr_grid_db=-4,0,4", "--out", out.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let o = mmw(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("axis,axis_value,scheme,snr_db"));
    // three default schemes
    assert_eq!(lines.count(), 3 * 3 * 3);
}

#[test]
fn reproduce_writes_one_table_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let o = mmw(&[
        "reproduce", "fig4", "--trials", "2", "--set", "snr_grid_db=0", "--set", "n_t=32",
        "--set", "n_r=16", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut headers = Vec::new();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        headers.push(lines[0].to_string());
    }
    assert_eq!(headers.len(), 9);
    assert!(headers.windows(2).all(|w| w[0] == w[1]));
}
