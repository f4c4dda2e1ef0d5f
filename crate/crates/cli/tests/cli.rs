use std::path::Path;
use std::process::{Command, Output};

use num_bigint::BigUint;
use serde_json::Value;

fn lowmult(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowmult"))
        .args(args)
        .env_remove("LOWMULT_STORE")
        .output()
        .expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = lowmult(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(args: &[&str]) -> i32 {
    lowmult(args).status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn digits_within(mut n: u64, p: u64, cap: u64) -> bool {
    while n > 0 {
        if n % p > cap {
            return false;
        }
        n /= p;
    }
    true
}

fn found(v: &Value) -> Vec<u64> {
    v["found"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["fourier", "--help"]), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["kummer", "--n", "5"]), 1);
    assert_eq!(code(&["kummer", "--n", "5", "--prime", "4"]), 1);
    assert_eq!(code(&["search", "--primes", "3,3", "--limit", "100"]), 1);
    assert_eq!(code(&["search", "--primes", "3", "--limit", "2^200"]), 1);
    assert_eq!(code(&["--precision-bits", "32", "heuristic", "--primes", "3"]), 1);
    let out = lowmult(&["kummer", "--n", "5", "--prime", "4"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not an odd prime"));
    let out = lowmult(&["search", "--primes", "3", "--limit", "ten"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--limit"));
}

#[test]
fn invariant_violations_exit_two() {
    // Digit set for p = 31, H = 2 cannot fit modulo 37.
    let out = lowmult(&["fourier", "instance", "--primes", "31", "--modulus", "37", "--h", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("collides"));

    // Epsilon 0 demands that neither prime divides binom(2n, n); the report is still printed.
    let out = lowmult(&["construct", "--primes", "101,103", "--big-n", "100", "--t", "0", "--epsilon", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["epsilon_check"]["per_prime"][0]["holds"], false);
}

#[test]
fn kummer_reports_and_checks() {
    let v = json_ok(&["kummer", "--n", "757", "--prime", "5", "--check"]);
    assert_eq!(v["valuation"], 0);
    assert_eq!(v["direct_valuation"], 0);
    let v = json_ok(&["kummer", "--n", "2", "--prime", "3", "--check"]);
    assert_eq!(v["valuation"], 1);
    assert_eq!(v["direct_valuation"], 1);
    let v = json_ok(&["kummer", "--n", "0xff", "--prime", "3"]);
    assert_eq!(v["n"], "255");
    let big = "123456789012345678901234567890123456789";
    let v = json_ok(&["kummer", "--n", big, "--prime", "7"]);
    assert_eq!(v["n"], big);
    assert_eq!(code(&["kummer", "--n", big, "--prime", "7", "--check"]), 1);
}

#[test]
fn search_matches_digit_oracle_in_every_format() {
    let oracle: Vec<u64> = (1..=20_000u64)
        .filter(|&n| digits_within(n, 3, 1) && digits_within(n, 5, 2) && digits_within(n, 7, 3))
        .collect();
    let v = json_ok(&["search", "--primes", "3,5,7", "--limit", "20000"]);
    assert_eq!(found(&v), oracle);
    assert_eq!(v["count"], oracle.len());
    assert_eq!(v["complete"], true);

    let v = json_ok(&["search", "--primes", "3,5,7", "--limit", "20000", "--exhaustive"]);
    assert_eq!(found(&v), oracle);

    let plain = stdout(&lowmult(&["--format", "plain", "search", "--primes", "3,5,7", "--limit", "20000"]));
    let listed: Vec<u64> = plain.lines().map_while(|l| l.parse().ok()).collect();
    assert_eq!(listed, oracle);
    assert!(plain.contains(&format!("count = {}", oracle.len())));

    let csv = stdout(&lowmult(&["--format", "csv", "search", "--primes", "3,5,7", "--limit", "20000"]));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n"));
    assert_eq!(lines.map(|l| l.parse::<u64>().unwrap()).collect::<Vec<_>>(), oracle);
}

#[test]
fn search_third_caps_and_census() {
    let v = json_ok(&["search", "--primes", "3,5", "--caps", "third", "--limit", "3^10", "--census", "4"]);
    let oracle: Vec<u64> = (1..=59049u64)
        .filter(|&n| digits_within(n, 3, 1) && digits_within(n, 5, 1))
        .collect();
    assert_eq!(found(&v), oracle);
    let census = v["census"].as_array().unwrap();
    assert!(!census.is_empty());
    let counts: Vec<u64> = census.iter().map(|b| b["count"].as_u64().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*counts.last().unwrap(), oracle.len() as u64);
}

#[test]
fn search_checkpoint_resume_matches_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("run.ck");
    let ck = ck.to_str().unwrap();
    let base = ["search", "--primes", "3,5,7", "--limit", "10^7", "--checkpoint", ck];
    let full = json_ok(&["search", "--primes", "3,5,7", "--limit", "10^7"]);

    let mut first: Vec<&str> = base.to_vec();
    first.extend(["--budget", "50"]);
    let part = json_ok(&first);
    assert_eq!(part["complete"], false);
    assert!(Path::new(ck).exists());

    let mut rounds = 0;
    let resumed = loop {
        let v = json_ok(&base);
        rounds += 1;
        if v["complete"] == true || rounds > 3 {
            break v;
        }
    };
    assert_eq!(resumed["complete"], true);
    assert_eq!(found(&resumed), found(&full));
    assert!(found(&full).contains(&3160));

    // A checkpoint from a different problem is refused.
    assert_eq!(code(&["search", "--primes", "3,5", "--limit", "10^7", "--checkpoint", ck]), 1);
}

#[test]
fn search_parallel_matches_sequential() {
    let seq = json_ok(&["search", "--primes", "3,5,7", "--limit", "10^8"]);
    let par = json_ok(&["search", "--primes", "3,5,7", "--limit", "10^8", "--workers", "3"]);
    assert_eq!(found(&seq), found(&par));
}

#[test]
fn heuristic_sigma() {
    let v = json_ok(&["heuristic", "--primes", "3,5,7"]);
    let sigma = v["sigma"].as_f64().unwrap();
    assert!((sigma - 0.974).abs() < 5e-4, "{sigma}");
    assert!(v.get("predicted_count").is_none());
    let v = json_ok(&["heuristic", "--primes", "3,5,7", "--limit", "10^12"]);
    assert!(v["predicted_count"].as_f64().unwrap() > 0.0);
}

#[test]
fn construct_report_hex_and_file() {
    let args = ["construct", "--primes", "1009", "--big-n", "200", "--h", "2", "--epsilon", "0.1"];
    let v = json_ok(&args);
    assert_eq!(v["window_violations"], 0);
    assert_eq!(v["locality_violations"], 0);
    assert_eq!(v["alpha_check"]["disagreements"], 0);
    assert_eq!(v["alpha_check"]["bits"], 128);
    assert_eq!(v["epsilon_check"]["per_prime"][0]["holds"], true);
    let n: BigUint = v["n"].as_str().unwrap().parse().unwrap();

    let mut hex = args.to_vec();
    hex.push("--hex");
    let h = json_ok(&hex);
    let text = h["n"].as_str().unwrap();
    assert_eq!(BigUint::parse_bytes(text.strip_prefix("0x").unwrap().as_bytes(), 16), Some(n.clone()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.hex");
    let mut to_file = args.to_vec();
    to_file.extend(["--out", path.to_str().unwrap()]);
    let f = json_ok(&to_file);
    assert!(f["n"].is_null());
    let stored = std::fs::read_to_string(&path).unwrap();
    let stored = BigUint::parse_bytes(stored.trim().trim_start_matches("0x").as_bytes(), 16);
    assert_eq!(stored, Some(n));

    let wide = json_ok(&["--precision-bits", "200", "construct", "--primes", "101,103", "--big-n", "100", "--t", "0"]);
    assert_eq!(wide["alpha_check"]["bits"], 200);
    assert_eq!(wide["t"], 0);
    assert_eq!(code(&["construct", "--primes", "101", "--big-n", "100", "--t", "99"]), 1);
}

#[test]
fn equidist_verbs() {
    let csv = stdout(&lowmult(&["--format", "csv", "equidist", "orbit", "--primes", "3,5", "--n", "100", "--show", "4"]));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,p3,p5");
    assert_eq!(lines.len(), 5);
    // frac(log 2 / log 3)
    let first: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - 2f64.ln() / 3f64.ln()).abs() < 1e-12);

    let v = json_ok(&["equidist", "weyl", "--primes", "3,5", "--n", "5000", "--k", "1,-1", "--k", "2,0"]);
    assert_eq!(v["sums"].as_array().unwrap().len(), 2);
    assert!(v["sums"][0]["value"].as_f64().unwrap() < 0.1);

    let v = json_ok(&["equidist", "boxes", "--primes", "3,5", "--n", "5000", "--modulus", "7"]);
    assert_eq!(v["points"], 5000);
    assert!(v["boxes_hit"].as_u64().unwrap() <= 49);

    let v = json_ok(&["equidist", "relations", "--primes", "3,5,7", "--height", "10"]);
    assert_eq!(v["total"], 0);

    let v = json_ok(&["--seed", "5", "equidist", "curves", "--primes", "3,5,7", "--relations", "1,1,-1,0"]);
    assert_eq!(v["cover"]["misses"], 0);
    assert_eq!(v["family"]["l"], 1);
    assert_eq!(code(&["equidist", "curves", "--primes", "3,5", "--relations", "1,0,0;0,1,0"]), 1);
}

#[test]
fn fourier_verbs() {
    let v = json_ok(&["fourier", "instance", "--primes", "11", "--modulus", "1009"]);
    assert_eq!(v["a_sizes"][0], 184);
    assert_eq!(v["flags"]["out_of_regime"], true);

    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("e.csv");
    let v = json_ok(&[
        "fourier", "exceptional", "--alternating", "2", "--modulus", "1009", "--epsilon", "0.05",
        "--dump-e", dump.to_str().unwrap(),
    ]);
    let e_size = v["exceptional"]["e_size"].as_u64().unwrap();
    let text = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(text.lines().next(), Some("x1,x2,t"));
    assert_eq!(text.lines().count() as u64, e_size + 1);

    let v = json_ok(&["fourier", "verify", "--primes", "11", "--modulus", "1009", "--trials", "30"]);
    assert_eq!(v["conclusion"]["trials"], 30);
    assert!(v["conclusion"]["rate"].as_f64().unwrap() >= 0.95);

    let v = json_ok(&["fourier", "lemma", "--random", "200", "--max-r", "3"]);
    assert_eq!(v["instances"], 200);
    assert_eq!(v["violations"], 0);
    let v = json_ok(&["fourier", "lemma", "--tightness", "3", "--delta", "0.01"]);
    assert_eq!(v["holds"], true);
    let v = json_ok(&["fourier", "lemma", "--coefficients", "1,-1", "--bases", "1,2", "--grid", "0.1,0.2,0.3,0.4"]);
    assert_eq!(v["r"], 2);
    assert_eq!(code(&["fourier", "lemma", "--random", "5", "--tightness", "2"]), 1);

    let v = json_ok(&["fourier", "remark", "--r", "2", "--modulus", "1009"]);
    assert_eq!(v["avoidance_holds"], true);
    assert_eq!(code(&["fourier", "remark", "--r", "1", "--modulus", "1009"]), 1);
}

#[test]
fn store_append_and_query() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("results.ndjson");
    let s = store.to_str().unwrap();
    let a = json_ok(&["--store", s, "store", "append", "heuristic", "--primes", "3,5,7"]);
    let b = json_ok(&["--store", s, "store", "append", "heuristic", "--primes", "3,5,7"]);
    let c = json_ok(&["--store", s, "--seed", "9", "store", "append", "heuristic", "--primes", "3,5,7"]);
    assert_eq!(a["fingerprint"], b["fingerprint"]);
    assert_ne!(a["fingerprint"], c["fingerprint"]);
    assert_eq!(a["output"], c["output"]);
    assert_eq!(a["config"]["seed"], 0);
    assert!(a["timestamp"].as_str().unwrap().ends_with('Z'));

    std::fs::write(&store, std::fs::read_to_string(&store).unwrap() + "{truncated\n").unwrap();
    let fp = a["fingerprint"].as_str().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lowmult"))
        .args(["store", "query", "--fingerprint", fp])
        .env("LOWMULT_STORE", s)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let records: Vec<Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| r["fingerprint"] == fp));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt line 4"));

    let all = stdout(&lowmult(&["--store", s, "store", "query"]));
    assert_eq!(all.lines().count(), 3);

    assert_eq!(code(&["store", "query"]), 1);
    assert_eq!(code(&["--store", s, "store", "append", "store", "query"]), 1);
    assert_eq!(code(&["--store", s, "store", "append", "kummer", "--n", "1"]), 1);
    assert_eq!(stdout(&lowmult(&["--store", s, "store", "query"])).lines().count(), 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let runs: [&[&str]; 3] = [
        &["--seed", "7", "fourier", "verify", "--primes", "11", "--modulus", "1009", "--trials", "20"],
        &["--seed", "7", "fourier", "lemma", "--random", "100"],
        &["--seed", "7", "equidist", "curves", "--primes", "3,5,7", "--relations", "1,1,-1,0"],
    ];
    for args in runs {
        let a = lowmult(args);
        let b = lowmult(args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}
