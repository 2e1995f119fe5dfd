use std::path::Path;
use std::process::{Command, Output};

use minlift::imaging::load_pgm;

fn minlift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minlift"))
        .args(args)
        .env_remove("MINLIFT_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn summary_field(out: &Output, key: &str) -> String {
    stdout(out)
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in {}", stdout(out)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn denoise_without_noise_converges() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("out.pgm");
    let out = minlift(&["denoise", "--size", "16", "--sigma", "0", "--output", p(&img)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary_field(&out, "status"), "converged");
    let snr: f64 = summary_field(&out, "snr_db").parse().unwrap();
    assert!(snr.is_finite());
    assert_eq!(load_pgm(&img).unwrap().side(), 16);
}

fn without_timing(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| match l.rsplit_once(',') {
            Some((head, _)) if !l.starts_with('#') => head.to_string(),
            _ => l.to_string(),
        })
        .collect()
}

#[test]
fn trace_is_reproducible_and_headed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for t in [&a, &b] {
        let out = minlift(&["denoise", "--size", "16", "--seed", "7", "--trace", p(t)]);
        assert_eq!(code(&out), 0);
    }
    let (a, b) = (std::fs::read_to_string(a).unwrap(), std::fs::read_to_string(b).unwrap());
    assert_eq!(without_timing(&a), without_timing(&b));
    let mut lines = a.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# minlift 0.1.0 config="), "{header}");
    assert!(header.ends_with(" seed=7"));
    assert_eq!(lines.next().unwrap(), "k,norm_change,dist_to_ref,gap,elapsed_ms");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 5);
    assert_eq!(first[0], "1");
    assert!(first[2].parse::<f64>().is_ok() && first[3].parse::<f64>().is_ok());
}

#[test]
fn config_hash_tracks_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let header = |extra: &[&str]| {
        let t = dir.path().join("h.csv");
        let mut args = vec!["denoise", "--size", "8", "--trace", p(&t)];
        args.extend_from_slice(extra);
        minlift(&args);
        std::fs::read_to_string(&t).unwrap().lines().next().unwrap().to_string()
    };
    assert_eq!(header(&[]), header(&[]));
    assert_ne!(header(&[]), header(&["--lambda2", "0.06"]));
}

#[test]
fn larger_gamma_gives_higher_snr_at_fixed_budget() {
    let snr = |gamma: &str| -> f64 {
        let out = minlift(&[
            "denoise",
            "--size",
            "32",
            "--gamma",
            gamma,
            "--max-iter",
            "100",
            "--tol",
            "1e-300",
        ]);
        assert_eq!(code(&out), 2);
        summary_field(&out, "snr_db").parse().unwrap()
    };
    assert!(snr("0.99") >= snr("0.01"));
}

#[test]
fn exit_codes() {
    let out = minlift(&["denoise", "--size", "16", "--max-iter", "2"]);
    assert_eq!(code(&out), 2);
    assert_eq!(summary_field(&out, "status"), "max-iter");

    assert_eq!(code(&minlift(&["denoise", "--input", "/definitely/missing.pgm"])), 1);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P5\n4 4\n255\n\x01\x02").unwrap();
    let out = minlift(&["denoise", "--input", p(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte"));

    assert_eq!(code(&minlift(&["denoise", "--gamma", "1.5"])), 64);
    assert_eq!(code(&minlift(&["denoise", "--lambda1", "-1"])), 64);
    assert_eq!(code(&minlift(&["denoise", "--no-such-flag"])), 64);
    assert_eq!(code(&minlift(&["denoise", "--algorithm", "admm"])), 64);
    assert_eq!(code(&minlift(&[])), 64);
    assert_eq!(code(&minlift(&["--help"])), 0);
}

#[test]
fn dr_product_denoise_runs() {
    let out = minlift(&["denoise", "--size", "16", "--algorithm", "dr-product"]);
    assert_eq!(code(&out), 0);
    assert_eq!(summary_field(&out, "algorithm"), "dr-product");
}

fn table(out: &Output) -> Vec<Vec<String>> {
    stdout(out)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn compare_table_shape_and_determinism() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_minlift"))
            .args(["compare", "--size", "16", "--repeats", "3", "--seed", "5"])
            .env("MINLIFT_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        out
    };
    let (one, many) = (run("1"), run("3"));
    let t = table(&one);
    assert_eq!(
        t[0],
        [
            "image",
            "size",
            "algorithm",
            "repeats",
            "mean_iterations",
            "mean_distance",
            "mean_time_s"
        ]
    );
    assert_eq!(t.len(), 3);
    assert!(t.iter().all(|row| row.len() == 7));
    assert_eq!(t[1][2], "mt");
    assert_eq!(t[2][2], "dr-product");
    let strip = |t: Vec<Vec<String>>| t.into_iter().map(|r| r[..6].to_vec()).collect::<Vec<_>>();
    assert_eq!(strip(table(&one)), strip(table(&many)));
    assert_eq!(stdout(&one).lines().next(), stdout(&many).lines().next());

    let bad = Command::new(env!("CARGO_BIN_EXE_minlift"))
        .args(["compare", "--size", "8", "--repeats", "1"])
        .env("MINLIFT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 64);
    assert_eq!(code(&minlift(&["compare", "--repeats", "0"])), 64);
}

#[test]
fn compare_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cmp.csv");
    let out = minlift(&["compare", "--size", "8", "--repeats", "1", "--output", p(&csv)]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("# minlift "));
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 7));
}

#[test]
fn synthetic_case_b_within_beta() {
    let out = minlift(&[
        "synthetic",
        "--case",
        "b",
        "--n",
        "3",
        "--dim",
        "20",
        "--mu",
        "1",
        "--lip",
        "2",
        "--gamma",
        "0.5",
        "--repeats",
        "2",
    ]);
    assert_eq!(code(&out), 0);
    let t = table(&out);
    let col = |name: &str| t[0].iter().position(|c| c == name).unwrap();
    for row in &t[1..] {
        let rate: f64 = row[col("fitted_rate")].parse().unwrap();
        let beta: f64 = row[col("theoretical_beta")].parse().unwrap();
        assert!(rate <= beta, "rate {rate} beta {beta}");
    }
}

#[test]
fn synthetic_monotone_family_has_no_beta() {
    let out = minlift(&["synthetic", "--mu", "0", "--format", "jsonl"]);
    assert_eq!(code(&out), 0);
    let row: serde_json::Value = serde_json::from_str(stdout(&out).lines().next().unwrap()).unwrap();
    assert!(row["theoretical_beta"].is_null());
    assert!(row["fitted_rate"].as_f64().unwrap() <= 1.0);
}

#[test]
fn synthetic_fixed_rays_flag_non_contraction() {
    for case in ["zero-triple", "cone-triple"] {
        let out = minlift(&["synthetic", "--case", case]);
        assert_eq!(code(&out), 0);
        let t = table(&out);
        let row = &t[1];
        let fixed: usize = row[t[0].iter().position(|c| c == "exact_fixed_points").unwrap()]
            .parse()
            .unwrap();
        assert!(fixed >= 2);
        assert_eq!(row.last().unwrap(), "not a contraction");
    }
    assert_eq!(
        code(&minlift(&["synthetic", "--case", "b", "--mu", "3", "--lip", "2"])),
        64
    );
    assert_eq!(code(&minlift(&["synthetic", "--gamma", "1"])), 64);
    assert_eq!(code(&minlift(&["synthetic", "--case", "cone-triple", "--mu", "0"])), 64);
}

#[test]
fn verify_all_suites_pass() {
    let out = minlift(&["verify"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn verify_filter_and_negative_path() {
    let out = minlift(&["verify", "--suite", "moreau"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 1);
    assert!(stdout(&out).starts_with("PASS moreau"));

    let out = minlift(&["verify", "--suite", "moreau", "--corrupt-prox"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("moreau"));

    let out = minlift(&["verify", "--corrupt-prox"]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("FAIL prox-oracle"));

    assert_eq!(code(&minlift(&["verify", "--suite", "nope"])), 64);
}
