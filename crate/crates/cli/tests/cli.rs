use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn psir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psir"))
        .args(args)
        .current_dir(workspace())
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(path: &Path) -> HashMap<String, String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn number(r: &HashMap<String, String>, key: &str) -> f64 {
    r[key].parse().unwrap()
}

#[test]
fn version_and_help() {
    let out = psir(&["--version"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("psir "));
    for sub in ["simulate", "fit", "r0"] {
        let out = psir(&[sub, "--help"]);
        assert_eq!(code(&out), 0);
        assert!(stdout(&out).contains("--config"));
    }
}

#[test]
fn r0_for_both_models() {
    let out = psir(&["r0", "--config", "configs/metapop_aggregated.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        "R0 = 2.000000000000\nr_inf = 0.796812130020\n"
    );

    let out = psir(&["r0", "--config", "configs/metapop_network.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "R0 = 2.000000000000\n");
}

#[test]
fn invalid_parameters_exit_2() {
    let out = psir(&["r0", "--model", "agg", "--beta", "1", "--gamma", "0"]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
    let out = psir(&[
        "r0",
        "--config",
        "configs/metapop_aggregated.json",
        "--gamma",
        "-0.5",
    ]);
    assert_eq!(code(&out), 2);
    let out = psir(&["r0", "--config", "does/not/exist.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn validation_failure_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("agg.csv");
    for t_end in ["0", "-1"] {
        let out = psir(&[
            "simulate",
            "--config",
            "configs/metapop_aggregated.json",
            "--t-end",
            t_end,
            "--out",
            path_str(&csv),
        ]);
        assert_eq!(code(&out), 2);
    }
    let out = psir(&[
        "simulate",
        "--config",
        "configs/metapop_network.json",
        "--mobility",
        "chain:10:0.9",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 2);
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn numeric_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("agg.csv");
    let out = psir(&[
        "simulate",
        "--config",
        "configs/metapop_aggregated.json",
        "--max-steps",
        "10",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 3);
    assert!(!csv.exists());
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let csv = dir.path().join(format!("{name}.csv"));
        let svg = dir.path().join(format!("{name}.svg"));
        let out = psir(&[
            "simulate",
            "--config",
            "configs/metapop_aggregated.json",
            "--out",
            path_str(&csv),
            "--svg",
            path_str(&svg),
        ]);
        assert_eq!(code(&out), 0);
        (std::fs::read(csv).unwrap(), std::fs::read(svg).unwrap())
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let text = String::from_utf8(a.0).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,p_S,S,I,R,p_R,C");
    assert_eq!(text.lines().count(), 1 + 2401);
}

#[test]
fn network_run_then_fit_the_aggregated_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("net.csv");
    let svg = dir.path().join("net.svg");
    let out = psir(&[
        "simulate",
        "--config",
        "configs/metapop_network.json",
        "--out",
        path_str(&csv),
        "--svg",
        path_str(&svg),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["net.csv", "net.infected.csv", "net.total.csv", "net.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    // Ten district peaks, each later than the previous one.
    let infected = std::fs::read_to_string(dir.path().join("net.infected.csv")).unwrap();
    let rows: Vec<Vec<f64>> = infected
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let peaks: Vec<f64> = (1..=10)
        .map(|j| {
            rows.iter()
                .fold(
                    (0.0, f64::MIN),
                    |b, r| if r[j] > b.1 { (r[0], r[j]) } else { b },
                )
                .0
        })
        .collect();
    assert!(peaks.windows(2).all(|w| w[0] < w[1]), "{peaks:?}");

    let total = dir.path().join("net.total.csv");
    let fitted = dir.path().join("fit.txt");
    let out = psir(&[
        "fit",
        "--config",
        "configs/metapop_fit.json",
        "--data",
        path_str(&total),
        "--out",
        path_str(&fitted),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&fitted);
    assert_eq!(r["converged"], "true");
    assert_eq!(r["free"], "rho,beta_R,alpha,pI0");
    assert_eq!(r["points"], "121");
    assert!((0.08..=0.13).contains(&number(&r, "pI0")));
    assert!((number(&r, "rho") - 0.657).abs() < 0.15 * 0.657);
    assert!(number(&r, "rmse") < 1e-3);
    assert!(dir.path().join("fit.curve.csv").exists());
    assert!(dir.path().join("fit.svg").exists());
}

#[test]
fn argentina_fit_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let fitted = dir.path().join("ar.txt");
    let out = psir(&[
        "fit",
        "--config",
        "configs/argentina_fit.json",
        "--out",
        path_str(&fitted),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&fitted);
    assert_eq!(r["converged"], "true");
    assert_eq!(number(&r, "gamma"), 0.1667);
    assert_eq!(r["window"], "7");
    assert!((number(&r, "beta") - 0.2118).abs() < 0.2 * 0.2118);
    assert!((number(&r, "R0") - number(&r, "beta") / 0.1667).abs() < 1e-12);
    let curve = std::fs::read_to_string(dir.path().join("ar.curve.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "t,observed,model");
    assert_eq!(curve.lines().count(), 1 + 271);
}

#[test]
fn fit_failures() {
    let dir = tempfile::tempdir().unwrap();
    let fitted = dir.path().join("ar.txt");
    let base = [
        "fit",
        "--config",
        "configs/argentina_fit.json",
        "--out",
        path_str(&fitted),
    ];

    let out = psir(&[&base[..], &["--free", "rho,kappa"]].concat());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa"));
    assert!(!fitted.exists());

    let out = psir(&[&base[..], &["--window", "4"]].concat());
    assert_eq!(code(&out), 2);

    let out = psir(&[&base[..], &["--max-iterations", "2"]].concat());
    assert_eq!(code(&out), 4);
    let r = report(&fitted);
    assert_eq!(r["converged"], "false");
    assert_eq!(r["termination"], "MaxIterations");
}

#[test]
fn mobility_matrix_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("p.csv");
    std::fs::write(&matrix, "0.9,0.1,0\n0.05,0.9,0.05\n0,0.2,0.8\n").unwrap();
    let out = psir(&[
        "r0",
        "--model",
        "net",
        "--beta",
        "0.6",
        "--gamma",
        "0.2",
        "--mobility",
        path_str(&matrix),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "R0 = 3.000000000000\n");

    std::fs::write(&matrix, "0.9,0.2\n0.5,0.5\n").unwrap();
    let out = psir(&[
        "r0",
        "--model",
        "net",
        "--beta",
        "0.6",
        "--gamma",
        "0.2",
        "--mobility",
        path_str(&matrix),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn output_directories_are_created() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("nested/deeper/agg.csv");
    let out = psir(&[
        "simulate",
        "--config",
        "configs/metapop_aggregated.json",
        "--t-end",
        "5",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0);
    assert!(csv.exists());
}
