use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn resistnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resistnet"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bound_prints_k_and_step_limit() {
    let dir = specs_dir();
    let out = resistnet(&[
        "bound",
        "--graph",
        dir.join("divider.graph").to_str().unwrap(),
        "--eps",
        "0.1",
        "--pin",
        dir.join("divider.pin").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("K = ") - 180.0).abs() < 1e-9);
    assert!((value("2/K = ") - 2.0 / 180.0).abs() < 1e-15);
}

#[test]
fn bound_rejects_mismatched_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let pin = write(tmp.path(), "p.txt", "1 2 3\n");
    let graph = specs_dir().join("divider.graph");
    let out = resistnet(&[
        "bound",
        "--graph",
        graph.to_str().unwrap(),
        "--eps",
        "0.1",
        "--pin",
        &pin,
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_identical_artifacts_regardless_of_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(
        tmp.path(),
        "sweep.toml",
        "[experiment]\nkind = \"step-size-sweep\"\nn_in = 6\nn_out = 5\ngammas = [0.01, 0.05, 0.1]\niterations = 12\nseeds = [3, 4]\n",
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let ra = resistnet(&["run", &spec, "--out", a.to_str().unwrap(), "--threads", "1"]);
    let rb = resistnet(&["run", &spec, "--out", b.to_str().unwrap(), "--threads", "3"]);
    assert_eq!(
        ra.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ra.stderr)
    );
    assert_eq!(rb.status.code(), Some(0));
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in names {
        let x = std::fs::read(a.join(&n)).unwrap();
        let y = std::fs::read(b.join(&n)).unwrap();
        assert_eq!(x, y, "{n:?}");
        assert!(!x.contains(&b'\r'));
        assert!(x.starts_with(b"# resistnet "));
    }
}

#[test]
fn seed_flag_replaces_spec_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(
        tmp.path(),
        "s.toml",
        "[experiment]\nkind = \"stochastic\"\nn_in = 3\nn_out = 2\nsamples = 4\niterations = 10\ninputs = \"uniform\"\nseeds = [0, 1, 2]\n",
    );
    let out_dir = tmp.path().join("o");
    let out = resistnet(&[
        "run",
        &spec,
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, vec!["stochastic_seed9_trace.csv".to_string()]);
    let csv = std::fs::read_to_string(out_dir.join(&names[0])).unwrap();
    assert!(csv.lines().next().unwrap().ends_with("seed=9"));
    assert_eq!(
        csv.lines().nth(1),
        Some("t,error,residual,gamma,sample_index")
    );
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, text) in [
        (
            "zero.toml",
            "[experiment]\nkind = \"step-size-sweep\"\ngammas = [0.0]\n",
        ),
        (
            "square.toml",
            "[experiment]\nkind = \"size-sweep\"\nbranches = [10]\n",
        ),
        ("typo.toml", "[experiment]\nkind = \"verify\"\nseed = 1\n"),
    ] {
        let spec = write(tmp.path(), name, text);
        let out = resistnet(&["run", &spec, "--out", tmp.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
    let missing = resistnet(&["run", "/nonexistent/spec.toml"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn disconnected_graph_exits_with_two_and_explains() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "split.graph",
        "nodes 4 inputs 2 outputs 2\n1 3\n2 4\n",
    );
    let spec = write(
        tmp.path(),
        "v.toml",
        "[experiment]\nkind = \"verify\"\ngraph = \"split.graph\"\ntrials = 5\n",
    );
    let out = resistnet(&["run", &spec, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("singular") && err.contains("2 connected components"),
        "{err}"
    );
}

#[test]
fn failed_convergence_threshold_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(
        tmp.path(),
        "slow.toml",
        "[experiment]\nkind = \"step-size-sweep\"\nn_in = 4\nn_out = 3\ngammas = [1e-6]\niterations = 3\nfail_above = 1e-9\n",
    );
    let out = resistnet(&["run", &spec, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("exceeds fail_above"));
}

#[test]
fn verify_passes_on_default_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = resistnet(&["verify", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    for suite in [
        "jacobian",
        "row-stochastic",
        "lipschitz-cocoercive",
        "residual-monotonicity",
        "minimum-power",
    ] {
        assert!(text.contains(suite), "{suite}");
    }
    assert!(tmp.path().join("verify_seed42_diagnostics.csv").exists());
    assert!(tmp.path().join("verify_seed42_lipschitz.csv").exists());
}

#[test]
fn bundled_specs_parse() {
    for entry in std::fs::read_dir(specs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            resistnet::ExperimentSpec::from_file(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}
