use resistnet::experiment::{
    experiment_size_sweep, run_experiment, ExperimentKind, ExperimentSpec, InputSource,
};
use resistnet::Error;

fn small(kind: ExperimentKind) -> ExperimentSpec {
    ExperimentSpec {
        n_in: 5,
        n_out: 4,
        iterations: 15,
        samples: 8,
        gammas: vec![0.01, 0.1],
        branches: vec![4, 16],
        trials: 30,
        seeds: vec![1, 2],
        ..ExperimentSpec::with_kind(kind)
    }
}

const KINDS: [ExperimentKind; 4] = [
    ExperimentKind::StepSizeSweep,
    ExperimentKind::SizeSweep,
    ExperimentKind::Stochastic,
    ExperimentKind::Verify,
];

#[test]
fn artifacts_repeat_byte_for_byte() {
    for kind in KINDS {
        let spec = small(kind);
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a, b, "{kind:?}");
    }
}

#[test]
fn written_files_match_memory_and_ignore_out_dir() {
    let spec = ExperimentSpec {
        inputs: InputSource::Uniform,
        ..small(ExperimentKind::Stochastic)
    };
    let out = run_experiment(&spec).unwrap();
    let moved = run_experiment(&ExperimentSpec {
        out_dir: Some("somewhere/else".into()),
        ..spec
    })
    .unwrap();
    assert_eq!(out.artifacts, moved.artifacts);

    let dir = tempfile::tempdir().unwrap();
    let paths = out.write_to(dir.path()).unwrap();
    assert_eq!(paths.len(), 2);
    for (p, a) in paths.iter().zip(&out.artifacts) {
        assert_eq!(std::fs::read(p).unwrap(), a.contents.as_bytes());
    }
}

#[test]
fn seeds_change_results() {
    let spec = small(ExperimentKind::StepSizeSweep);
    let out = run_experiment(&spec).unwrap();
    let body = |i: usize| -> String {
        out.artifacts[i]
            .contents
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect()
    };
    // artifacts alternate errors/bound per seed
    assert_ne!(body(0), body(2));
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let out = run_experiment(&small(ExperimentKind::StepSizeSweep)).unwrap();
    let csv = &out.artifacts[0].contents;
    let row = csv.lines().find(|l| l.starts_with("3,")).unwrap();
    for cell in row.split(',').skip(1) {
        let mantissa = cell.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{cell}");
    }
}

#[test]
fn step_sweep_reports_bound_in_header() {
    let out = run_experiment(&small(ExperimentKind::StepSizeSweep)).unwrap();
    let csv = &out.artifacts[0].contents;
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# resistnet "));
    assert!(lines.next().unwrap().starts_with("# two_over_k="));
    assert_eq!(lines.next(), Some("t,gamma=0.01,gamma=0.1"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 16);
}

#[test]
fn single_branch_crossbar_starts_solved() {
    let spec = ExperimentSpec {
        branches: vec![1],
        seeds: vec![0],
        ..small(ExperimentKind::SizeSweep)
    };
    let out = experiment_size_sweep(&spec).unwrap();
    let errors = &out.artifacts[0].contents;
    // one branch forces p_O = p_I, which the hidden network also produces
    let first = errors.lines().find(|l| l.starts_with("0,")).unwrap();
    let e0: f64 = first[2..].parse().unwrap();
    assert!(e0 <= 1e-15, "{first}");
}

#[test]
fn disconnected_graph_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("split.graph"),
        "nodes 4 inputs 2 outputs 2\n1 3\n2 4\n",
    )
    .unwrap();
    let spec_path = dir.path().join("spec.toml");
    std::fs::write(
        &spec_path,
        "[experiment]\nkind = \"verify\"\ngraph = \"split.graph\"\ntrials = 5\n",
    )
    .unwrap();
    let spec = ExperimentSpec::from_file(&spec_path).unwrap();
    match run_experiment(&spec) {
        Err(Error::SingularLaplacian(msg)) => {
            assert!(msg.contains("2 connected components"), "{msg}")
        }
        other => panic!("expected a singular Laplacian, got {other:?}"),
    }
}

#[test]
fn verify_on_a_graph_file_uses_that_graph() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("ring.graph"),
        "nodes 4 inputs 1 outputs 3\n1 2\n2 3\n3 4\n4 1\n",
    )
    .unwrap();
    let spec_path = dir.path().join("spec.toml");
    std::fs::write(
        &spec_path,
        "[experiment]\nkind = \"verify\"\ngraph = \"ring.graph\"\ntrials = 25\n",
    )
    .unwrap();
    let out = run_experiment(&ExperimentSpec::from_file(&spec_path).unwrap()).unwrap();
    assert!(out.passed);
    let lip = out
        .artifacts
        .iter()
        .find(|a| a.file_name.ends_with("_lipschitz.csv"))
        .unwrap();
    assert!(lip
        .contents
        .contains("trial,lipschitz_ratio,cocoercivity_slack"));
    assert!(lip.contents.lines().any(|l| l.starts_with("# summary")));
}

#[test]
fn bad_specs_are_config_errors() {
    for text in [
        "[experiment]\nkind = \"step-size-sweep\"\ngammas = []\n",
        "[experiment]\nkind = \"step-size-sweep\"\nepsilon = -1.0\n",
        "[experiment]\nkind = \"size-sweep\"\nbranches = [100, 200]\n",
        "[experiment]\nkind = \"stochastic\"\nsamples = 0\n",
        "[experiment]\nkind = \"verify\"\nseeds = []\n",
    ] {
        let spec = ExperimentSpec::parse(text).unwrap();
        assert!(matches!(spec.validate(), Err(Error::Config(_))), "{text}");
        assert!(run_experiment(&spec).is_err());
    }
    assert!(matches!(
        ExperimentSpec::parse("[experiment]\nkind = \"nonsense\"\n"),
        Err(Error::Parse { line: 2, .. })
    ));
}
