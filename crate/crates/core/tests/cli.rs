use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sensikit::bench::RunConfig;

fn sensikit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensikit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn gradcheck_passes_on_every_catalog_problem() {
    let o = sensikit(&["gradcheck"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    for id in ["harmonic", "predprey", "heat1d"] {
        assert!(out.contains(id), "{out}");
    }
    assert!(!out.contains("FAIL"));
}

#[test]
fn primal_only_norm_fails_the_gradcheck() {
    let o = sensikit(&[
        "gradcheck",
        "--problem",
        "predprey",
        "--norm",
        "primal-only",
        "--method",
        "ForwardAD",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "unknown.toml", "[run]\nbogus = 1\n");
    assert_eq!(code(&sensikit(&["fit", "--config", &unknown])), 2);
    assert_eq!(code(&sensikit(&["fit", "--problem", "nope"])), 2);
    assert_eq!(code(&sensikit(&["gradcheck", "--config", "/nonexistent/run.toml"])), 2);
    assert_eq!(
        code(&sensikit(&[
            "sweep-direct",
            "--problem",
            "harmonic",
            "--method",
            "DiscreteAdjoint"
        ])),
        2
    );
    assert_eq!(code(&sensikit(&["fit", "--alpha", "-1"])), 2);
}

#[test]
fn numerical_failures_exit_with_3() {
    let o = sensikit(&["gradcheck", "--problem", "harmonic", "--max-steps", "3"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("3 steps"));
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = sensikit(&[
            "compare-adjoints",
            "--problem",
            "predprey",
            "--reltol",
            "1e-8",
            "--abstol",
            "1e-8",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("method,gradient,abs_rel_error,rhs_evaluations,peak_stored_states,status\n"));
    assert!(!text.contains('\r'));
}

#[test]
fn config_file_and_flags_agree_for_each_problem() {
    let dir = tempfile::tempdir().unwrap();
    for id in ["harmonic", "predprey", "heat1d"] {
        let mut cfg = RunConfig::default();
        cfg.problem.id = Some(id.into());
        cfg.sweep.eps_count = 3;
        cfg.sweep.tolerances = vec![1e-8];
        let toml = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&toml).unwrap(), cfg);
        let file = write(dir.path(), &format!("{id}.toml"), &toml);

        let from_file = sensikit(&["sweep-direct", "--config", &file]);
        let from_flags = sensikit(&[
            "sweep-direct",
            "--problem",
            id,
            "--eps-count",
            "3",
            "--tolerances",
            "1e-8",
        ]);
        assert_eq!(from_file.stdout, from_flags.stdout, "{id}");
        assert_eq!(code(&from_file), code(&from_flags));
        if id == "heat1d" {
            // no closed-form gradient to measure the sweep against
            assert_eq!(code(&from_file), 2);
            assert!(String::from_utf8_lossy(&from_file.stderr).contains("no analytic reference"));
        } else {
            assert_eq!(
                code(&from_file),
                0,
                "{id}: {}",
                String::from_utf8_lossy(&from_file.stderr)
            );
            assert!(stdout(&from_file).starts_with("method,epsilon,gradient,abs_rel_error,rhs_evaluations\n"));
        }
    }
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "run.toml",
        "[problem]\nid = \"predprey\"\n\n[sweep]\neps_count = 2\ntolerances = [1e-6]\n",
    );
    let o = sensikit(&[
        "sweep-direct",
        "--config",
        &file,
        "--problem",
        "harmonic",
        "--eps-count",
        "4",
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains(":analytic"), "harmonic has a closed-form loss");
    let cfd = out.lines().filter(|l| l.starts_with("CenteredFD:analytic")).count();
    assert_eq!(cfd, 4);
}

#[test]
fn fit_writes_its_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fit.csv");
    let o = sensikit(&["fit", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(path).unwrap();
    assert!(trace.starts_with("iteration,theta,loss,grad_norm\n"));
    let last = trace.lines().last().unwrap();
    let theta: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((theta - 0.3).abs() <= 1e-3, "{last}");
}
