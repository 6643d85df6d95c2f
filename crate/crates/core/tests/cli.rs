use std::fs;
use std::path::Path;

use repeated_angles::cli::{
    self, dispatch, main_with_args, parse_args, Command, Experiment, Source,
};

fn argv(out: &Path, rest: &str) -> Vec<String> {
    let mut v = vec![
        "repangles".to_string(),
        "--out".to_string(),
        out.display().to_string(),
    ];
    v.extend(rest.split_whitespace().map(String::from));
    v
}

#[test]
fn parses_census_grid_right() {
    let c = parse_args([
        "repangles",
        "census",
        "grid",
        "--dim",
        "2",
        "--side",
        "16",
        "--right",
    ])
    .unwrap();
    match c.command {
        Command::Census {
            source:
                Source::Grid {
                    dim: 2,
                    side: 16,
                    block: None,
                },
            opts,
        } => {
            assert!(opts.right);
            assert!(opts.key.is_none());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn parses_scaling_right_angles() {
    let c = parse_args([
        "repangles",
        "scaling",
        "right-angles",
        "--dim",
        "3",
        "--sides",
        "4,5,6,8",
    ])
    .unwrap();
    match c.command {
        Command::Scaling {
            experiment: Experiment::RightAngles {
                dim, sides, key, ..
            },
            ..
        } => {
            assert_eq!(dim, 3);
            assert_eq!(sides, vec![4, 5, 6, 8]);
            assert!(key.is_none());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn usage_errors_name_the_flag() {
    let e = parse_args(["repangles", "census", "grid", "--dim", "1", "--side", "4"]).unwrap_err();
    assert!(e.to_string().contains("--dim"), "{e}");
    let e = parse_args([
        "repangles",
        "census",
        "grid",
        "--dim",
        "2",
        "--side",
        "4",
        "--bogus",
    ])
    .unwrap_err();
    assert!(e.to_string().contains("--bogus"), "{e}");
    let e = parse_args([
        "repangles",
        "census",
        "grid",
        "--dim",
        "2",
        "--side",
        "4",
        "--right",
        "--key",
        "+:1/2",
    ])
    .unwrap_err();
    assert!(e.to_string().contains("--key"), "{e}");
    assert_eq!(
        main_with_args(["repangles", "census", "grid", "--dim", "1", "--side", "4"]),
        cli::EXIT_ERROR
    );
    assert_eq!(main_with_args(["repangles", "--version"]), cli::EXIT_PASS);
}

#[test]
fn scaling_run_writes_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let code = main_with_args(argv(
        dir.path(),
        "scaling right-angles --dim 2 --sides 6,8,10",
    ));
    assert_eq!(code, cli::EXIT_PASS);
    let csv = fs::read_to_string(dir.path().join("right_angles.csv")).unwrap();
    assert!(csv.starts_with("size,value\n36,"), "{csv}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("right_angles.json")).unwrap())
            .unwrap();
    assert_eq!(json["pass"], true);
    assert_eq!(
        json["config"]["command"]["scaling"]["experiment"]["right-angles"]["sides"],
        serde_json::json!([6, 8, 10])
    );
    assert_eq!(json["result"]["target_exponent"], 2.0);
}

#[test]
fn failing_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let code = main_with_args(argv(
        dir.path(),
        "scaling sphere-angles --dim 4 --r2 5,13,29",
    ));
    assert_eq!(code, cli::EXIT_FAIL);
    assert!(dir.path().join("sphere_angles.csv").exists());
}

#[test]
fn cap_exceeded_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_args(argv(dir.path(), "census grid --dim 2 --side 30 --brute")).unwrap();
    let e = dispatch(&c).unwrap_err();
    assert!(e.to_string().contains("cap is 600"), "{e}");
    assert_eq!(
        main_with_args(argv(dir.path(), "census grid --dim 2 --side 30 --brute")),
        cli::EXIT_ERROR
    );
}

#[test]
fn hypothesis_violation_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let code = main_with_args(argv(
        dir.path(),
        "scaling equitable --dim 2 --s 1 --sides 4,8,16",
    ));
    assert_eq!(code, cli::EXIT_ERROR);
}

#[test]
fn generated_points_round_trip_through_census() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        main_with_args(argv(dir.path(), "generate sphere --dim 3 --r2 9")),
        0
    );
    let points = dir.path().join("points.csv");
    let by_file = argv(dir.path(), &format!("census file {}", points.display()));
    assert_eq!(main_with_args(by_file), 0);
    let from_file = fs::read(dir.path().join("census.csv")).unwrap();
    assert_eq!(
        main_with_args(argv(dir.path(), "census sphere --dim 3 --r2 9")),
        0
    );
    assert_eq!(fs::read(dir.path().join("census.csv")).unwrap(), from_file);
}

#[test]
fn worker_count_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, w) in [(&a, "1"), (&b, "8")] {
        let code = main_with_args(argv(
            dir.path(),
            &format!("--workers {w} scaling shells --dim 4 --r2 5,13,25,29"),
        ));
        assert_eq!(code, 0);
    }
    assert_eq!(
        fs::read(a.path().join("shell_bound.csv")).unwrap(),
        fs::read(b.path().join("shell_bound.csv")).unwrap()
    );
}

#[test]
fn energy_and_spectrum_commands() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        main_with_args(argv(dir.path(), "energy grid --dim 2 --side 2 --s 1")),
        0
    );
    let csv = fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("1,"), "{csv}");

    assert_eq!(
        main_with_args(argv(
            dir.path(),
            "spectrum grid --dim 2 --side 6 --s 1 --eps 0.1 --bins 5"
        )),
        0
    );
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().nth(3).unwrap().starts_with("0,"), "{csv}");

    assert_eq!(
        main_with_args(argv(
            dir.path(),
            "decay --dim 2 --t 0 --eps 0.1 --h 0.03125 --ray 1,0,0,1 --lambdas 1,2,4,8"
        )),
        0
    );
    assert!(fs::read_to_string(dir.path().join("decay.csv"))
        .unwrap()
        .starts_with("lambda,magnitude\n"));
    assert_eq!(
        main_with_args(argv(
            dir.path(),
            "decay --dim 2 --t 0 --eps 0.1 --h 0.03125 --ray 1,0,0,1 --lambdas 2,4,8,32"
        )),
        cli::EXIT_ERROR
    );
}
