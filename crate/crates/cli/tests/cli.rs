use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emu(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emu"))
        .args(args)
        .current_dir(dir)
        .env("EMU_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) {
    fs::write(
        dir.join("run.ini"),
        "seed = 4\n\n[data]\ntrain_tiles = 2\ntest_tiles = 1\nheight = 50\nwidth = 50\n\n\
         [model]\nhidden_layers = 2\nhidden_units = 6\ntau = 1\n\n[train]\nepochs = 1\nbatch_size = 4\nstride = 25\n\n\
         [infer]\nsamples = 2\n\n[bench]\nexamples = 1\nsamples = 2\n",
    )
    .unwrap();
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn end_to_end_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    let cfg = ["--config", "run.ini"];
    let run = |cmd: &str, extra: &[&str]| {
        let mut args = vec![cmd];
        args.extend(cfg);
        args.extend(extra);
        emu(&args, dir.path())
    };

    let o = run("train", &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("emu generate"));

    let o = run("generate", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run("generate", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--force"));
    assert!(run("generate", &["--force"]).status.success());

    let o = run("train", &["--arch", "dcfc"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("validation conditional RMSE"));
    let o = run("infer", &["--mode", "static"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run("infer", &["--mode", "bayes", "--samples", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("3 passes"));
    let o = run("evaluate", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("run/reports/aggregate.txt").is_file());
    let o = run("bench", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("static_to_bayes_ratio"));
    for cmd in ["generate", "train", "infer", "evaluate", "bench"] {
        let root = if cmd == "generate" { "data" } else { "run" };
        assert!(
            dir.path()
                .join(root)
                .join(format!("run-{cmd}.txt"))
                .is_file(),
            "{cmd}"
        );
    }

    let o = run("infer", &["--samples", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn architecture_flag_accepts_exactly_three_values() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    for bad in ["resnet", "DCFC ", "mlp", ""] {
        let o = emu(&["train", "--config", "run.ini", "--arch", bad], dir.path());
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
    }
    let help = emu(&["train", "--help"], dir.path());
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("dcfc") && text.contains("dccnn") && text.contains("dcvdsr"));
    // A valid value gets past argument parsing and fails later on missing data.
    for good in ["dcfc", "dccnn", "dcvdsr"] {
        let o = emu(
            &["train", "--config", "run.ini", "--arch", good],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(3), "{good}: {}", stderr(&o));
    }
}

#[test]
fn configuration_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = emu(&["generate", "--config", "missing.ini"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("bad.ini"), "[train]\nepochs = many\n").unwrap();
    let o = emu(&["generate", "--config", "bad.ini"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    write_config(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_emu"))
        .args(["generate", "--config", "run.ini"])
        .current_dir(dir.path())
        .env("EMU_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_flag_changes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    assert!(emu(&["generate", "--config", "run.ini"], dir.path())
        .status
        .success());
    let a = fs::read_to_string(dir.path().join("data/manifest.txt")).unwrap();
    assert!(emu(
        &["generate", "--config", "run.ini", "--force", "--seed", "5"],
        dir.path()
    )
    .status
    .success());
    let b = fs::read_to_string(dir.path().join("data/manifest.txt")).unwrap();
    assert_ne!(a, b);
    assert!(b.contains("tile-50000"));
}
