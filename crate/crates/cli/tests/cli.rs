//! Black-box tests of the `ulmtrack` binary: subcommand wiring, exit codes,
//! and byte-level determinism of the emitted files.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ulmtrack"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("cfg.toml");
    std::fs::write(
        &path,
        "[simulate]\nduration = 4.0\n\n[sweep]\nframe_rates = [25.0]\naccelerations = [75.0]\nconcentrations = [\"low\"]\nseeds = [3]\n",
    )
    .unwrap();
    path
}

#[test]
fn full_pipeline_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir);
    let cfg = cfg.to_str().unwrap();

    assert_ok(&run(
        &["simulate", "--seed", "9", "--config", cfg, "--out", "sim"],
        dir,
    ));
    for f in ["loc.csv", "links_gt.csv", "centerline.csv"] {
        assert!(dir.join("sim").join(f).exists(), "missing {f}");
    }

    for mode in ["accel", "const-vel"] {
        assert_ok(&run(
            &[
                "track",
                "--loc",
                "sim/loc.csv",
                "--mode",
                mode,
                "--out",
                "trk",
            ],
            dir,
        ));
    }
    assert!(dir.join("trk/tracks_accel.csv").exists());
    assert!(dir.join("trk/links_const_vel.csv").exists());

    let eval = run(
        &[
            "evaluate",
            "--est",
            "trk/links_accel.csv",
            "--gt",
            "sim/links_gt.csv",
            "--loc",
            "sim/loc.csv",
            "--out",
            "score.csv",
        ],
        dir,
    );
    assert_ok(&eval);
    let line = String::from_utf8_lossy(&eval.stdout);
    assert!(line.contains("tpr="), "unexpected output: {line}");
    assert!(dir.join("score.csv").exists());

    assert_ok(&run(
        &[
            "render",
            "--tracks",
            "trk/tracks_accel.csv",
            "--method",
            "accel",
            "--out",
            "maps",
        ],
        dir,
    ));
    for f in [
        "dense_tracks.csv",
        "density.csv",
        "density.pgm",
        "speed.pgm",
        "speed_gradient_pos.pgm",
        "speed_gradient_neg.pgm",
    ] {
        assert!(dir.join("maps").join(f).exists(), "missing {f}");
    }

    assert_ok(&run(
        &[
            "downsample",
            "--loc",
            "sim/loc.csv",
            "--factor",
            "4",
            "--out",
            "subs",
        ],
        dir,
    ));
    assert!(dir.join("subs/loc_sub3.csv").exists());

    // Byte-identical outputs when repeated with the same seed.
    assert_ok(&run(
        &["simulate", "--seed", "9", "--config", cfg, "--out", "sim2"],
        dir,
    ));
    for f in ["loc.csv", "links_gt.csv", "centerline.csv"] {
        let a = std::fs::read(dir.join("sim").join(f)).unwrap();
        let b = std::fs::read(dir.join("sim2").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
}

#[test]
fn sweep_writes_scores_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir);

    assert_ok(&run(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", "sw"],
        dir,
    ));
    let scores = std::fs::read_to_string(dir.join("sw/scores.csv")).unwrap();
    // One cell, two modes.
    assert_eq!(scores.lines().count(), 4, "{scores}");
    assert!(scores.contains("r25_a75_low_s3,25,75,low,3,accel"));
    assert!(scores.contains("const_vel"));
    assert!(dir.join("sw/summary.csv").exists());
    assert!(dir.join("sw/r25_a75_low_s3/tracks_accel.csv").exists());
}

#[test]
fn sweep_cross_product_counts() {
    // 3 rates x 4 accelerations x 3 concentrations x 1 seed: 36 datasets,
    // 72 tracker runs (one score row each).
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("matrix.toml"),
        "[simulate]\nduration = 2.0\n\n[sweep]\nframe_rates = [15.0, 25.0, 35.0]\naccelerations = [0.0, 37.5, 75.0, 112.5]\nconcentrations = [\"low\", \"mid\", \"high\"]\n",
    )
    .unwrap();
    let out = run(
        &[
            "sweep",
            "--config",
            "matrix.toml",
            "--seed",
            "4",
            "--out",
            "sw",
        ],
        dir,
    );
    assert_ok(&out);
    let scores = std::fs::read_to_string(dir.join("sw/scores.csv")).unwrap();
    let rows = scores.lines().count() - 2; // metadata + column header
    assert_eq!(rows, 72);
    let datasets = std::fs::read_dir(dir.join("sw"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .count();
    assert_eq!(datasets, 36);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // Config error: zero frame rate.
    let out = run(
        &["simulate", "--seed", "1", "--frame-rate", "0", "--out", "x"],
        dir,
    );
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert!(!out.stderr.is_empty());

    // Data error: missing input file.
    let out = run(&["track", "--loc", "missing.csv", "--out", "x"], dir);
    assert_eq!(out.status.code(), Some(3));

    // Config error: invalid mode.
    std::fs::write(
        dir.join("loc.csv"),
        "# frame_rate_hz=25\nframe,x_um,y_um\n0,1,1\n",
    )
    .unwrap();
    let out = run(
        &["track", "--loc", "loc.csv", "--mode", "warp", "--out", "x"],
        dir,
    );
    assert_eq!(out.status.code(), Some(2));

    // Data error: malformed localisation row (names the line).
    std::fs::write(
        dir.join("bad.csv"),
        "# frame_rate_hz=25\nframe,x_um,y_um\n0,oops,1\n",
    )
    .unwrap();
    let out = run(&["track", "--loc", "bad.csv", "--out", "x"], dir);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));

    // Config error: sweep without seeds.
    std::fs::write(dir.join("nosweep.toml"), "[sweep]\nseeds = []\n").unwrap();
    let out = run(&["sweep", "--config", "nosweep.toml", "--out", "x"], dir);
    assert_eq!(out.status.code(), Some(2));

    // Downsample factor validation.
    let out = run(
        &[
            "downsample",
            "--loc",
            "loc.csv",
            "--factor",
            "1",
            "--out",
            "x",
        ],
        dir,
    );
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        &[
            "downsample",
            "--loc",
            "loc.csv",
            "--factor",
            "5",
            "--out",
            "x",
        ],
        dir,
    );
    assert_eq!(out.status.code(), Some(3));
}
