//! End-to-end runs of the `aquamend` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aquamend::image::channel_stats;
use aquamend::{synthetic, ImageTensor};

fn aquamend(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aquamend")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = aquamend(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_images(dir: &Path, images: &[ImageTensor]) {
    fs::create_dir_all(dir).unwrap();
    for (i, img) in images.iter().enumerate() {
        img.save(dir.join(format!("frame_{i:02}.png"))).unwrap();
    }
}

#[test]
fn degrade_writes_every_stage_and_stretch_spans_unit_range() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, output) = (tmp.path().join("in"), tmp.path().join("out"));
    write_images(&input, &synthetic::corpus(3, 3, 20, 24));
    ok(&["degrade", "--input", p(&input), "--output", p(&output)]);
    for i in 0..3 {
        for stage in ["dbn", "star", "stretch"] {
            assert!(output.join(format!("frame_{i:02}_{stage}.png")).is_file());
        }
        let stretched = ImageTensor::load(output.join(format!("frame_{i:02}_stretch.png"))).unwrap();
        let s = channel_stats(&stretched);
        assert_eq!((s.min, s.max), ([0.0; 3], [1.0; 3]));
    }

    let only = tmp.path().join("only");
    ok(&["degrade", "--input", p(&input), "--output", p(&only), "--stage", "star"]);
    assert_eq!(fs::read_dir(&only).unwrap().count(), 3);
}

#[test]
fn stats_follow_turbidity() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("series");
    write_images(&input, &synthetic::turbidity_series(5, 5, 32, 32));
    let csv = tmp.path().join("stats.csv");
    ok(&["stats", "--input", p(&input), "--csv", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "image,r_min,r_max,r_median,r_mean,g_min,g_max,g_median,g_mean,b_min,b_max,b_median,b_mean");
    let ranges: Vec<f64> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
            (0..3).map(|k| f[4 * k + 1] - f[4 * k]).sum::<f64>() / 3.0
        })
        .collect();
    assert_eq!(ranges.len(), 5);
    // more turbidity, narrower range: max falls and min rises
    assert!(ranges.windows(2).all(|w| w[1] < w[0]), "{ranges:?}");
}

#[test]
fn evaluate_leaves_full_reference_columns_empty_without_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_images(&input, &synthetic::corpus(8, 2, 16, 16));
    let csv = tmp.path().join("metrics.csv");
    let stdout = ok(&["evaluate", "--input", p(&input), "--csv", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "image,reference,mse,psnr,ssim,gmsd,ciede2000,uciqe,uiqm");
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 9);
        assert!(f[1..7].iter().all(|v| v.is_empty()), "{line}");
        assert!(f[7].parse::<f64>().is_ok() && f[8].parse::<f64>().is_ok());
    }
    assert!(stdout.contains("uciqe") && stdout.contains("uiqm") && !stdout.contains("psnr"));

    let with_ref = tmp.path().join("with_ref.csv");
    ok(&["evaluate", "--input", p(&input), "--reference", p(&input), "--csv", p(&with_ref)]);
    let text = fs::read_to_string(&with_ref).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "frame_00.png");
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_images(&input, &synthetic::corpus(12, 3, 16, 20));
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&["degrade", "--input", p(&input), "--output", p(&out)]);
        ok(&["attention", "--input", p(&input), "--output", p(&out)]);
        ok(&["evaluate", "--input", p(&input), "--csv", p(&out.join("m.csv"))]);
        let mut files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.iter().map(|f| (f.file_name().unwrap().to_owned(), fs::read(f).unwrap())).collect::<Vec<_>>()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a.len(), 3 * 3 + 3 + 1);
    assert_eq!(a, b);
}

#[test]
fn split_partitions_the_directory() {
    let tmp = tempfile::tempdir().unwrap();
    write_images(tmp.path(), &synthetic::corpus(2, 10, 8, 8));
    let stdout = ok(&["split", "--input", p(tmp.path()), "--seed", "4"]);
    let train = stdout.lines().filter(|l| l.starts_with("train\t")).count();
    let hold = stdout.lines().filter(|l| l.starts_with("holdout\t")).count();
    assert_eq!((train, hold), (9, 1));
    assert_eq!(stdout, ok(&["split", "--input", p(tmp.path()), "--seed", "4"]));
}

#[test]
fn train_then_enhance() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_images(&data, &synthetic::corpus(40, 6, 16, 16));
    let run = tmp.path().join("run");
    let cfg = tmp.path().join("train.cfg");
    fs::write(
        &cfg,
        format!(
            "image_size = 16\nbatch_size = 2\nepochs = 2\nseed = 1\ndataset_dir = {}\ncheckpoint_dir = {}\n",
            data.display(),
            run.display()
        ),
    )
    .unwrap();
    let stdout = ok(&["train", "--config", p(&cfg)]);
    assert!(stdout.contains("trained 2 epochs"));
    assert_eq!(fs::read_to_string(run.join("train_log.csv")).unwrap().lines().count(), 3);

    let out = tmp.path().join("enhanced");
    ok(&["enhance", "--model", p(&run.join("model.aqmd")), "--input", p(&data), "--output", p(&out)]);
    let img = ImageTensor::load(out.join("frame_00.png")).unwrap();
    assert_eq!(img.dims(), (16, 16));
}

#[test]
fn missing_paths_fail_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    for args in [
        vec!["stats", "--input", p(&missing), "--csv", "x.csv"],
        vec!["train", "--config", p(&missing)],
        vec!["enhance", "--model", p(&missing), "--input", p(tmp.path()), "--output", p(tmp.path())],
        // exists but holds no images
        vec!["degrade", "--input", p(tmp.path()), "--output", p(&missing)],
    ] {
        let out = aquamend(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("error: "), "{args:?}: {err}");
    }
}

#[test]
fn bad_arguments_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["stats", "--input", p(tmp.path()), "--csv", "x.csv", "--bogus"],
        vec!["degrade", "--input", p(tmp.path()), "--output", p(tmp.path()), "--stage", "fourth"],
        vec!["frobnicate"],
        vec![],
    ] {
        let out = aquamend(&args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn corrupted_model_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("model.aqmd");
    fs::write(&model, b"AQMD not really a model").unwrap();
    write_images(&tmp.path().join("in"), &synthetic::corpus(1, 1, 8, 8));
    let out = aquamend(&["enhance", "--model", p(&model), "--input", p(&tmp.path().join("in")), "--output", p(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.aqmd"));
}
