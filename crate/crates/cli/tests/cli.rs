//! Behaviour of the `uqseg` binary: outputs, exit codes and messages.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use uqseg_core::io::{self, ManifestRow};
use uqseg_core::tta::{gaussian_blob, InputImage};
use uqseg_core::{pixel_variance, BinaryMask, ProbabilityMap, SampleStack};

fn uqseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uqseg")).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", stderr(out));
}

fn small_cohort(dir: &Path, n: usize) -> PathBuf {
    let out = dir.join("cohort");
    let n = n.to_string();
    assert_exit(&uqseg(&["synth", "--out", &s(&out), "--n", &n, "--size", "32", "--samples", "4"]), 0);
    out.join("manifest.csv")
}

fn csv_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn metrics_writes_six_rows_per_image() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_cohort(dir.path(), 3);
    let out = dir.path().join("m");
    assert_exit(&uqseg(&["metrics", "--manifest", &s(&manifest), "--out", &s(&out), "--render"]), 0);

    let lines = csv_lines(&out.join("scores.csv"));
    assert_eq!(lines[0], "image_id,metric,raw_score,normalized_score,rank");
    assert_eq!(lines.len(), 1 + 3 * 6);
    let metrics: Vec<&str> = lines[1..7].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(metrics, ["variance", "entropy", "mutual_information", "atlas@0.1", "atlas@0.5", "atlas@0.9"]);
    assert!(lines[1..7].iter().all(|l| l.starts_with("img0000,")));
    assert!(out.join("maps/img0002_mutual_information.pgm").is_file());
    assert!(!out.join("maps/img0002_atlas@0.5.pgm").exists());
}

#[test]
fn metrics_selection_limits_rows() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_cohort(dir.path(), 2);
    let out = dir.path().join("m");
    let result = uqseg(&["metrics", "--manifest", &s(&manifest), "--out", &s(&out), "--metrics", "entropy"]);
    assert_exit(&result, 0);
    let lines = csv_lines(&out.join("scores.csv"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(1) == Some("entropy")));
}

#[test]
fn missing_stack_is_a_configuration_error_naming_the_image() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_cohort(dir.path(), 3);
    fs::remove_file(dir.path().join("cohort/stacks/img0001.uqs")).unwrap();
    let out = uqseg(&["metrics", "--manifest", &s(&manifest), "--out", &s(&dir.path().join("m"))]);
    assert_exit(&out, 2);
    assert!(stderr(&out).contains("img0001"), "{}", stderr(&out));
}

#[test]
fn corrupt_stack_is_skipped_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_cohort(dir.path(), 3);
    fs::write(dir.path().join("cohort/stacks/img0002.uqs"), b"UQSX garbage").unwrap();
    let m = dir.path().join("m");
    let out = uqseg(&["metrics", "--manifest", &s(&manifest), "--out", &s(&m)]);
    assert_exit(&out, 1);
    assert!(stderr(&out).contains("img0002"));
    let lines = csv_lines(&m.join("scores.csv"));
    assert_eq!(lines.len(), 1 + 2 * 6);
    assert!(!lines.iter().any(|l| l.starts_with("img0002")));
}

#[test]
fn filter_fraction_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_cohort(dir.path(), 5);
    let out = dir.path().join("f");
    let result = uqseg(&["filter", "--manifest", &s(&manifest), "--out", &s(&out), "--fraction", "0"]);
    assert_exit(&result, 0);
    assert_eq!(csv_lines(&out.join("rejected.csv")), ["image_id,stack_path,reference_seg_path,gt_path"]);
    assert_eq!(csv_lines(&out.join("retained.csv")).len(), 6);
    assert!(String::from_utf8_lossy(&result.stdout).contains("rejected 0 of 5"));

    let result = uqseg(&["filter", "--manifest", &s(&manifest), "--out", &s(&out), "--fraction", "1.2"]);
    assert_exit(&result, 2);
}

#[test]
fn filter_output_manifests_are_usable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_cohort(dir.path(), 6);
    let out = dir.path().join("f");
    let result = uqseg(&["filter", "--manifest", &s(&manifest), "--out", &s(&out), "--fraction", "0.5", "--metric", "mi"]);
    assert_exit(&result, 0);
    for name in ["retained.csv", "rejected.csv"] {
        let rows = io::read_manifest(out.join(name)).unwrap().rows;
        assert_eq!(rows.len(), 3, "{name}");
    }
}

#[test]
fn filter_on_default_cohort_rejects_the_most_severe() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("cohort");
    assert_exit(&uqseg(&["synth", "--out", &s(&cohort)]), 0);
    let manifest = cohort.join("manifest.csv");
    assert_eq!(csv_lines(&manifest).len(), 201);

    let out = dir.path().join("f");
    assert_exit(&uqseg(&["filter", "--manifest", &s(&manifest), "--out", &s(&out), "--fraction", "0.2"]), 0);
    let rejected: Vec<String> = io::read_manifest(out.join("rejected.csv"))
        .unwrap()
        .rows
        .into_iter()
        .map(|r| r.image_id)
        .collect();
    assert_eq!(rejected.len(), 40);
    // Severity rises with the index, so img0160..img0199 are the 40 most severe.
    let overlap = rejected.iter().filter(|id| id[3..].parse::<usize>().unwrap() >= 160).count();
    assert!(overlap >= 32, "overlap {overlap}/40");

    let curve = dir.path().join("c");
    assert_exit(&uqseg(&["curve", "--manifest", &s(&manifest), "--out", &s(&curve)]), 0);
    for line in csv_lines(&curve.join("summary.csv")).iter().skip(1) {
        let values: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert!(values[0] > values[values.len() - 1], "{line}");
    }
}

/// Five images on a 1x20 strip whose reference Dice against ground truth is
/// 0.9, 0.8, 0.7, 0.6 and 0.5, with variance scores of exactly 1 - Dice.
fn toy_set(dir: &Path, with_gt: bool) -> (PathBuf, PathBuf) {
    let stack = SampleStack::new(vec![ProbabilityMap::filled(1, 20, 0.5).unwrap()]).unwrap();
    let gt = BinaryMask::from_fn(1, 20, |_, c| c < 10);
    let mut rows = Vec::new();
    let mut scores = String::from("image_id,metric,raw_score,normalized_score,rank\n");
    for k in 1..=5usize {
        let id = format!("toy{k}");
        let reference = BinaryMask::from_fn(1, 20, |_, c| c >= k && c < 10 + k);
        io::write_stack(dir.join(format!("{id}.uqs")), &stack).unwrap();
        io::write_mask(dir.join(format!("{id}_ref.uqm")), &reference).unwrap();
        io::write_mask(dir.join(format!("{id}_gt.uqm")), &gt).unwrap();
        rows.push(ManifestRow {
            image_id: id.clone(),
            stack_path: format!("{id}.uqs").into(),
            reference_seg_path: format!("{id}_ref.uqm").into(),
            gt_path: with_gt.then(|| format!("{id}_gt.uqm").into()),
        });
        let raw = k as f64 / 10.0;
        scores.push_str(&format!("{id},variance,{raw},{},{}\n", (k - 1) as f64 / 4.0, 6 - k));
    }
    let manifest = dir.join("manifest.csv");
    io::write_manifest(&manifest, &rows).unwrap();
    let scores_path = dir.join("scores.csv");
    fs::write(&scores_path, scores).unwrap();
    (manifest, scores_path)
}

#[test]
fn curve_on_perfectly_correlated_toy_set() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, scores) = toy_set(dir.path(), true);
    let out = dir.path().join("c");
    let result = uqseg(&[
        "curve", "--manifest", &s(&manifest), "--out", &s(&out), "--scores", &s(&scores), "--metrics", "variance",
    ]);
    assert_exit(&result, 0);
    assert_eq!(
        csv_lines(&out.join("curve.csv")),
        [
            "metric,fraction,n_retained,mean_dsc",
            "variance,0.2,1,0.9",
            "variance,0.4,2,0.85",
            "variance,0.6,3,0.8",
            "variance,0.8,4,0.75",
            "variance,1,5,0.7",
        ]
    );
    assert_eq!(csv_lines(&out.join("summary.csv"))[1], "variance,0.9,0.85,0.8,0.75,0.7");

    let result = uqseg(&[
        "curve", "--manifest", &s(&manifest), "--out", &s(&out), "--scores", &s(&scores), "--metrics", "variance",
        "--fractions", "0.5,1.0",
    ]);
    assert_exit(&result, 0);
    assert_eq!(csv_lines(&out.join("curve.csv")).len(), 3);
}

#[test]
fn curve_without_ground_truth_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = toy_set(dir.path(), false);
    let result = uqseg(&["curve", "--manifest", &s(&manifest), "--out", &s(&dir.path().join("c"))]);
    assert_exit(&result, 2);
    assert!(stderr(&result).contains("no ground truth available"));
}

#[test]
fn synth_is_reproducible_and_validates_n() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_exit(&uqseg(&["synth", "--out", &s(out), "--n", "4", "--seed", "7", "--size", "24"]), 0);
    }
    for rel in ["manifest.csv", "severity.csv", "stacks/img0003.uqs", "reference/img0000.uqm", "gt/img0002.uqm"] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
    assert_exit(&uqseg(&["synth", "--out", &s(&dir.path().join("c")), "--n", "1"]), 2);
}

fn write_image_list(dir: &Path, images: &[(&str, InputImage)]) -> PathBuf {
    let mut list = String::from("image_id,image_path\n");
    for (id, image) in images {
        io::write_image(dir.join(format!("{id}.uqs")), image).unwrap();
        list.push_str(&format!("{id},{id}.uqs\n"));
    }
    let path = dir.join("images.csv");
    fs::write(&path, list).unwrap();
    path
}

#[test]
fn tta_single_sample_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let image = InputImage::new(2, 3, vec![0.25, 5.0, -2.0, 3.5, 0.0, 1.0]).unwrap();
    let list = write_image_list(dir.path(), &[("a", image.clone())]);
    let out = dir.path().join("emit");
    assert_exit(&uqseg(&["tta", "emit", "--images", &s(&list), "--out", &s(&out), "--samples", "1"]), 0);
    assert_eq!(io::read_image(out.join("a_aug0.uqs")).unwrap(), image);
    assert!(!out.join("a_aug1.uqs").exists());
    assert_eq!(io::read_sidecar(out.join("a.tta.jsonl")).unwrap().len(), 1);
}

#[test]
fn tta_identity_model_disagrees_only_near_the_border() {
    let dir = tempfile::tempdir().unwrap();
    let n = 64;
    // Smooth and bright everywhere, so zero fill at rotated corners shows.
    let bump = gaussian_blob(n, n, 31.5, 31.5, 20.0);
    let map = ProbabilityMap::from_fn(n, n, |r, c| 0.4 + 0.5 * bump.get(r, c));
    let list = write_image_list(dir.path(), &[("blob", InputImage::from(&map))]);
    let emitted = dir.path().join("emit");
    let args = ["tta", "emit", "--images", &s(&list), "--out", &s(&emitted), "--samples", "8", "--noise-sigma", "0"];
    assert_exit(&uqseg(&args), 0);

    // An identity "model": the prediction is the (augmented) input itself.
    let preds = dir.path().join("preds");
    fs::create_dir(&preds).unwrap();
    for k in 0..8 {
        let name = format!("blob_aug{k}.uqs");
        fs::copy(emitted.join(&name), preds.join(&name)).unwrap();
    }
    let stacks = dir.path().join("stacks");
    let args = ["tta", "collect", "--emitted", &s(&emitted), "--predictions", &s(&preds), "--out", &s(&stacks)];
    assert_exit(&uqseg(&args), 0);

    let stack = io::read_stack(stacks.join("blob.uqs")).unwrap();
    assert_eq!(stack.sample_count(), 8);
    let variance = pixel_variance(&stack);
    let (mut interior, mut ring) = (Vec::new(), Vec::new());
    for r in 0..n {
        for c in 0..n {
            let edge = r.min(c).min(n - 1 - r).min(n - 1 - c);
            let v = variance.values()[r * n + c];
            if edge < 4 {
                ring.push(v);
            } else if edge >= 16 {
                interior.push(v);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (interior, ring) = (mean(&interior), mean(&ring));
    assert!(interior < 1e-5, "interior variance {interior}");
    assert!(ring > 100.0 * interior, "border {ring} vs interior {interior}");
}

#[test]
fn tta_collect_names_the_missing_augmentation() {
    let dir = tempfile::tempdir().unwrap();
    let image = InputImage::from(&gaussian_blob(16, 16, 7.5, 7.5, 4.0));
    let list = write_image_list(dir.path(), &[("x", image)]);
    let emitted = dir.path().join("emit");
    assert_exit(&uqseg(&["tta", "emit", "--images", &s(&list), "--out", &s(&emitted), "--samples", "4"]), 0);
    let preds = dir.path().join("preds");
    fs::create_dir(&preds).unwrap();
    for k in [0, 1, 3] {
        let name = format!("x_aug{k}.uqs");
        fs::copy(emitted.join(&name), preds.join(&name)).unwrap();
    }
    let args = ["tta", "collect", "--emitted", &s(&emitted), "--predictions", &s(&preds), "--out", &s(&dir.path().join("o"))];
    let result = uqseg(&args);
    assert_exit(&result, 1);
    assert!(stderr(&result).contains("augmentation 2"), "{}", stderr(&result));
}

#[test]
fn render_writes_pixel_maps_and_atlas() {
    let dir = tempfile::tempdir().unwrap();
    let stack = SampleStack::new(vec![
        ProbabilityMap::filled(4, 4, 0.0).unwrap(),
        ProbabilityMap::filled(4, 4, 1.0).unwrap(),
    ])
    .unwrap();
    let path = dir.path().join("s.uqs");
    io::write_stack(&path, &stack).unwrap();
    let out = dir.path().join("r");
    assert_exit(&uqseg(&["render", "--stack", &s(&path), "--out", &s(&out)]), 0);
    let entropy = fs::read(out.join("s_entropy.pgm")).unwrap();
    assert!(entropy.starts_with(b"P5\n4 4\n255\n"));
    assert!(entropy.ends_with(&[255; 16]));
    assert!(out.join("s_variance.pgm").is_file());
    assert!(out.join("s_atlas.pgm").is_file());
    assert_exit(&uqseg(&["render", "--stack", &s(&path), "--out", &s(&out), "--metrics", "atlas@0.5"]), 2);
}
