use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scrollmat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scrollmat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {stderr}"))
}

fn write_plate(path: &Path, papyrus: bool, seed: usize) {
    let (w, h) = (64u32, 64u32);
    let mut buf = Vec::with_capacity((w * h * 3) as usize);
    for y in 0..h as usize {
        for x in 0..w as usize {
            let px = if !(6..58).contains(&x) || !(6..58).contains(&y) {
                [8, 8, 10]
            } else if papyrus {
                if (x + seed) % 8 < 4 {
                    [170, 120, 60]
                } else {
                    [140, 95, 45]
                }
            } else {
                let v = ((x * 7 + y * 13 + seed * 5) % 11) as u8;
                [150 + v, 110 + v, 70]
            };
            buf.extend_from_slice(&px);
        }
    }
    let pixels = buf.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    scrollmat::imaging::Raster::new(w as usize, h as usize, pixels)
        .unwrap()
        .save_png(path)
        .unwrap();
}

#[test]
fn full_run_through_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("image_path,set,plate_id,material\n");
    for i in 0..4 {
        write_plate(&dir.path().join(format!("p{i}.png")), i % 2 == 0, i);
        let material = if i % 2 == 0 { "papyrus" } else { "parchment" };
        csv.push_str(&format!("p{i}.png,color,{i},{material}\n"));
    }
    let manifest = dir.path().join("m.csv");
    fs::write(&manifest, csv).unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let common = ["--out", out, "--patch", "32", "--workers", "1"];

    let seg = scrollmat(
        &[
            &[
                "segment",
                "--manifest",
                manifest.to_str().unwrap(),
                "--kmeans-k",
                "3",
                "--kmeans-min-area",
                "200",
            ][..],
            &common[..],
        ]
        .concat(),
    );
    assert!(seg.status.success(), "{}", String::from_utf8_lossy(&seg.stderr));
    assert!(String::from_utf8_lossy(&seg.stdout).contains("segmented 4 fragment(s)"));

    let fill = scrollmat(&[&["fill", "--inpaint-patch", "9"][..], &common[..]].concat());
    assert!(fill.status.success());

    let feat = scrollmat(
        &[
            &[
                "features",
                "--grid-n",
                "7",
                "--samples",
                "5",
                "--rings",
                "6",
                "--bins",
                "19",
            ][..],
            &common[..],
        ]
        .concat(),
    );
    assert!(feat.status.success());
    assert!(String::from_utf8_lossy(&feat.stdout).contains("wrote 500 records"));

    let eval = scrollmat(
        &[
            &["evaluate", "--fv", "grid_mean,grid_sd", "--set", "color", "--seed", "0"][..],
            &common[..],
        ]
        .concat(),
    );
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let text = String::from_utf8_lossy(&eval.stdout);
    assert!(text.contains("Confusion Matrix (%) for the MFV"), "{text}");
    assert!(Path::new(out).join("evaluate/report_color_grid_sd.json").exists());
    assert!(!Path::new(out).join("evaluate/report_color_weighted_bin.json").exists());
}

#[test]
fn missing_manifest_file_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = scrollmat(&[
        "segment",
        "--manifest",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = error_json(&out);
    assert_eq!(err["kind"], "io");
    assert!(err["error"].as_str().unwrap().contains("nope.csv"));
}

#[test]
fn evaluate_without_features_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = scrollmat(&["evaluate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["kind"], "io");
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = scrollmat(&["fill", "--out", dir.path().to_str().unwrap(), "--patch", "4"]);
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["kind"], "invalid_input");
}

#[test]
fn synth_writes_manifest_and_plates() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.json");
    fs::write(
        &corpus,
        r#"{"version":1,"set":"color","margin":16,"fragments":[
            {"plate_id":"A","spec":{"kind":"papyrus_like","size":512,"seed":1,"stripe_period":9.0,"noise_scale":20.0,"hole_fraction":0.0,"text_coverage":0.01}}]}"#,
    )
    .unwrap();
    let out = dir.path().join("s");
    let res = scrollmat(&[
        "synth",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest[0]["plate_id"], "A");
    assert_eq!(manifest[0]["material"], "papyrus");
    assert!(
        out.join("plates/A.png").exists() && out.join("masks/A-text.png").exists() && out.join("truth/A.png").exists()
    );
}
