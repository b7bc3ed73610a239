use std::path::Path;
use std::process::Command;

use sfp_cli::batch::SUMMARY_HEADER;
use sfp_core::image::{load_image, save_image};
use sfp_core::oracle::{self, dead_leaves, DepthProfile};

fn sfp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sfp"))
}

fn write_scene(dir: &Path, name: &str, seed: u64) {
    let clean = dead_leaves(40, 32, seed);
    let scene = oracle::synthesize_haze(&clean, DepthProfile::Radial, 1.0, [0.9; 3], seed).unwrap();
    save_image(&scene.degraded, dir.join(name)).unwrap();
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn recover_writes_outputs_and_report() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(dir.path(), "hazy.png", 1);
    let out = dir.path().join("out");
    let status = sfp()
        .args(["recover", "--emit-intermediate", "-o"])
        .arg(&out)
        .arg(dir.path().join("hazy.png"))
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "hazy.sfp.png",
        "hazy.t.png",
        "hazy.sdp.png",
        "hazy.fdp.png",
        "hazy.json",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("hazy.json")).unwrap()).unwrap();
    let channels = report["frequency"]["channels"].as_array().unwrap();
    assert_eq!(channels.len(), 3);
    for c in channels {
        assert!(c["phi_before"].as_f64().unwrap() > 0.0);
        assert!(c["phi_after"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(report["airlight"].as_array().unwrap().len(), 3);
    assert!(report["timings_ms"]["total_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn all_ablations_pass_input_through() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(dir.path(), "in.png", 2);
    let status = sfp()
        .args([
            "recover",
            "--no-sdp",
            "--no-fdp",
            "--naive-fusion",
            "--no-pp",
            "-o",
        ])
        .arg(dir.path())
        .arg(dir.path().join("in.png"))
        .status()
        .unwrap();
    assert!(status.success());
    let input = load_image(dir.path().join("in.png")).unwrap();
    let output = load_image(dir.path().join("in.sfp.png")).unwrap();
    for c in 0..3 {
        for (a, b) in input.plane(c).iter().zip(output.plane(c)) {
            assert!((a - b).abs() <= 1.0 / 510.0);
        }
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("in.json")).unwrap())
            .unwrap();
    assert!(
        report["airlight"].is_null() && report["frequency"].is_null() && report["tone"].is_null()
    );
}

#[test]
fn reports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(dir.path(), "a.png", 3);
    let mut previous: Option<Vec<u8>> = None;
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        let status = sfp()
            .args(["recover", "--no-timings", "--threads", "2", "-o"])
            .arg(&out)
            .arg(dir.path().join("a.png"))
            .status()
            .unwrap();
        assert!(status.success());
        let bytes = [
            std::fs::read(out.join("a.json")).unwrap(),
            std::fs::read(out.join("a.sfp.png")).unwrap(),
        ]
        .concat();
        if let Some(p) = &previous {
            assert_eq!(p, &bytes);
        }
        previous = Some(bytes);
    }
}

#[test]
fn config_file_is_applied_and_overridden() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(dir.path(), "a.png", 4);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"no-fdp": true, "timings": false}"#).unwrap();
    let status = sfp()
        .args(["recover", "--no-sdp", "--config"])
        .arg(&cfg)
        .arg("-o")
        .arg(dir.path())
        .arg(dir.path().join("a.png"))
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(report["stages"]["fdp"], false);
    assert_eq!(report["stages"]["sdp"], false);
    assert!(report["timings_ms"].is_null());

    std::fs::write(&cfg, r#"{"no_fdp": true}"#).unwrap();
    let output = sfp()
        .args(["recover", "--config"])
        .arg(&cfg)
        .arg(dir.path().join("a.png"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown field"));
}

#[test]
fn missing_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let status = sfp()
        .args(["recover", "-o"])
        .arg(dir.path())
        .arg(dir.path().join("nope.png"))
        .status()
        .unwrap();
    assert!(!status.success());
}

#[test]
fn batch_of_empty_directory_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir(dir.path().join("in")).unwrap();
    assert!(sfp()
        .arg("batch")
        .arg(dir.path().join("in"))
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let (header, rows) = read_csv(&out.join("summary.csv"));
    assert_eq!(header, SUMMARY_HEADER);
    assert!(rows.is_empty());
}

#[test]
fn batch_records_corrupt_files_and_keeps_order() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    std::fs::create_dir(&input).unwrap();
    write_scene(&input, "c.png", 5);
    write_scene(&input, "a.png", 6);
    std::fs::write(input.join("b.png"), b"not an image").unwrap();
    std::fs::write(input.join("readme.txt"), b"ignored").unwrap();
    let out = dir.path().join("out");
    let status = sfp()
        .args(["batch", "--threads", "3", "--no-timings"])
        .arg(&input)
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap();
    assert!(!status.success(), "a corrupt file must fail the run");

    let (header, rows) = read_csv(&out.join("summary.csv"));
    assert_eq!(rows.len(), 3);
    let names: Vec<&str> = rows
        .iter()
        .map(|r| Path::new(&r[0]).file_name().unwrap().to_str().unwrap())
        .collect();
    assert_eq!(names, ["a.png", "b.png", "c.png"]);
    let status_col = header.iter().position(|h| h == "status").unwrap();
    let errors_col = header.iter().position(|h| h == "errors").unwrap();
    assert_eq!(
        [
            &rows[0][status_col],
            &rows[1][status_col],
            &rows[2][status_col]
        ],
        ["ok", "error", "ok"]
    );
    assert!(!rows[1][errors_col].is_empty() && rows[0][errors_col].is_empty());
    assert!(rows.iter().all(|r| r.len() == header.len()));
    assert!(out.join("a.sfp.png").is_file() && out.join("c.json").is_file());
    assert!(!out.join("b.sfp.png").exists());
}

#[test]
fn stats_modes_emit_csv() {
    let dir = tempfile::tempdir().unwrap();
    let dc = dir.path().join("dc.csv");
    assert!(sfp()
        .args(["stats", "dc-diff", "--count", "5", "--size", "24", "-o"])
        .arg(&dc)
        .status()
        .unwrap()
        .success());
    let (header, rows) = read_csv(&dc);
    assert_eq!(
        header,
        [
            "pair",
            "channel",
            "dc_clean",
            "mu_degraded",
            "abs_diff",
            "cdf"
        ]
    );
    assert_eq!(rows.len(), 15);

    let tm = dir.path().join("tm.csv");
    assert!(sfp()
        .args([
            "stats",
            "transmission-mse",
            "--count",
            "3",
            "--size",
            "32",
            "-o"
        ])
        .arg(&tm)
        .status()
        .unwrap()
        .success());
    let (_, rows) = read_csv(&tm);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() >= 0.0));

    let imgs = dir.path().join("imgs");
    std::fs::create_dir(&imgs).unwrap();
    write_scene(&imgs, "x.png", 7);
    let out = sfp()
        .args(["stats", "radial", "--rho-norm", "diagonal", "--input"])
        .arg(&imgs)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("image,name,channel,phi\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn synth_hazes_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    std::fs::create_dir(&clean).unwrap();
    save_image(&dead_leaves(24, 20, 9), clean.join("s.png")).unwrap();
    let out = dir.path().join("synth");
    let status = sfp()
        .arg("synth")
        .arg(&clean)
        .args([
            "--beta-s",
            "1.5",
            "--airlight",
            "0.9,0.9,0.95",
            "--profile",
            "linear-ramp",
            "--seed",
            "4",
            "-o",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let hazy = load_image(out.join("s.hazy.png")).unwrap();
    let t = load_image(out.join("s.tgt.png")).unwrap();
    let src = load_image(clean.join("s.png")).unwrap();
    // bottom row is nearest: t = 1 there, so the clean pixels survive
    for x in 0..24 {
        assert!((t.get(x, 19)[0] - 1.0).abs() < 1e-9);
        for c in 0..3 {
            assert!((hazy.get(x, 19)[c] - src.get(x, 19)[c]).abs() <= 1.0 / 255.0);
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("synth.json")).unwrap()).unwrap();
    assert_eq!(manifest[0]["profile"], "linear-ramp");

    let bad = sfp()
        .arg("synth")
        .arg(&clean)
        .args(["--beta-s=-1", "--airlight", "0.9,0.9,0.9", "-o"])
        .arg(dir.path().join("bad"))
        .status()
        .unwrap();
    assert!(!bad.success());
}
