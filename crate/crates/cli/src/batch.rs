//! Directory-level driver with a bounded worker pool and a CSV summary.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::pipeline::{run_single, ChannelReport, RecoveryReport};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub const SUMMARY_FILE: &str = "summary.csv";

/// Outcome for one input file.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub input: PathBuf,
    pub result: std::result::Result<RecoveryReport, String>,
}

impl BatchItem {
    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in
        std::fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))?
    {
        let path = entry?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn worker_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")
}

/// Processes every image in `indir`, writing per-image outputs and
/// `summary.csv` into `outdir`. Per-file failures are recorded, not fatal.
pub fn run_batch(indir: &Path, cfg: &PipelineConfig, outdir: &Path) -> Result<Vec<BatchItem>> {
    cfg.validate()?;
    let files = list_images(indir)?;
    std::fs::create_dir_all(outdir).with_context(|| format!("creating {}", outdir.display()))?;

    // inputs that differ only in extension would overwrite each other's outputs
    let mut seen: HashMap<String, &Path> = HashMap::new();
    let clashes: Vec<Option<String>> = files
        .iter()
        .map(|f| {
            let stem = f
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            match seen.get(&stem) {
                Some(first) => Some(format!("output name clashes with {}", first.display())),
                None => {
                    seen.insert(stem, f);
                    None
                }
            }
        })
        .collect();

    let pool = worker_pool(cfg.threads)?;
    let items: Vec<BatchItem> = pool.install(|| {
        files
            .par_iter()
            .zip(clashes.par_iter())
            .map(|(input, clash)| {
                let result = match clash {
                    Some(msg) => Err(msg.clone()),
                    None => run_single(input, cfg, outdir).map_err(|e| format!("{e:#}")),
                };
                BatchItem {
                    input: input.clone(),
                    result,
                }
            })
            .collect()
    });

    write_summary(&outdir.join(SUMMARY_FILE), &items)?;
    Ok(items)
}

pub const SUMMARY_HEADER: [&str; 42] = [
    "input",
    "status",
    "width",
    "height",
    "airlight_r",
    "airlight_g",
    "airlight_b",
    "t_min_value",
    "t_mean",
    "t_max",
    "t_floor",
    "t_refined_mean",
    "mu",
    "alpha_r",
    "alpha_g",
    "alpha_b",
    "beta_r",
    "beta_g",
    "beta_b",
    "phi_before_r",
    "phi_before_g",
    "phi_before_b",
    "phi_after_r",
    "phi_after_g",
    "phi_after_b",
    "w_a_input",
    "w_a_spatial",
    "w_a_frequency",
    "w_b_input",
    "w_b_spatial",
    "w_b_frequency",
    "gamma",
    "white",
    "uciqe_input",
    "uciqe_output",
    "sdp_ms",
    "fdp_ms",
    "fusion_ms",
    "postprocess_ms",
    "total_ms",
    "beta_at_bound",
    "errors",
];

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_row(item: &BatchItem) -> Vec<String> {
    let input = item.input.display().to_string();
    let r = match &item.result {
        Ok(r) => r,
        Err(e) => {
            let mut row = vec![String::new(); SUMMARY_HEADER.len()];
            row[0] = input;
            row[1] = "error".into();
            row[SUMMARY_HEADER.len() - 1] = e.clone();
            return row;
        }
    };
    let mut row = vec![
        input,
        "ok".into(),
        r.width.to_string(),
        r.height.to_string(),
    ];
    row.extend((0..3).map(|c| num(r.airlight.map(|a| a[c]))));
    let t = r.transmission;
    row.extend([
        num(t.map(|t| t.min)),
        num(t.map(|t| t.mean)),
        num(t.map(|t| t.max)),
        num(t.map(|t| t.t_min)),
        num(t.map(|t| t.refined_mean)),
    ]);
    let f = r.frequency;
    row.push(num(f.map(|f| f.mu)));
    let fields: [fn(&ChannelReport) -> f64; 4] =
        [|c| c.alpha, |c| c.beta, |c| c.phi_before, |c| c.phi_after];
    for field in fields {
        row.extend((0..3).map(|k| num(f.map(|f| field(&f.channels[k])))));
    }
    let w = r.fusion_weights;
    row.extend((0..3).map(|k| num(w.map(|w| w.a[k]))));
    row.extend((0..3).map(|k| num(w.map(|w| w.b[k]))));
    row.extend([num(r.tone.map(|t| t.gamma)), num(r.tone.map(|t| t.white))]);
    row.extend([r.uciqe_input.to_string(), r.uciqe_output.to_string()]);
    let tm = r.timings_ms;
    row.extend([
        num(tm.map(|t| t.sdp_ms)),
        num(tm.map(|t| t.fdp_ms)),
        num(tm.map(|t| t.fusion_ms)),
        num(tm.map(|t| t.postprocess_ms)),
        num(tm.map(|t| t.total_ms)),
    ]);
    row.push(
        f.map(|f| f.channels.iter().any(|c| c.beta_at_bound).to_string())
            .unwrap_or_default(),
    );
    row.push(String::new());
    row
}

pub fn write_summary(path: &Path, items: &[BatchItem]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(SUMMARY_HEADER)?;
    for item in items {
        w.write_record(summary_row(item))?;
    }
    w.flush()?;
    Ok(())
}
