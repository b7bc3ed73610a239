//! Corpus statistics for the priors, emitted as CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use sfp_core::freq::{fft2, low_freq_percentage_with, RhoNorm};
use sfp_core::image::{load_image, save_gray, save_image};
use sfp_core::oracle::{self, CorpusSpec, DcDifference, DepthProfile, TransmissionComparison};
use sfp_core::spatial::SpatialParams;
use sfp_core::PlanarImage;

use crate::batch::list_images;

pub fn write_csv<T: Serialize>(out: impl Write, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const DC_DIFF_HEADER: [&str; 6] = [
    "pair",
    "channel",
    "dc_clean",
    "mu_degraded",
    "abs_diff",
    "cdf",
];

pub fn dc_diff_rows(spec: &CorpusSpec) -> Vec<DcDifference> {
    let pairs: Vec<(PlanarImage, PlanarImage)> = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let s = spec.scene(i);
            (s.degraded, s.clean)
        })
        .collect();
    oracle::dc_difference_stats(&pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmissionRow {
    pub scene: usize,
    pub mse_sdp: f64,
    pub mse_dcp: f64,
    pub sdp_better: bool,
}

pub const TRANSMISSION_HEADER: [&str; 4] = ["scene", "mse_sdp", "mse_dcp", "sdp_better"];

pub fn transmission_rows(
    spec: &CorpusSpec,
    params: &SpatialParams,
) -> Result<Vec<TransmissionRow>> {
    (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let TransmissionComparison {
                scene,
                mse_sdp,
                mse_dcp,
            } = oracle::compare_transmission(i, &spec.scene(i), params)?;
            Ok(TransmissionRow {
                scene,
                mse_sdp,
                mse_dcp,
                sdp_better: mse_sdp < mse_dcp,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialRow {
    pub image: usize,
    pub name: String,
    pub channel: usize,
    pub phi: f64,
}

pub const RADIAL_HEADER: [&str; 4] = ["image", "name", "channel", "phi"];

/// The bundled clear samples followed by their hazy counterparts.
pub fn bundled_images() -> Vec<(String, PlanarImage)> {
    let clear = (0..oracle::SAMPLE_COUNT)
        .into_par_iter()
        .map(|i| (format!("clear-{i}"), oracle::clear_sample(i)));
    let hazy = (0..oracle::SAMPLE_COUNT)
        .into_par_iter()
        .map(|i| (format!("degraded-{i}"), oracle::degraded_sample(i).degraded));
    clear.chain(hazy).collect()
}

pub fn load_named_images(dir: &Path) -> Result<Vec<(String, PlanarImage)>> {
    list_images(dir)?
        .into_par_iter()
        .map(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, load_image(&p)?))
        })
        .collect()
}

pub fn radial_rows(
    images: &[(String, PlanarImage)],
    thresh: f64,
    norm: RhoNorm,
) -> Result<Vec<RadialRow>> {
    let per_image: Vec<Vec<RadialRow>> = images
        .par_iter()
        .enumerate()
        .map(|(k, (name, img))| {
            (0..3)
                .map(|c| {
                    let phi = low_freq_percentage_with(&fft2(&img.channel(c)), thresh, norm)?;
                    Ok(RadialRow {
                        image: k,
                        name: name.clone(),
                        channel: c,
                        phi,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_image.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthRecord {
    pub clean: String,
    pub degraded: String,
    pub transmission: String,
    pub profile: DepthProfile,
    pub beta_s: f64,
    pub airlight: [f64; 3],
    pub seed: u64,
}

/// Applies synthetic haze to every image in `clean_dir`, writing
/// `<stem>.hazy.png`, the ground-truth `<stem>.tgt.png` and `synth.json`.
pub fn synth_dir(
    clean_dir: &Path,
    profile: DepthProfile,
    beta_s: f64,
    airlight: [f64; 3],
    seed: u64,
    outdir: &Path,
) -> Result<Vec<SynthRecord>> {
    let files = list_images(clean_dir)?;
    std::fs::create_dir_all(outdir).with_context(|| format!("creating {}", outdir.display()))?;
    let records = files
        .par_iter()
        .map(|path| -> Result<SynthRecord> {
            let clean = load_image(path)?;
            let scene = oracle::synthesize_haze(&clean, profile, beta_s, airlight, seed)?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let hazy: PathBuf = outdir.join(format!("{stem}.hazy.png"));
            let tgt: PathBuf = outdir.join(format!("{stem}.tgt.png"));
            save_image(&scene.degraded, &hazy)?;
            save_gray(&scene.t_gt, &tgt)?;
            Ok(SynthRecord {
                clean: path.display().to_string(),
                degraded: hazy.display().to_string(),
                transmission: tgt.display().to_string(),
                profile,
                beta_s,
                airlight,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = outdir.join("synth.json");
    std::fs::write(&manifest, serde_json::to_string_pretty(&records)? + "\n")
        .with_context(|| format!("writing {}", manifest.display()))?;
    Ok(records)
}
