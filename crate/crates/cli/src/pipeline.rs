//! Full recovery pipeline: spatial restoration and frequency enhancement of the
//! input, Lab fusion of the three images, then tone post-processing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sfp_core::freq::{self, FdpParams};
use sfp_core::fusion::{self, FusionOptions, FusionWeights, ToneParams};
use sfp_core::image::{load_image, save_gray, save_image};
use sfp_core::spatial::{self, SpatialRestoration};
use sfp_core::PlanarImage;

use crate::config::PipelineConfig;
use crate::quality::uciqe;

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub sdp_ms: f64,
    pub fdp_ms: f64,
    pub fusion_ms: f64,
    pub postprocess_ms: f64,
    pub total_ms: f64,
}

pub struct PipelineRun {
    pub output: PlanarImage,
    pub spatial: Option<SpatialRestoration>,
    pub frequency: Option<(PlanarImage, FdpParams)>,
    pub weights: Option<FusionWeights>,
    pub tone: Option<ToneParams>,
    pub timings: StageTimings,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

pub fn run_pipeline(img: &PlanarImage, cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let start = Instant::now();
    let sdp = || -> Result<(Option<SpatialRestoration>, f64)> {
        let t0 = Instant::now();
        let r = match cfg.no_sdp {
            true => None,
            false => {
                Some(spatial::restore(img, &cfg.spatial_params()).context("spatial restoration")?)
            }
        };
        Ok((r, ms(t0)))
    };
    let fdp = || -> Result<(Option<(PlanarImage, FdpParams)>, f64)> {
        let t0 = Instant::now();
        let r = match cfg.no_fdp {
            true => None,
            false => Some(freq::enhance(img, &cfg.freq_params()).context("frequency enhancement")?),
        };
        Ok((r, ms(t0)))
    };
    let (sdp, fdp) = rayon::join(sdp, fdp);
    let ((spatial, sdp_ms), (frequency, fdp_ms)) = (sdp?, fdp?);

    let t0 = Instant::now();
    let j = spatial.as_ref().map_or(img, |s| &s.restored);
    let e = frequency.as_ref().map_or(img, |f| &f.0);
    let fused = fusion::fuse(
        img,
        j,
        e,
        FusionOptions {
            naive: cfg.naive_fusion,
            skip_postprocess: true,
        },
    )?;
    let fusion_ms = ms(t0);

    let t0 = Instant::now();
    let (output, tone) = match cfg.no_pp {
        true => (fused.image, None),
        false => {
            let (out, tone) = fusion::postprocess_with_params(&fused.image);
            (out, Some(tone))
        }
    };
    let postprocess_ms = ms(t0);

    Ok(PipelineRun {
        output,
        spatial,
        frequency,
        weights: fused.weights,
        tone,
        timings: StageTimings {
            sdp_ms,
            fdp_ms,
            fusion_ms,
            postprocess_ms,
            total_ms: ms(start),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stages {
    pub sdp: bool,
    pub fdp: bool,
    pub weighted_fusion: bool,
    pub postprocess: bool,
    pub night: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Lower bound applied before guided filtering and inversion.
    pub t_min: f64,
    pub refined_mean: f64,
    pub direction_degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub alpha: f64,
    pub beta: f64,
    pub phi_before: f64,
    pub phi_after: f64,
    pub beta_at_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub mu: f64,
    pub channels: [ChannelReport; 3],
}

/// Per-image record. Field order is the JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub input: String,
    pub width: usize,
    pub height: usize,
    pub stages: Stages,
    pub airlight: Option<[f64; 3]>,
    pub transmission: Option<TransmissionStats>,
    pub frequency: Option<FrequencyReport>,
    pub fusion_weights: Option<FusionWeights>,
    pub tone: Option<ToneParams>,
    pub uciqe_input: f64,
    pub uciqe_output: f64,
    pub timings_ms: Option<StageTimings>,
}

impl RecoveryReport {
    pub fn new(
        input: &str,
        img: &PlanarImage,
        run: &PipelineRun,
        cfg: &PipelineConfig,
    ) -> Result<Self> {
        let transmission = run.spatial.as_ref().map(|s| TransmissionStats {
            min: s.transmission.map.min(),
            mean: s.transmission.map.mean(),
            max: s.transmission.map.max(),
            t_min: s.transmission.t_min,
            refined_mean: s.refined.mean(),
            direction_degenerate: s.direction_degenerate,
        });
        let frequency = run.frequency.as_ref().map(|(_, p)| FrequencyReport {
            mu: p.mu,
            channels: p.channels.map(|c| ChannelReport {
                alpha: c.alpha,
                beta: c.beta,
                phi_before: c.phi_before,
                phi_after: c.phi_after,
                beta_at_bound: c.beta_at_bound,
            }),
        });
        let report = Self {
            input: input.to_string(),
            width: img.width(),
            height: img.height(),
            stages: Stages {
                sdp: !cfg.no_sdp,
                fdp: !cfg.no_fdp,
                weighted_fusion: !cfg.naive_fusion,
                postprocess: !cfg.no_pp,
                night: cfg.night,
            },
            airlight: run.spatial.as_ref().map(|s| s.airlight.0),
            transmission,
            frequency,
            fusion_weights: run.weights,
            tone: run.tone,
            uciqe_input: uciqe(img, cfg.uciqe_coeffs),
            uciqe_output: uciqe(&run.output, cfg.uciqe_coeffs),
            timings_ms: cfg.timings.then_some(run.timings),
        };
        report.check_finite()?;
        Ok(report)
    }

    fn check_finite(&self) -> Result<()> {
        let mut values = vec![self.uciqe_input, self.uciqe_output];
        values.extend(self.airlight.into_iter().flatten());
        if let Some(t) = self.transmission {
            values.extend([t.min, t.mean, t.max, t.t_min, t.refined_mean]);
        }
        if let Some(f) = self.frequency {
            values.push(f.mu);
            values.extend(
                f.channels
                    .iter()
                    .flat_map(|c| [c.alpha, c.beta, c.phi_before, c.phi_after]),
            );
        }
        if let Some(w) = self.fusion_weights {
            values.extend(w.a.into_iter().chain(w.b));
        }
        if let Some(t) = self.tone {
            values.extend([t.gamma, t.white]);
        }
        if let Some(t) = self.timings_ms {
            values.extend([
                t.sdp_ms,
                t.fdp_ms,
                t.fusion_ms,
                t.postprocess_ms,
                t.total_ms,
            ]);
        }
        if values.iter().any(|v| !v.is_finite()) {
            anyhow::bail!("report for {} contains non-finite values", self.input);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Output file names for one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub recovered: PathBuf,
    pub transmission: PathBuf,
    pub spatial: PathBuf,
    pub frequency: PathBuf,
    pub report: PathBuf,
}

impl OutputPaths {
    pub fn new(input: &Path, outdir: &Path) -> Result<Self> {
        let stem = input
            .file_stem()
            .and_then(|s| s.to_str())
            .with_context(|| format!("cannot derive an output name from {}", input.display()))?;
        let at = |suffix: &str| outdir.join(format!("{stem}{suffix}"));
        Ok(Self {
            recovered: at(".sfp.png"),
            transmission: at(".t.png"),
            spatial: at(".sdp.png"),
            frequency: at(".fdp.png"),
            report: at(".json"),
        })
    }
}

/// Recovers one image file and writes the outputs into `outdir`.
///
/// Intermediate images are written only for enabled stages.
pub fn run_single(input: &Path, cfg: &PipelineConfig, outdir: &Path) -> Result<RecoveryReport> {
    let paths = OutputPaths::new(input, outdir)?;
    let img = load_image(input)?;
    let run = run_pipeline(&img, cfg).with_context(|| format!("processing {}", input.display()))?;
    let report = RecoveryReport::new(&input.display().to_string(), &img, &run, cfg)?;

    std::fs::create_dir_all(outdir).with_context(|| format!("creating {}", outdir.display()))?;
    save_image(&run.output, &paths.recovered)?;
    if cfg.emit_intermediate {
        if let Some(s) = &run.spatial {
            save_gray(&s.refined, &paths.transmission)?;
            save_image(&s.restored, &paths.spatial)?;
        }
        if let Some((e, _)) = &run.frequency {
            save_image(e, &paths.frequency)?;
        }
    }
    std::fs::write(&paths.report, report.to_json()?)
        .with_context(|| format!("writing {}", paths.report.display()))?;
    Ok(report)
}
