//! Pipeline configuration: JSON file, command-line overrides, range checks.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sfp_core::freq::{FreqParams, RhoNorm, DEFAULT_PHI_TARGET, DEFAULT_RHO_THRESHOLD};
use sfp_core::spatial::{GradientOperator, SpatialParams};

use crate::quality::UCIQE_COEFFS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PipelineConfig {
    /// Spectral-direction patch radius, 1..=32.
    pub patch_radius: usize,
    /// Guided-filter radius, 1..=128.
    pub gf_radius: usize,
    /// Guided-filter regularizer, (0, 1].
    pub gf_eps: f64,
    pub gradient: GradientOperator,
    pub rho_norm: RhoNorm,
    /// Radial cutoff of the low-frequency set, (0, 0.5].
    pub rho_threshold: f64,
    /// Target low-frequency share after enhancement, [0, 1].
    pub phi_target: f64,
    /// Search interval for β, `0 < lo < hi <= 10`.
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub no_sdp: bool,
    pub no_fdp: bool,
    pub naive_fusion: bool,
    pub no_pp: bool,
    /// Reserved; processed exactly like daytime input.
    pub night: bool,
    pub emit_intermediate: bool,
    /// Record wall-clock stage times in reports. Off for byte-stable reports.
    pub timings: bool,
    /// Worker threads, 0 = one per core, at most 256.
    pub threads: usize,
    /// UCIQE weights of chroma spread, lightness contrast and saturation.
    pub uciqe_coeffs: [f64; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let spatial = SpatialParams::default();
        let freq = FreqParams::default();
        Self {
            patch_radius: spatial.patch_radius,
            gf_radius: spatial.gf_radius,
            gf_eps: spatial.gf_eps,
            gradient: spatial.gradient,
            rho_norm: freq.rho_norm,
            rho_threshold: DEFAULT_RHO_THRESHOLD,
            phi_target: DEFAULT_PHI_TARGET,
            beta_lo: freq.beta_lo,
            beta_hi: freq.beta_hi,
            no_sdp: false,
            no_fdp: false,
            naive_fusion: false,
            no_pp: false,
            night: false,
            emit_intermediate: false,
            timings: true,
            threads: 0,
            uciqe_coeffs: UCIQE_COEFFS,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("invalid pipeline config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=32).contains(&self.patch_radius) {
            bail!("patch-radius must be in 1..=32, got {}", self.patch_radius);
        }
        if !(1..=128).contains(&self.gf_radius) {
            bail!("gf-radius must be in 1..=128, got {}", self.gf_radius);
        }
        if !(self.gf_eps > 0.0 && self.gf_eps <= 1.0) {
            bail!("gf-eps must be in (0, 1], got {}", self.gf_eps);
        }
        if !(self.rho_threshold > 0.0 && self.rho_threshold <= 0.5) {
            bail!(
                "rho-threshold must be in (0, 0.5], got {}",
                self.rho_threshold
            );
        }
        if !(0.0..=1.0).contains(&self.phi_target) {
            bail!("phi-target must be in [0, 1], got {}", self.phi_target);
        }
        if !(self.beta_lo > 0.0 && self.beta_lo < self.beta_hi && self.beta_hi <= 10.0) {
            bail!(
                "beta bounds must satisfy 0 < lo < hi <= 10, got [{}, {}]",
                self.beta_lo,
                self.beta_hi
            );
        }
        if self.threads > 256 {
            bail!("threads must be at most 256, got {}", self.threads);
        }
        if self.uciqe_coeffs.iter().any(|c| !c.is_finite()) {
            bail!("uciqe-coeffs must be finite");
        }
        Ok(())
    }

    pub fn spatial_params(&self) -> SpatialParams {
        SpatialParams {
            patch_radius: self.patch_radius,
            gf_radius: self.gf_radius,
            gf_eps: self.gf_eps,
            gradient: self.gradient,
        }
    }

    pub fn freq_params(&self) -> FreqParams {
        FreqParams {
            rho_norm: self.rho_norm,
            rho_threshold: self.rho_threshold,
            phi_target: self.phi_target,
            beta_lo: self.beta_lo,
            beta_hi: self.beta_hi,
            ..FreqParams::default()
        }
    }

    pub fn all_stages_disabled(&self) -> bool {
        self.no_sdp && self.no_fdp && self.naive_fusion && self.no_pp
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub patch_radius: Option<usize>,
    pub gf_radius: Option<usize>,
    pub gf_eps: Option<f64>,
    pub gradient: Option<GradientOperator>,
    pub rho_norm: Option<RhoNorm>,
    pub rho_threshold: Option<f64>,
    pub phi_target: Option<f64>,
    pub beta_lo: Option<f64>,
    pub beta_hi: Option<f64>,
    pub no_sdp: bool,
    pub no_fdp: bool,
    pub naive_fusion: bool,
    pub no_pp: bool,
    pub night: bool,
    pub emit_intermediate: bool,
    pub no_timings: bool,
    pub threads: Option<usize>,
    pub uciqe_coeffs: Option<[f64; 3]>,
}

impl Overrides {
    /// Applies the overrides on top of `base`; switches can only be turned on.
    pub fn apply(&self, mut base: PipelineConfig) -> Result<PipelineConfig> {
        macro_rules! set {
            ($($field:ident),*) => {$( if let Some(v) = self.$field { base.$field = v; } )*};
        }
        set!(
            patch_radius,
            gf_radius,
            gf_eps,
            gradient,
            rho_norm,
            rho_threshold,
            phi_target,
            beta_lo,
            beta_hi,
            threads,
            uciqe_coeffs
        );
        base.no_sdp |= self.no_sdp;
        base.no_fdp |= self.no_fdp;
        base.naive_fusion |= self.naive_fusion;
        base.no_pp |= self.no_pp;
        base.night |= self.night;
        base.emit_intermediate |= self.emit_intermediate;
        if self.no_timings {
            base.timings = false;
        }
        base.validate()?;
        Ok(base)
    }

    pub fn resolve(&self, config_file: Option<&Path>) -> Result<PipelineConfig> {
        let base = match config_file {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        self.apply(base)
    }
}
